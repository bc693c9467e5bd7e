//! Canonical text form. Printing then parsing yields a structurally equal program.

use std::fmt::Write;

use super::ast::*;
use super::{DslError, SegmentKind};

#[derive(Clone, Copy, PartialEq)]
enum Pos {
    Top,
    CmpOperand,
    AddLhs,
    AddRhs,
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, Pos::Top);
    s
}

pub fn print_binder_ty(ty: &Ty) -> String {
    ty.to_string()
}

fn write_list(out: &mut String, name: &str, items: &[Expr]) {
    out.push_str(name);
    out.push('(');
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, item, Pos::Top);
    }
    out.push(')');
}

fn write_expr(out: &mut String, e: &Expr, pos: Pos) {
    let wrap = match &e.node {
        Node::Quant(..) => pos != Pos::Top,
        Node::Cmp(..) => pos != Pos::Top,
        Node::Add(..) | Node::Sub(..) => pos == Pos::AddRhs,
        _ => false,
    };
    if wrap {
        out.push('(');
    }
    match &e.node {
        Node::Bool(true) => out.push_str("True"),
        Node::Bool(false) => out.push_str("False"),
        Node::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Node::Const(n) | Node::Var(n) => out.push_str(n),
        Node::Apply(f, args) => write_list(out, f, args),
        Node::Cmp(op, a, b) => {
            write_expr(out, a, Pos::CmpOperand);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b, Pos::CmpOperand);
        }
        Node::Add(a, b) | Node::Sub(a, b) => {
            write_expr(out, a, Pos::AddLhs);
            out.push_str(if matches!(e.node, Node::Add(..)) { " + " } else { " - " });
            write_expr(out, b, Pos::AddRhs);
        }
        Node::And(xs) => write_list(out, "And", xs),
        Node::Or(xs) => write_list(out, "Or", xs),
        Node::Distinct(xs) => write_list(out, "Distinct", xs),
        Node::Sum(xs) => write_list(out, "Sum", xs),
        Node::Not(a) => write_list(out, "Not", std::slice::from_ref(a)),
        Node::Implies(a, b) => write_list(out, "Implies", &[(**a).clone(), (**b).clone()]),
        Node::Xor(a, b) => write_list(out, "Xor", &[(**a).clone(), (**b).clone()]),
        Node::Ite(c, a, b) => write_list(out, "If", &[(**c).clone(), (**a).clone(), (**b).clone()]),
        Node::Quant(q, binders, body) => {
            out.push_str(match q {
                Quantifier::ForAll => "ForAll ",
                Quantifier::Exists => "Exists ",
            });
            for (i, b) in binders.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{}: {}", b.name, b.ty);
            }
            out.push_str(". ");
            write_expr(out, body, Pos::Top);
        }
        Node::Comprehension {
            template,
            generators,
        } => {
            out.push('[');
            write_expr(out, template, Pos::Top);
            for g in generators {
                let _ = write!(out, " for {} in ", g.var);
                match &g.domain {
                    Domain::Named(n) => out.push_str(n),
                    Domain::Range(lo, hi) => {
                        let _ = write!(out, "range({lo}, {hi})");
                    }
                }
            }
            out.push(']');
        }
    }
    if wrap {
        out.push(')');
    }
}

pub fn print_sort(s: &SortDecl) -> String {
    match &s.kind {
        SortKind::Enum(members) => format!("enum {} {{ {} }}", s.name, members.join(", ")),
        SortKind::Integer => format!("int {}", s.name),
        SortKind::Uninterpreted => format!("sort {}", s.name),
    }
}

pub fn print_decl(d: &Decl) -> String {
    match &d.kind {
        DeclKind::Constant(ty) => format!("const {}: {}", d.name, ty),
        DeclKind::Function { args, result } => {
            let args: Vec<String> = args.iter().map(Ty::to_string).collect();
            format!("fn {}({}) -> {}", d.name, args.join(", "), result)
        }
        DeclKind::Collection { elem, elems } => match elems {
            CollectionElems::Items(items) if items.is_empty() => {
                format!("list {}: {} = []", d.name, elem)
            }
            CollectionElems::Items(items) => format!("list {} = [{}]", d.name, items.join(", ")),
            CollectionElems::Range(lo, hi) => format!("list {} = range({lo}, {hi})", d.name),
        },
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn marker(out: &mut String, head: &str, nl: &str) {
    let nl = one_line(nl);
    if nl.is_empty() {
        let _ = writeln!(out, "{head}");
    } else {
        let _ = writeln!(out, "{head}: {nl}");
    }
}

pub fn print_init(init: &InitSegment) -> String {
    let mut out = String::new();
    marker(&mut out, "#INIT", &init.nl_context);
    for s in &init.sorts {
        let _ = writeln!(out, "{}", print_sort(s));
    }
    for d in &init.decls {
        let _ = writeln!(out, "{}", print_decl(d));
    }
    for e in &init.preconditions {
        let _ = writeln!(out, "assert {}", print_expr(e));
    }
    out
}

pub fn print_constraint_segment(c: &ConstraintSegment) -> String {
    let mut out = String::new();
    marker(&mut out, "#CONSTRAINT", &c.nl_text);
    for d in &c.local_decls {
        let _ = writeln!(out, "{}", print_decl(d));
    }
    for e in &c.exprs {
        let _ = writeln!(out, "assert {}", print_expr(e));
    }
    out
}

pub fn print_option_segment(o: &OptionSegment) -> String {
    let mut out = String::new();
    marker(
        &mut out,
        &format!("#OPTION {} {}", o.label, o.check_type.keyword()),
        &o.nl_check,
    );
    let _ = writeln!(out, "check {}", print_expr(&o.check));
    out
}

/// Canonical program text. Fails on programs without constraints or options.
pub fn print_program(p: &SegmentedProgram) -> Result<String, DslError> {
    if p.constraints.is_empty() {
        return Err(DslError::MissingSegment(SegmentKind::Constraint));
    }
    if p.options.is_empty() {
        return Err(DslError::MissingSegment(SegmentKind::Option));
    }
    let mut out = print_init(&p.init);
    for c in &p.constraints {
        out.push_str(&print_constraint_segment(c));
    }
    for o in &p.options {
        out.push_str(&print_option_segment(o));
    }
    Ok(out)
}
