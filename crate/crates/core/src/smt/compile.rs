//! Lowering of elaborated expressions to SMT-LIB 2 scripts.
//!
//! User names are prefixed by kind (`S_` sorts, `E_` enum members, `F_` constants
//! and functions) so they can never collide with SMT-LIB reserved words.

use std::collections::BTreeSet;
use std::fmt::Write;

use sha2::{Digest, Sha256};

use crate::dsl::{
    alpha_normalize, expand_comprehensions, print_decl, print_expr, print_sort, substitute, CmpOp, Decl, DeclKind,
    DslError, Expr, Node, Quantifier, Scope, SortDecl, SortKind, Ty,
};

pub const DEFAULT_GROUND_BOUND: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtQuery {
    pub script: String,
    pub logic: String,
    /// Hex sha256 of the canonical form; equal for alpha-equivalent queries.
    pub key: String,
}

/// Comprehension-free form with enum quantifiers ground out up to `bound` instances.
pub fn prepare_expr(e: &Expr, scope: &Scope, bound: u64) -> Result<Expr, DslError> {
    Ok(ground(&expand_comprehensions(e, scope)?, scope, bound))
}

fn binder_values(ty: &Ty, scope: &Scope) -> Option<Vec<Expr>> {
    match ty {
        Ty::Bool => Some(vec![Expr::bool(false), Expr::bool(true)]),
        Ty::Sort(s) => scope
            .enum_members(s)
            .map(|ms| ms.iter().map(|m| Expr::constant(m.clone())).collect()),
        Ty::Int => None,
    }
}

fn ground(e: &Expr, scope: &Scope, bound: u64) -> Expr {
    let span = e.span;
    let node = match &e.node {
        Node::Quant(q, binders, body) => {
            let body = ground(body, scope, bound);
            let domains: Option<Vec<Vec<Expr>>> = binders.iter().map(|b| binder_values(&b.ty, scope)).collect();
            let size = domains
                .as_ref()
                .map(|ds| ds.iter().fold(1u64, |acc, d| acc.saturating_mul(d.len() as u64)));
            match (domains, size) {
                (Some(domains), Some(n)) if n <= bound => {
                    let mut instances = vec![body];
                    for (b, values) in binders.iter().zip(&domains) {
                        instances = instances
                            .iter()
                            .flat_map(|t| values.iter().map(move |v| substitute(t, &b.name, v)))
                            .collect();
                    }
                    match q {
                        Quantifier::ForAll => Node::And(instances),
                        Quantifier::Exists => Node::Or(instances),
                    }
                }
                _ => Node::Quant(*q, binders.clone(), Box::new(body)),
            }
        }
        other => crate::dsl::parser::map_children(other.clone(), |c| ground(&c, scope, bound)),
    };
    Expr::new(node, span)
}

fn referenced(e: &Expr, scope: &Scope, out: &mut BTreeSet<String>) {
    match &e.node {
        Node::Const(n) if scope.consts.contains_key(n) => {
            out.insert(n.clone());
        }
        Node::Apply(f, _) => {
            out.insert(f.clone());
        }
        _ => {}
    }
    for c in e.children() {
        referenced(c, scope, out);
    }
}

fn sort_name(ty: &Ty) -> String {
    match ty {
        Ty::Bool => "Bool".into(),
        Ty::Int => "Int".into(),
        Ty::Sort(s) => format!("S_{s}"),
    }
}

struct Emitter<'a> {
    scope: &'a Scope,
    out: String,
    fresh: usize,
    env: Vec<(String, String)>,
}

impl Emitter<'_> {
    fn list(&mut self, op: &str, items: &[Expr], empty: &str) {
        match items.len() {
            0 => self.out.push_str(empty),
            1 if op != "distinct" => self.term(&items[0]),
            _ => {
                let _ = write!(self.out, "({op}");
                for x in items {
                    self.out.push(' ');
                    self.term(x);
                }
                self.out.push(')');
            }
        }
    }

    fn app(&mut self, op: &str, args: &[&Expr]) {
        let _ = write!(self.out, "({op}");
        for a in args {
            self.out.push(' ');
            self.term(a);
        }
        self.out.push(')');
    }

    fn term(&mut self, e: &Expr) {
        match &e.node {
            Node::Bool(b) => self.out.push_str(if *b { "true" } else { "false" }),
            Node::Int(v) if *v < 0 => {
                let _ = write!(self.out, "(- {})", v.unsigned_abs());
            }
            Node::Int(v) => {
                let _ = write!(self.out, "{v}");
            }
            Node::Var(n) => {
                let name = self
                    .env
                    .iter()
                    .rev()
                    .find(|(from, _)| from == n)
                    .map(|(_, to)| to.clone())
                    .unwrap_or_else(|| format!("F_{n}"));
                self.out.push_str(&name);
            }
            Node::Const(n) => {
                if self.scope.members.contains_key(n) {
                    let _ = write!(self.out, "E_{n}");
                } else {
                    let _ = write!(self.out, "F_{n}");
                }
            }
            Node::Apply(f, args) => {
                if args.is_empty() {
                    let _ = write!(self.out, "F_{f}");
                } else {
                    let refs: Vec<&Expr> = args.iter().collect();
                    self.app(&format!("F_{f}"), &refs);
                }
            }
            Node::Cmp(op, a, b) => match op {
                CmpOp::Neq => {
                    self.out.push_str("(not ");
                    self.app("=", &[a, b]);
                    self.out.push(')');
                }
                _ => {
                    let sym = match op {
                        CmpOp::Eq => "=",
                        CmpOp::Lt => "<",
                        CmpOp::Le => "<=",
                        CmpOp::Gt => ">",
                        CmpOp::Ge => ">=",
                        CmpOp::Neq => unreachable!(),
                    };
                    self.app(sym, &[a, b]);
                }
            },
            Node::Add(a, b) => self.app("+", &[a, b]),
            Node::Sub(a, b) => self.app("-", &[a, b]),
            Node::And(xs) => self.list("and", xs, "true"),
            Node::Or(xs) => self.list("or", xs, "false"),
            Node::Sum(xs) => self.list("+", xs, "0"),
            Node::Distinct(xs) => {
                if xs.len() < 2 {
                    self.out.push_str("true");
                } else {
                    self.list("distinct", xs, "true");
                }
            }
            Node::Not(a) => self.app("not", &[a]),
            Node::Implies(a, b) => self.app("=>", &[a, b]),
            Node::Xor(a, b) => self.app("xor", &[a, b]),
            Node::Ite(c, a, b) => self.app("ite", &[c, a, b]),
            Node::Quant(q, binders, body) => {
                let kw = match q {
                    Quantifier::ForAll => "forall",
                    Quantifier::Exists => "exists",
                };
                let _ = write!(self.out, "({kw} (");
                for (i, b) in binders.iter().enumerate() {
                    let name = format!("v{}", self.fresh);
                    self.fresh += 1;
                    if i > 0 {
                        self.out.push(' ');
                    }
                    let _ = write!(self.out, "({name} {})", sort_name(&b.ty));
                    self.env.push((b.name.clone(), name));
                }
                self.out.push_str(") ");
                self.term(body);
                self.env.truncate(self.env.len() - binders.len());
                self.out.push(')');
            }
            Node::Comprehension { .. } => unreachable!("comprehensions are expanded before emission"),
        }
    }
}

fn signature(scope: &Scope, exprs: &[Expr]) -> (Vec<SortDecl>, Vec<Decl>) {
    let sorts = scope
        .sort_order
        .iter()
        .map(|s| SortDecl {
            name: s.clone(),
            kind: scope.sorts[s].clone(),
        })
        .collect();
    let mut names = BTreeSet::new();
    for e in exprs {
        referenced(e, scope, &mut names);
    }
    let decls = names
        .into_iter()
        .filter_map(|n| {
            if let Some(t) = scope.consts.get(&n) {
                Some(Decl {
                    name: n,
                    kind: DeclKind::Constant(t.clone()),
                })
            } else {
                scope.fns.get(&n).map(|(args, result)| Decl {
                    name: n,
                    kind: DeclKind::Function {
                        args: args.clone(),
                        result: result.clone(),
                    },
                })
            }
        })
        .collect();
    (sorts, decls)
}

/// Digest of the canonical DSL rendering of a query's signature and assertions.
pub fn canonical_key(scope: &Scope, exprs: &[Expr]) -> String {
    let (sorts, decls) = signature(scope, exprs);
    let mut text = String::new();
    for s in &sorts {
        let _ = writeln!(text, "{}", print_sort(s));
    }
    for d in &decls {
        let _ = writeln!(text, "{}", print_decl(d));
    }
    for e in exprs {
        let _ = writeln!(text, "assert {}", print_expr(&alpha_normalize(e)));
    }
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Builds the satisfiability query for the conjunction of `exprs`.
pub fn compile_query(scope: &Scope, exprs: &[Expr], ground_bound: u64) -> Result<SmtQuery, DslError> {
    let prepared = exprs
        .iter()
        .map(|e| prepare_expr(e, scope, ground_bound))
        .collect::<Result<Vec<_>, _>>()?;
    let key = canonical_key(scope, exprs);
    let (sorts, decls) = signature(scope, &prepared);
    let mut out = String::from("(set-logic ALL)\n");
    for s in &sorts {
        match &s.kind {
            SortKind::Enum(members) => {
                let ctors: Vec<String> = members.iter().map(|m| format!("(E_{m})")).collect();
                let _ = writeln!(out, "(declare-datatype S_{} ({}))", s.name, ctors.join(" "));
            }
            SortKind::Uninterpreted => {
                let _ = writeln!(out, "(declare-sort S_{} 0)", s.name);
            }
            SortKind::Integer => {}
        }
    }
    for d in &decls {
        match &d.kind {
            DeclKind::Constant(t) => {
                let _ = writeln!(out, "(declare-fun F_{} () {})", d.name, sort_name(t));
            }
            DeclKind::Function { args, result } => {
                let args: Vec<String> = args.iter().map(sort_name).collect();
                let _ = writeln!(out, "(declare-fun F_{} ({}) {})", d.name, args.join(" "), sort_name(result));
            }
            DeclKind::Collection { .. } => {}
        }
    }
    let mut em = Emitter {
        scope,
        out,
        fresh: 0,
        env: Vec::new(),
    };
    for e in &prepared {
        em.out.push_str("(assert ");
        em.term(e);
        em.out.push_str(")\n");
    }
    em.out.push_str("(check-sat)\n");
    Ok(SmtQuery {
        script: em.out,
        logic: "ALL".into(),
        key,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_expr, parse_init};

    fn scope() -> Scope {
        parse_init("enum s { x, y }\nconst c: s\nfn f(s) -> bool\nint n\nconst k: n").unwrap().1
    }

    #[test]
    fn emits_datatypes_and_only_referenced_symbols() {
        let sc = scope();
        let e = parse_expr("c == x", &sc).unwrap();
        let q = compile_query(&sc, &[e], DEFAULT_GROUND_BOUND).unwrap();
        assert!(q.script.contains("(declare-datatype S_s ((E_x) (E_y)))"));
        assert!(q.script.contains("(declare-fun F_c () S_s)"));
        assert!(!q.script.contains("F_f"));
        assert!(q.script.contains("(assert (= F_c E_x))"));
    }

    #[test]
    fn grounds_small_enum_quantifiers() {
        let sc = scope();
        let e = parse_expr("ForAll v: s. f(v)", &sc).unwrap();
        let q = compile_query(&sc, std::slice::from_ref(&e), DEFAULT_GROUND_BOUND).unwrap();
        assert!(q.script.contains("(assert (and (F_f E_x) (F_f E_y)))"), "{}", q.script);
        let kept = compile_query(&sc, &[e], 1).unwrap();
        assert!(kept.script.contains("(forall ((v0 S_s)) (F_f v0))"), "{}", kept.script);
    }

    #[test]
    fn integer_alias_is_int() {
        let sc = scope();
        let e = parse_expr("k > -2", &sc).unwrap();
        let q = compile_query(&sc, &[e], DEFAULT_GROUND_BOUND).unwrap();
        assert!(q.script.contains("(declare-fun F_k () Int)"));
        assert!(q.script.contains("(> F_k (- 2))"));
    }

    #[test]
    fn key_is_alpha_invariant_and_sensitive_to_asserts() {
        let sc = scope();
        let a = parse_expr("ForAll v: s. f(v)", &sc).unwrap();
        let b = parse_expr("ForAll w: s. f(w)", &sc).unwrap();
        let extra = parse_expr("f(x)", &sc).unwrap();
        assert_eq!(canonical_key(&sc, std::slice::from_ref(&a)), canonical_key(&sc, &[b]));
        assert_ne!(canonical_key(&sc, std::slice::from_ref(&a)), canonical_key(&sc, &[a, extra]));
    }
}
