//! Segment splitting and whole-program parsing.

use std::collections::BTreeSet;

use super::ast::*;
use super::elab::elaborate;
use super::parser::{parse_expr_unresolved, Parser, RawElems, Stmt};
use super::{DslError, Scope, SegmentKind};
use crate::task::{normalize_label, OptionLabel};

/// One marker-delimited region of program text.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSegment {
    pub kind: SegmentKind,
    pub line: u32,
    pub nl: String,
    pub label: Option<OptionLabel>,
    pub check_type: Option<CheckType>,
    /// Text after the marker line; comment lines are blanked to keep line numbers.
    pub body: String,
}

impl RawSegment {
    fn body_line(&self) -> u32 {
        self.line + 1
    }
}

fn syntax(line: u32, msg: impl Into<String>) -> DslError {
    DslError::Syntax {
        span: Span::new(line, 1),
        msg: msg.into(),
    }
}

fn keyword_rest<'a>(upper: &str, text: &'a str, kw: &str) -> Option<&'a str> {
    if !upper.starts_with(kw) {
        return None;
    }
    let rest = &text[kw.len()..];
    let rest = rest.strip_prefix(['S', 's']).unwrap_or(rest);
    match rest.chars().next() {
        Some(c) if c.is_ascii_alphanumeric() || c == '_' => None,
        _ => Some(rest),
    }
}

fn after_colon(rest: &str) -> String {
    match rest.find(':') {
        Some(i) => rest[i + 1..].trim().to_string(),
        None => String::new(),
    }
}

fn lenient_check_type(text: &str) -> CheckType {
    let t = text.to_ascii_lowercase();
    if t.contains("valid") {
        CheckType::Valid
    } else if t.contains("unsat") {
        CheckType::Unsat
    } else {
        CheckType::Sat
    }
}

fn option_header(rest: &str, line: u32) -> Result<(OptionLabel, Option<CheckType>, String), DslError> {
    let (head, nl) = match rest.find(':') {
        Some(i) => (&rest[..i], rest[i + 1..].trim().to_string()),
        None => (rest, String::new()),
    };
    let mut words = head
        .split(|c: char| c.is_whitespace() || c == '[' || c == ']')
        .filter(|w| !w.is_empty());
    let label_text = words
        .next()
        .ok_or_else(|| syntax(line, "option marker needs a label"))?;
    let label =
        normalize_label(label_text).map_err(|_| syntax(line, format!("bad option label `{label_text}`")))?;
    let check_type = match words.next() {
        None => None,
        Some(w) => Some(
            CheckType::parse(w).ok_or_else(|| syntax(line, format!("unknown check type `{w}`")))?,
        ),
    };
    if let Some(extra) = words.next() {
        return Err(syntax(line, format!("unexpected `{extra}` in option marker")));
    }
    Ok((label, check_type, nl))
}

/// Splits program text at segment markers. Text before the first marker is init.
pub fn split_segments(src: &str) -> Result<Vec<RawSegment>, DslError> {
    let mut segs: Vec<RawSegment> = Vec::new();
    let mut default_check: Option<CheckType> = None;
    let mut pending_body: Vec<String> = Vec::new();
    let flush = |segs: &mut Vec<RawSegment>, body: &mut Vec<String>| {
        if let Some(last) = segs.last_mut() {
            last.body = body.join("\n");
        } else if body.iter().any(|l| !l.trim().is_empty()) {
            segs.push(RawSegment {
                kind: SegmentKind::Init,
                line: 0,
                nl: String::new(),
                label: None,
                check_type: None,
                body: body.join("\n"),
            });
        }
        body.clear();
    };
    for (i, raw) in src.lines().enumerate() {
        let line = i as u32 + 1;
        let t = raw.trim_start();
        let Some(marker) = t.strip_prefix('#') else {
            pending_body.push(raw.to_string());
            continue;
        };
        let rest = marker.trim();
        let upper = rest.to_ascii_uppercase();
        let seg = if let Some(r) = keyword_rest(&upper, rest, "INIT") {
            Some((SegmentKind::Init, after_colon(r), None, None))
        } else if let Some(r) = keyword_rest(&upper, rest, "CONSTRAINT") {
            Some((SegmentKind::Constraint, after_colon(r), None, None))
        } else if let Some(r) = keyword_rest(&upper, rest, "OPTION") {
            let (label, ct, nl) = option_header(r, line)?;
            Some((SegmentKind::Option, nl, Some(label), ct))
        } else {
            if upper.starts_with("CHECK TYPE") {
                default_check = Some(lenient_check_type(&rest["CHECK TYPE".len()..]));
            }
            None
        };
        match seg {
            None => pending_body.push(String::new()),
            Some((kind, nl, label, check_type)) => {
                flush(&mut segs, &mut pending_body);
                let prev = segs.last().map(|s| s.kind);
                let ok = match kind {
                    SegmentKind::Init => prev.is_none(),
                    SegmentKind::Constraint => prev != Some(SegmentKind::Option),
                    SegmentKind::Option => true,
                };
                if !ok {
                    return Err(syntax(line, format!("{kind} segment out of order")));
                }
                if prev.is_none() && kind != SegmentKind::Init {
                    segs.push(RawSegment {
                        kind: SegmentKind::Init,
                        line: 0,
                        nl: String::new(),
                        label: None,
                        check_type: None,
                        body: String::new(),
                    });
                }
                segs.push(RawSegment {
                    kind,
                    line,
                    nl,
                    label,
                    check_type,
                    body: String::new(),
                });
            }
        }
    }
    flush(&mut segs, &mut pending_body);
    let default_check = default_check.unwrap_or(CheckType::Sat);
    for s in segs.iter_mut() {
        if s.kind == SegmentKind::Option && s.check_type.is_none() {
            s.check_type = Some(default_check.clone());
        }
    }
    Ok(segs)
}

fn statements(body: &str, first_line: u32) -> Result<Vec<Stmt>, DslError> {
    Parser::new(body, first_line)?.statements()
}

fn lower_sort(stmt: &Stmt) -> Result<Option<SortDecl>, DslError> {
    Ok(Some(match stmt {
        Stmt::Enum {
            name,
            members,
            span,
        } => {
            if members.is_empty() {
                return Err(DslError::Syntax {
                    span: *span,
                    msg: format!("enum `{name}` has no members"),
                });
            }
            let mut seen = BTreeSet::new();
            for m in members {
                if !seen.insert(m) {
                    return Err(DslError::DuplicateName(m.clone()));
                }
            }
            SortDecl {
                name: name.clone(),
                kind: SortKind::Enum(members.clone()),
            }
        }
        Stmt::IntSort { name, .. } => SortDecl {
            name: name.clone(),
            kind: SortKind::Integer,
        },
        Stmt::Sort { name, .. } => SortDecl {
            name: name.clone(),
            kind: SortKind::Uninterpreted,
        },
        _ => return Ok(None),
    }))
}

/// Lowers constant and function declarations; collections are handled separately.
fn lower_signature(stmt: &Stmt, scope: &Scope) -> Result<Vec<Decl>, DslError> {
    match stmt {
        Stmt::Const { names, sort, span } => {
            let ty = scope.resolve_ty(sort, *span)?;
            Ok(names
                .iter()
                .map(|n| Decl {
                    name: n.clone(),
                    kind: DeclKind::Constant(ty.clone()),
                })
                .collect())
        }
        Stmt::Fn {
            name,
            args,
            result,
            span,
        } => {
            let args = args
                .iter()
                .map(|a| scope.resolve_ty(a, *span))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(vec![Decl {
                name: name.clone(),
                kind: DeclKind::Function {
                    args,
                    result: scope.resolve_ty(result, *span)?,
                },
            }])
        }
        _ => Ok(vec![]),
    }
}

fn lower_collection(stmt: &Stmt, scope: &Scope) -> Result<Option<Decl>, DslError> {
    let Stmt::List {
        name,
        annot,
        elems,
        span,
    } = stmt
    else {
        return Ok(None);
    };
    let annot = annot
        .as_ref()
        .map(|a| scope.resolve_ty(a, *span))
        .transpose()?;
    let (elem, elems) = match elems {
        RawElems::Range(lo, hi) => {
            if let Some(t) = &annot {
                if *t != Ty::Int {
                    return Err(DslError::SortMismatch {
                        span: *span,
                        msg: format!("range list `{name}` must have sort int"),
                    });
                }
            }
            (Ty::Int, CollectionElems::Range(*lo, *hi))
        }
        RawElems::Items(items) => {
            let mut elem = annot;
            for (item, item_span) in items {
                let ty = scope.value_ty(item).ok_or_else(|| DslError::UnknownSymbol {
                    name: item.clone(),
                    span: *item_span,
                })?;
                match &elem {
                    None => elem = Some(ty),
                    Some(t) if *t == ty => {}
                    Some(t) => {
                        return Err(DslError::SortMismatch {
                            span: *item_span,
                            msg: format!("list `{name}` mixes {t} and {ty}"),
                        })
                    }
                }
            }
            let elem = elem.ok_or_else(|| DslError::SortMismatch {
                span: *span,
                msg: format!("empty list `{name}` needs a sort annotation"),
            })?;
            (
                elem,
                CollectionElems::Items(items.iter().map(|(n, _)| n.clone()).collect()),
            )
        }
    };
    Ok(Some(Decl {
        name: name.clone(),
        kind: DeclKind::Collection { elem, elems },
    }))
}

fn stmt_span(stmt: &Stmt) -> Span {
    match stmt {
        Stmt::Enum { span, .. }
        | Stmt::IntSort { span, .. }
        | Stmt::Sort { span, .. }
        | Stmt::Const { span, .. }
        | Stmt::Fn { span, .. }
        | Stmt::List { span, .. } => *span,
        Stmt::Assert(e) | Stmt::Check(e) => e.span,
    }
}

/// Declarations of one segment, lowered in two passes (signatures, then collections).
fn lower_decls(stmts: &[Stmt], scope: &mut Scope) -> Result<Vec<Decl>, DslError> {
    let mut decls = Vec::new();
    for s in stmts {
        for d in lower_signature(s, scope)? {
            scope.add_decl(&d)?;
            decls.push(d);
        }
    }
    for s in stmts {
        if let Some(d) = lower_collection(s, scope)? {
            scope.add_decl(&d)?;
            decls.push(d);
        }
    }
    Ok(decls)
}

fn asserts(stmts: &[Stmt]) -> Vec<Expr> {
    stmts
        .iter()
        .filter_map(|s| match s {
            Stmt::Assert(e) => Some(super::parser::bind_vars(e.clone())),
            _ => None,
        })
        .collect()
}

/// Parses and elaborates a whole program.
pub fn parse_program(src: &str) -> Result<SegmentedProgram, DslError> {
    let segs = split_segments(src)?;
    if !segs.iter().any(|s| s.kind == SegmentKind::Constraint) {
        return Err(DslError::MissingSegment(SegmentKind::Constraint));
    }
    if !segs.iter().any(|s| s.kind == SegmentKind::Option) {
        return Err(DslError::MissingSegment(SegmentKind::Option));
    }
    let mut labels = BTreeSet::new();
    for s in &segs {
        if let Some(l) = s.label {
            if !labels.insert(l) {
                return Err(DslError::DuplicateOptionLabel(l));
            }
        }
    }

    let init_seg = segs.iter().find(|s| s.kind == SegmentKind::Init);
    let init_stmts = match init_seg {
        Some(s) => statements(&s.body, s.body_line())?,
        None => vec![],
    };
    let (mut init, mut scope) = init_from_statements(&init_stmts)?;
    init.nl_context = init_seg.map(|s| s.nl.clone()).unwrap_or_default();

    let mut pending = Vec::new();
    for s in segs.iter().filter(|s| s.kind == SegmentKind::Constraint) {
        if s.nl.trim().is_empty() {
            return Err(syntax(s.line, "constraint segment needs a description"));
        }
        let stmts = statements(&s.body, s.body_line())?;
        for st in &stmts {
            match st {
                Stmt::Enum { .. } | Stmt::IntSort { .. } | Stmt::Sort { .. } => {
                    return Err(DslError::Syntax {
                        span: stmt_span(st),
                        msg: "sort declarations belong in the init segment".into(),
                    })
                }
                Stmt::Check(_) => {
                    return Err(DslError::Syntax {
                        span: stmt_span(st),
                        msg: "`check` is only allowed in option segments".into(),
                    })
                }
                _ => {}
            }
        }
        let local_decls = lower_decls(&stmts, &mut scope)?;
        pending.push((s.nl.clone(), local_decls, asserts(&stmts)));
    }

    for e in init.preconditions.iter_mut() {
        *e = elaborate(e, &scope)?;
    }
    let mut constraints = Vec::new();
    for (nl_text, local_decls, raw) in pending {
        let exprs = raw
            .iter()
            .map(|e| elaborate(e, &scope))
            .collect::<Result<Vec<_>, _>>()?;
        constraints.push(ConstraintSegment {
            nl_text,
            local_decls,
            exprs,
        });
    }

    let mut options = Vec::new();
    for s in segs.iter().filter(|s| s.kind == SegmentKind::Option) {
        let stmts = statements(&s.body, s.body_line())?;
        let mut checks = Vec::new();
        for st in stmts {
            match st {
                Stmt::Check(e) => checks.push(e),
                other => {
                    return Err(DslError::Syntax {
                        span: stmt_span(&other),
                        msg: "option segments contain a single `check` statement".into(),
                    })
                }
            }
        }
        if checks.len() != 1 {
            return Err(syntax(
                s.line,
                format!("option segment has {} check statements, expected 1", checks.len()),
            ));
        }
        let check = elaborate(&super::parser::bind_vars(checks.remove(0)), &scope)?;
        options.push(OptionSegment {
            label: s.label.expect("option segments carry labels"),
            nl_check: s.nl.clone(),
            check_type: s.check_type.clone().unwrap_or(CheckType::Sat),
            check,
        });
    }

    Ok(SegmentedProgram {
        init,
        constraints,
        options,
    })
}

/// Builds the init segment (with raw preconditions) and its scope.
fn init_from_statements(stmts: &[Stmt]) -> Result<(InitSegment, Scope), DslError> {
    let mut scope = Scope::default();
    let mut init = InitSegment::default();
    for s in stmts {
        if let Stmt::Check(_) = s {
            return Err(DslError::Syntax {
                span: stmt_span(s),
                msg: "`check` is only allowed in option segments".into(),
            });
        }
        if let Some(sort) = lower_sort(s)? {
            scope.add_sort(&sort)?;
            init.sorts.push(sort);
        }
    }
    init.decls = lower_decls(stmts, &mut scope)?;
    init.preconditions = asserts(stmts);
    Ok((init, scope))
}

/// Parses init-only text (an optional `#INIT` marker followed by declarations and assertions).
pub fn parse_init(src: &str) -> Result<(InitSegment, Scope), DslError> {
    let segs = split_segments(src)?;
    if let Some(extra) = segs.iter().find(|s| s.kind != SegmentKind::Init) {
        return Err(syntax(extra.line, format!("unexpected {} segment in init code", extra.kind)));
    }
    let (mut init, scope) = match segs.first() {
        Some(s) => {
            let (mut init, scope) = init_from_statements(&statements(&s.body, s.body_line())?)?;
            init.nl_context = s.nl.clone();
            (init, scope)
        }
        None => init_from_statements(&[])?,
    };
    for e in init.preconditions.iter_mut() {
        *e = elaborate(e, &scope)?;
    }
    Ok((init, scope))
}

/// Parses constraint code: local declarations plus `assert` statements, or a bare
/// boolean expression. Returns the new declarations and elaborated assertions.
pub fn parse_constraint_body(src: &str, scope: &Scope) -> Result<(Vec<Decl>, Vec<Expr>), DslError> {
    let first_word = src
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .find(|w| !w.is_empty())
        .unwrap_or("");
    let is_stmt = matches!(first_word, "const" | "fn" | "list" | "assert");
    if !is_stmt {
        return Ok((vec![], vec![parse_expr(src, scope)?]));
    }
    let stmts = statements(src, 1)?;
    let mut local = scope.clone();
    for st in &stmts {
        if !matches!(st, Stmt::Const { .. } | Stmt::Fn { .. } | Stmt::List { .. } | Stmt::Assert(_)) {
            return Err(DslError::Syntax {
                span: stmt_span(st),
                msg: "constraint code may only declare constants, functions, lists and assertions".into(),
            });
        }
    }
    let decls = lower_decls(&stmts, &mut local)?;
    let exprs = asserts(&stmts)
        .iter()
        .map(|e| elaborate(e, &local))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((decls, exprs))
}

/// Parses one boolean expression against `scope`.
pub fn parse_expr(src: &str, scope: &Scope) -> Result<Expr, DslError> {
    elaborate(&parse_expr_unresolved(src)?, scope)
}
