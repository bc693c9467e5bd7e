use std::collections::BTreeSet;

use super::ast::*;
use super::Scope;

/// Identifiers referenced by `e` that are neither declared in `scope` nor bound.
pub fn free_symbols(e: &Expr, scope: &Scope) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect(e, scope, &mut Vec::new(), &mut out);
    out
}

fn collect(e: &Expr, scope: &Scope, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match &e.node {
        Node::Const(n) | Node::Var(n) => {
            if !bound.contains(n) && !scope.is_declared(n) {
                out.insert(n.clone());
            }
        }
        Node::Apply(f, args) => {
            if !scope.fns.contains_key(f) {
                out.insert(f.clone());
            }
            for a in args {
                collect(a, scope, bound, out);
            }
        }
        Node::Quant(_, binders, body) => {
            for b in binders {
                if let Ty::Sort(s) = &b.ty {
                    if !scope.sorts.contains_key(s) {
                        out.insert(s.clone());
                    }
                }
            }
            bound.extend(binders.iter().map(|b| b.name.clone()));
            collect(body, scope, bound, out);
            bound.truncate(bound.len() - binders.len());
        }
        Node::Comprehension {
            template,
            generators,
        } => {
            for g in generators {
                if let Domain::Named(d) = &g.domain {
                    if !scope.is_declared(d) {
                        out.insert(d.clone());
                    }
                }
            }
            bound.extend(generators.iter().map(|g| g.var.clone()));
            collect(template, scope, bound, out);
            bound.truncate(bound.len() - generators.len());
        }
        _ => {
            for c in e.children() {
                collect(c, scope, bound, out);
            }
        }
    }
}
