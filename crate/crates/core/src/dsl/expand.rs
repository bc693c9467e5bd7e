use super::ast::*;
use super::parser::map_children;
use super::{DslError, Scope};

/// Replaces free occurrences of the bound variable `var` with `value`.
pub fn substitute(e: &Expr, var: &str, value: &Expr) -> Expr {
    let span = e.span;
    let node = match &e.node {
        Node::Var(n) if n == var => return Expr::new(value.node.clone(), span),
        Node::Quant(_, binders, _) if binders.iter().any(|b| b.name == var) => e.node.clone(),
        Node::Comprehension {
            template,
            generators,
        } => {
            if generators.iter().any(|g| g.var == var) {
                e.node.clone()
            } else {
                Node::Comprehension {
                    template: Box::new(substitute(template, var, value)),
                    generators: generators.clone(),
                }
            }
        }
        other => map_children(other.clone(), |c| substitute(&c, var, value)),
    };
    Expr::new(node, span)
}

/// Splices every comprehension into its enclosing item list, in generator order.
pub fn expand_comprehensions(e: &Expr, scope: &Scope) -> Result<Expr, DslError> {
    let span = e.span;
    let node = match &e.node {
        Node::And(items) => Node::And(expand_items(items, scope)?),
        Node::Or(items) => Node::Or(expand_items(items, scope)?),
        Node::Sum(items) => Node::Sum(expand_items(items, scope)?),
        Node::Distinct(items) => Node::Distinct(expand_items(items, scope)?),
        Node::Comprehension { .. } => {
            return Err(DslError::SortMismatch {
                span,
                msg: "a list comprehension may only appear inside And, Or, Sum or Distinct".into(),
            })
        }
        other => {
            let mut err = None;
            let node = map_children(other.clone(), |c| match expand_comprehensions(&c, scope) {
                Ok(x) => x,
                Err(e) => {
                    err.get_or_insert(e);
                    c
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            node
        }
    };
    Ok(Expr::new(node, span))
}

fn expand_items(items: &[Expr], scope: &Scope) -> Result<Vec<Expr>, DslError> {
    let mut out = Vec::new();
    for item in items {
        let Node::Comprehension {
            template,
            generators,
        } = &item.node
        else {
            out.push(expand_comprehensions(item, scope)?);
            continue;
        };
        let mut instances = vec![(**template).clone()];
        for g in generators {
            let (_, values) =
                scope
                    .domain_values(&g.domain)
                    .ok_or_else(|| DslError::UnboundedComprehension {
                        binder: g.var.clone(),
                    })?;
            instances = instances
                .iter()
                .flat_map(|t| values.iter().map(move |v| substitute(t, &g.var, v)))
                .collect();
        }
        for inst in instances {
            out.push(expand_comprehensions(&inst, scope)?);
        }
    }
    Ok(out)
}

/// A copy of `program` with every comprehension expanded.
pub fn expand_program(program: &SegmentedProgram, scope: &Scope) -> Result<SegmentedProgram, DslError> {
    let mut p = program.clone();
    for e in p.init.preconditions.iter_mut() {
        *e = expand_comprehensions(e, scope)?;
    }
    for c in p.constraints.iter_mut() {
        for e in c.exprs.iter_mut() {
            *e = expand_comprehensions(e, scope)?;
        }
    }
    for o in p.options.iter_mut() {
        o.check = expand_comprehensions(&o.check, scope)?;
    }
    Ok(p)
}

/// Renames bound variables to `_v0`, `_v1`, ... in binding order.
pub fn alpha_normalize(e: &Expr) -> Expr {
    fn go(e: &Expr, env: &mut Vec<(String, String)>, next: &mut usize) -> Expr {
        let span = e.span;
        let mut fresh = |name: &str, env: &mut Vec<(String, String)>| {
            let n = format!("_v{next}");
            *next += 1;
            env.push((name.to_string(), n.clone()));
            n
        };
        let node = match &e.node {
            Node::Var(n) => Node::Var(
                env.iter()
                    .rev()
                    .find(|(from, _)| from == n)
                    .map(|(_, to)| to.clone())
                    .unwrap_or_else(|| n.clone()),
            ),
            Node::Quant(q, binders, body) => {
                let renamed: Vec<Binder> = binders
                    .iter()
                    .map(|b| Binder {
                        name: fresh(&b.name, env),
                        ty: b.ty.clone(),
                    })
                    .collect();
                let body = go(body, env, next);
                env.truncate(env.len() - binders.len());
                Node::Quant(*q, renamed, Box::new(body))
            }
            Node::Comprehension {
                template,
                generators,
            } => {
                let renamed: Vec<Generator> = generators
                    .iter()
                    .map(|g| Generator {
                        var: fresh(&g.var, env),
                        domain: g.domain.clone(),
                    })
                    .collect();
                let template = go(template, env, next);
                env.truncate(env.len() - generators.len());
                Node::Comprehension {
                    template: Box::new(template),
                    generators: renamed,
                }
            }
            other => map_children(other.clone(), |c| go(&c, env, next)),
        };
        Expr::new(node, span)
    }
    go(e, &mut Vec::new(), &mut 0)
}
