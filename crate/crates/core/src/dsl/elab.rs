//! Name resolution, sort checking and the normalizing rewrites applied at parse time.

use super::ast::*;
use super::{DslError, Scope};

type Env = Vec<(String, Ty)>;

/// Elaborates a bound expression that must be boolean (an assertion or check).
pub fn elaborate(e: &Expr, scope: &Scope) -> Result<Expr, DslError> {
    let mut env = Env::new();
    let (out, ty) = infer(e, scope, &mut env)?;
    coerce(out, &ty, &Ty::Bool)
}

fn mismatch<T>(span: Span, msg: String) -> Result<T, DslError> {
    Err(DslError::SortMismatch { span, msg })
}

fn coerce(e: Expr, from: &Ty, to: &Ty) -> Result<Expr, DslError> {
    if from == to {
        return Ok(e);
    }
    if *from == Ty::Bool && *to == Ty::Int {
        let span = e.span;
        return Ok(Expr::new(
            Node::Ite(Box::new(e), Box::new(Expr::int(1)), Box::new(Expr::int(0))),
            span,
        ));
    }
    mismatch(e.span, format!("expected {to}, found {from}"))
}

fn infer(e: &Expr, scope: &Scope, env: &mut Env) -> Result<(Expr, Ty), DslError> {
    let span = e.span;
    let done = |node: Node, ty: Ty| Ok((Expr::new(node, span), ty));
    match &e.node {
        Node::Bool(b) => done(Node::Bool(*b), Ty::Bool),
        Node::Int(v) => done(Node::Int(*v), Ty::Int),
        Node::Var(name) => match env.iter().rev().find(|(n, _)| n == name) {
            Some((_, ty)) => done(Node::Var(name.clone()), ty.clone()),
            None => Err(DslError::UnknownSymbol {
                name: name.clone(),
                span,
            }),
        },
        Node::Const(name) => {
            if let Some(ty) = scope.value_ty(name) {
                return done(Node::Const(name.clone()), ty);
            }
            if let Some((args, result)) = scope.fns.get(name) {
                if args.is_empty() {
                    return done(Node::Apply(name.clone(), vec![]), result.clone());
                }
                return Err(DslError::ArityMismatch {
                    name: name.clone(),
                    expected: args.len(),
                    found: 0,
                    span,
                });
            }
            if scope.lists.contains_key(name) || scope.sorts.contains_key(name) {
                return mismatch(span, format!("`{name}` is not a value"));
            }
            Err(DslError::UnknownSymbol {
                name: name.clone(),
                span,
            })
        }
        Node::Apply(f, args) => {
            let Some((params, result)) = scope.fns.get(f) else {
                return Err(DslError::UnknownSymbol {
                    name: f.clone(),
                    span,
                });
            };
            if params.len() != args.len() {
                return Err(DslError::ArityMismatch {
                    name: f.clone(),
                    expected: params.len(),
                    found: args.len(),
                    span,
                });
            }
            let mut out = Vec::with_capacity(args.len());
            for (a, p) in args.iter().zip(params) {
                let (a2, t) = infer(a, scope, env)?;
                out.push(coerce(a2, &t, p)?);
            }
            done(Node::Apply(f.clone(), out), result.clone())
        }
        Node::Cmp(op, a, b) => {
            let (a2, ta) = infer(a, scope, env)?;
            let (b2, tb) = infer(b, scope, env)?;
            match op {
                CmpOp::Eq | CmpOp::Neq => {
                    if ta == Ty::Bool && tb == Ty::Bool {
                        if let Some(n) = normalize_bool_eq(*op, &a2, &b2) {
                            return Ok((Expr::new(n.node, span), Ty::Bool));
                        }
                    }
                    let (a3, b3) = if ta == tb {
                        (a2, b2)
                    } else if matches!((&ta, &tb), (Ty::Bool, Ty::Int) | (Ty::Int, Ty::Bool)) {
                        (coerce(a2, &ta, &Ty::Int)?, coerce(b2, &tb, &Ty::Int)?)
                    } else {
                        return mismatch(span, format!("cannot compare {ta} with {tb}"));
                    };
                    done(Node::Cmp(*op, Box::new(a3), Box::new(b3)), Ty::Bool)
                }
                _ => {
                    let a3 = coerce(a2, &ta, &Ty::Int)?;
                    let b3 = coerce(b2, &tb, &Ty::Int)?;
                    done(Node::Cmp(*op, Box::new(a3), Box::new(b3)), Ty::Bool)
                }
            }
        }
        Node::Add(a, b) | Node::Sub(a, b) => {
            let a2 = expect(a, &Ty::Int, scope, env)?;
            let b2 = expect(b, &Ty::Int, scope, env)?;
            let node = if matches!(e.node, Node::Add(..)) {
                Node::Add(Box::new(a2), Box::new(b2))
            } else {
                Node::Sub(Box::new(a2), Box::new(b2))
            };
            done(node, Ty::Int)
        }
        Node::And(items) => done(Node::And(items_of(items, &Ty::Bool, scope, env)?), Ty::Bool),
        Node::Or(items) => done(Node::Or(items_of(items, &Ty::Bool, scope, env)?), Ty::Bool),
        Node::Sum(items) => done(Node::Sum(items_of(items, &Ty::Int, scope, env)?), Ty::Int),
        Node::Distinct(items) => {
            let want = distinct_ty(items, scope, env)?;
            done(Node::Distinct(items_of(items, &want, scope, env)?), Ty::Bool)
        }
        Node::Not(a) => done(Node::Not(Box::new(expect(a, &Ty::Bool, scope, env)?)), Ty::Bool),
        Node::Implies(a, b) => done(
            Node::Implies(
                Box::new(expect(a, &Ty::Bool, scope, env)?),
                Box::new(expect(b, &Ty::Bool, scope, env)?),
            ),
            Ty::Bool,
        ),
        Node::Xor(a, b) => done(
            Node::Xor(
                Box::new(expect(a, &Ty::Bool, scope, env)?),
                Box::new(expect(b, &Ty::Bool, scope, env)?),
            ),
            Ty::Bool,
        ),
        Node::Ite(c, a, b) => {
            let c2 = expect(c, &Ty::Bool, scope, env)?;
            let (a2, ta) = infer(a, scope, env)?;
            let (b2, tb) = infer(b, scope, env)?;
            let ty = if ta == tb {
                ta.clone()
            } else if matches!((&ta, &tb), (Ty::Bool, Ty::Int) | (Ty::Int, Ty::Bool)) {
                Ty::Int
            } else {
                return mismatch(span, format!("If branches have sorts {ta} and {tb}"));
            };
            let a3 = coerce(a2, &ta, &ty)?;
            let b3 = coerce(b2, &tb, &ty)?;
            done(Node::Ite(Box::new(c2), Box::new(a3), Box::new(b3)), ty)
        }
        Node::Quant(q, binders, body) => {
            let mut resolved = Vec::with_capacity(binders.len());
            for b in binders {
                let ty = match &b.ty {
                    Ty::Sort(name) => scope.resolve_ty(name, span)?,
                    other => other.clone(),
                };
                resolved.push(Binder {
                    name: b.name.clone(),
                    ty,
                });
            }
            let n = resolved.len();
            env.extend(resolved.iter().map(|b| (b.name.clone(), b.ty.clone())));
            let body = expect(body, &Ty::Bool, scope, env);
            env.truncate(env.len() - n);
            done(Node::Quant(*q, resolved, Box::new(body?)), Ty::Bool)
        }
        Node::Comprehension { .. } => mismatch(
            span,
            "a list comprehension may only appear inside And, Or, Sum or Distinct".into(),
        ),
    }
}

fn expect(e: &Expr, want: &Ty, scope: &Scope, env: &mut Env) -> Result<Expr, DslError> {
    let (out, ty) = infer(e, scope, env)?;
    coerce(out, &ty, want)
}

/// `x == True` becomes `x`, `x == False` becomes `Not(x)`, and likewise for `!=`.
fn normalize_bool_eq(op: CmpOp, a: &Expr, b: &Expr) -> Option<Expr> {
    let (lit, term) = match (&a.node, &b.node) {
        (_, Node::Bool(v)) => (*v, a),
        (Node::Bool(v), _) => (*v, b),
        _ => return None,
    };
    let positive = lit == (op == CmpOp::Eq);
    Some(if positive {
        term.clone()
    } else {
        Expr::new(Node::Not(Box::new(term.clone())), term.span)
    })
}

fn with_generators<T>(
    generators: &[Generator],
    scope: &Scope,
    env: &mut Env,
    f: impl FnOnce(&mut Env) -> Result<T, DslError>,
) -> Result<T, DslError> {
    for g in generators {
        let ty = match scope.domain_values(&g.domain) {
            Some((ty, _)) => ty,
            None => {
                let Domain::Named(name) = &g.domain else { unreachable!() };
                if !scope.is_declared(name) {
                    return Err(DslError::UnknownSymbol {
                        name: name.clone(),
                        span: Span::default(),
                    });
                }
                return Err(DslError::UnboundedComprehension {
                    binder: g.var.clone(),
                });
            }
        };
        env.push((g.var.clone(), ty));
    }
    let out = f(env);
    env.truncate(env.len() - generators.len());
    out
}

fn items_of(items: &[Expr], want: &Ty, scope: &Scope, env: &mut Env) -> Result<Vec<Expr>, DslError> {
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        if let Node::Comprehension {
            template,
            generators,
        } = &item.node
        {
            let template = with_generators(generators, scope, env, |env| {
                expect(template, want, scope, env)
            })?;
            out.push(Expr::new(
                Node::Comprehension {
                    template: Box::new(template),
                    generators: generators.clone(),
                },
                item.span,
            ));
        } else {
            out.push(expect(item, want, scope, env)?);
        }
    }
    Ok(out)
}

/// The common sort of `Distinct` items; mixed bool/int widens to int.
fn distinct_ty(items: &[Expr], scope: &Scope, env: &mut Env) -> Result<Ty, DslError> {
    let mut tys = Vec::new();
    for item in items {
        let ty = if let Node::Comprehension {
            template,
            generators,
        } = &item.node
        {
            with_generators(generators, scope, env, |env| Ok(infer(template, scope, env)?.1))?
        } else {
            infer(item, scope, env)?.1
        };
        tys.push((ty, item.span));
    }
    let Some((first, _)) = tys.first().cloned() else {
        return Ok(Ty::Int);
    };
    let mut common = first;
    for (t, span) in tys {
        if t == common {
            continue;
        }
        if matches!((&t, &common), (Ty::Bool, Ty::Int) | (Ty::Int, Ty::Bool)) {
            common = Ty::Int;
        } else {
            return mismatch(span, format!("Distinct mixes {common} and {t}"));
        }
    }
    Ok(common)
}
