//! Brute-force model enumeration over finite-domain programs.
//!
//! This evaluator defines what a program means; the SMT compilation is tested against it.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::dsl::{CmpOp, Domain, Expr, Node, Quantifier, Scope, SortKind, Ty};
use crate::smt::SatStatus;

pub const DEFAULT_CAP: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("program is outside the finite fragment: {0}")]
    Unsupported(String),
    #[error("{states} states exceed the enumeration cap of {cap}")]
    CapExceeded { states: u128, cap: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    Bool(bool),
    Int(i64),
    /// Index of an enum member within its sort.
    Elem(u32),
}

impl Value {
    fn as_bool(self) -> bool {
        matches!(self, Value::Bool(true))
    }

    fn as_int(self) -> i64 {
        match self {
            Value::Int(v) => v,
            Value::Bool(b) => b as i64,
            Value::Elem(i) => i as i64,
        }
    }

    /// Position of this value within a finite domain.
    fn index(self) -> u64 {
        match self {
            Value::Bool(b) => b as u64,
            Value::Elem(i) => i as u64,
            Value::Int(v) => v as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dom {
    Bool,
    Enum(u32),
}

impl Dom {
    fn size(self) -> u32 {
        match self {
            Dom::Bool => 2,
            Dom::Enum(n) => n,
        }
    }

    fn value(self, idx: u32) -> Value {
        match self {
            Dom::Bool => Value::Bool(idx == 1),
            Dom::Enum(_) => Value::Elem(idx),
        }
    }
}

#[derive(Debug, Clone)]
struct Slot {
    offset: usize,
    args: Vec<Dom>,
    result: Dom,
}

/// Every total assignment to the constants and functions of a scope.
#[derive(Debug, Clone)]
pub struct FiniteUniverse {
    slots: BTreeMap<String, Slot>,
    radix: Vec<u32>,
    members: BTreeMap<String, (String, u32)>,
    sort_members: BTreeMap<String, Vec<String>>,
    states: u64,
}

#[derive(Debug, Clone)]
enum C {
    Lit(Value),
    Var(usize),
    Cell {
        offset: usize,
        strides: Vec<u64>,
        args: Vec<C>,
        result: Dom,
    },
    Cmp(CmpOp, Box<C>, Box<C>),
    Add(Box<C>, Box<C>),
    Sub(Box<C>, Box<C>),
    And(Vec<Item>),
    Or(Vec<Item>),
    Sum(Vec<Item>),
    Distinct(Vec<Item>),
    Not(Box<C>),
    Implies(Box<C>, Box<C>),
    Xor(Box<C>, Box<C>),
    Ite(Box<C>, Box<C>, Box<C>),
    Quant {
        forall: bool,
        domains: Vec<Vec<Value>>,
        body: Box<C>,
    },
}

#[derive(Debug, Clone)]
enum Item {
    Plain(C),
    Comp { domains: Vec<Vec<C>>, template: C },
}

/// A compiled assertion, evaluable against states of the universe it came from.
#[derive(Debug, Clone)]
pub struct Compiled(C);

fn unsupported<T>(msg: impl Into<String>) -> Result<T, OracleError> {
    Err(OracleError::Unsupported(msg.into()))
}

impl FiniteUniverse {
    pub fn new(scope: &Scope, cap: u64) -> Result<Self, OracleError> {
        let mut sort_members = BTreeMap::new();
        let mut members = BTreeMap::new();
        for (name, kind) in &scope.sorts {
            if let SortKind::Enum(ms) = kind {
                for (i, m) in ms.iter().enumerate() {
                    members.insert(m.clone(), (name.clone(), i as u32));
                }
                sort_members.insert(name.clone(), ms.clone());
            }
        }
        let dom = |ty: &Ty, what: &str| -> Result<Dom, OracleError> {
            match ty {
                Ty::Bool => Ok(Dom::Bool),
                Ty::Sort(s) => match scope.sorts.get(s) {
                    Some(SortKind::Enum(ms)) => Ok(Dom::Enum(ms.len() as u32)),
                    _ => unsupported(format!("`{what}` ranges over non-enum sort `{s}`")),
                },
                Ty::Int => unsupported(format!("`{what}` is integer-valued")),
            }
        };
        let mut slots = BTreeMap::new();
        let mut radix = Vec::new();
        let mut symbols: Vec<(&String, Vec<&Ty>, &Ty)> = scope
            .consts
            .iter()
            .map(|(n, t)| (n, vec![], t))
            .collect();
        symbols.extend(
            scope
                .fns
                .iter()
                .map(|(n, (args, r))| (n, args.iter().collect(), r)),
        );
        symbols.sort_by(|a, b| a.0.cmp(b.0));
        for (name, args, result) in symbols {
            let args = args
                .into_iter()
                .map(|t| dom(t, name))
                .collect::<Result<Vec<_>, _>>()?;
            let result = dom(result, name)?;
            let cells: u64 = args.iter().map(|d| d.size() as u64).product();
            if cells > cap {
                return Err(OracleError::CapExceeded {
                    states: u128::MAX,
                    cap,
                });
            }
            slots.insert(
                name.clone(),
                Slot {
                    offset: radix.len(),
                    args,
                    result,
                },
            );
            radix.extend(std::iter::repeat_n(result.size(), cells as usize));
        }
        let mut states: u128 = 1;
        for r in &radix {
            states = states.saturating_mul(*r as u128);
            if states > cap as u128 {
                return Err(OracleError::CapExceeded { states, cap });
            }
        }
        Ok(FiniteUniverse {
            slots,
            radix,
            members,
            sort_members,
            states: states as u64,
        })
    }

    pub fn states(&self) -> u64 {
        self.states
    }

    pub fn cells(&self) -> usize {
        self.radix.len()
    }

    pub fn compile(&self, e: &Expr, scope: &Scope) -> Result<Compiled, OracleError> {
        Ok(Compiled(self.comp(e, scope, &mut Vec::new())?))
    }

    fn domain_of(&self, ty: &Ty) -> Result<Vec<Value>, OracleError> {
        match ty {
            Ty::Bool => Ok(vec![Value::Bool(false), Value::Bool(true)]),
            Ty::Sort(s) => match self.sort_members.get(s) {
                Some(ms) => Ok((0..ms.len() as u32).map(Value::Elem).collect()),
                None => unsupported(format!("quantifier over non-enum sort `{s}`")),
            },
            Ty::Int => unsupported("quantifier over integers"),
        }
    }

    fn comp(&self, e: &Expr, scope: &Scope, env: &mut Vec<String>) -> Result<C, OracleError> {
        let bx = |c: C| Box::new(c);
        Ok(match &e.node {
            Node::Bool(b) => C::Lit(Value::Bool(*b)),
            Node::Int(v) => C::Lit(Value::Int(*v)),
            Node::Var(n) => match env.iter().rposition(|x| x == n) {
                Some(i) => C::Var(i),
                None => return unsupported(format!("unbound variable `{n}`")),
            },
            Node::Const(n) => {
                if let Some((_, i)) = self.members.get(n) {
                    C::Lit(Value::Elem(*i))
                } else {
                    self.cell(n, &[], scope, env)?
                }
            }
            Node::Apply(f, args) => self.cell(f, args, scope, env)?,
            Node::Cmp(op, a, b) => C::Cmp(*op, bx(self.comp(a, scope, env)?), bx(self.comp(b, scope, env)?)),
            Node::Add(a, b) => C::Add(bx(self.comp(a, scope, env)?), bx(self.comp(b, scope, env)?)),
            Node::Sub(a, b) => C::Sub(bx(self.comp(a, scope, env)?), bx(self.comp(b, scope, env)?)),
            Node::And(xs) => C::And(self.items(xs, scope, env)?),
            Node::Or(xs) => C::Or(self.items(xs, scope, env)?),
            Node::Sum(xs) => C::Sum(self.items(xs, scope, env)?),
            Node::Distinct(xs) => C::Distinct(self.items(xs, scope, env)?),
            Node::Not(a) => C::Not(bx(self.comp(a, scope, env)?)),
            Node::Implies(a, b) => C::Implies(bx(self.comp(a, scope, env)?), bx(self.comp(b, scope, env)?)),
            Node::Xor(a, b) => C::Xor(bx(self.comp(a, scope, env)?), bx(self.comp(b, scope, env)?)),
            Node::Ite(c, a, b) => C::Ite(
                bx(self.comp(c, scope, env)?),
                bx(self.comp(a, scope, env)?),
                bx(self.comp(b, scope, env)?),
            ),
            Node::Quant(q, binders, body) => {
                let domains = binders
                    .iter()
                    .map(|b| self.domain_of(&b.ty))
                    .collect::<Result<Vec<_>, _>>()?;
                env.extend(binders.iter().map(|b| b.name.clone()));
                let body = self.comp(body, scope, env);
                env.truncate(env.len() - binders.len());
                C::Quant {
                    forall: *q == Quantifier::ForAll,
                    domains,
                    body: bx(body?),
                }
            }
            Node::Comprehension { .. } => return unsupported("comprehension outside an item list"),
        })
    }

    fn cell(&self, name: &str, args: &[Expr], scope: &Scope, env: &mut Vec<String>) -> Result<C, OracleError> {
        let Some(slot) = self.slots.get(name) else {
            return unsupported(format!("unknown symbol `{name}`"));
        };
        if slot.args.len() != args.len() {
            return unsupported(format!("`{name}` applied to {} arguments", args.len()));
        }
        let mut strides = vec![0u64; slot.args.len()];
        let mut stride = 1u64;
        for (i, d) in slot.args.iter().enumerate().rev() {
            strides[i] = stride;
            stride *= d.size() as u64;
        }
        Ok(C::Cell {
            offset: slot.offset,
            strides,
            args: args
                .iter()
                .map(|a| self.comp(a, scope, env))
                .collect::<Result<Vec<_>, _>>()?,
            result: slot.result,
        })
    }

    fn items(&self, xs: &[Expr], scope: &Scope, env: &mut Vec<String>) -> Result<Vec<Item>, OracleError> {
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            if let Node::Comprehension {
                template,
                generators,
            } = &x.node
            {
                let mut domains = Vec::new();
                for g in generators {
                    let Some((_, values)) = scope.domain_values(&g.domain) else {
                        let what = match &g.domain {
                            Domain::Named(n) => n.clone(),
                            Domain::Range(..) => "range".into(),
                        };
                        return unsupported(format!("comprehension over `{what}`"));
                    };
                    // Domain elements never mention the generator variables.
                    domains.push(
                        values
                            .iter()
                            .map(|v| self.comp(v, scope, env))
                            .collect::<Result<Vec<_>, _>>()?,
                    );
                }
                env.extend(generators.iter().map(|g| g.var.clone()));
                let template = self.comp(template, scope, env);
                env.truncate(env.len() - generators.len());
                out.push(Item::Comp {
                    domains,
                    template: template?,
                });
            } else {
                out.push(Item::Plain(self.comp(x, scope, env)?));
            }
        }
        Ok(out)
    }

    /// Evaluates a compiled expression under one state.
    pub fn eval(&self, c: &Compiled, state: &[u32]) -> Value {
        eval(&c.0, state, &mut Vec::new())
    }

    pub fn holds(&self, cs: &[Compiled], state: &[u32]) -> bool {
        let mut env = Vec::new();
        cs.iter().all(|c| eval(&c.0, state, &mut env).as_bool())
    }

    fn state_at(&self, mut idx: u64, out: &mut [u32]) {
        for (d, r) in out.iter_mut().zip(&self.radix) {
            *d = (idx % *r as u64) as u32;
            idx /= *r as u64;
        }
    }

    fn advance(&self, state: &mut [u32]) {
        for (d, r) in state.iter_mut().zip(&self.radix) {
            *d += 1;
            if *d < *r {
                return;
            }
            *d = 0;
        }
    }

    fn chunks(&self) -> Vec<(u64, u64)> {
        let n = self.states;
        let parts = (rayon::current_num_threads() as u64 * 8).clamp(1, n.max(1));
        let size = n.div_ceil(parts).max(1);
        (0..n).step_by(size as usize).map(|lo| (lo, (lo + size).min(n))).collect()
    }

    pub fn count(&self, cs: &[Compiled]) -> u64 {
        self.chunks()
            .into_par_iter()
            .map(|(lo, hi)| {
                let mut state = vec![0u32; self.radix.len()];
                self.state_at(lo, &mut state);
                let mut n = 0;
                for _ in lo..hi {
                    if self.holds(cs, &state) {
                        n += 1;
                    }
                    self.advance(&mut state);
                }
                n
            })
            .sum()
    }

    /// Some satisfying state, if one exists.
    pub fn witness(&self, cs: &[Compiled]) -> Option<Vec<u32>> {
        self.chunks().into_par_iter().find_map_first(|(lo, hi)| {
            let mut state = vec![0u32; self.radix.len()];
            self.state_at(lo, &mut state);
            for _ in lo..hi {
                if self.holds(cs, &state) {
                    return Some(state);
                }
                self.advance(&mut state);
            }
            None
        })
    }

    /// An all-default state, for building assignments by hand with [`Self::set`].
    pub fn empty_state(&self) -> Vec<u32> {
        vec![0; self.radix.len()]
    }

    /// Sets `name(args) = value` in `state`, naming members and `True`/`False` by text.
    pub fn set(&self, state: &mut [u32], name: &str, args: &[&str], value: &str) -> Result<(), OracleError> {
        let slot = self
            .slots
            .get(name)
            .ok_or_else(|| OracleError::Unsupported(format!("unknown symbol `{name}`")))?;
        let idx_of = |v: &str, d: Dom| -> Result<u32, OracleError> {
            match (d, v) {
                (Dom::Bool, "True") => Ok(1),
                (Dom::Bool, "False") => Ok(0),
                (Dom::Enum(_), m) => self
                    .members
                    .get(m)
                    .map(|(_, i)| *i)
                    .ok_or_else(|| OracleError::Unsupported(format!("unknown member `{m}`"))),
                _ => unsupported(format!("bad value `{v}`")),
            }
        };
        if args.len() != slot.args.len() {
            return unsupported(format!("`{name}` takes {} arguments", slot.args.len()));
        }
        let mut cell = 0u64;
        for (a, d) in args.iter().zip(&slot.args) {
            cell = cell * d.size() as u64 + idx_of(a, *d)? as u64;
        }
        state[slot.offset + cell as usize] = idx_of(value, slot.result)?;
        Ok(())
    }
}

fn eval(c: &C, st: &[u32], env: &mut Vec<Value>) -> Value {
    match c {
        C::Lit(v) => *v,
        C::Var(i) => env[*i],
        C::Cell {
            offset,
            strides,
            args,
            result,
        } => {
            let mut idx = *offset as u64;
            for (a, s) in args.iter().zip(strides) {
                idx += eval(a, st, env).index() * s;
            }
            result.value(st[idx as usize])
        }
        C::Cmp(op, a, b) => {
            let (x, y) = (eval(a, st, env), eval(b, st, env));
            Value::Bool(match op {
                CmpOp::Eq => x == y,
                CmpOp::Neq => x != y,
                CmpOp::Lt => x.as_int() < y.as_int(),
                CmpOp::Le => x.as_int() <= y.as_int(),
                CmpOp::Gt => x.as_int() > y.as_int(),
                CmpOp::Ge => x.as_int() >= y.as_int(),
            })
        }
        C::Add(a, b) => Value::Int(eval(a, st, env).as_int() + eval(b, st, env).as_int()),
        C::Sub(a, b) => Value::Int(eval(a, st, env).as_int() - eval(b, st, env).as_int()),
        C::And(items) => {
            let mut all = true;
            for_each_item(items, st, env, &mut |v| {
                all = v.as_bool();
                all
            });
            Value::Bool(all)
        }
        C::Or(items) => {
            let mut any = false;
            for_each_item(items, st, env, &mut |v| {
                any = v.as_bool();
                !any
            });
            Value::Bool(any)
        }
        C::Sum(items) => {
            let mut total = 0i64;
            for_each_item(items, st, env, &mut |v| {
                total += v.as_int();
                true
            });
            Value::Int(total)
        }
        C::Distinct(items) => {
            let mut seen = Vec::new();
            let mut ok = true;
            for_each_item(items, st, env, &mut |v| {
                if seen.contains(&v) {
                    ok = false;
                } else {
                    seen.push(v);
                }
                ok
            });
            Value::Bool(ok)
        }
        C::Not(a) => Value::Bool(!eval(a, st, env).as_bool()),
        C::Implies(a, b) => Value::Bool(!eval(a, st, env).as_bool() || eval(b, st, env).as_bool()),
        C::Xor(a, b) => Value::Bool(eval(a, st, env).as_bool() != eval(b, st, env).as_bool()),
        C::Ite(c, a, b) => {
            if eval(c, st, env).as_bool() {
                eval(a, st, env)
            } else {
                eval(b, st, env)
            }
        }
        C::Quant {
            forall,
            domains,
            body,
        } => {
            let base = env.len();
            let mut result = *forall;
            for_each_tuple(domains, env, &mut |env| {
                let v = eval(body, st, env).as_bool();
                if v != *forall {
                    result = !*forall;
                    false
                } else {
                    true
                }
            });
            env.truncate(base);
            Value::Bool(result)
        }
    }
}

/// Calls `f` on each binding of `domains` pushed onto `env`; `f` returns false to stop.
fn for_each_tuple(domains: &[Vec<Value>], env: &mut Vec<Value>, f: &mut dyn FnMut(&mut Vec<Value>) -> bool) -> bool {
    let Some((first, rest)) = domains.split_first() else {
        return f(env);
    };
    for v in first {
        env.push(*v);
        let go_on = for_each_tuple(rest, env, f);
        env.pop();
        if !go_on {
            return false;
        }
    }
    true
}

fn for_each_item(items: &[Item], st: &[u32], env: &mut Vec<Value>, f: &mut dyn FnMut(Value) -> bool) {
    for item in items {
        match item {
            Item::Plain(c) => {
                let v = eval(c, st, env);
                if !f(v) {
                    return;
                }
            }
            Item::Comp { domains, template } => {
                let values: Vec<Vec<Value>> = domains
                    .iter()
                    .map(|d| d.iter().map(|c| eval(c, st, env)).collect())
                    .collect();
                let go_on = for_each_tuple(&values, env, &mut |env| f(eval(template, st, env)));
                if !go_on {
                    return;
                }
            }
        }
    }
}

fn prepare(scope: &Scope, exprs: &[Expr], cap: u64) -> Result<(FiniteUniverse, Vec<Compiled>), OracleError> {
    let u = FiniteUniverse::new(scope, cap)?;
    let cs = exprs
        .iter()
        .map(|e| u.compile(e, scope))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((u, cs))
}

/// True iff every symbol is enum- or bool-valued over enum/bool arguments and the
/// state space is within the default cap.
pub fn supports_program(scope: &Scope, exprs: &[Expr]) -> bool {
    prepare(scope, exprs, DEFAULT_CAP).is_ok()
}

/// SAT iff some total assignment satisfies every expression.
pub fn oracle_check(scope: &Scope, exprs: &[Expr]) -> Result<SatStatus, OracleError> {
    let (u, cs) = prepare(scope, exprs, DEFAULT_CAP)?;
    Ok(if u.witness(&cs).is_some() {
        SatStatus::Sat
    } else {
        SatStatus::Unsat
    })
}

/// Exact number of satisfying total assignments.
pub fn count_models(scope: &Scope, exprs: &[Expr]) -> Result<u64, OracleError> {
    let (u, cs) = prepare(scope, exprs, DEFAULT_CAP)?;
    Ok(u.count(&cs))
}

/// Count with an explicit cap.
pub fn count_models_capped(scope: &Scope, exprs: &[Expr], cap: u64) -> Result<u64, OracleError> {
    let (u, cs) = prepare(scope, exprs, cap)?;
    Ok(u.count(&cs))
}
