//! Checking a program against concrete instantiations of its constraints, and
//! the well-formedness conditions a verified program must also meet.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{
    self, expand_comprehensions, free_symbols, parse_expr, Binder, ConstraintSegment, Expr, Node, Quantifier,
    Scope, SegmentedProgram,
};
use crate::smt::{AnswerOutcome, SatStatus, Smt, SmtError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

/// A concrete example for one constraint. `code` is `None` for a NONE example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instantiation {
    pub constraint: usize,
    pub polarity: Polarity,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default, deserialize_with = "none_marker")]
    pub code: Option<String>,
}

fn none_marker<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    let raw: Option<String> = Option::deserialize(d)?;
    Ok(raw.filter(|s| !is_none_text(s)))
}

/// `NONE`, `pass` and blank text all mean "no example".
pub fn is_none_text(s: &str) -> bool {
    let t = s.trim().trim_end_matches('.');
    t.is_empty() || t.eq_ignore_ascii_case("none") || t == "pass"
}

impl Instantiation {
    pub fn new(constraint: usize, polarity: Polarity, code: Option<&str>) -> Self {
        Instantiation {
            constraint,
            polarity,
            description: None,
            code: code.filter(|c| !is_none_text(c)).map(str::to_string),
        }
    }

    pub fn is_none(&self) -> bool {
        self.code.is_none()
    }
}

#[derive(Debug, Error)]
pub enum InstantiationFileError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("malformed instantiations: {0}")]
    Json(String),
}

pub fn load_instantiations(path: &Path) -> Result<Vec<Instantiation>, InstantiationFileError> {
    let text = std::fs::read_to_string(path).map_err(|e| InstantiationFileError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| InstantiationFileError::Json(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyStatus {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailReason {
    PosUnsat,
    NegSat,
    IllFormedExample,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub status: VerifyStatus,
    pub failing: Option<Instantiation>,
    pub reason: Option<FailReason>,
    /// Human-readable explanation of the failure, used in repair prompts.
    pub detail: Option<String>,
}

impl VerificationOutcome {
    pub fn pass() -> Self {
        VerificationOutcome {
            status: VerifyStatus::Pass,
            failing: None,
            reason: None,
            detail: None,
        }
    }

    pub fn fail(inst: Option<Instantiation>, reason: FailReason, detail: impl Into<String>) -> Self {
        VerificationOutcome {
            status: VerifyStatus::Fail,
            failing: inst,
            reason: Some(reason),
            detail: Some(detail.into()),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == VerifyStatus::Pass
    }
}

/// Elaborates example code, rejecting anything that mentions undeclared names.
pub fn example_expr(code: &str, scope: &Scope) -> Result<Expr, String> {
    let raw = dsl::parser::parse_expr_unresolved(code).map_err(|e| e.to_string())?;
    let free = free_symbols(&raw, scope);
    if !free.is_empty() {
        let names: Vec<_> = free.into_iter().collect();
        return Err(format!("undeclared symbols: {}", names.join(", ")));
    }
    parse_expr(code, scope).map_err(|e| e.to_string())
}

/// Checks each example against init plus its own constraint, in (constraint, polarity)
/// order, and reports the first failure.
pub fn verify_instantiations(
    smt: &Smt,
    program: &SegmentedProgram,
    insts: &[Instantiation],
) -> Result<VerificationOutcome, SmtError> {
    let scope = Scope::for_program(program)?;
    let mut ordered: Vec<&Instantiation> = insts.iter().collect();
    ordered.sort_by_key(|i| (i.constraint, i.polarity));
    for inst in ordered {
        let Some(code) = &inst.code else { continue };
        let Some(constraint) = program.constraints.get(inst.constraint) else {
            return Ok(VerificationOutcome::fail(
                Some(inst.clone()),
                FailReason::IllFormedExample,
                format!("there is no constraint {}", inst.constraint + 1),
            ));
        };
        let expr = match example_expr(code, &scope) {
            Ok(e) => e,
            Err(msg) => {
                return Ok(VerificationOutcome::fail(Some(inst.clone()), FailReason::IllFormedExample, msg))
            }
        };
        let mut base = program.init.preconditions.clone();
        base.extend(constraint.exprs.iter().cloned());
        let status = smt.check_sat(&scope, &base, &[expr])?.status;
        let failure = match (inst.polarity, status) {
            (_, SatStatus::Unknown) => Some((FailReason::Timeout, "the solver could not decide the example".to_string())),
            (Polarity::Positive, SatStatus::Unsat) => Some((
                FailReason::PosUnsat,
                "the positive example is rejected by the constraint".to_string(),
            )),
            (Polarity::Negative, SatStatus::Sat) => Some((
                FailReason::NegSat,
                "the negative example is still allowed by the constraint".to_string(),
            )),
            _ => None,
        };
        if let Some((reason, detail)) = failure {
            return Ok(VerificationOutcome::fail(Some(inst.clone()), reason, detail));
        }
    }
    Ok(VerificationOutcome::pass())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DegeneracyFlag {
    Tautology,
    Contradiction,
    VacuousImplication,
    /// A degeneracy query was undecided; raised conservatively.
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WellFormedReport {
    pub structure_ok: bool,
    pub single_answer_ok: bool,
    pub degenerate_constraints: Vec<(usize, DegeneracyFlag)>,
    pub ok: bool,
}

/// `ForAll vs. Implies(a, b)` sites, each with the binders of its enclosing quantifiers.
fn implication_sites(e: &Expr, outer: &mut Vec<Binder>, out: &mut Vec<(Vec<Binder>, Expr)>) {
    if let Node::Quant(q, binders, body) = &e.node {
        if *q == Quantifier::ForAll {
            if let Node::Implies(a, _) = &body.node {
                let mut vs = outer.clone();
                vs.extend(binders.iter().cloned());
                out.push((vs, (**a).clone()));
            }
        }
        let n = binders.len();
        outer.extend(binders.iter().cloned());
        implication_sites(body, outer, out);
        outer.truncate(outer.len() - n);
        return;
    }
    for c in e.children() {
        implication_sites(c, outer, out);
    }
}

/// Degeneracy flags of one constraint relative to `init` (which may be empty).
pub fn degeneracy_check(
    smt: &Smt,
    scope: &Scope,
    init: &[Expr],
    constraint: &ConstraintSegment,
) -> Result<Vec<DegeneracyFlag>, SmtError> {
    let mut flags = Vec::new();
    let raise = |f: DegeneracyFlag, flags: &mut Vec<DegeneracyFlag>| {
        if !flags.contains(&f) {
            flags.push(f);
        }
    };
    let conj = Expr::and(constraint.exprs.clone());
    match smt.check_sat(scope, init, &[Expr::not(conj)])?.status {
        SatStatus::Unsat => raise(DegeneracyFlag::Tautology, &mut flags),
        SatStatus::Unknown => raise(DegeneracyFlag::Timeout, &mut flags),
        SatStatus::Sat => {}
    }
    let base: Vec<Expr> = init.to_vec();
    match smt.check_sat(scope, &base, &constraint.exprs)?.status {
        SatStatus::Unsat => raise(DegeneracyFlag::Contradiction, &mut flags),
        SatStatus::Unknown => raise(DegeneracyFlag::Timeout, &mut flags),
        SatStatus::Sat => {}
    }
    let mut sites = Vec::new();
    for e in &constraint.exprs {
        let expanded = expand_comprehensions(e, scope)?;
        implication_sites(&expanded, &mut Vec::new(), &mut sites);
    }
    for (vs, antecedent) in sites {
        let witness = Expr::exists(vs, antecedent);
        match smt.check_sat(scope, init, &[witness])?.status {
            SatStatus::Unsat => {
                raise(DegeneracyFlag::VacuousImplication, &mut flags);
                break;
            }
            SatStatus::Unknown => raise(DegeneracyFlag::Timeout, &mut flags),
            SatStatus::Sat => {}
        }
    }
    Ok(flags)
}

pub fn structure_ok(program: &SegmentedProgram) -> bool {
    !program.constraints.is_empty()
        && !program.options.is_empty()
        && program.constraints.iter().all(|c| !c.nl_text.trim().is_empty())
        && program.options.iter().all(|o| !o.nl_check.trim().is_empty())
}

pub fn is_well_formed(
    smt: &Smt,
    program: &SegmentedProgram,
    outcome: &AnswerOutcome,
) -> Result<WellFormedReport, SmtError> {
    let scope = Scope::for_program(program)?;
    let structure_ok = structure_ok(program);
    let single_answer_ok = outcome.passing.len() == 1;
    let mut degenerate_constraints = Vec::new();
    for (i, c) in program.constraints.iter().enumerate() {
        for f in degeneracy_check(smt, &scope, &program.init.preconditions, c)? {
            degenerate_constraints.push((i, f));
        }
    }
    let ok = structure_ok && single_answer_ok && degenerate_constraints.is_empty();
    Ok(WellFormedReport {
        structure_ok,
        single_answer_ok,
        degenerate_constraints,
        ok,
    })
}
