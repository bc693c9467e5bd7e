//! SMT-LIB compilation and solver-backed checks.

mod cache;
mod compile;
mod process;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{CheckType, DslError, Expr, Scope, SegmentedProgram};
use crate::task::OptionLabel;
pub use cache::SmtCache;
pub use compile::{canonical_key, compile_query, prepare_expr, SmtQuery, DEFAULT_GROUND_BOUND};
pub use process::ProcessSolver;

pub const DEFAULT_BUDGET_MS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SatStatus {
    Sat,
    Unsat,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmtError {
    #[error("solver failure: {0}")]
    SolverCrash(String),
    #[error("cannot compile query: {0}")]
    Compile(#[from] DslError),
    #[error("solver cache: {0}")]
    Cache(String),
}

/// Anything that can decide an SMT-LIB script within a wall-clock budget.
pub trait SatBackend: Send + Sync {
    fn check(&self, script: &str, budget_ms: u64) -> Result<SatStatus, SmtError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub status: SatStatus,
    pub elapsed_ms: u64,
    pub from_cache: bool,
}

/// The result of checking every option of a program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOutcome {
    pub passing: BTreeSet<OptionLabel>,
    /// Present iff exactly one option passes.
    pub answer: Option<OptionLabel>,
    pub per_option: BTreeMap<OptionLabel, Vec<CheckResult>>,
}

/// Solver front end: compilation, caching and the check predicates.
#[derive(Clone)]
pub struct Smt {
    backend: Arc<dyn SatBackend>,
    cache: Arc<SmtCache>,
    pub budget_ms: u64,
    pub ground_bound: u64,
}

impl Smt {
    pub fn new(backend: Arc<dyn SatBackend>) -> Self {
        Smt {
            backend,
            cache: Arc::new(SmtCache::new()),
            budget_ms: DEFAULT_BUDGET_MS,
            ground_bound: DEFAULT_GROUND_BOUND,
        }
    }

    pub fn with_cache(mut self, cache: Arc<SmtCache>) -> Self {
        self.cache = cache;
        self
    }

    pub fn with_budget_ms(mut self, ms: u64) -> Self {
        self.budget_ms = ms;
        self
    }

    pub fn cache(&self) -> &Arc<SmtCache> {
        &self.cache
    }

    /// Satisfiability of `base ∧ extra`.
    pub fn check_sat(&self, scope: &Scope, base: &[Expr], extra: &[Expr]) -> Result<CheckResult, SmtError> {
        let exprs: Vec<Expr> = base.iter().chain(extra).cloned().collect();
        let query = compile_query(scope, &exprs, self.ground_bound)?;
        let start = Instant::now();
        let (status, from_cache) = self
            .cache
            .get_or_compute(&query.key, || self.backend.check(&query.script, self.budget_ms))?;
        Ok(CheckResult {
            status,
            elapsed_ms: start.elapsed().as_millis() as u64,
            from_cache,
        })
    }

    pub fn is_sat(&self, scope: &Scope, base: &[Expr], prop: &Expr) -> Result<bool, SmtError> {
        Ok(self.check_sat(scope, base, std::slice::from_ref(prop))?.status == SatStatus::Sat)
    }

    pub fn is_unsat(&self, scope: &Scope, base: &[Expr], prop: &Expr) -> Result<bool, SmtError> {
        Ok(self.check_sat(scope, base, std::slice::from_ref(prop))?.status == SatStatus::Unsat)
    }

    /// The base is satisfiable and entails `prop`.
    pub fn is_valid(&self, scope: &Scope, base: &[Expr], prop: &Expr) -> Result<bool, SmtError> {
        Ok(self.check_type(CheckType::Valid, scope, base, prop)?.0)
    }

    /// Applies a check type to `prop`; also returns the individual solver results used.
    pub fn check_type(
        &self,
        check: CheckType,
        scope: &Scope,
        base: &[Expr],
        prop: &Expr,
    ) -> Result<(bool, Vec<CheckResult>), SmtError> {
        match check {
            CheckType::Sat => {
                let r = self.check_sat(scope, base, std::slice::from_ref(prop))?;
                Ok((r.status == SatStatus::Sat, vec![r]))
            }
            CheckType::Unsat => {
                let r = self.check_sat(scope, base, std::slice::from_ref(prop))?;
                Ok((r.status == SatStatus::Unsat, vec![r]))
            }
            CheckType::Valid => {
                let consistent = self.check_sat(scope, base, &[])?;
                if consistent.status != SatStatus::Sat {
                    return Ok((false, vec![consistent]));
                }
                let negated = self.check_sat(scope, base, &[Expr::not(prop.clone())])?;
                Ok((negated.status == SatStatus::Unsat, vec![consistent, negated]))
            }
        }
    }

    /// Checks every option against init plus all constraints.
    pub fn execute_program(&self, program: &SegmentedProgram) -> Result<AnswerOutcome, SmtError> {
        let scope = Scope::for_program(program)?;
        let mut base = program.init.preconditions.clone();
        base.extend(program.constraint_exprs());
        let mut passing = BTreeSet::new();
        let mut per_option = BTreeMap::new();
        for opt in &program.options {
            let (holds, results) = self.check_type(opt.check_type.clone(), &scope, &base, &opt.check)?;
            if holds {
                passing.insert(opt.label);
            }
            per_option.insert(opt.label, results);
        }
        let answer = if passing.len() == 1 {
            passing.iter().next().copied()
        } else {
            None
        };
        Ok(AnswerOutcome {
            passing,
            answer,
            per_option,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Always(SatStatus);

    impl SatBackend for Always {
        fn check(&self, _: &str, _: u64) -> Result<SatStatus, SmtError> {
            Ok(self.0)
        }
    }

    fn program() -> SegmentedProgram {
        crate::dsl::parse_program(
            "enum s { x, y }\nconst c: s\n#CONSTRAINT: c is x\nassert c == x\n#OPTION A valid: c is x\ncheck c == x\n#OPTION B: c is y\ncheck c == y",
        )
        .unwrap()
    }

    #[test]
    fn unknown_never_passes() {
        let smt = Smt::new(Arc::new(Always(SatStatus::Unknown)));
        let out = smt.execute_program(&program()).unwrap();
        assert!(out.passing.is_empty());
        assert_eq!(out.answer, None);
    }

    #[test]
    fn valid_requires_consistent_base() {
        let smt = Smt::new(Arc::new(Always(SatStatus::Unsat)));
        let p = program();
        let scope = Scope::for_program(&p).unwrap();
        assert!(!smt.is_valid(&scope, &[], &Expr::bool(true)).unwrap());
    }
}
