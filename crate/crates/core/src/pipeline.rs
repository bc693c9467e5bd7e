//! The generate, verify and repair loop over a range of sampling temperatures.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{parse_program, print_constraint_segment, print_init, print_option_segment, print_program, SegmentedProgram};
use crate::llm::{
    parse_cot_answer, parse_decomposition, parse_instantiations, parse_refined_program, parse_repair_patch,
    strip_fences, Llm, LlmError, LlmRequest, PromptKind, PromptSet, ProviderMode, Slots,
};
use crate::smt::{AnswerOutcome, Smt, DEFAULT_BUDGET_MS, DEFAULT_GROUND_BOUND};
use crate::task::{OptionLabel, ReasoningTask};
use crate::verify::{
    is_well_formed, verify_instantiations, DegeneracyFlag, FailReason, Instantiation, Polarity, VerificationOutcome,
    WellFormedReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairPolicy {
    /// Repair whenever verification or well-formedness fails.
    OnVerificationFailure,
    /// Repair only programs that produced no unique answer.
    OnMissingAnswer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSettings {
    pub mode: ProviderMode,
    pub transcripts: Option<String>,
    pub endpoint: Option<String>,
    pub max_in_flight: usize,
    pub per_minute: usize,
    pub request_timeout_s: u64,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        ProviderSettings {
            mode: ProviderMode::Replay,
            transcripts: None,
            endpoint: None,
            max_in_flight: 4,
            per_minute: 60,
            request_timeout_s: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsvConfig {
    pub temperatures: Vec<f64>,
    pub max_repairs: usize,
    pub max_error_refines: usize,
    pub check_timeout_ms: u64,
    pub grounding_bound: u64,
    pub model: String,
    pub max_tokens: u32,
    pub repair_policy: RepairPolicy,
    /// Fall back to per-constraint generation when direct generation fails.
    pub compositional: bool,
    pub max_compositional_constraints: usize,
    /// Explore temperatures concurrently. The result is the same as the sequential order.
    pub parallel_temperatures: bool,
    pub provider: ProviderSettings,
}

impl Default for SsvConfig {
    fn default() -> Self {
        SsvConfig {
            temperatures: vec![0.0, 0.3, 0.4, 0.5],
            max_repairs: 2,
            max_error_refines: 2,
            check_timeout_ms: DEFAULT_BUDGET_MS,
            grounding_bound: DEFAULT_GROUND_BOUND,
            model: "gpt-4".into(),
            max_tokens: 4096,
            repair_policy: RepairPolicy::OnVerificationFailure,
            compositional: true,
            max_compositional_constraints: 16,
            parallel_temperatures: false,
            provider: ProviderSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("temperature list is empty")]
    NoTemperatures,
    #[error("temperature {0} is outside [0, 1]")]
    BadTemperature(String),
    #[error("check timeout must be positive")]
    ZeroTimeout,
}

impl SsvConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.temperatures.is_empty() {
            return Err(ConfigError::NoTemperatures);
        }
        if let Some(t) = self.temperatures.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(ConfigError::BadTemperature(t.to_string()));
        }
        if self.check_timeout_ms == 0 {
            return Err(ConfigError::ZeroTimeout);
        }
        Ok(())
    }

    /// Requests a single program generation may issue.
    pub fn generation_budget(&self) -> usize {
        let compositional = if self.compositional {
            self.max_compositional_constraints + 3
        } else {
            0
        };
        1 + self.max_error_refines + compositional
    }

    /// Hard cap on requests per task.
    pub fn request_budget(&self) -> usize {
        self.temperatures.len() * (self.generation_budget() + 1 + self.max_repairs * 2) + 1
    }
}

/// One execute-verify round on one program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttemptLog {
    pub temperature: f64,
    /// Repairs applied before this round in the current temperature branch.
    pub repair: usize,
    pub passing: Vec<OptionLabel>,
    pub answer: Option<OptionLabel>,
    pub instantiations: usize,
    pub verification: VerificationOutcome,
    pub well_formed: Option<WellFormedReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SsvTrace {
    pub temperature_used: Option<f64>,
    pub repairs_used: usize,
    pub used_fallback: bool,
    pub llm_calls: usize,
    pub attempts: Vec<AttemptLog>,
    /// Sub-step failures that were absorbed, in order.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SsvResult {
    pub answer: Option<OptionLabel>,
    pub verified: bool,
    /// Some program was produced, so the fallback was not used.
    pub program_produced: bool,
    pub trace: SsvTrace,
}

/// Result of program generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub program: SegmentedProgram,
    pub refines: usize,
    pub compositional: bool,
}

/// A repaired program, possibly with a replacement example for the failing constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Repaired {
    pub program: SegmentedProgram,
    pub example: Option<Instantiation>,
}

/// Counts requests against the per-task budget.
struct Metered<'a> {
    inner: &'a dyn Llm,
    used: AtomicUsize,
    limit: usize,
}

impl Llm for Metered<'_> {
    fn complete(&self, req: &LlmRequest) -> Result<String, LlmError> {
        if self.used.fetch_add(1, Ordering::SeqCst) >= self.limit {
            return Err(LlmError::BudgetExhausted(self.limit));
        }
        self.inner.complete(req)
    }
}

/// Everything a temperature branch produced.
#[derive(Default)]
struct Branch {
    program_parsed: bool,
    first_answer: Option<OptionLabel>,
    verified: Option<OptionLabel>,
    repairs: usize,
    attempts: Vec<AttemptLog>,
    notes: Vec<String>,
}

pub struct Ssv {
    llm: Arc<dyn Llm>,
    smt: Smt,
    prompts: PromptSet,
    pub config: SsvConfig,
}

fn slots<const N: usize>(pairs: [(&'static str, String); N]) -> Slots {
    pairs.into_iter().collect()
}

/// Drops segment marker lines a model may echo around a code fragment.
fn code_only(text: &str) -> String {
    strip_fences(text)
        .lines()
        .filter(|l| {
            let t = l.trim_start();
            !(t.starts_with("#CONSTRAINT") || t.starts_with("#INIT"))
        })
        .collect::<Vec<_>>()
        .join("\n")
        .trim()
        .to_string()
}

/// Segment text without its marker line.
fn body_text(segment: &str) -> String {
    segment.lines().skip(1).collect::<Vec<_>>().join("\n")
}

fn flag_text(f: DegeneracyFlag) -> &'static str {
    match f {
        DegeneracyFlag::Tautology => "The constraint code holds in every scenario, so it constrains nothing.",
        DegeneracyFlag::Contradiction => "The constraint code can never hold together with the initial code.",
        DegeneracyFlag::VacuousImplication => {
            "The constraint code contains an implication whose condition can never be met."
        }
        DegeneracyFlag::Timeout => "The solver could not decide whether the constraint code is degenerate.",
    }
}

impl Ssv {
    pub fn new(llm: Arc<dyn Llm>, mut smt: Smt, prompts: PromptSet, config: SsvConfig) -> Self {
        smt.budget_ms = config.check_timeout_ms;
        smt.ground_bound = config.grounding_bound;
        Ssv {
            llm,
            smt,
            prompts,
            config,
        }
    }

    pub fn smt(&self) -> &Smt {
        &self.smt
    }

    fn ask(&self, llm: &dyn Llm, kind: PromptKind, t: f64, s: &Slots) -> Result<String, LlmError> {
        let prompt = self.prompts.render(kind, s)?;
        llm.complete(&LlmRequest {
            kind,
            prompt,
            model: self.config.model.clone(),
            temperature: t,
            max_tokens: self.config.max_tokens,
        })
    }

    /// Direct generation with error refinement, then the per-constraint route.
    pub fn gen_program(&self, task: &ReasoningTask, t: f64) -> Result<Option<Generated>, LlmError> {
        self.gen_program_with(self.llm.as_ref(), task, t)
    }

    fn gen_program_with(&self, llm: &dyn Llm, task: &ReasoningTask, t: f64) -> Result<Option<Generated>, LlmError> {
        let question = slots([
            ("context", task.context.clone()),
            ("question", task.question.clone()),
            ("options", task.options_block()),
        ]);
        let mut text = strip_fences(&self.ask(llm, PromptKind::DirectProgram, t, &question)?);
        let mut refines = 0;
        loop {
            match parse_program(&text) {
                Ok(program) => {
                    return Ok(Some(Generated {
                        program,
                        refines,
                        compositional: false,
                    }))
                }
                Err(e) if refines < self.config.max_error_refines => {
                    refines += 1;
                    let s = slots([("program", text.clone()), ("error", e.to_string())]);
                    let reply = self.ask(llm, PromptKind::ErrorRefine, t, &s)?;
                    match parse_refined_program(&reply) {
                        Ok(p) => text = p,
                        Err(e) => {
                            log::debug!("refinement reply unusable: {e}");
                            break;
                        }
                    }
                }
                Err(e) => {
                    log::debug!("direct program still invalid after {refines} refinements: {e}");
                    break;
                }
            }
        }
        if !self.config.compositional {
            return Ok(None);
        }
        Ok(self.gen_compositional(llm, task, t)?.map(|program| Generated {
            program,
            refines,
            compositional: true,
        }))
    }

    fn gen_compositional(&self, llm: &dyn Llm, task: &ReasoningTask, t: f64) -> Result<Option<SegmentedProgram>, LlmError> {
        let reply = self.ask(llm, PromptKind::Decompose, t, &slots([("problem", task.context.clone())]))?;
        let parts = match parse_decomposition(&reply) {
            Ok(d) => d,
            Err(e) => {
                log::debug!("decomposition unusable: {e}");
                return Ok(None);
            }
        };
        let context = parts.context.clone().unwrap_or_else(|| "None".into());
        let init_nl = parts.context.as_deref().unwrap_or("").replace('\n', " ");
        let init = self.ask(
            llm,
            PromptKind::IncrementalConstraint,
            t,
            &slots([
                ("program", "(empty)".into()),
                ("segment", "#INIT".into()),
                ("constraint", context),
            ]),
        )?;
        let mut text = format!("#INIT: {init_nl}\n{}\n", code_only(&init));
        for nl in parts.constraints.iter().take(self.config.max_compositional_constraints) {
            let code = self.ask(
                llm,
                PromptKind::IncrementalConstraint,
                t,
                &slots([
                    ("program", text.clone()),
                    ("segment", "#CONSTRAINT".into()),
                    ("constraint", nl.clone()),
                ]),
            )?;
            text.push_str(&format!("#CONSTRAINT: {}\n{}\n", nl.replace('\n', " "), code_only(&code)));
        }
        let options = self.ask(
            llm,
            PromptKind::OptionsCode,
            t,
            &slots([
                ("context", task.context.clone()),
                ("program", text.clone()),
                ("question", task.question.clone()),
                ("options", task.options_block()),
            ]),
        )?;
        text.push_str(&strip_fences(&options));
        match parse_program(&text) {
            Ok(p) => Ok(Some(p)),
            Err(e) => {
                log::debug!("compositional program invalid: {e}");
                Ok(None)
            }
        }
    }

    /// Two instantiations per constraint. A malformed reply gives a format error.
    pub fn gen_instantiations(&self, program: &SegmentedProgram, t: f64) -> Result<Vec<Instantiation>, LlmError> {
        self.gen_instantiations_with(self.llm.as_ref(), program, t)
    }

    fn gen_instantiations_with(
        &self,
        llm: &dyn Llm,
        program: &SegmentedProgram,
        t: f64,
    ) -> Result<Vec<Instantiation>, LlmError> {
        let scenario = if program.init.nl_context.trim().is_empty() {
            "None".to_string()
        } else {
            program.init.nl_context.clone()
        };
        let constraints = program
            .constraints
            .iter()
            .map(|c| c.nl_text.replace('\n', " "))
            .collect::<Vec<_>>()
            .join("\n###\n");
        let s = slots([
            ("scenario", scenario),
            ("init_code", body_text(&print_init(&program.init))),
            ("constraints", constraints),
        ]);
        parse_instantiations(&self.ask(llm, PromptKind::Instantiations, t, &s)?, program)
    }

    /// Asks for a patch to the implicated segments and rebuilds the program from it.
    /// Returns `None` when the patch is unusable, does not parse, or changes nothing.
    pub fn repair_program(
        &self,
        task: &ReasoningTask,
        program: &SegmentedProgram,
        outcome: &VerificationOutcome,
        report: Option<&WellFormedReport>,
        t: f64,
    ) -> Result<Option<Repaired>, LlmError> {
        self.repair_with(self.llm.as_ref(), task, program, outcome, report, t)
    }

    fn repair_with(
        &self,
        llm: &dyn Llm,
        task: &ReasoningTask,
        program: &SegmentedProgram,
        outcome: &VerificationOutcome,
        report: Option<&WellFormedReport>,
        t: f64,
    ) -> Result<Option<Repaired>, LlmError> {
        let failing = outcome.failing.as_ref();
        let target = failing
            .map(|i| i.constraint)
            .or_else(|| report.and_then(|r| r.degenerate_constraints.first().map(|(i, _)| *i)))
            .filter(|i| *i < program.constraints.len());
        let (constraint_nl, constraint_code) = match target {
            Some(i) => {
                let c = &program.constraints[i];
                (c.nl_text.clone(), body_text(&print_constraint_segment(c)))
            }
            None => (
                "All constraints, one segment each.".to_string(),
                program.constraints.iter().map(print_constraint_segment).collect::<String>(),
            ),
        };
        let polarity = failing.map(|i| i.polarity).unwrap_or(Polarity::Positive);
        let example_header = match polarity {
            Polarity::Positive => "PositiveExampleCode",
            Polarity::Negative => "NegativeExampleCode",
        };
        let failure = match (outcome.reason, failing) {
            (Some(FailReason::PosUnsat), _) => {
                "The example should be satisfiable together with the constraint, but it is not.".to_string()
            }
            (Some(FailReason::NegSat), _) => {
                "The example should be unsatisfiable together with the constraint, but it is satisfiable.".to_string()
            }
            (Some(FailReason::Timeout), Some(_)) => {
                "The solver could not decide the example within its time budget.".to_string()
            }
            (Some(FailReason::IllFormedExample), Some(_)) => format!(
                "The example could not be checked: {}.",
                outcome.detail.as_deref().unwrap_or("it does not elaborate")
            ),
            _ => self.well_formed_problem(target, report, outcome),
        };
        let s = slots([
            ("failure", failure),
            (
                "scenario",
                if task.context.trim().is_empty() {
                    "None".into()
                } else {
                    task.context.clone()
                },
            ),
            ("init_code", body_text(&print_init(&program.init))),
            ("constraint_nl", constraint_nl),
            ("constraint_code", constraint_code),
            ("example_header", example_header.into()),
            (
                "example_code",
                failing.and_then(|i| i.code.clone()).unwrap_or_else(|| "NONE".into()),
            ),
        ]);
        let reply = self.ask(llm, PromptKind::SemanticRepair, t, &s)?;
        let patch = match parse_repair_patch(&reply) {
            Ok(p) if p.is_usable() => p,
            Ok(_) => return Ok(None),
            Err(e) => {
                log::debug!("repair reply unusable: {e}");
                return Ok(None);
            }
        };
        let init = match &patch.init_code {
            Some(code) => format!("#INIT: {}\n{}\n", program.init.nl_context.replace('\n', " "), code_only(code)),
            None => print_init(&program.init),
        };
        let mut text = init;
        for (i, c) in program.constraints.iter().enumerate() {
            match (&patch.constraint_code, target) {
                (Some(code), Some(j)) if i == j => {
                    text.push_str(&format!("#CONSTRAINT: {}\n{}\n", c.nl_text.replace('\n', " "), code_only(code)))
                }
                (Some(code), None) if i == 0 => text.push_str(&(strip_fences(code) + "\n")),
                (Some(_), None) => {}
                _ => text.push_str(&print_constraint_segment(c)),
            }
        }
        for o in &program.options {
            text.push_str(&print_option_segment(o));
        }
        let repaired = match parse_program(&text) {
            Ok(p) => p,
            Err(e) => {
                log::debug!("repaired program invalid: {e}");
                return Ok(None);
            }
        };
        let example = match (&patch.example_code, failing) {
            (Some(code), Some(f)) => Some(Instantiation {
                constraint: f.constraint,
                polarity: f.polarity,
                description: None,
                code: Some(code.lines().map(str::trim).collect::<Vec<_>>().join(" ")),
            }),
            _ => None,
        };
        let unchanged = print_program(&repaired).ok() == print_program(program).ok();
        if unchanged && example.is_none() {
            return Ok(None);
        }
        Ok(Some(Repaired {
            program: repaired,
            example,
        }))
    }

    fn well_formed_problem(
        &self,
        target: Option<usize>,
        report: Option<&WellFormedReport>,
        outcome: &VerificationOutcome,
    ) -> String {
        if let (Some(i), Some(r)) = (target, report) {
            if let Some((_, f)) = r.degenerate_constraints.iter().find(|(j, _)| *j == i) {
                return flag_text(*f).to_string();
            }
        }
        if let Some(r) = report {
            if !r.single_answer_ok {
                return "Checking the options does not single out exactly one answer, so some code does not \
                        match its description."
                    .to_string();
            }
            if !r.structure_ok {
                return "Some segment lacks its natural language description.".to_string();
            }
        }
        outcome
            .detail
            .clone()
            .unwrap_or_else(|| "The program failed verification.".into())
    }

    /// Chain-of-thought answer used when no program could be produced.
    pub fn infer_fallback_answer(&self, task: &ReasoningTask) -> Result<Option<OptionLabel>, LlmError> {
        self.fallback_with(self.llm.as_ref(), task)
    }

    fn fallback_with(&self, llm: &dyn Llm, task: &ReasoningTask) -> Result<Option<OptionLabel>, LlmError> {
        let s = slots([
            ("context", task.context.clone()),
            ("question", task.question.clone()),
            ("options", task.options_block()),
        ]);
        let t = self.config.temperatures.first().copied().unwrap_or(0.0);
        let reply = self.ask(llm, PromptKind::CotFallback, t, &s)?;
        Ok(parse_cot_answer(&reply).filter(|l| task.has_label(*l)))
    }

    fn branch(&self, llm: &dyn Llm, task: &ReasoningTask, t: f64) -> Branch {
        let mut b = Branch::default();
        let generated = match self.gen_program_with(llm, task, t) {
            Ok(Some(g)) => g,
            Ok(None) => {
                b.notes.push(format!("t={t}: no program"));
                return b;
            }
            Err(e) => {
                b.notes.push(format!("t={t}: generation: {e}"));
                return b;
            }
        };
        b.program_parsed = true;
        let mut program = generated.program;
        let mut example: Option<Instantiation> = None;
        loop {
            let answer = match self.smt.execute_program(&program) {
                Ok(a) => a,
                Err(e) => {
                    b.notes.push(format!("t={t}: execution: {e}"));
                    return b;
                }
            };
            if b.first_answer.is_none() {
                b.first_answer = answer.answer;
            }
            let (outcome, report, count) = self.verify_round(llm, &program, &answer, example.as_ref(), t, &mut b.notes);
            let verified = outcome.passed() && report.as_ref().is_some_and(|r| r.ok);
            b.attempts.push(AttemptLog {
                temperature: t,
                repair: b.repairs,
                passing: answer.passing.iter().copied().collect(),
                answer: answer.answer,
                instantiations: count,
                verification: outcome.clone(),
                well_formed: report.clone(),
            });
            if verified {
                b.verified = answer.answer;
                return b;
            }
            if self.config.repair_policy == RepairPolicy::OnMissingAnswer && answer.answer.is_some() {
                return b;
            }
            if b.repairs >= self.config.max_repairs {
                return b;
            }
            b.repairs += 1;
            match self.repair_with(llm, task, &program, &outcome, report.as_ref(), t) {
                Ok(Some(r)) => {
                    program = r.program;
                    example = r.example;
                }
                Ok(None) => {
                    b.notes.push(format!("t={t}: repair {} made no usable change", b.repairs));
                    return b;
                }
                Err(e) => {
                    b.notes.push(format!("t={t}: repair: {e}"));
                    return b;
                }
            }
        }
    }

    /// Instantiation suite, verification and well-formedness for one program.
    fn verify_round(
        &self,
        llm: &dyn Llm,
        program: &SegmentedProgram,
        answer: &AnswerOutcome,
        example: Option<&Instantiation>,
        t: f64,
        notes: &mut Vec<String>,
    ) -> (VerificationOutcome, Option<WellFormedReport>, usize) {
        let mut insts = match self.gen_instantiations_with(llm, program, t) {
            Ok(i) => i,
            Err(e) => {
                notes.push(format!("t={t}: instantiations: {e}"));
                let outcome = VerificationOutcome::fail(None, FailReason::IllFormedExample, format!("no usable examples: {e}"));
                return (outcome, self.report(program, answer, notes), 0);
            }
        };
        if let Some(ex) = example {
            insts.retain(|i| (i.constraint, i.polarity) != (ex.constraint, ex.polarity));
            insts.push(ex.clone());
        }
        let outcome = match verify_instantiations(&self.smt, program, &insts) {
            Ok(o) => o,
            Err(e) => {
                notes.push(format!("t={t}: verification: {e}"));
                VerificationOutcome::fail(None, FailReason::Timeout, e.to_string())
            }
        };
        (outcome, self.report(program, answer, notes), insts.len())
    }

    fn report(&self, program: &SegmentedProgram, answer: &AnswerOutcome, notes: &mut Vec<String>) -> Option<WellFormedReport> {
        match is_well_formed(&self.smt, program, answer) {
            Ok(r) => Some(r),
            Err(e) => {
                notes.push(format!("well-formedness: {e}"));
                None
            }
        }
    }

    /// Runs the full loop. Never fails: every sub-failure degrades the result.
    pub fn run(&self, task: &ReasoningTask) -> SsvResult {
        let metered = Metered {
            inner: self.llm.as_ref(),
            used: AtomicUsize::new(0),
            limit: self.config.request_budget(),
        };
        let temps = &self.config.temperatures;
        let branches: Vec<(f64, Branch)> = if self.config.parallel_temperatures {
            temps.par_iter().map(|t| (*t, self.branch(&metered, task, *t))).collect()
        } else {
            let mut out = Vec::new();
            for t in temps {
                let b = self.branch(&metered, task, *t);
                let done = b.verified.is_some();
                out.push((*t, b));
                if done {
                    break;
                }
            }
            out
        };
        let mut trace = SsvTrace {
            temperature_used: None,
            repairs_used: 0,
            used_fallback: false,
            llm_calls: 0,
            attempts: Vec::new(),
            notes: Vec::new(),
        };
        let mut best: Option<(OptionLabel, f64)> = None;
        let mut any_program = false;
        for (t, b) in branches {
            any_program |= b.program_parsed;
            trace.attempts.extend(b.attempts);
            trace.notes.extend(b.notes);
            trace.repairs_used += b.repairs;
            if best.is_none() {
                best = b.first_answer.map(|a| (a, t));
            }
            if let Some(a) = b.verified {
                trace.temperature_used = Some(t);
                trace.repairs_used = b.repairs;
                trace.llm_calls = self.calls_for_trace(&metered);
                return SsvResult {
                    answer: Some(a),
                    verified: true,
                    program_produced: true,
                    trace,
                };
            }
        }
        let (answer, program_produced) = match best {
            Some((a, t)) => {
                trace.temperature_used = Some(t);
                (Some(a), true)
            }
            None if !any_program => {
                trace.used_fallback = true;
                match self.fallback_with(&metered, task) {
                    Ok(a) => (a, false),
                    Err(e) => {
                        trace.notes.push(format!("fallback: {e}"));
                        (None, false)
                    }
                }
            }
            None => (None, true),
        };
        trace.llm_calls = self.calls_for_trace(&metered);
        SsvResult {
            answer,
            verified: false,
            program_produced,
            trace,
        }
    }

    /// Parallel exploration issues requests for branches that the sequential order would
    /// skip; the count is reported only for sequential runs so traces stay comparable.
    fn calls_for_trace(&self, m: &Metered) -> usize {
        if self.config.parallel_temperatures {
            0
        } else {
            m.used.load(Ordering::SeqCst)
        }
    }
}
