//! Dataset evaluation, metrics, ablation grids and reports.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use std::collections::BTreeMap;

use crate::llm::{Gateway, Llm, PromptSet, ScriptedLlm, TranscriptStore};
use crate::pipeline::{Ssv, SsvConfig, SsvTrace};
use crate::smt::Smt;
use crate::task::{OptionLabel, ReasoningTask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskRecord {
    pub task_id: String,
    pub answer: Option<OptionLabel>,
    pub verified: bool,
    pub gold: Option<OptionLabel>,
    pub correct: bool,
    pub used_fallback: bool,
    pub program_produced: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<u64>,
    pub trace: SsvTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunMetrics {
    pub general_accuracy: f64,
    pub coverage: f64,
    /// Undefined when nothing was verified.
    pub precision: Option<f64>,
    /// Accuracy among tasks answered from a program; undefined when there are none.
    pub program_accuracy: Option<f64>,
    pub total: usize,
    pub correct: usize,
    pub verified: usize,
    pub verified_correct: usize,
    pub program_produced: usize,
    pub program_correct: usize,
}

fn pct(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// One decimal, or `-` when undefined.
pub fn display_pct(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.1}"),
        None => "-".into(),
    }
}

pub fn compute_metrics(records: &[TaskRecord]) -> RunMetrics {
    let count = |f: &dyn Fn(&TaskRecord) -> bool| records.iter().filter(|r| f(r)).count();
    let total = records.len();
    let correct = count(&|r| r.correct);
    let verified = count(&|r| r.verified);
    let verified_correct = count(&|r| r.verified && r.correct);
    let program_produced = count(&|r| r.program_produced);
    let program_correct = count(&|r| r.program_produced && r.correct);
    RunMetrics {
        general_accuracy: pct(correct, total).unwrap_or(0.0),
        coverage: pct(verified, total).unwrap_or(0.0),
        precision: pct(verified_correct, verified),
        program_accuracy: pct(program_correct, program_produced),
        total,
        correct,
        verified,
        verified_correct,
        program_produced,
        program_correct,
    }
}

impl RunMetrics {
    /// `accuracy / coverage / precision` at display precision.
    pub fn summary(&self) -> String {
        format!(
            "{} / {} / {}",
            display_pct(Some(self.general_accuracy)),
            display_pct(Some(self.coverage)),
            display_pct(self.precision)
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Worker threads; 0 means one per logical core.
    pub parallelism: usize,
    pub timing: bool,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("ablation grid is empty")]
    EmptyGrid,
    #[error("invalid configuration: {0}")]
    Config(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Shared provider, solver and prompts for every run of a session.
#[derive(Clone)]
pub struct Evaluator {
    pub llm: Arc<dyn Llm>,
    pub smt: Smt,
    pub prompts: PromptSet,
}

impl Evaluator {
    pub fn ssv(&self, config: SsvConfig) -> Ssv {
        Ssv::new(self.llm.clone(), self.smt.clone(), self.prompts.clone(), config)
    }

    pub fn evaluate(
        &self,
        config: &SsvConfig,
        tasks: &[ReasoningTask],
        opts: EvalOptions,
    ) -> Result<(Vec<TaskRecord>, RunMetrics), HarnessError> {
        config.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        let ssv = self.ssv(config.clone());
        let run = |task: &ReasoningTask| {
            let start = Instant::now();
            let result = ssv.run(task);
            let correct = task.gold.is_some() && result.answer == task.gold;
            TaskRecord {
                task_id: task.id.clone(),
                answer: result.answer,
                verified: result.verified,
                gold: task.gold,
                correct,
                used_fallback: result.trace.used_fallback,
                program_produced: result.program_produced,
                timing_ms: opts.timing.then(|| start.elapsed().as_millis() as u64),
                trace: result.trace,
            }
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.parallelism)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let records: Vec<TaskRecord> = pool.install(|| tasks.par_iter().map(run).collect());
        let metrics = compute_metrics(&records);
        Ok((records, metrics))
    }

    pub fn ablate(
        &self,
        base: &SsvConfig,
        tasks: &[ReasoningTask],
        grid: &AblationGrid,
        opts: EvalOptions,
    ) -> Result<Vec<AblationCell>, HarnessError> {
        let cells = grid.cells(base);
        if cells.is_empty() {
            return Err(HarnessError::EmptyGrid);
        }
        cells
            .into_iter()
            .map(|config| {
                let (_, metrics) = self.evaluate(&config, tasks, opts)?;
                Ok(AblationCell {
                    max_repairs: config.max_repairs,
                    temperatures: config.temperatures,
                    metrics,
                })
            })
            .collect()
    }
}

/// Runs every task under every configuration against its scripted provider, recording
/// each request into `store`. Tasks run one at a time so queued responses are consumed
/// in a fixed order.
pub fn record_scripted(
    smt: &Smt,
    prompts: &PromptSet,
    scripts: BTreeMap<String, ScriptedLlm>,
    tasks: &[ReasoningTask],
    configs: &[SsvConfig],
    store: Arc<TranscriptStore>,
) -> Result<(), HarnessError> {
    let mut scripts = scripts;
    for task in tasks {
        let script = scripts
            .remove(&task.id)
            .ok_or_else(|| HarnessError::Config(format!("no script for task `{}`", task.id)))?;
        let gateway: Arc<dyn Llm> = Arc::new(Gateway::record(store.clone(), Arc::new(script)));
        for config in configs {
            let mut c = config.clone();
            c.parallel_temperatures = false;
            Ssv::new(gateway.clone(), smt.clone(), prompts.clone(), c).run(task);
        }
    }
    Ok(())
}

/// Values to sweep; an empty axis keeps the base configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "snake_case")]
pub struct AblationGrid {
    pub max_repairs: Vec<usize>,
    pub temperature_prefixes: Vec<Vec<f64>>,
}

impl AblationGrid {
    pub fn cells(&self, base: &SsvConfig) -> Vec<SsvConfig> {
        if self.max_repairs.is_empty() && self.temperature_prefixes.is_empty() {
            return vec![];
        }
        let repairs = if self.max_repairs.is_empty() {
            vec![base.max_repairs]
        } else {
            self.max_repairs.clone()
        };
        let temps = if self.temperature_prefixes.is_empty() {
            vec![base.temperatures.clone()]
        } else {
            self.temperature_prefixes.clone()
        };
        let mut out = Vec::new();
        for r in &repairs {
            for t in &temps {
                let mut c = base.clone();
                c.max_repairs = *r;
                c.temperatures = t.clone();
                out.push(c);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AblationCell {
    pub max_repairs: usize,
    pub temperatures: Vec<f64>,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TimingStats {
    pub median_ms: u64,
    pub q1_ms: u64,
    pub q3_ms: u64,
}

/// Nearest-rank quartiles of the recorded wall-clock times.
pub fn timing_stats(records: &[TaskRecord]) -> Option<TimingStats> {
    let mut t: Vec<u64> = records.iter().filter_map(|r| r.timing_ms).collect();
    if t.is_empty() {
        return None;
    }
    t.sort_unstable();
    let at = |q: f64| t[((q * t.len() as f64).ceil() as usize).clamp(1, t.len()) - 1];
    Some(TimingStats {
        median_ms: at(0.5),
        q1_ms: at(0.25),
        q3_ms: at(0.75),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub records: Vec<TaskRecord>,
    pub metrics: RunMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

pub fn report_json(records: &[TaskRecord], metrics: &RunMetrics) -> String {
    let report = Report {
        records: records.to_vec(),
        metrics: metrics.clone(),
        timing: timing_stats(records),
    };
    serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
}

const CSV_HEADER: [&str; 8] = [
    "taskId",
    "answer",
    "verified",
    "gold",
    "correct",
    "usedFallback",
    "programProduced",
    "timingMs",
];

/// One row per task, then a `#metrics` row followed by one metric row.
pub fn report_csv(records: &[TaskRecord], metrics: &RunMetrics) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(vec![]);
    let label = |l: Option<OptionLabel>| l.map(|l| l.to_string()).unwrap_or_default();
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in records {
        w.write_record([
            r.task_id.clone(),
            label(r.answer),
            r.verified.to_string(),
            label(r.gold),
            r.correct.to_string(),
            r.used_fallback.to_string(),
            r.program_produced.to_string(),
            r.timing_ms.map(|t| t.to_string()).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    w.write_record([
        "#metrics",
        "generalAccuracy",
        "coverage",
        "precision",
        "programAccuracy",
        "total",
        "correct",
        "verified",
        "verifiedCorrect",
    ])
    .expect("in-memory write");
    w.write_record([
        String::new(),
        display_pct(Some(metrics.general_accuracy)),
        display_pct(Some(metrics.coverage)),
        display_pct(metrics.precision),
        display_pct(metrics.program_accuracy),
        metrics.total.to_string(),
        metrics.correct.to_string(),
        metrics.verified.to_string(),
        metrics.verified_correct.to_string(),
    ])
    .expect("in-memory write");
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn write_report(
    records: &[TaskRecord],
    metrics: &RunMetrics,
    path: &Path,
    format: ReportFormat,
) -> Result<(), HarnessError> {
    let text = match format {
        ReportFormat::Json => report_json(records, metrics),
        ReportFormat::Csv => report_csv(records, metrics),
    };
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_report(path: &Path) -> Result<Report, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(correct: bool, verified: bool, program: bool) -> TaskRecord {
        TaskRecord {
            task_id: "t".into(),
            answer: None,
            verified,
            gold: None,
            correct,
            used_fallback: !program,
            program_produced: program,
            timing_ms: None,
            trace: SsvTrace {
                temperature_used: None,
                repairs_used: 0,
                used_fallback: !program,
                llm_calls: 0,
                attempts: vec![],
                notes: vec![],
            },
        }
    }

    #[test]
    fn empty_and_single() {
        let m = compute_metrics(&[]);
        assert_eq!((m.total, m.correct, m.verified), (0, 0, 0));
        assert_eq!(m.precision, None);
        let m = compute_metrics(&[record(true, true, true)]);
        assert_eq!(m.summary(), "100.0 / 100.0 / 100.0");
    }

    #[test]
    fn undefined_precision_renders_dash() {
        let recs = vec![record(true, false, true), record(false, false, false)];
        let m = compute_metrics(&recs);
        assert_eq!(display_pct(m.precision), "-");
        let csv = report_csv(&recs, &m);
        assert_eq!(csv.lines().count(), recs.len() + 3);
        assert!(csv.lines().last().unwrap().starts_with(",50.0,0.0,-,100.0,2,1,0,0"));
        assert!(report_json(&recs, &m).contains("\"precision\": null"));
    }

    #[test]
    fn grid_cells() {
        let base = SsvConfig::default();
        let g = AblationGrid {
            max_repairs: vec![0, 2],
            temperature_prefixes: vec![vec![0.0], vec![0.0, 0.3]],
        };
        let cells = g.cells(&base);
        assert_eq!(cells.len(), 4);
        assert_eq!((cells[1].max_repairs, cells[1].temperatures.clone()), (0, vec![0.0, 0.3]));
        assert!(AblationGrid::default().cells(&base).is_empty());
        let single = AblationGrid {
            max_repairs: vec![base.max_repairs],
            ..Default::default()
        };
        assert_eq!(single.cells(&base), vec![base]);
    }
}
