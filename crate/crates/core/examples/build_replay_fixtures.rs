//! Regenerates the replay transcripts and the golden report of the bundled dataset.
//!
//! Usage: cargo run -p ssv-core --example build_replay_fixtures [-- <solver command>]

use std::path::PathBuf;
use std::sync::Arc;

use ssv_core::harness::{record_scripted, report_json, AblationGrid, EvalOptions, Evaluator};
use ssv_core::llm::{Gateway, PromptSet, ScriptedLlm, TranscriptStore};
use ssv_core::pipeline::SsvConfig;
use ssv_core::smt::{ProcessSolver, Smt};
use ssv_core::task::load_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let solver = std::env::args().nth(1).unwrap_or_else(|| "z3 -in".into());
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/dataset");
    let tasks = load_dataset(&dir.join("tasks.jsonl"), None)?;
    let grid: AblationGrid = serde_json::from_str(&std::fs::read_to_string(dir.join("ablation.json"))?)?;
    let base = SsvConfig::default();
    let mut configs = vec![base.clone()];
    configs.extend(grid.cells(&base));

    let smt = Smt::new(Arc::new(ProcessSolver::new(&solver)?));
    let prompts = PromptSet::builtin();
    let store = Arc::new(TranscriptStore::new());
    let scripts = ScriptedLlm::load_scripts(&dir.join("script.json"))?;
    record_scripted(&smt, &prompts, scripts, &tasks, &configs, store.clone())?;
    store.save(&dir.join("transcripts.json"))?;

    let eval = Evaluator {
        llm: Arc::new(Gateway::replay(store.clone())),
        smt,
        prompts,
    };
    let (records, metrics) = eval.evaluate(&base, &tasks, EvalOptions::default())?;
    std::fs::write(dir.join("golden_report.json"), report_json(&records, &metrics))?;
    println!("{} transcripts; {}", store.len(), metrics.summary());
    Ok(())
}
