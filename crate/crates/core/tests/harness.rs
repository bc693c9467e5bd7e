//! Replay evaluation of the bundled dataset.

mod common;

use std::sync::Arc;

use common::{dataset, dataset_dir, replay_evaluator, smt};
use ssv_core::harness::{
    compute_metrics, read_report, record_scripted, report_csv, report_json, write_report, AblationGrid, EvalOptions,
    ReportFormat,
};
use ssv_core::llm::{PromptSet, ScriptedLlm, TranscriptStore};
use ssv_core::pipeline::SsvConfig;

fn opts(parallelism: usize) -> EvalOptions {
    EvalOptions {
        parallelism,
        timing: false,
    }
}

fn golden() -> String {
    std::fs::read_to_string(dataset_dir().join("golden_report.json")).unwrap()
}

#[test]
fn replay_matches_golden_report() {
    let (records, metrics) = replay_evaluator(smt())
        .evaluate(&SsvConfig::default(), &dataset(), opts(4))
        .unwrap();
    assert_eq!(report_json(&records, &metrics), golden());
    assert_eq!((metrics.total, metrics.correct, metrics.verified, metrics.verified_correct), (10, 8, 8, 7));
    assert_eq!((metrics.program_produced, metrics.program_correct), (9, 7));
}

#[test]
fn replay_is_identical_across_parallelism() {
    let tasks = dataset();
    let mut outputs = Vec::new();
    for p in [1, 4, 16] {
        // A fresh solver cache each time, so cache hits cannot mask differences.
        let (records, metrics) = replay_evaluator(smt()).evaluate(&SsvConfig::default(), &tasks, opts(p)).unwrap();
        outputs.push(report_json(&records, &metrics));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn ablation_axes_move_metrics() {
    let grid: AblationGrid =
        serde_json::from_str(&std::fs::read_to_string(dataset_dir().join("ablation.json")).unwrap()).unwrap();
    let cells = replay_evaluator(smt())
        .ablate(&SsvConfig::default(), &dataset(), &grid, opts(0))
        .unwrap();
    assert_eq!(cells.len(), 6);
    let find = |r: usize, n: usize| {
        cells
            .iter()
            .find(|c| c.max_repairs == r && c.temperatures.len() == n)
            .unwrap()
            .metrics
            .clone()
    };
    // Repairs turn the technicians and bakery tasks into verified answers.
    assert!(find(2, 1).verified > find(0, 1).verified);
    assert!(find(2, 4).general_accuracy > find(0, 4).general_accuracy);
    // The committee task only verifies at the second temperature.
    assert!(find(2, 2).coverage > find(2, 1).coverage);
    // The full ablation keeps every answer the first attempt produces.
    let bare = find(0, 1);
    assert!(bare.verified <= bare.total && bare.verified_correct <= bare.verified);
}

#[test]
fn single_cell_grid_equals_evaluate() {
    let eval = replay_evaluator(smt());
    let grid = AblationGrid {
        max_repairs: vec![2],
        temperature_prefixes: vec![SsvConfig::default().temperatures],
    };
    let cells = eval.ablate(&SsvConfig::default(), &dataset(), &grid, opts(2)).unwrap();
    let (_, metrics) = eval.evaluate(&SsvConfig::default(), &dataset(), opts(2)).unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0].metrics, metrics);
}

#[test]
fn transcripts_are_reproducible_from_scripts() {
    let dir = dataset_dir();
    let grid: AblationGrid = serde_json::from_str(&std::fs::read_to_string(dir.join("ablation.json")).unwrap()).unwrap();
    let base = SsvConfig::default();
    let mut configs = vec![base.clone()];
    configs.extend(grid.cells(&base));
    let store = Arc::new(TranscriptStore::new());
    let scripts = ScriptedLlm::load_scripts(&dir.join("script.json")).unwrap();
    record_scripted(&smt(), &PromptSet::builtin(), scripts, &dataset(), &configs, store.clone()).unwrap();
    let shipped = TranscriptStore::load(&dir.join("transcripts.json")).unwrap();
    assert_eq!(store.to_json(), shipped.to_json());
}

#[test]
fn reports_round_trip() {
    let (records, metrics) = replay_evaluator(smt())
        .evaluate(&SsvConfig::default(), &dataset(), opts(2))
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    write_report(&records, &metrics, &json, ReportFormat::Json).unwrap();
    let back = read_report(&json).unwrap();
    assert_eq!(back.records, records);
    assert_eq!(back.metrics, metrics);

    let csv = report_csv(&records, &metrics);
    assert_eq!(csv.lines().count(), records.len() + 3);
    assert!(csv.lines().last().unwrap().starts_with(",80.0,80.0,87.5,77.8,10,8,8,7"));

    let mut shuffled = records.clone();
    shuffled.reverse();
    assert_eq!(compute_metrics(&shuffled), metrics);
}

mod metric_properties {
    use proptest::prelude::*;
    use ssv_core::harness::{compute_metrics, TaskRecord};
    use ssv_core::pipeline::SsvTrace;
    use ssv_core::task::OptionLabel;

    fn record(i: usize, (answer, gold, verified, fallback): (Option<usize>, Option<usize>, bool, bool)) -> TaskRecord {
        let answer = answer.and_then(OptionLabel::from_index);
        let gold = gold.and_then(OptionLabel::from_index);
        TaskRecord {
            task_id: format!("t{i}"),
            answer,
            verified: verified && answer.is_some() && !fallback,
            gold,
            correct: gold.is_some() && answer == gold,
            used_fallback: fallback,
            program_produced: !fallback,
            timing_ms: None,
            trace: SsvTrace::default(),
        }
    }

    proptest! {
        #[test]
        fn counts_are_ordered_and_order_free(
            raw in proptest::collection::vec(
                (proptest::option::of(0usize..4), proptest::option::of(0usize..4), any::<bool>(), any::<bool>()),
                0..40,
            ),
            rotate in 0usize..40,
        ) {
            let records: Vec<TaskRecord> = raw.into_iter().enumerate().map(|(i, r)| record(i, r)).collect();
            let m = compute_metrics(&records);
            prop_assert!(m.verified_correct <= m.verified && m.verified <= m.total);
            prop_assert!(m.correct <= m.total && m.program_correct <= m.program_produced);
            let mut moved = records.clone();
            if !moved.is_empty() {
                let k = rotate % moved.len();
                moved.rotate_left(k);
                moved.reverse();
            }
            prop_assert_eq!(compute_metrics(&moved), m);
        }
    }
}
