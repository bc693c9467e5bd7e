//! Reasoning tasks and the normalized JSONL dataset format.
//!
//! A dataset file holds one task object per line. The first line may instead
//! be a header object `{"schema":"ssv-task/1","label_map":{...}}` recording how
//! source answer labels (e.g. `True`/`False`/`Unknown`) were mapped onto `A..G`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const SCHEMA: &str = "ssv-task/1";

#[derive(Debug, Error, PartialEq)]
pub enum TaskError {
    #[error("unrecognized option label {0:?}")]
    UnrecognizedLabel(String),
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: String },
    #[error("line {line}: duplicate option label {label}")]
    DuplicateLabel { line: usize, label: OptionLabel },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("cannot read {path}: {msg}")]
    UnreadableFile { path: String, msg: String },
    #[error("{0}")]
    NotFound(String),
}

/// A single answer label, canonically one uppercase letter `A..G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OptionLabel(char);

impl OptionLabel {
    pub const MAX_OPTIONS: usize = 7;

    pub fn from_index(i: usize) -> Option<Self> {
        (i < Self::MAX_OPTIONS).then(|| OptionLabel((b'A' + i as u8) as char))
    }

    pub fn index(self) -> usize {
        (self.0 as u8 - b'A') as usize
    }

    pub fn as_char(self) -> char {
        self.0
    }
}

impl fmt::Display for OptionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::str::FromStr for OptionLabel {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        normalize_label(s)
    }
}

impl Serialize for OptionLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OptionLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        normalize_label(&s).map_err(serde::de::Error::custom)
    }
}

/// Normalizes `"(c)"`, `" a "`, `"True"` and friends to a canonical label.
///
/// `True`/`False`/`Unknown` map to `A`/`B`/`C`, the convention used for the
/// two- and three-way entailment datasets.
pub fn normalize_label(text: &str) -> Result<OptionLabel, TaskError> {
    let t = text.trim();
    let t = t
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .unwrap_or(t)
        .trim();
    match t.to_ascii_lowercase().as_str() {
        "true" => return Ok(OptionLabel('A')),
        "false" => return Ok(OptionLabel('B')),
        "unknown" => return Ok(OptionLabel('C')),
        _ => {}
    }
    let mut chars = t.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if ('A'..='G').contains(&c.to_ascii_uppercase()) => {
            Ok(OptionLabel(c.to_ascii_uppercase()))
        }
        _ => Err(TaskError::UnrecognizedLabel(text.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub label: OptionLabel,
    pub text: String,
}

/// One multiple-choice problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReasoningTask {
    pub id: String,
    pub context: String,
    pub question: String,
    pub options: Vec<AnswerOption>,
    pub gold: Option<OptionLabel>,
}

impl ReasoningTask {
    pub fn labels(&self) -> Vec<OptionLabel> {
        self.options.iter().map(|o| o.label).collect()
    }

    pub fn has_label(&self, label: OptionLabel) -> bool {
        self.options.iter().any(|o| o.label == label)
    }

    /// Options rendered one per line as `(A) text`.
    pub fn options_block(&self) -> String {
        self.options
            .iter()
            .map(|o| format!("({}) {}", o.label, o.text))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Checks the option invariants: 2..=7 options, unique labels forming a prefix of `A..G`.
    pub fn validate(&self, line: usize) -> Result<(), TaskError> {
        let n = self.options.len();
        if !(2..=OptionLabel::MAX_OPTIONS).contains(&n) {
            return Err(TaskError::Malformed {
                line,
                msg: format!("expected 2..=7 options, found {n}"),
            });
        }
        let mut seen = [false; OptionLabel::MAX_OPTIONS];
        for o in &self.options {
            if std::mem::replace(&mut seen[o.label.index()], true) {
                return Err(TaskError::DuplicateLabel {
                    line,
                    label: o.label,
                });
            }
        }
        if seen.iter().take(n).any(|s| !s) {
            return Err(TaskError::Malformed {
                line,
                msg: "option labels must be a prefix of A..G".into(),
            });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TaskRecordJson {
    id: Option<String>,
    context: Option<String>,
    question: Option<String>,
    options: Option<Vec<(String, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold: Option<String>,
}

/// Header line of a dataset file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema: String,
    #[serde(default)]
    pub label_map: BTreeMap<String, String>,
}

fn parse_task_line(line_no: usize, line: &str) -> Result<ReasoningTask, TaskError> {
    let malformed = |msg: String| TaskError::Malformed { line: line_no, msg };
    let raw: TaskRecordJson = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    let missing = |field: &str| TaskError::MissingField {
        line: line_no,
        field: field.to_string(),
    };
    let mut options = Vec::new();
    for (label, text) in raw.options.ok_or_else(|| missing("options"))? {
        let label = normalize_label(&label).map_err(|e| malformed(e.to_string()))?;
        options.push(AnswerOption { label, text });
    }
    let gold = raw
        .gold
        .map(|g| normalize_label(&g))
        .transpose()
        .map_err(|e| malformed(e.to_string()))?;
    let task = ReasoningTask {
        id: raw.id.ok_or_else(|| missing("id"))?,
        context: raw.context.ok_or_else(|| missing("context"))?,
        question: raw.question.ok_or_else(|| missing("question"))?,
        options,
        gold,
    };
    task.validate(line_no)?;
    Ok(task)
}

/// Parses dataset text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_dataset(
    text: &str,
    limit: Option<usize>,
) -> Result<(Option<DatasetHeader>, Vec<ReasoningTask>), TaskError> {
    let mut header = None;
    let mut tasks = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if limit.is_some_and(|l| tasks.len() >= l) {
            break;
        }
        if tasks.is_empty() && header.is_none() {
            if let Ok(h) = serde_json::from_str::<DatasetHeader>(line) {
                if h.schema == SCHEMA {
                    header = Some(h);
                    continue;
                }
            }
        }
        tasks.push(parse_task_line(line_no, line)?);
    }
    Ok((header, tasks))
}

pub fn load_dataset(path: &Path, limit: Option<usize>) -> Result<Vec<ReasoningTask>, TaskError> {
    let text = fs::read_to_string(path).map_err(|e| TaskError::UnreadableFile {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    parse_dataset(&text, limit).map(|(_, tasks)| tasks)
}

pub fn task_to_json_line(task: &ReasoningTask) -> String {
    let raw = TaskRecordJson {
        id: Some(task.id.clone()),
        context: Some(task.context.clone()),
        question: Some(task.question.clone()),
        options: Some(
            task.options
                .iter()
                .map(|o| (o.label.to_string(), o.text.clone()))
                .collect(),
        ),
        gold: task.gold.map(|g| g.to_string()),
    };
    serde_json::to_string(&raw).expect("task serialization is infallible")
}

/// Serializes tasks as dataset text, with an optional header line.
pub fn dataset_to_string(header: Option<&DatasetHeader>, tasks: &[ReasoningTask]) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&serde_json::to_string(h).expect("header serialization is infallible"));
        out.push('\n');
    }
    for t in tasks {
        out.push_str(&task_to_json_line(t));
        out.push('\n');
    }
    out
}

pub fn write_dataset(
    path: &Path,
    header: Option<&DatasetHeader>,
    tasks: &[ReasoningTask],
) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(dataset_to_string(header, tasks).as_bytes())
}

/// Parses a single task from either a bare JSON object or a dataset file.
pub fn parse_single_task(text: &str, id: Option<&str>) -> Result<ReasoningTask, TaskError> {
    let (_, tasks) = parse_dataset(text, None).or_else(|first_err| {
        // A pretty-printed single object spans several lines.
        serde_json::from_str::<serde_json::Value>(text)
            .map_err(|_| first_err)
            .and_then(|v| parse_dataset(&v.to_string(), None))
    })?;
    let found = match id {
        Some(id) => tasks.into_iter().find(|t| t.id == id),
        None => tasks.into_iter().next(),
    };
    found.ok_or_else(|| {
        TaskError::NotFound(match id {
            Some(id) => format!("no task with id {id:?}"),
            None => "no task found".into(),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_single_line() {
        let text = r#"{"id":"t1","context":"...","question":"...","options":[["A","fish"],["B","hot cakes"]],"gold":"A"}"#;
        let (_, tasks) = parse_dataset(text, None).unwrap();
        assert_eq!(tasks.len(), 1);
        assert_eq!(tasks[0].labels(), vec![OptionLabel('A'), OptionLabel('B')]);
        assert_eq!(tasks[0].gold, Some(OptionLabel('A')));
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert!(parse_dataset("", None).unwrap().1.is_empty());
    }

    #[test]
    fn duplicate_label_reports_line() {
        let text = "\n{\"id\":\"t\",\"context\":\"c\",\"question\":\"q\",\"options\":[[\"A\",\"x\"],[\"A\",\"y\"]]}";
        assert_eq!(
            parse_dataset(text, None).unwrap_err(),
            TaskError::DuplicateLabel {
                line: 2,
                label: OptionLabel('A')
            }
        );
    }

    #[test]
    fn missing_field_reports_line() {
        let text = r#"{"id":"t","question":"q","options":[["A","x"],["B","y"]]}"#;
        assert_eq!(
            parse_dataset(text, None).unwrap_err(),
            TaskError::MissingField {
                line: 1,
                field: "context".into()
            }
        );
    }

    #[test]
    fn header_and_limit() {
        let text = concat!(
            r#"{"schema":"ssv-task/1","label_map":{"True":"A","False":"B"}}"#,
            "\n",
            r#"{"id":"a","context":"c","question":"q","options":[["True","yes"],["False","no"]],"gold":"False"}"#,
            "\n",
            r#"{"id":"b","context":"c","question":"q","options":[["A","x"],["B","y"]]}"#,
        );
        let (header, tasks) = parse_dataset(text, Some(1)).unwrap();
        assert_eq!(header.unwrap().label_map["True"], "A");
        assert_eq!(tasks.len(), 1);
        assert_eq!(tasks[0].gold, Some(OptionLabel('B')));
    }

    #[test]
    fn labels_normalize() {
        assert_eq!(normalize_label("(C)").unwrap(), OptionLabel('C'));
        assert_eq!(normalize_label(" a ").unwrap(), OptionLabel('A'));
        assert_eq!(normalize_label("Unknown").unwrap(), OptionLabel('C'));
        assert_eq!(
            normalize_label("maybe").unwrap_err(),
            TaskError::UnrecognizedLabel("maybe".into())
        );
        assert!(normalize_label("H").is_err());
    }

    #[test]
    fn unreadable_file() {
        let err = load_dataset(Path::new("/nonexistent/ssv.jsonl"), None).unwrap_err();
        assert!(matches!(err, TaskError::UnreadableFile { .. }));
    }

    #[test]
    fn label_prefix_enforced() {
        let text = r#"{"id":"t","context":"c","question":"q","options":[["A","x"],["C","y"]]}"#;
        assert!(matches!(
            parse_dataset(text, None).unwrap_err(),
            TaskError::Malformed { line: 1, .. }
        ));
    }
}
