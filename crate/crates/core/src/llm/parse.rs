//! Parsers for the structured replies. All of them tolerate markdown fences, `>>>`
//! header prefixes and bold markers, and stop at a `------` shot separator.

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::LlmError;
use crate::dsl::SegmentedProgram;
use crate::task::{normalize_label, OptionLabel};
use crate::verify::{is_none_text, Instantiation, Polarity};

/// Drops lines that open or close a fenced block.
pub fn strip_fences(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn is_separator(line: &str) -> bool {
    let t = line.trim();
    t.len() >= 4 && t.chars().all(|c| c == '-')
}

/// Text up to the first shot separator, fences removed.
fn body_of(text: &str) -> String {
    let clean = strip_fences(text);
    let mut out = Vec::new();
    for l in clean.lines() {
        if is_separator(l) {
            break;
        }
        out.push(l);
    }
    out.join("\n")
}

/// `(header, rest of line)` if the line opens one of `names`.
fn header<'a>(line: &'a str, names: &[&'static str]) -> Option<(&'static str, &'a str)> {
    let t = line.trim().trim_start_matches('>').trim_start().trim_start_matches("**");
    let colon = t.find(':')?;
    let name = t[..colon].trim().trim_end_matches("**");
    let found = names.iter().find(|n| **n == name)?;
    let rest = t[colon + 1..].trim_start_matches("**").trim();
    Some((found, rest))
}

/// Splits into a preamble and `(header, body)` sections in order of appearance.
fn sections(text: &str, names: &[&'static str]) -> (String, Vec<(&'static str, String)>) {
    let mut pre = Vec::new();
    let mut out: Vec<(&'static str, Vec<&str>)> = Vec::new();
    for line in text.lines() {
        match header(line, names) {
            Some((h, rest)) => out.push((h, if rest.is_empty() { vec![] } else { vec![rest] })),
            None => match out.last_mut() {
                Some((_, body)) => body.push(line),
                None => pre.push(line),
            },
        }
    }
    let join = |v: Vec<&str>| v.join("\n").trim().to_string();
    (join(pre), out.into_iter().map(|(h, b)| (h, join(b))).collect())
}

fn none_or(s: String) -> Option<String> {
    if s.trim().eq_ignore_ascii_case("none") || s.trim().is_empty() {
        None
    } else {
        Some(s)
    }
}

fn format_error(msg: impl Into<String>) -> LlmError {
    LlmError::FormatError(msg.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub context: Option<String>,
    pub constraints: Vec<String>,
}

pub fn parse_decomposition(text: &str) -> Result<Decomposition, LlmError> {
    let (_, secs) = sections(&body_of(text), &["InitialContext", "Constraints"]);
    let get = |h: &str| secs.iter().find(|(n, _)| *n == h).map(|(_, b)| b.clone());
    let context = get("InitialContext").ok_or_else(|| format_error("missing InitialContext:"))?;
    let constraints = get("Constraints").ok_or_else(|| format_error("missing Constraints:"))?;
    let mut items = Vec::new();
    let mut cur: Vec<&str> = Vec::new();
    for line in constraints.lines().chain(std::iter::once("###")) {
        if line.trim() == "###" {
            let item = cur.join(" ").trim().to_string();
            if !item.is_empty() {
                items.push(item);
            }
            cur.clear();
        } else {
            cur.push(line.trim());
        }
    }
    Ok(Decomposition {
        context: none_or(context),
        constraints: items,
    })
}

const INST_HEADERS: [&str; 5] = [
    "Constraint",
    "PositiveExampleDescription",
    "PositiveExampleCode",
    "NegativeExampleDescription",
    "NegativeExampleCode",
];

/// One positive and one negative instantiation per constraint, matched to the program's
/// constraints by position. Code is kept as text; the verifier rejects code that does not
/// elaborate in the program scope.
pub fn parse_instantiations(text: &str, program: &SegmentedProgram) -> Result<Vec<Instantiation>, LlmError> {
    let (_, secs) = sections(&body_of(text), &INST_HEADERS);
    let mut blocks: Vec<Vec<(&str, String)>> = Vec::new();
    for (h, body) in secs {
        if h == "Constraint" {
            blocks.push(Vec::new());
        } else if let Some(b) = blocks.last_mut() {
            b.push((h, body));
        } else {
            return Err(format_error(format!("{h}: appears before any Constraint:")));
        }
    }
    if blocks.len() != program.constraints.len() {
        return Err(format_error(format!(
            "{} example blocks for {} constraints",
            blocks.len(),
            program.constraints.len()
        )));
    }
    let mut out = Vec::with_capacity(blocks.len() * 2);
    for (i, block) in blocks.into_iter().enumerate() {
        let field = |name: &str| block.iter().find(|(h, _)| *h == name).map(|(_, b)| b.clone());
        for (pol, d, c) in [
            (Polarity::Positive, "PositiveExampleDescription", "PositiveExampleCode"),
            (Polarity::Negative, "NegativeExampleDescription", "NegativeExampleCode"),
        ] {
            let code = field(c).ok_or_else(|| format_error(format!("constraint {}: missing {c}:", i + 1)))?;
            let description = field(d).filter(|s| !s.is_empty());
            let none = is_none_text(&code) || description.as_deref().is_some_and(is_none_text);
            let code = code.lines().map(str::trim).collect::<Vec<_>>().join(" ");
            out.push(Instantiation {
                constraint: i,
                polarity: pol,
                description,
                code: if none { None } else { Some(code) },
            });
        }
    }
    Ok(out)
}

/// Program text after the `>>> CorrectedProgram:` marker.
pub fn parse_refined_program(text: &str) -> Result<String, LlmError> {
    let clean = strip_fences(text);
    let mut lines = clean.lines();
    for line in lines.by_ref() {
        if header(line, &["CorrectedProgram"]).is_some() {
            let rest: Vec<&str> = lines.take_while(|l| !is_separator(l)).collect();
            let program = rest.join("\n").trim().to_string();
            if program.is_empty() {
                return Err(format_error("nothing after CorrectedProgram:"));
            }
            return Ok(program + "\n");
        }
    }
    Err(format_error("missing CorrectedProgram: marker"))
}

/// Replacement code proposed by a repair reply. Absent fields stay unchanged.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RepairPatch {
    pub discussion: String,
    pub init_code: Option<String>,
    pub constraint_code: Option<String>,
    pub example_code: Option<String>,
}

impl RepairPatch {
    pub fn is_usable(&self) -> bool {
        self.init_code.is_some() || self.constraint_code.is_some() || self.example_code.is_some()
    }
}

const REPAIR_HEADERS: [&str; 6] = [
    "ProblemDiscussion",
    "RepairedInitialCode",
    "RepairedConstraintCode",
    "RepairedPositiveExampleCode",
    "RepairedNegativeExampleCode",
    "RepairedExampleCode",
];

pub fn parse_repair_patch(text: &str) -> Result<RepairPatch, LlmError> {
    let (pre, secs) = sections(&body_of(text), &REPAIR_HEADERS);
    if !secs.iter().any(|(h, _)| h.starts_with("Repaired")) {
        return Err(format_error("no Repaired...Code: section"));
    }
    let mut patch = RepairPatch {
        discussion: pre,
        ..Default::default()
    };
    for (h, body) in secs {
        match h {
            "ProblemDiscussion" => patch.discussion = body,
            "RepairedInitialCode" => patch.init_code = none_or(body),
            "RepairedConstraintCode" => patch.constraint_code = none_or(body),
            _ => patch.example_code = none_or(body).filter(|c| !is_none_text(c)),
        }
    }
    Ok(patch)
}

/// Label from the last `Answer: (X)` line.
pub fn parse_cot_answer(text: &str) -> Option<OptionLabel> {
    let re = Regex::new(r"(?i)answer\s*:\s*\(?([a-g])\)?(?:[^a-z]|$)").expect("valid regex");
    let last = re.captures_iter(text).last()?;
    normalize_label(&last[1]).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_decomposition() {
        let d = parse_decomposition("InitialContext:\nNone\nConstraints:\nX").unwrap();
        assert_eq!(d.context, None);
        assert_eq!(d.constraints, vec!["X"]);
        assert!(parse_decomposition("InitialContext:\nNone\n").is_err());
    }

    #[test]
    fn fenced_decomposition() {
        let d = parse_decomposition("```\n>>> InitialContext: ctx\nConstraints:\na\n###\nb\n```\n------\nextra").unwrap();
        assert_eq!(d.context.as_deref(), Some("ctx"));
        assert_eq!(d.constraints, vec!["a", "b"]);
    }

    #[test]
    fn refined_program_marker() {
        assert_eq!(parse_refined_program("why\n>>> CorrectedProgram:\nenum s { a }\n").unwrap(), "enum s { a }\n");
        assert!(parse_refined_program("no marker").is_err());
        assert!(parse_refined_program(">>> CorrectedProgram:\n  \n").is_err());
    }

    #[test]
    fn all_none_patch_is_unusable() {
        let p = parse_repair_patch(
            "fine as is\nRepairedInitialCode:\nNONE\nRepairedConstraintCode:\nNONE\nRepairedPositiveExampleCode:\nNONE",
        )
        .unwrap();
        assert!(!p.is_usable());
        assert_eq!(p.discussion, "fine as is");
        assert!(parse_repair_patch("just talk").is_err());
    }

    #[test]
    fn cot_answers() {
        assert_eq!(parse_cot_answer("so...\nAnswer: (B)").map(|l| l.as_char()), Some('B'));
        assert_eq!(parse_cot_answer("Answer: A then\nanswer: c."), normalize_label("C").ok());
        assert_eq!(parse_cot_answer("I think it is B"), None);
        assert_eq!(parse_cot_answer("Answer: Because"), None);
    }
}
