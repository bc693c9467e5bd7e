use std::collections::BTreeMap;
use std::path::Path;

use super::{LlmError, PromptKind};

/// Slot values for one rendering.
pub type Slots = BTreeMap<&'static str, String>;

const REFERENCE_SLOT: &str = "dsl_reference";

fn builtin(kind: PromptKind) -> &'static str {
    match kind {
        PromptKind::Decompose => include_str!("../../prompts/decompose.txt"),
        PromptKind::DirectProgram => include_str!("../../prompts/direct_program.txt"),
        PromptKind::IncrementalConstraint => include_str!("../../prompts/incremental_constraint.txt"),
        PromptKind::OptionsCode => include_str!("../../prompts/options_code.txt"),
        PromptKind::ErrorRefine => include_str!("../../prompts/error_refine.txt"),
        PromptKind::Instantiations => include_str!("../../prompts/instantiations.txt"),
        PromptKind::SemanticRepair => include_str!("../../prompts/semantic_repair.txt"),
        PromptKind::CotFallback => include_str!("../../prompts/cot_fallback.txt"),
    }
}

/// One template per prompt kind, plus the shared language reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    templates: BTreeMap<PromptKind, String>,
    reference: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptSet {
    pub fn builtin() -> Self {
        PromptSet {
            templates: PromptKind::ALL.iter().map(|k| (*k, builtin(*k).to_string())).collect(),
            reference: include_str!("../../prompts/dsl_reference.txt").to_string(),
        }
    }

    /// Built-in templates overridden by any `<stem>.txt` found in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, LlmError> {
        let mut set = Self::builtin();
        let read = |stem: &str| -> Result<Option<String>, LlmError> {
            let p = dir.join(format!("{stem}.txt"));
            if !p.exists() {
                return Ok(None);
            }
            std::fs::read_to_string(&p)
                .map(Some)
                .map_err(|e| LlmError::Store(format!("{}: {e}", p.display())))
        };
        for k in PromptKind::ALL {
            if let Some(t) = read(k.file_stem())? {
                set.templates.insert(k, t);
            }
        }
        if let Some(r) = read(REFERENCE_SLOT)? {
            set.reference = r;
        }
        Ok(set)
    }

    pub fn template(&self, kind: PromptKind) -> &str {
        &self.templates[&kind]
    }

    /// Fills every `{{name}}` in the template. Inserted values are not rescanned.
    pub fn render(&self, kind: PromptKind, slots: &Slots) -> Result<String, LlmError> {
        let mut rest = self.template(kind);
        let mut out = String::with_capacity(rest.len() + 1024);
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let end = after
                .find("}}")
                .ok_or_else(|| LlmError::MissingSlot(after.chars().take(20).collect()))?;
            let name = after[..end].trim();
            let value = if name == REFERENCE_SLOT {
                self.reference.trim_end()
            } else {
                slots
                    .get(name)
                    .map(|s| s.trim_end())
                    .ok_or_else(|| LlmError::MissingSlot(name.to_string()))?
            };
            out.push_str(value);
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slots(pairs: &[(&'static str, &str)]) -> Slots {
        pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
    }

    #[test]
    fn missing_slot_is_reported() {
        let set = PromptSet::builtin();
        assert_eq!(
            set.render(PromptKind::CotFallback, &slots(&[("context", "c")])),
            Err(LlmError::MissingSlot("question".into()))
        );
    }

    #[test]
    fn rendering_is_deterministic_and_complete() {
        let set = PromptSet::builtin();
        let s = slots(&[("context", "c {{x}}"), ("question", "q"), ("options", "(A) a")]);
        let a = set.render(PromptKind::CotFallback, &s).unwrap();
        assert_eq!(a, set.render(PromptKind::CotFallback, &s).unwrap());
        assert!(a.contains("c {{x}}"));
        assert!(a.ends_with("Reasoning:\n"));
    }

    #[test]
    fn directory_overrides() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("cot_fallback.txt"), "Q: {{question}}").unwrap();
        let set = PromptSet::from_dir(dir.path()).unwrap();
        assert_eq!(set.render(PromptKind::CotFallback, &slots(&[("question", "why")])).unwrap(), "Q: why");
        assert_eq!(set.template(PromptKind::Decompose), PromptSet::builtin().template(PromptKind::Decompose));
    }
}
