use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use serde::Deserialize;

use super::{temperature_key, Llm, LlmError, LlmRequest, PromptKind};

type Slot = (PromptKind, Option<String>);

/// Canned responses for tests and for building replay fixtures.
///
/// Lookup order: the queue for (kind, temperature), the queue for the kind, the sticky
/// response for (kind, temperature), the sticky response for the kind. Queued responses
/// are served once; sticky ones every time. Nothing left gives `MissingTranscript`.
#[derive(Debug, Default)]
pub struct ScriptedLlm {
    queues: Mutex<HashMap<Slot, VecDeque<String>>>,
    sticky: Mutex<HashMap<Slot, String>>,
    log: Mutex<Vec<LlmRequest>>,
}

/// One line of a script file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub kind: PromptKind,
    /// Response file, relative to the script's directory.
    pub file: String,
    #[serde(default)]
    pub temperature: Option<f64>,
    /// Serve once instead of every time.
    #[serde(default)]
    pub queue: bool,
}

fn slot(kind: PromptKind, t: Option<f64>) -> Slot {
    (kind, t.map(temperature_key))
}

impl ScriptedLlm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, kind: PromptKind, response: impl Into<String>) -> &Self {
        self.enqueue(slot(kind, None), response.into())
    }

    pub fn push_at(&self, kind: PromptKind, temperature: f64, response: impl Into<String>) -> &Self {
        self.enqueue(slot(kind, Some(temperature)), response.into())
    }

    pub fn always(&self, kind: PromptKind, response: impl Into<String>) -> &Self {
        self.sticky.lock().unwrap().insert(slot(kind, None), response.into());
        self
    }

    pub fn always_at(&self, kind: PromptKind, temperature: f64, response: impl Into<String>) -> &Self {
        self.sticky.lock().unwrap().insert(slot(kind, Some(temperature)), response.into());
        self
    }

    fn enqueue(&self, s: Slot, r: String) -> &Self {
        self.queues.lock().unwrap().entry(s).or_default().push_back(r);
        self
    }

    /// Reads a JSON map from script name to entries and returns one provider per name.
    pub fn load_scripts(path: &Path) -> Result<BTreeMap<String, ScriptedLlm>, LlmError> {
        let store_err = |p: &Path, e: &dyn std::fmt::Display| LlmError::Store(format!("{}: {e}", p.display()));
        let text = std::fs::read_to_string(path).map_err(|e| store_err(path, &e))?;
        let scripts: BTreeMap<String, Vec<ScriptEntry>> =
            serde_json::from_str(&text).map_err(|e| store_err(path, &e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut out = BTreeMap::new();
        for (name, entries) in scripts {
            let llm = ScriptedLlm::new();
            for e in entries {
                let p = base.join(&e.file);
                let response = std::fs::read_to_string(&p).map_err(|err| store_err(&p, &err))?;
                match (e.queue, e.temperature) {
                    (true, Some(t)) => llm.push_at(e.kind, t, response),
                    (true, None) => llm.push(e.kind, response),
                    (false, Some(t)) => llm.always_at(e.kind, t, response),
                    (false, None) => llm.always(e.kind, response),
                };
            }
            out.insert(name, llm);
        }
        Ok(out)
    }

    /// Every request received, in arrival order.
    pub fn requests(&self) -> Vec<LlmRequest> {
        self.log.lock().unwrap().clone()
    }
}

impl Llm for ScriptedLlm {
    fn complete(&self, req: &LlmRequest) -> Result<String, LlmError> {
        self.log.lock().unwrap().push(req.clone());
        let at = slot(req.kind, Some(req.temperature));
        let any = slot(req.kind, None);
        let queued = {
            let mut q = self.queues.lock().unwrap();
            q.get_mut(&at)
                .and_then(VecDeque::pop_front)
                .or_else(|| q.get_mut(&any).and_then(VecDeque::pop_front))
        };
        let sticky = || {
            let s = self.sticky.lock().unwrap();
            s.get(&at).or_else(|| s.get(&any)).cloned()
        };
        queued.or_else(sticky).ok_or(LlmError::MissingTranscript {
            kind: req.kind,
            key: req.key(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(kind: PromptKind, t: f64) -> LlmRequest {
        LlmRequest {
            kind,
            prompt: String::new(),
            model: String::new(),
            temperature: t,
            max_tokens: 1,
        }
    }

    #[test]
    fn lookup_order() {
        let s = ScriptedLlm::new();
        s.always(PromptKind::Decompose, "any")
            .always_at(PromptKind::Decompose, 0.3, "warm")
            .push(PromptKind::Decompose, "once");
        assert_eq!(s.complete(&req(PromptKind::Decompose, 0.3)).unwrap(), "once");
        assert_eq!(s.complete(&req(PromptKind::Decompose, 0.3)).unwrap(), "warm");
        assert_eq!(s.complete(&req(PromptKind::Decompose, 0.0)).unwrap(), "any");
        assert!(s.complete(&req(PromptKind::OptionsCode, 0.0)).is_err());
        assert_eq!(s.requests().len(), 4);
    }
}
