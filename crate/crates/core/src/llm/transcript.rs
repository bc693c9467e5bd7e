use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{Llm, LlmError, LlmRequest, PromptKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub kind: PromptKind,
    pub model: String,
    pub temperature: f64,
    pub response: String,
}

/// Recorded responses keyed by [`LlmRequest::key`].
#[derive(Debug, Default)]
pub struct TranscriptStore {
    entries: Mutex<BTreeMap<String, TranscriptEntry>>,
}

impl TranscriptStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// A missing file gives an empty store.
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        if !path.exists() {
            return Ok(Self::new());
        }
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Store(format!("{}: {e}", path.display())))?;
        let entries = serde_json::from_str(&text).map_err(|e| LlmError::Store(format!("{}: {e}", path.display())))?;
        Ok(TranscriptStore {
            entries: Mutex::new(entries),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        std::fs::write(path, self.to_json()).map_err(|e| LlmError::Store(format!("{}: {e}", path.display())))
    }

    /// Pretty JSON with sorted keys; stable for equal contents.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&*self.entries.lock().unwrap()).expect("transcripts serialize") + "\n"
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.lock().unwrap().get(key).map(|e| e.response.clone())
    }

    pub fn insert(&self, req: &LlmRequest, response: &str) {
        self.entries.lock().unwrap().insert(
            req.key(),
            TranscriptEntry {
                kind: req.kind,
                model: req.model.clone(),
                temperature: req.temperature,
                response: response.to_string(),
            },
        );
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    Live,
    Record,
    Replay,
}

impl std::str::FromStr for ProviderMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "live" => Ok(ProviderMode::Live),
            "record" => Ok(ProviderMode::Record),
            "replay" => Ok(ProviderMode::Replay),
            other => Err(format!("unknown provider mode `{other}`")),
        }
    }
}

/// Routes requests through the transcript store according to the mode.
pub struct Gateway {
    mode: ProviderMode,
    store: Arc<TranscriptStore>,
    inner: Option<Arc<dyn Llm>>,
    key_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    calls: AtomicUsize,
}

impl Gateway {
    pub fn replay(store: Arc<TranscriptStore>) -> Self {
        Self::build(ProviderMode::Replay, store, None)
    }

    pub fn record(store: Arc<TranscriptStore>, inner: Arc<dyn Llm>) -> Self {
        Self::build(ProviderMode::Record, store, Some(inner))
    }

    pub fn live(inner: Arc<dyn Llm>) -> Self {
        Self::build(ProviderMode::Live, Arc::new(TranscriptStore::new()), Some(inner))
    }

    fn build(mode: ProviderMode, store: Arc<TranscriptStore>, inner: Option<Arc<dyn Llm>>) -> Self {
        Gateway {
            mode,
            store,
            inner,
            key_locks: Mutex::new(HashMap::new()),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn mode(&self) -> ProviderMode {
        self.mode
    }

    pub fn store(&self) -> &Arc<TranscriptStore> {
        &self.store
    }

    /// Requests answered so far, whatever their source.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn inner(&self) -> &Arc<dyn Llm> {
        self.inner.as_ref().expect("live and record gateways carry a provider")
    }
}

impl Llm for Gateway {
    fn complete(&self, req: &LlmRequest) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match self.mode {
            ProviderMode::Live => self.inner().complete(req),
            ProviderMode::Replay => {
                let key = req.key();
                self.store
                    .get(&key)
                    .ok_or(LlmError::MissingTranscript { kind: req.kind, key })
            }
            ProviderMode::Record => {
                let key = req.key();
                let lock = self.key_locks.lock().unwrap().entry(key.clone()).or_default().clone();
                let _held = lock.lock().unwrap();
                if let Some(r) = self.store.get(&key) {
                    return Ok(r);
                }
                let r = self.inner().complete(req)?;
                self.store.insert(req, &r);
                Ok(r)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedLlm;

    fn req(prompt: &str) -> LlmRequest {
        LlmRequest {
            kind: PromptKind::CotFallback,
            prompt: prompt.into(),
            model: "m".into(),
            temperature: 0.0,
            max_tokens: 100,
        }
    }

    #[test]
    fn replay_misses_are_errors() {
        let g = Gateway::replay(Arc::new(TranscriptStore::new()));
        assert!(matches!(g.complete(&req("x")), Err(LlmError::MissingTranscript { .. })));
    }

    #[test]
    fn record_then_replay_is_identical() {
        let scripted = Arc::new(ScriptedLlm::new());
        scripted.push(PromptKind::CotFallback, "Answer: (B)");
        let store = Arc::new(TranscriptStore::new());
        let rec = Gateway::record(store.clone(), scripted.clone());
        let first = rec.complete(&req("x")).unwrap();
        // Served from the store; the script is already exhausted.
        assert_eq!(rec.complete(&req("x")).unwrap(), first);
        assert_eq!(scripted.requests().len(), 1);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        store.save(&path).unwrap();
        let replay = Gateway::replay(Arc::new(TranscriptStore::load(&path).unwrap()));
        assert_eq!(replay.complete(&req("x")).unwrap(), first);
    }
}
