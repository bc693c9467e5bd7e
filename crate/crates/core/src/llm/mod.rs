//! Language-model access: requests, record/replay transcripts, prompt templates and
//! parsers for the structured replies.

mod http;
mod parse;
mod scripted;
mod templates;
mod transcript;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::{HttpLlm, HttpSettings, API_KEY_ENV};
pub use parse::{
    parse_cot_answer, parse_decomposition, parse_instantiations, parse_refined_program, parse_repair_patch,
    strip_fences, Decomposition, RepairPatch,
};
pub use scripted::{ScriptEntry, ScriptedLlm};
pub use templates::{PromptSet, Slots};
pub use transcript::{Gateway, ProviderMode, TranscriptEntry, TranscriptStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptKind {
    Decompose,
    DirectProgram,
    IncrementalConstraint,
    OptionsCode,
    ErrorRefine,
    Instantiations,
    SemanticRepair,
    CotFallback,
}

impl PromptKind {
    pub const ALL: [PromptKind; 8] = [
        PromptKind::Decompose,
        PromptKind::DirectProgram,
        PromptKind::IncrementalConstraint,
        PromptKind::OptionsCode,
        PromptKind::ErrorRefine,
        PromptKind::Instantiations,
        PromptKind::SemanticRepair,
        PromptKind::CotFallback,
    ];

    /// Template file stem.
    pub fn file_stem(self) -> &'static str {
        match self {
            PromptKind::Decompose => "decompose",
            PromptKind::DirectProgram => "direct_program",
            PromptKind::IncrementalConstraint => "incremental_constraint",
            PromptKind::OptionsCode => "options_code",
            PromptKind::ErrorRefine => "error_refine",
            PromptKind::Instantiations => "instantiations",
            PromptKind::SemanticRepair => "semantic_repair",
            PromptKind::CotFallback => "cot_fallback",
        }
    }
}

impl std::fmt::Display for PromptKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub kind: PromptKind,
    pub prompt: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

/// Canonical text form of a temperature, so 0.3 and 0.30000000000000004 never collide
/// by accident and the key stays stable across platforms.
pub fn temperature_key(t: f64) -> String {
    format!("{:.4}", t)
}

impl LlmRequest {
    /// Transcript key. `max_tokens` is deliberately left out.
    pub fn key(&self) -> String {
        let mut h = Sha256::new();
        for part in [
            self.kind.file_stem(),
            self.model.as_str(),
            temperature_key(self.temperature).as_str(),
            self.prompt.as_str(),
        ] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("no recorded response for {kind} request {key}")]
    MissingTranscript { kind: PromptKind, key: String },
    #[error("provider returned HTTP {status}: {body}")]
    ProviderError { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("template slot `{0}` has no value")]
    MissingSlot(String),
    #[error("unexpected response format: {0}")]
    FormatError(String),
    #[error("transcript store: {0}")]
    Store(String),
    #[error("environment variable {0} is not set")]
    MissingCredential(String),
    #[error("per-task request budget of {0} exhausted")]
    BudgetExhausted(usize),
}

/// A text-completion provider.
pub trait Llm: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<String, LlmError>;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(t: f64, max_tokens: u32) -> LlmRequest {
        LlmRequest {
            kind: PromptKind::Decompose,
            prompt: "p".into(),
            model: "m".into(),
            temperature: t,
            max_tokens,
        }
    }

    #[test]
    fn key_ignores_max_tokens() {
        assert_eq!(req(0.3, 10).key(), req(0.3, 4000).key());
        assert_ne!(req(0.3, 10).key(), req(0.4, 10).key());
        assert_eq!(req(0.1 + 0.2, 1).key(), req(0.3, 1).key());
    }
}
