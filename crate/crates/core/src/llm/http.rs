use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{Llm, LlmError, LlmRequest};

pub const API_KEY_ENV: &str = "SSV_API_KEY";
const ATTEMPTS: u32 = 3;

#[derive(Debug, Clone)]
pub struct HttpSettings {
    /// Full URL of an OpenAI-compatible chat completions endpoint.
    pub endpoint: String,
    pub timeout: Duration,
    pub max_in_flight: usize,
    pub per_minute: usize,
}

impl Default for HttpSettings {
    fn default() -> Self {
        HttpSettings {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            timeout: Duration::from_secs(120),
            max_in_flight: 4,
            per_minute: 60,
        }
    }
}

/// Chat-completion client with bounded concurrency and a sliding one-minute rate window.
pub struct HttpLlm {
    settings: HttpSettings,
    api_key: String,
    client: reqwest::blocking::Client,
    in_flight: Mutex<usize>,
    slot_free: Condvar,
    recent: Mutex<VecDeque<Instant>>,
}

impl HttpLlm {
    /// Reads the credential from `SSV_API_KEY`.
    pub fn from_env(settings: HttpSettings) -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| LlmError::MissingCredential(API_KEY_ENV.into()))?;
        Self::new(settings, key)
    }

    pub fn new(settings: HttpSettings, api_key: String) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(settings.timeout)
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(HttpLlm {
            settings,
            api_key,
            client,
            in_flight: Mutex::new(0),
            slot_free: Condvar::new(),
            recent: Mutex::new(VecDeque::new()),
        })
    }

    fn acquire(&self) {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.settings.max_in_flight.max(1) {
            n = self.slot_free.wait(n).unwrap();
        }
        *n += 1;
    }

    fn release(&self) {
        *self.in_flight.lock().unwrap() -= 1;
        self.slot_free.notify_one();
    }

    fn wait_for_rate(&self) {
        let window = Duration::from_secs(60);
        loop {
            let mut recent = self.recent.lock().unwrap();
            let now = Instant::now();
            while recent.front().is_some_and(|t| now.duration_since(*t) >= window) {
                recent.pop_front();
            }
            if recent.len() < self.settings.per_minute.max(1) {
                recent.push_back(now);
                return;
            }
            let wait = window - now.duration_since(*recent.front().unwrap());
            drop(recent);
            thread::sleep(wait);
        }
    }

    fn send_once(&self, req: &LlmRequest) -> Result<String, LlmError> {
        let body = json!({
            "model": req.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let resp = self
            .client
            .post(&self.settings.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    LlmError::Timeout
                } else {
                    LlmError::Transport(e.to_string())
                }
            })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| LlmError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::ProviderError {
                status: status.as_u16(),
                body: text,
            });
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| LlmError::FormatError(e.to_string()))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::FormatError("response has no message content".into()))
    }
}

fn transient(e: &LlmError) -> bool {
    match e {
        LlmError::Transport(_) | LlmError::Timeout => true,
        LlmError::ProviderError { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}

impl Llm for HttpLlm {
    fn complete(&self, req: &LlmRequest) -> Result<String, LlmError> {
        let mut attempt = 0;
        loop {
            self.wait_for_rate();
            self.acquire();
            let r = self.send_once(req);
            self.release();
            match r {
                Err(e) if transient(&e) && attempt < ATTEMPTS => {
                    attempt += 1;
                    log::warn!("{} request failed ({e}); retry {attempt}/{ATTEMPTS}", req.kind);
                    thread::sleep(Duration::from_millis(500 << attempt));
                }
                other => return other,
            }
        }
    }
}
