use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::http::HttpPolicy;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    /// `/chat/completions` wire format (OpenAI, Gemini, DeepSeek, Ollama, ...).
    OpenaiCompatible,
    /// Anthropic `/v1/messages`.
    Anthropic,
    /// Offline deterministic provider.
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub id: String,
    pub kind: ProviderKind,
    pub model: String,
    #[serde(default)]
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub credential_env: Option<String>,
    /// `None` leaves the provider's default temperature in place.
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Retries after the first attempt.
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub retry_backoff_ms: u64,
    #[serde(default)]
    pub requests_per_minute: Option<u32>,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    /// Mock only: recorded responses named `<request key>.txt`, played back
    /// before falling back to synthesis.
    #[serde(default)]
    pub fixtures_dir: Option<PathBuf>,
}

fn default_timeout() -> u64 {
    300
}
fn default_retries() -> u32 {
    2
}
fn default_backoff() -> u64 {
    1000
}
fn default_max_tokens() -> u32 {
    16000
}

impl ProviderConfig {
    fn remote(id: &str, kind: ProviderKind, model: &str, endpoint: &str, env: Option<&str>) -> Self {
        Self {
            id: id.into(),
            kind,
            model: model.into(),
            endpoint: endpoint.into(),
            credential_env: env.map(str::to_string),
            temperature: None,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            retry_backoff_ms: default_backoff(),
            requests_per_minute: None,
            max_tokens: default_max_tokens(),
            fixtures_dir: None,
        }
    }

    pub fn mock() -> Self {
        Self {
            timeout_secs: 1,
            max_retries: 0,
            ..Self::remote("mock", ProviderKind::Mock, "mock-1", "", None)
        }
    }

    /// Built-in provider presets by id.
    pub fn builtin(id: &str) -> Option<Self> {
        use ProviderKind::*;
        const OPENAI: &str = "https://api.openai.com/v1";
        Some(match id {
            "claude-3.7-sonnet" => Self::remote(
                id,
                Anthropic,
                "claude-3-7-sonnet-20250219",
                "https://api.anthropic.com",
                Some("ANTHROPIC_API_KEY"),
            ),
            "o3" | "o4-mini" | "gpt-4.1" | "gpt-4o-mini" => {
                Self::remote(id, OpenaiCompatible, id, OPENAI, Some("OPENAI_API_KEY"))
            }
            "gemini-2.5-pro" => Self::remote(
                id,
                OpenaiCompatible,
                id,
                "https://generativelanguage.googleapis.com/v1beta/openai",
                Some("GEMINI_API_KEY"),
            ),
            "deepseek-r1" => Self::remote(
                id,
                OpenaiCompatible,
                "deepseek-reasoner",
                "https://api.deepseek.com",
                Some("DEEPSEEK_API_KEY"),
            ),
            "llama3.1:70b" => Self::remote(id, OpenaiCompatible, id, "http://localhost:11434/v1", None),
            "mock" => Self::mock(),
            _ => return None,
        })
    }

    pub fn builtin_ids() -> &'static [&'static str] {
        &[
            "claude-3.7-sonnet",
            "o3",
            "o4-mini",
            "gpt-4.1",
            "gpt-4o-mini",
            "gemini-2.5-pro",
            "deepseek-r1",
            "llama3.1:70b",
            "mock",
        ]
    }

    pub fn check(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("provider `{}`: {m}", self.id)));
        if self.id.trim().is_empty() {
            return Err(Error::Config("provider id is empty".into()));
        }
        if self.model.trim().is_empty() {
            return fail("model id is empty".into());
        }
        if self.timeout_secs == 0 {
            return fail("timeout must be positive".into());
        }
        if self.kind != ProviderKind::Mock && self.endpoint.trim().is_empty() {
            return fail("endpoint is required".into());
        }
        if let Some(t) = self.temperature {
            if !(0.0..=2.0).contains(&t) {
                return fail(format!("temperature {t} outside [0, 2]"));
            }
        }
        if self.requests_per_minute == Some(0) {
            return fail("requests_per_minute must be positive".into());
        }
        Ok(())
    }

    /// Read the API key, if this provider needs one.
    pub fn credential(&self) -> Result<Option<String>> {
        match &self.credential_env {
            None => Ok(None),
            Some(var) => match std::env::var(var) {
                Ok(v) if !v.trim().is_empty() => Ok(Some(v)),
                _ => Err(Error::Config(format!(
                    "provider `{}` needs credential variable `{var}`",
                    self.id
                ))),
            },
        }
    }

    pub(crate) fn policy(&self) -> HttpPolicy {
        HttpPolicy {
            timeout: Duration::from_secs(self.timeout_secs),
            max_retries: self.max_retries,
            backoff: Duration::from_millis(self.retry_backoff_ms),
        }
    }
}
