use serde_json::{json, Value};

use super::config::{ProviderConfig, ProviderKind};
use super::http::post_json;
use super::mock::MockProvider;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Generate,
    Judge,
}

impl Purpose {
    pub fn as_str(self) -> &'static str {
        match self {
            Purpose::Generate => "generate",
            Purpose::Judge => "judge",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChatRequest {
    /// Stable identity of the request (prompt hash); used for caching and
    /// fixture playback.
    pub key: String,
    pub purpose: Purpose,
    pub system: String,
    pub user: String,
}

/// A single-shot chat completion backend.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String>;
}

pub fn build_provider(cfg: &ProviderConfig) -> Result<Box<dyn ChatProvider>> {
    cfg.check()?;
    Ok(match cfg.kind {
        ProviderKind::Mock => Box::new(MockProvider::new(cfg.fixtures_dir.clone())),
        ProviderKind::OpenaiCompatible => Box::new(OpenAiCompatible { cfg: cfg.clone() }),
        ProviderKind::Anthropic => Box::new(Anthropic { cfg: cfg.clone() }),
    })
}

struct OpenAiCompatible {
    cfg: ProviderConfig,
}

impl ChatProvider for OpenAiCompatible {
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        let mut headers = Vec::new();
        if let Some(key) = self.cfg.credential()? {
            headers.push(("authorization".to_string(), format!("Bearer {key}")));
        }
        let mut body = json!({
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        });
        if let Some(t) = self.cfg.temperature {
            body["temperature"] = json!(t);
        }
        let url = format!("{}/chat/completions", self.cfg.endpoint.trim_end_matches('/'));
        let reply = post_json(&self.cfg.id, &url, &headers, &body, &self.cfg.policy())?;
        reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Error::provider(&self.cfg.id, "response has no message content"))
    }
}

struct Anthropic {
    cfg: ProviderConfig,
}

impl ChatProvider for Anthropic {
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        let key = self
            .cfg
            .credential()?
            .ok_or_else(|| Error::Config(format!("provider `{}` needs a credential", self.cfg.id)))?;
        let headers = vec![
            ("x-api-key".to_string(), key),
            ("anthropic-version".to_string(), "2023-06-01".to_string()),
        ];
        let mut body = json!({
            "model": self.cfg.model,
            "max_tokens": self.cfg.max_tokens,
            "system": request.system,
            "messages": [{"role": "user", "content": request.user}],
        });
        if let Some(t) = self.cfg.temperature {
            body["temperature"] = json!(t);
        }
        let url = format!("{}/v1/messages", self.cfg.endpoint.trim_end_matches('/'));
        let reply = post_json(&self.cfg.id, &url, &headers, &body, &self.cfg.policy())?;
        let text: String = reply
            .get("content")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::provider(&self.cfg.id, "response has no content blocks"))?
            .iter()
            .filter(|b| b.get("type").and_then(Value::as_str) == Some("text"))
            .filter_map(|b| b.get("text").and_then(Value::as_str))
            .collect();
        if text.is_empty() {
            return Err(Error::provider(&self.cfg.id, "response has no text"));
        }
        Ok(text)
    }
}
