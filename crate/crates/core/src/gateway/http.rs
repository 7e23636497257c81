//! Blocking JSON POST with timeout and exponential-backoff retries.

use std::sync::OnceLock;
use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct HttpPolicy {
    pub timeout: Duration,
    /// Extra attempts after the first.
    pub max_retries: u32,
    pub backoff: Duration,
}

fn client() -> &'static Client {
    static CLIENT: OnceLock<Client> = OnceLock::new();
    CLIENT.get_or_init(|| Client::builder().build().expect("http client"))
}

fn retryable(status: StatusCode) -> bool {
    status == StatusCode::TOO_MANY_REQUESTS || status == StatusCode::REQUEST_TIMEOUT || status.is_server_error()
}

pub(crate) fn post_json(
    provider: &str,
    url: &str,
    headers: &[(String, String)],
    body: &Value,
    policy: &HttpPolicy,
) -> Result<Value> {
    let mut last = String::new();
    for attempt in 0..=policy.max_retries {
        if attempt > 0 {
            let wait = policy.backoff * 2u32.saturating_pow(attempt - 1);
            log::warn!("{provider}: retrying in {wait:?} after: {last}");
            thread::sleep(wait);
        }
        let mut req = client().post(url).timeout(policy.timeout).json(body);
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        match req.send() {
            Ok(resp) => {
                let status = resp.status();
                let text = resp.text().unwrap_or_default();
                if status.is_success() {
                    return serde_json::from_str(&text)
                        .map_err(|e| Error::provider(provider, format!("response is not JSON: {e}")));
                }
                last = format!("HTTP {status}: {}", truncate(&text, 300));
                if !retryable(status) {
                    break;
                }
            }
            Err(e) => last = e.to_string(),
        }
    }
    Err(Error::provider(provider, last))
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}
