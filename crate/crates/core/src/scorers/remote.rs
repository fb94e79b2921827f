//! Minimal blocking client for an OpenAI-style chat-completion endpoint.

use std::fs;
use std::path::Path;
use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use super::ScorerError;

pub const ENV_API_BASE: &str = "EGO_API_BASE";
pub const ENV_API_KEY: &str = "EGO_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointConfig {
    /// Base URL; requests go to `<base>/chat/completions`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

impl EndpointConfig {
    /// Reads `EGO_API_BASE` and `EGO_API_KEY`. Returns `None` when no base
    /// URL is configured.
    pub fn from_env(model: impl Into<String>, timeout: Duration) -> Option<Self> {
        let base_url = std::env::var(ENV_API_BASE).ok().filter(|s| !s.trim().is_empty())?;
        Some(Self {
            base_url,
            api_key: std::env::var(ENV_API_KEY).ok().filter(|s| !s.is_empty()),
            model: model.into(),
            timeout,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ChatClient {
    config: EndpointConfig,
    agent: ureq::Agent,
}

impl ChatClient {
    pub fn new(config: EndpointConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    /// Sends one user message (text plus optional image) and returns the
    /// assistant's text.
    pub fn complete(&self, prompt: &str, image: Option<&Path>) -> Result<String, ScorerError> {
        let mut content = vec![json!({"type": "text", "text": prompt})];
        if let Some(url) = image.and_then(image_data_url) {
            content.push(json!({"type": "image_url", "image_url": {"url": url}}));
        }
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": 0,
        });
        let mut req = self.agent.post(&self.url());
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| ScorerError::InferException(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(ScorerError::InferException(format!("endpoint returned {status}")));
        }
        let value: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| ScorerError::InferException(format!("bad response body: {e}")))?;
        response_text(&value)
            .ok_or_else(|| ScorerError::InferException("response has no message content".into()))
    }
}

/// Assistant text from a chat-completion response, accepting both string
/// content and a list of text parts.
fn response_text(v: &Value) -> Option<String> {
    let content = v.get("choices")?.get(0)?.get("message")?.get("content")?;
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => {
            let text: Vec<&str> = parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect();
            (!text.is_empty()).then(|| text.concat())
        }
        _ => None,
    }
}

fn image_data_url(path: &Path) -> Option<String> {
    let bytes = fs::read(path).ok()?;
    let mime = match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "webp" => "image/webp",
        _ => return None,
    };
    let b64 = base64::engine::general_purpose::STANDARD.encode(bytes);
    Some(format!("data:{mime};base64,{b64}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_string_and_part_content() {
        let a = json!({"choices": [{"message": {"content": "hi"}}]});
        assert_eq!(response_text(&a).as_deref(), Some("hi"));
        let b = json!({"choices": [{"message": {"content": [{"type": "text", "text": "a"}, {"text": "b"}]}}]});
        assert_eq!(response_text(&b).as_deref(), Some("ab"));
        assert!(response_text(&json!({"choices": []})).is_none());
    }

    #[test]
    fn unreachable_endpoint_is_infer_exception() {
        let c = ChatClient::new(EndpointConfig {
            base_url: "http://127.0.0.1:9".into(),
            api_key: None,
            model: "m".into(),
            timeout: Duration::from_millis(500),
        });
        assert!(matches!(c.complete("x", None), Err(ScorerError::InferException(_))));
    }
}
