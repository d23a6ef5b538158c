//! Chat-completions backend for OpenAI-compatible endpoints.

use std::time::Duration;

use serde_json::{json, Value};

use super::{GatewayError, LlmGateway, LlmParams, LlmResult, ToolCall};
use crate::engine::prompt::{PromptBundle, SAVE_PROFILE_TOOL};

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            api_key: None,
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(60),
        }
    }
}

impl HttpConfig {
    /// Reads `GROW_LLM_ENDPOINT` and `GROW_LLM_API_KEY`. Returns `None`
    /// when no key is set.
    pub fn from_env() -> Option<Self> {
        let api_key = std::env::var("GROW_LLM_API_KEY").ok().filter(|k| !k.is_empty())?;
        let mut cfg = Self { api_key: Some(api_key), ..Self::default() };
        if let Ok(ep) = std::env::var("GROW_LLM_ENDPOINT") {
            if !ep.is_empty() {
                cfg.endpoint = ep;
            }
        }
        Some(cfg)
    }
}

/// Request body for one bundle.
pub fn chat_request(bundle: &PromptBundle, params: &LlmParams) -> Value {
    let mut messages = vec![json!({"role": "system", "content": bundle.full_system_text()})];
    for ex in &bundle.few_shot {
        messages.push(json!({"role": "user", "content": ex.user}));
        messages.push(json!({"role": "assistant", "content": ex.coach}));
    }
    if !bundle.user_text.is_empty() {
        messages.push(json!({"role": "user", "content": bundle.user_text}));
    }
    let mut body = json!({
        "model": params.model_name,
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
        "messages": messages,
    });
    if let Some(schema) = &bundle.tool_schema {
        body["tools"] = json!([{
            "type": "function",
            "function": {
                "name": SAVE_PROFILE_TOOL,
                "description": "Save structured profile fields gathered in this conversation.",
                "parameters": schema,
            }
        }]);
    }
    body
}

/// Extracts text and tool calls from a response body. Tool calls whose
/// arguments are not a JSON object are dropped.
pub fn parse_chat_response(body: &Value) -> Result<LlmResult, GatewayError> {
    let message = body
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .ok_or_else(|| GatewayError::ProviderProtocol("response has no choices[0].message".into()))?;
    let text = message.get("content").and_then(Value::as_str).unwrap_or_default().to_string();
    let mut tool_calls = Vec::new();
    for call in message.get("tool_calls").and_then(Value::as_array).into_iter().flatten() {
        let Some(function) = call.get("function") else { continue };
        let Some(name) = function.get("name").and_then(Value::as_str) else { continue };
        let payload = match function.get("arguments") {
            Some(Value::String(s)) => serde_json::from_str::<Value>(s).ok(),
            Some(v @ Value::Object(_)) => Some(v.clone()),
            _ => None,
        };
        match payload {
            Some(p @ Value::Object(_)) => tool_calls.push(ToolCall { tool_name: name.to_string(), payload: p }),
            _ => tracing::warn!(tool = name, "dropping tool call with malformed arguments"),
        }
    }
    Ok(LlmResult { text, tool_calls })
}

pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Self { config, agent }
    }

    fn attempt(&self, body: &Value) -> Result<Value, Attempt> {
        let mut req = self.agent.post(&self.config.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("status {status}")));
        }
        if status >= 400 {
            return Err(Attempt::Fatal(GatewayError::ProviderProtocol(format!("status {status}"))));
        }
        resp.body_mut()
            .read_json::<Value>()
            .map_err(|e| Attempt::Fatal(GatewayError::ProviderProtocol(format!("unreadable body: {e}"))))
    }
}

enum Attempt {
    Retry(String),
    Fatal(GatewayError),
}

impl LlmGateway for HttpBackend {
    fn complete(&self, bundle: &PromptBundle, params: &LlmParams) -> Result<LlmResult, GatewayError> {
        if bundle.is_empty() {
            return Err(GatewayError::ProviderProtocol("empty prompt".into()));
        }
        let body = chat_request(bundle, params);
        let mut backoff = self.config.initial_backoff;
        let mut last = String::new();
        for attempt in 0..self.config.max_attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
            match self.attempt(&body) {
                Ok(v) => return parse_chat_response(&v),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    tracing::warn!(attempt, %msg, "model call failed");
                    last = msg;
                }
            }
        }
        Err(GatewayError::Unavailable(last))
    }
}
