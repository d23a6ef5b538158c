//! Language-model backends behind one completion-with-tools interface.

mod http;
mod repair;
mod script;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::engine::prompt::PromptBundle;

pub use http::{chat_request, parse_chat_response, HttpBackend, HttpConfig};
pub use repair::{repair_tool_payload, ExtractedPayload, NoPayload};
pub use script::{load_script, AuxTask, Script, ScriptEntry, ScriptError, ScriptMatch, ScriptedBackend, FALLBACK_TEXT};

/// Sampling parameters. Set from configuration, never by the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmParams {
    pub temperature: f32,
    pub max_tokens: u32,
    pub model_name: String,
}

impl Default for LlmParams {
    fn default() -> Self {
        Self { temperature: 0.7, max_tokens: 512, model_name: "gpt-4o-mini".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool_name: String,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LlmResult {
    pub text: String,
    #[serde(default)]
    pub tool_calls: Vec<ToolCall>,
}

impl LlmResult {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), tool_calls: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("language model unavailable: {0}")]
    Unavailable(String),
    #[error("provider protocol error: {0}")]
    ProviderProtocol(String),
}

pub trait LlmGateway: Send + Sync {
    fn complete(&self, bundle: &PromptBundle, params: &LlmParams) -> Result<LlmResult, GatewayError>;
}

impl<T: LlmGateway + ?Sized> LlmGateway for std::sync::Arc<T> {
    fn complete(&self, bundle: &PromptBundle, params: &LlmParams) -> Result<LlmResult, GatewayError> {
        (**self).complete(bundle, params)
    }
}

impl<T: LlmGateway + ?Sized> LlmGateway for &T {
    fn complete(&self, bundle: &PromptBundle, params: &LlmParams) -> Result<LlmResult, GatewayError> {
        (**self).complete(bundle, params)
    }
}

/// A backend that always fails; used when no model is configured and in
/// failure-path tests.
#[derive(Debug, Clone, Default)]
pub struct UnavailableBackend;

impl LlmGateway for UnavailableBackend {
    fn complete(&self, _: &PromptBundle, _: &LlmParams) -> Result<LlmResult, GatewayError> {
        Err(GatewayError::Unavailable("no backend configured".into()))
    }
}
