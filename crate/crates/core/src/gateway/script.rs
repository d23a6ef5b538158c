//! Deterministic scripted backend for tests, demos, and fixtures.
//!
//! A script file is a JSON document:
//!
//! ```json
//! {
//!   "entries": [
//!     {"match": {"phase": "introduction", "turn": 0}, "result": {"text": "Glad you're here."}},
//!     {"match": {"phase": "active_coaching", "pattern": "guitar"}, "result": {"text": "..."}},
//!     {"match": {"task": "theme_summary"}, "result": {"text": "{\"themes\": [\"sleep\"]}"}}
//!   ]
//! }
//! ```
//!
//! Turn entries are matched on the phase-local user turn index. Pattern
//! entries are case-insensitive regexes over the user text and are only
//! consulted when no turn entry matches; the first matching pattern wins.

use std::collections::HashSet;
use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GatewayError, LlmGateway, LlmParams, LlmResult};
use crate::domain::Phase;
use crate::engine::prompt::{PromptBundle, PromptTask};

pub const FALLBACK_TEXT: &str = "Thanks for sharing that with me. Could you tell me a little more?";

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("script format error: {0}")]
    ScriptFormatError(String),
    #[error("duplicate script entry for {0}")]
    DuplicateScriptEntry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxTask {
    StyleClassification,
    ThemeSummary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptMatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<AuxTask>,
}

impl ScriptMatch {
    pub fn turn(phase: Phase, turn: u32) -> Self {
        Self { phase: Some(phase), turn: Some(turn), pattern: None, task: None }
    }

    pub fn pattern(phase: Phase, pattern: impl Into<String>) -> Self {
        Self { phase: Some(phase), turn: None, pattern: Some(pattern.into()), task: None }
    }

    pub fn task(task: AuxTask) -> Self {
        Self { phase: None, turn: None, pattern: None, task: Some(task) }
    }

    fn key(&self) -> Result<Key, ScriptError> {
        match (self.phase, self.turn, &self.pattern, self.task) {
            (Some(p), Some(t), None, None) => Ok(Key::Turn(p, t)),
            (Some(p), None, Some(pat), None) => Ok(Key::Pattern(p, pat.clone())),
            (None, None, None, Some(task)) => Ok(Key::Task(task)),
            _ => Err(ScriptError::ScriptFormatError(format!(
                "match needs phase with exactly one of turn/pattern, or a task alone: {self:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Key {
    Turn(Phase, u32),
    Pattern(Phase, String),
    Task(AuxTask),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    #[serde(rename = "match")]
    pub matcher: ScriptMatch,
    pub result: LlmResult,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    #[serde(default)]
    entries: Vec<ScriptEntry>,
    #[serde(default)]
    fallback: Option<LlmResult>,
}

#[derive(Debug, Clone)]
struct Compiled {
    key: Key,
    regex: Option<Regex>,
    result: LlmResult,
}

/// A validated script.
#[derive(Debug, Clone)]
pub struct Script {
    entries: Vec<Compiled>,
    fallback: LlmResult,
}

impl Default for Script {
    fn default() -> Self {
        Self { entries: Vec::new(), fallback: LlmResult::text(FALLBACK_TEXT) }
    }
}

impl Script {
    pub fn new(entries: Vec<ScriptEntry>) -> Result<Self, ScriptError> {
        let mut seen = HashSet::new();
        let mut compiled = Vec::with_capacity(entries.len());
        for e in entries {
            let key = e.matcher.key()?;
            if !seen.insert(key.clone()) {
                return Err(ScriptError::DuplicateScriptEntry(format!("{key:?}")));
            }
            let regex = match &key {
                Key::Pattern(_, p) => Some(
                    RegexBuilder::new(p)
                        .case_insensitive(true)
                        .build()
                        .map_err(|err| ScriptError::ScriptFormatError(format!("bad pattern `{p}`: {err}")))?,
                ),
                _ => None,
            };
            compiled.push(Compiled { key, regex, result: e.result });
        }
        Ok(Self { entries: compiled, ..Self::default() })
    }

    pub fn with_fallback(mut self, fallback: LlmResult) -> Self {
        self.fallback = fallback;
        self
    }

    pub fn from_json(text: &str) -> Result<Self, ScriptError> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        let file: ScriptFile =
            serde_json::from_str(text).map_err(|e| ScriptError::ScriptFormatError(e.to_string()))?;
        let script = Self::new(file.entries)?;
        Ok(match file.fallback {
            Some(f) => script.with_fallback(f),
            None => script,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn fallback(&self) -> &LlmResult {
        &self.fallback
    }

    /// Result for a bundle: exact turn entry, else first matching pattern,
    /// else the fallback.
    pub fn resolve(&self, bundle: &PromptBundle) -> &LlmResult {
        match bundle.task {
            PromptTask::Coaching(phase) => {
                if bundle.user_text.trim().is_empty() {
                    return &self.fallback;
                }
                let by_turn = self
                    .entries
                    .iter()
                    .find(|e| e.key == Key::Turn(phase, bundle.phase_turn));
                let by_pattern = || {
                    self.entries.iter().find(|e| {
                        matches!(&e.key, Key::Pattern(p, _) if *p == phase)
                            && e.regex.as_ref().is_some_and(|r| r.is_match(&bundle.user_text))
                    })
                };
                by_turn.or_else(by_pattern).map_or(&self.fallback, |e| &e.result)
            }
            PromptTask::StyleClassification => self.by_task(AuxTask::StyleClassification),
            PromptTask::ThemeSummary => self.by_task(AuxTask::ThemeSummary),
        }
    }

    fn by_task(&self, task: AuxTask) -> &LlmResult {
        self.entries
            .iter()
            .find(|e| e.key == Key::Task(task))
            .map_or(&self.fallback, |e| &e.result)
    }
}

/// Reads and validates a script file.
pub fn load_script(path: impl AsRef<Path>) -> Result<Script, ScriptError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| ScriptError::ScriptFormatError(format!("{}: {e}", path.as_ref().display())))?;
    Script::from_json(&text)
}

/// Replays a script. Holds no per-session state: the turn index travels
/// in the prompt bundle.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    script: Script,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        Self { script }
    }

    pub fn script(&self) -> &Script {
        &self.script
    }
}

impl LlmGateway for ScriptedBackend {
    fn complete(&self, bundle: &PromptBundle, _params: &LlmParams) -> Result<LlmResult, GatewayError> {
        Ok(self.script.resolve(bundle).clone())
    }
}
