use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bevs::{bevs_step, save_payload, BevsDirective};
use super::distress::{distress_guard, Lexicon};
use super::markers::parse_markers;
use super::prompt::{build_prompt, PromptExtras, DEFAULT_HISTORY_WINDOW, SAVE_PROFILE_TOOL};
use crate::domain::{BevsRecord, Phase, Turn, UserId, UserProfile};
use crate::gateway::{repair_tool_payload, GatewayError, LlmGateway, LlmParams, ToolCall};
use crate::store::{ProfileStore, Section, StoreError, ToolCallPatch};

pub const RETRY_MESSAGE: &str = "Sorry, I couldn't respond just now. Please try sending that again in a moment.";

/// Used when the model's reply is empty once markers and payloads are removed.
pub const EMPTY_REPLY_TEXT: &str = "Thanks, I've noted that.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub user_id: UserId,
    pub phase: Phase,
    pub history: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_bevs: Option<BevsRecord>,
    pub turn_count: u32,
    /// User turns taken in the current phase.
    pub phase_turn: u32,
    /// Held for the session only; never persisted.
    #[serde(skip)]
    pub display_name: Option<String>,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub history_window: usize,
    pub lexicon: Lexicon,
    pub params: LlmParams,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { history_window: DEFAULT_HISTORY_WINDOW, lexicon: Lexicon::default(), params: LlmParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchOutcome {
    pub sections: Vec<String>,
    /// `None` when applied; otherwise the rejection code.
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl PatchOutcome {
    pub fn applied(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineOutput {
    pub reply_text: String,
    pub transition: Option<Phase>,
    /// Phase after this turn.
    pub phase: Phase,
    pub applied_patches: Vec<PatchOutcome>,
    pub resource_footer_attached: bool,
    pub created_goals: Vec<String>,
    pub completed_goals: Vec<String>,
    pub rescheduled_goals: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub illegal_transition: Option<Phase>,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("message is empty")]
    EmptyMessage,
    #[error("{retry_message}")]
    GatewayUnavailable { retry_message: String, source: GatewayError },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Where a returning student picks up.
pub fn resume_phase(profile: &UserProfile) -> Phase {
    if !profile.intro_complete {
        Phase::Introduction
    } else if !profile.bevs_done() {
        Phase::ValuesCheckIn
    } else if profile.mental_health_goals.is_empty() {
        Phase::GoalSetting
    } else {
        Phase::ActiveCoaching
    }
}

pub fn start_session(user: &UserId, store: &ProfileStore, history_window: usize) -> Result<SessionState, StoreError> {
    let profile = store.profile(user)?;
    let transcript = store.transcript(user)?;
    let history = transcript[transcript.len().saturating_sub(history_window)..]
        .iter()
        .map(|t| t.turn.clone())
        .collect();
    Ok(SessionState {
        user_id: user.clone(),
        phase: resume_phase(&profile),
        history,
        pending_bevs: None,
        turn_count: 0,
        phase_turn: 0,
        display_name: None,
    })
}

/// Extra conditions on an otherwise legal edge.
fn transition_ready(to: Phase, profile: &UserProfile) -> bool {
    match to {
        Phase::ValuesCheckIn => profile.intro_complete,
        Phase::GoalSetting => profile.bevs_done(),
        Phase::ActiveCoaching => !profile.mental_health_goals.is_empty(),
        Phase::Introduction => false,
    }
}

fn has_section_keys(doc: &serde_json::Value) -> bool {
    doc.as_object().is_some_and(|o| !o.is_empty() && o.keys().all(|k| Section::from_key(k).is_some()))
}

fn patch_sections(payload: &serde_json::Value) -> Vec<String> {
    payload.as_object().map(|o| o.keys().cloned().collect()).unwrap_or_default()
}

/// Processes one student message.
///
/// The session is updated only on success; when the model is unreachable
/// nothing is recorded and the caller shows the retry message.
pub fn advance(
    session: &mut SessionState,
    user_text: &str,
    gateway: &dyn LlmGateway,
    store: &ProfileStore,
    config: &EngineConfig,
    now: DateTime<Utc>,
) -> Result<EngineOutput, EngineError> {
    let user_text = user_text.trim();
    if user_text.is_empty() {
        return Err(EngineError::EmptyMessage);
    }
    let mut s = session.clone();
    let profile = store.profile(&s.user_id)?;
    let persona = store.settings(&s.user_id)?.persona;

    let mut directives = Vec::new();
    let footer = distress_guard(user_text, &config.lexicon);
    if let Some(d) = footer {
        directives.push(d.to_string());
    }

    let mut bevs_update = None;
    if s.phase == Phase::ValuesCheckIn {
        let record = s.pending_bevs.take().filter(|r| !r.is_done()).unwrap_or_else(|| BevsRecord::new(now));
        let (record, directive) = bevs_step(record, user_text, now).expect("record is not done");
        directives.push(directive.instruction());
        bevs_update = Some((record, directive));
    }

    let extras = PromptExtras {
        phase_turn: s.phase_turn,
        bevs: bevs_update.as_ref().map(|(r, _)| r),
        directives,
        display_name: s.display_name.as_deref(),
        user_text,
        history_window: Some(config.history_window),
    };
    let bundle = build_prompt(s.phase, &profile, &s.history, &persona, &extras);
    let result = gateway.complete(&bundle, &config.params).map_err(|source| {
        tracing::warn!(error = %source, "model call failed");
        EngineError::GatewayUnavailable { retry_message: RETRY_MESSAGE.into(), source }
    })?;

    let user_turn = Turn::user(user_text, now);
    store.append_transcript(&s.user_id, &user_turn, s.display_name.as_deref())?;

    let mut text = result.text.clone();
    let mut calls = result.tool_calls.clone();
    if calls.is_empty() {
        if let Ok(found) = repair_tool_payload(&text) {
            if has_section_keys(&found.document) {
                text.replace_range(found.span, "");
                calls.push(ToolCall { tool_name: SAVE_PROFILE_TOOL.into(), payload: found.document });
            }
        }
    }

    let mut out = EngineOutput {
        reply_text: String::new(),
        transition: None,
        phase: s.phase,
        applied_patches: Vec::new(),
        resource_footer_attached: footer.is_some(),
        created_goals: Vec::new(),
        completed_goals: Vec::new(),
        rescheduled_goals: Vec::new(),
        illegal_transition: None,
    };
    let mut saved_any = false;

    for call in calls {
        let sections = patch_sections(&call.payload);
        let rejection = if call.tool_name != SAVE_PROFILE_TOOL {
            Some(("unknown_tool".to_string(), call.tool_name.clone()))
        } else if s.phase == Phase::ValuesCheckIn {
            Some(("engine_owned".to_string(), "values check-in is saved by the engine".to_string()))
        } else {
            let patch = ToolCallPatch::new(s.phase, call.payload);
            match store.save_profile(&s.user_id, &patch, now, s.display_name.as_deref()) {
                Ok(res) => {
                    saved_any = true;
                    if let Some(name) = res.outcome.display_name {
                        store.redact_name(&s.user_id, &name)?;
                        s.display_name = Some(name);
                    }
                    out.created_goals.extend(res.outcome.created_goals);
                    out.completed_goals.extend(res.outcome.completed_goals);
                    out.rescheduled_goals.extend(res.outcome.rescheduled_goals);
                    None
                }
                Err(e) => Some((e.code().to_string(), e.to_string())),
            }
        };
        if let Some((code, detail)) = &rejection {
            tracing::info!(%code, %detail, "tool call rejected");
        }
        let (error, detail) = match rejection {
            Some((c, d)) => (Some(c), Some(d)),
            None => (None, None),
        };
        out.applied_patches.push(PatchOutcome { sections, error, detail });
    }

    let mut forced = None;
    if let Some((record, directive)) = bevs_update {
        if directive == BevsDirective::Save {
            let patch = ToolCallPatch::new(Phase::ValuesCheckIn, save_payload(&record));
            match store.save_profile(&s.user_id, &patch, now, s.display_name.as_deref()) {
                Ok(_) => {
                    forced = Some(Phase::GoalSetting);
                    out.applied_patches.push(PatchOutcome { sections: vec!["bevs".into()], error: None, detail: None });
                }
                Err(e) => {
                    tracing::warn!(error = %e, "values check-in save failed");
                    out.applied_patches.push(PatchOutcome {
                        sections: vec!["bevs".into()],
                        error: Some(e.code().into()),
                        detail: Some(e.to_string()),
                    });
                    s.pending_bevs = Some(record);
                }
            }
        } else {
            s.pending_bevs = Some(record);
        }
    }

    let profile = store.profile(&s.user_id)?;
    if s.phase == Phase::Introduction && saved_any && profile.intro_complete {
        forced = Some(Phase::ValuesCheckIn);
    }

    let parsed = parse_markers(&text, s.phase);
    out.illegal_transition = parsed.illegal;
    let mut transition = forced.or(parsed.transition);
    if let Some(to) = transition {
        if !transition_ready(to, &profile) {
            tracing::warn!(from = %s.phase, to = %to, "transition preconditions not met");
            if forced.is_none() {
                out.illegal_transition = Some(to);
            }
            transition = None;
        }
    }

    let reply = if parsed.clean_text.is_empty() { EMPTY_REPLY_TEXT.to_string() } else { parsed.clean_text };
    let coach_turn = Turn::coach(reply.clone(), now);
    store.append_transcript(&s.user_id, &coach_turn, s.display_name.as_deref())?;

    s.history.push(user_turn);
    s.history.push(coach_turn);
    let excess = s.history.len().saturating_sub(config.history_window);
    s.history.drain(..excess);
    s.turn_count += 1;
    match transition {
        Some(to) => {
            s.phase = to;
            s.phase_turn = 0;
            s.pending_bevs = None;
        }
        None => s.phase_turn += 1,
    }
    out.reply_text = reply;
    out.transition = transition;
    out.phase = s.phase;
    *session = s;
    Ok(out)
}
