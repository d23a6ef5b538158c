//! Dashboard computations.

use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::domain::{
    div_round_half_away, BevsRecord, CommunicationStyle, EmotionalStyle, Goal, GoalStatus, MessageLength,
    Speaker, ThinkingStyle, Tone, Turn, ValueDomain,
};
use crate::engine::prompt::{render_history, PromptBundle, PromptTask, COMMUNICATION_STYLE, THEMES};
use crate::gateway::{repair_tool_payload, LlmGateway, LlmParams};
use crate::resources::SupportResource;
use crate::scheduler::CheckinEvent;

pub const DEFAULT_CONSISTENCY_WINDOW: u32 = 7;
pub const MAX_THEMES: usize = 5;
pub const MAX_THEME_WORDS: usize = 8;

pub const SHORT_MAX_AVG_WORDS: f64 = 12.0;
pub const EXPRESSIVE_MIN_RATE: f64 = 0.2;
pub const DATA_DRIVEN_MIN_RATIO: f64 = 0.05;
pub const CASUAL_MIN_RATE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("not enough data")]
    InsufficientData,
    #[error("values check-in not finished")]
    NotReady,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverallProgress {
    pub percent: u8,
    pub active_count: usize,
}

/// Mean progress over active goals, rounded half away from zero.
pub fn overall_goal_progress(goals: &[Goal]) -> OverallProgress {
    let active: Vec<u64> = goals
        .iter()
        .filter(|g| g.status == GoalStatus::Active)
        .map(|g| u64::from(g.progress))
        .collect();
    if active.is_empty() {
        return OverallProgress { percent: 0, active_count: 0 };
    }
    let mean = div_round_half_away(active.iter().sum(), active.len() as u64);
    OverallProgress { percent: mean.min(100) as u8, active_count: active.len() }
}

/// Share of the trailing `window` days (ending today) with at least one
/// check-in, as a rounded percentage.
pub fn checkin_consistency(checkin_days: &[NaiveDate], today: NaiveDate, window: u32) -> u8 {
    if window == 0 {
        return 0;
    }
    let first = today - Duration::days(i64::from(window) - 1);
    let days: BTreeSet<NaiveDate> = checkin_days.iter().copied().filter(|d| *d >= first && *d <= today).collect();
    div_round_half_away(100 * days.len() as u64, u64::from(window)) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleMetrics {
    pub avg_words_per_user_message: f64,
    /// Share of messages with at least one emoji or exclamation mark.
    pub emoji_or_exclaim_rate: f64,
    /// Share of word tokens containing a digit.
    pub digit_token_ratio: f64,
    /// Share of word tokens that are contractions or common slang.
    pub contraction_slang_rate: f64,
}

const SLANG: [&str; 24] = [
    "lol", "lmao", "omg", "gonna", "wanna", "gotta", "kinda", "sorta", "yeah", "yep", "nah", "idk", "tbh",
    "imo", "btw", "ya", "yo", "dude", "cool", "super", "lowkey", "highkey", "bro", "ok",
];

fn is_emoji(c: char) -> bool {
    matches!(u32::from(c), 0x1F000..=0x1FAFF | 0x2600..=0x27BF)
}

fn is_contraction(token: &str) -> bool {
    let t = token.replace('\u{2019}', "'");
    let core = t.trim_matches(|c: char| !c.is_alphanumeric());
    match core.find('\'') {
        Some(i) => i > 0 && i + 1 < core.len(),
        None => false,
    }
}

fn is_slang(token: &str) -> bool {
    let core: String = token.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
    SLANG.contains(&core.as_str())
}

pub fn style_metrics<S: AsRef<str>>(user_messages: &[S]) -> Result<StyleMetrics, MetricsError> {
    if user_messages.is_empty() {
        return Err(MetricsError::InsufficientData);
    }
    let n = user_messages.len() as f64;
    let mut words = 0usize;
    let mut flagged = 0usize;
    let mut digit = 0usize;
    let mut casual = 0usize;
    for m in user_messages {
        let m = m.as_ref();
        if m.chars().any(|c| c == '!' || is_emoji(c)) {
            flagged += 1;
        }
        for tok in m.split_whitespace() {
            words += 1;
            if tok.chars().any(|c| c.is_ascii_digit()) {
                digit += 1;
            }
            if is_contraction(tok) || is_slang(tok) {
                casual += 1;
            }
        }
    }
    let per_token = |x: usize| if words == 0 { 0.0 } else { x as f64 / words as f64 };
    Ok(StyleMetrics {
        avg_words_per_user_message: words as f64 / n,
        emoji_or_exclaim_rate: flagged as f64 / n,
        digit_token_ratio: per_token(digit),
        contraction_slang_rate: per_token(casual),
    })
}

/// Threshold rules used when no model is available or its answer is invalid.
pub fn fallback_style(m: &StyleMetrics) -> CommunicationStyle {
    CommunicationStyle {
        tone: if m.contraction_slang_rate >= CASUAL_MIN_RATE { Tone::Casual } else { Tone::Formal },
        length: if m.avg_words_per_user_message <= SHORT_MAX_AVG_WORDS { MessageLength::Short } else { MessageLength::Long },
        emotional_style: if m.emoji_or_exclaim_rate >= EXPRESSIVE_MIN_RATE {
            EmotionalStyle::Expressive
        } else {
            EmotionalStyle::Neutral
        },
        thinking_style: if m.digit_token_ratio >= DATA_DRIVEN_MIN_RATIO {
            ThinkingStyle::DataDriven
        } else {
            ThinkingStyle::ExperienceBased
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleSource {
    Model,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleClassification {
    pub style: CommunicationStyle,
    pub metrics: StyleMetrics,
    pub source: StyleSource,
}

fn aux_bundle(task: PromptTask, instructions: String) -> PromptBundle {
    PromptBundle {
        task,
        phase_turn: 0,
        system: String::new(),
        instructions,
        few_shot: Vec::new(),
        directives: Vec::new(),
        history: Vec::new(),
        user_text: String::new(),
        tool_schema: None,
    }
}

/// Classifies from user-authored messages only. The model's answer is
/// accepted only if it is exactly the four-key record.
pub fn classify_style<S: AsRef<str>>(
    user_messages: &[S],
    gateway: Option<&dyn LlmGateway>,
    params: &LlmParams,
) -> Result<StyleClassification, MetricsError> {
    let metrics = style_metrics(user_messages)?;
    if let Some(gw) = gateway {
        let transcript: Vec<String> = user_messages.iter().map(|m| format!("User: {}", m.as_ref())).collect();
        let metrics_text = format!(
            "- avg_words_per_user_message: {:.2}\n- emoji_or_exclaim_rate: {:.2}\n- digit_token_ratio: {:.3}\n- contraction_slang_rate: {:.3}",
            metrics.avg_words_per_user_message,
            metrics.emoji_or_exclaim_rate,
            metrics.digit_token_ratio,
            metrics.contraction_slang_rate
        );
        let instructions = COMMUNICATION_STYLE
            .replace("[metrics]", &metrics_text)
            .replace("[transcript]", &transcript.join("\n"));
        let bundle = aux_bundle(PromptTask::StyleClassification, instructions);
        match gw.complete(&bundle, params) {
            Ok(res) => {
                let parsed = repair_tool_payload(&res.text)
                    .ok()
                    .and_then(|p| serde_json::from_value::<CommunicationStyle>(p.document).ok());
                match parsed {
                    Some(style) => return Ok(StyleClassification { style, metrics, source: StyleSource::Model }),
                    None => tracing::info!("style answer failed validation; using thresholds"),
                }
            }
            Err(e) => tracing::info!(error = %e, "style model unavailable; using thresholds"),
        }
    }
    Ok(StyleClassification { style: fallback_style(&metrics), metrics, source: StyleSource::Fallback })
}

/// Convenience for transcripts: keeps only the student's lines.
pub fn user_messages(history: &[Turn]) -> Vec<&str> {
    history.iter().filter(|t| t.speaker == Speaker::User).map(|t| t.text.as_str()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThemeSummary {
    pub themes: Vec<String>,
    /// True when the list is the previously stored one because a fresh
    /// summary could not be produced.
    pub stale: bool,
}

fn clean_themes(doc: &Value) -> Option<Vec<String>> {
    let items = doc.get("themes")?.as_array()?;
    let mut out: Vec<String> = Vec::new();
    for item in items {
        let Some(s) = item.as_str() else { continue };
        let t = s.split_whitespace().collect::<Vec<_>>().join(" ");
        let wc = t.split(' ').filter(|w| !w.is_empty()).count();
        if wc == 0 || wc > MAX_THEME_WORDS {
            continue;
        }
        if !out.iter().any(|o| o.eq_ignore_ascii_case(&t)) {
            out.push(t);
        }
        if out.len() == MAX_THEMES {
            break;
        }
    }
    Some(out)
}

pub fn summarize_themes(
    history: &[Turn],
    gateway: &dyn LlmGateway,
    params: &LlmParams,
    previous: &[String],
) -> Result<ThemeSummary, MetricsError> {
    if history.is_empty() {
        return Err(MetricsError::InsufficientData);
    }
    let bundle = aux_bundle(PromptTask::ThemeSummary, THEMES.replace("[transcript]", &render_history(history)));
    let fresh = gateway
        .complete(&bundle, params)
        .ok()
        .and_then(|r| repair_tool_payload(&r.text).ok())
        .and_then(|p| clean_themes(&p.document));
    Ok(match fresh {
        Some(themes) => ThemeSummary { themes, stale: false },
        None => ThemeSummary { themes: previous.to_vec(), stale: true },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DartboardEntry {
    pub domain: ValueDomain,
    pub score: u8,
    /// Distance from the bull's-eye in [0, 1]; closer means better aligned.
    pub radius: f64,
}

pub fn dart_radius(score: u8) -> f64 {
    f64::from(8 - score.clamp(1, 7)) / 7.0
}

pub fn dartboard_view(bevs: Option<&BevsRecord>) -> Result<Vec<DartboardEntry>, MetricsError> {
    let rec = bevs.filter(|b| b.is_done()).ok_or(MetricsError::NotReady)?;
    ValueDomain::ALL
        .iter()
        .map(|d| {
            let score = rec.score_for(*d).ok_or(MetricsError::NotReady)?;
            Ok(DartboardEntry { domain: *d, score, radius: dart_radius(score) })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalView {
    pub goal_id: String,
    pub description: String,
    pub duration_days: u32,
    pub next_steps: Vec<String>,
    pub progress: u8,
    pub status: GoalStatus,
    pub scheduled_checkins: Vec<CheckinEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Insights {
    pub themes: Vec<String>,
    pub themes_stale: bool,
    pub style: Option<CommunicationStyle>,
    pub dartboard: Vec<DartboardEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DashboardPayload {
    pub display_phase: String,
    pub overall_progress: u8,
    pub active_goal_count: usize,
    pub consistency: u8,
    pub goals_view: Vec<GoalView>,
    pub insights: Insights,
    pub resources: Vec<SupportResource>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::goal;

    fn with(progress: u8, status: GoalStatus) -> Goal {
        Goal { progress, status, ..goal("g", 7) }
    }

    #[test]
    fn overall_progress_cases() {
        let p = overall_goal_progress(&[with(40, GoalStatus::Active), with(60, GoalStatus::Active)]);
        assert_eq!(p, OverallProgress { percent: 50, active_count: 2 });
        assert_eq!(overall_goal_progress(&[]), OverallProgress { percent: 0, active_count: 0 });
        let p = overall_goal_progress(&[
            with(43, GoalStatus::Active),
            with(90, GoalStatus::Paused),
            with(100, GoalStatus::Completed),
        ]);
        assert_eq!(p.percent, 43);
        // 41 and 42 average to 41.5, which rounds up
        assert_eq!(overall_goal_progress(&[with(41, GoalStatus::Active), with(42, GoalStatus::Active)]).percent, 42);
    }

    #[test]
    fn consistency_cases() {
        let today = NaiveDate::from_ymd_opt(2026, 10, 19).unwrap();
        let all: Vec<NaiveDate> = (0..7).map(|i| today - Duration::days(i)).collect();
        assert_eq!(checkin_consistency(&all, today, 7), 100);
        assert_eq!(checkin_consistency(&[], today, 7), 0);
        let three = [today, today, today - Duration::days(2), today - Duration::days(6), today - Duration::days(7)];
        assert_eq!(checkin_consistency(&three, today, 7), 43);
    }

    #[test]
    fn style_fallback_examples() {
        let msgs = ["I'm good, it's fine I guess", "yeah I don't really know", "can't say it's been great tbh"];
        let c = classify_style(&msgs, None, &LlmParams::default()).unwrap();
        assert_eq!(c.source, StyleSource::Fallback);
        assert_eq!(
            c.style,
            CommunicationStyle {
                tone: Tone::Casual,
                length: MessageLength::Short,
                emotional_style: EmotionalStyle::Neutral,
                thinking_style: ThinkingStyle::ExperienceBased
            }
        );
        let twelve = ["one two three four five six seven eight nine ten eleven twelve"];
        assert_eq!(fallback_style(&style_metrics(&twelve).unwrap()).length, MessageLength::Short);
        let thirteen = ["one two three four five six seven eight nine ten eleven twelve thirteen"];
        assert_eq!(fallback_style(&style_metrics(&thirteen).unwrap()).length, MessageLength::Long);
        let empty: [&str; 0] = [];
        assert_eq!(style_metrics(&empty), Err(MetricsError::InsufficientData));
    }

    #[test]
    fn metric_definitions() {
        let m = style_metrics(&["I ran 5 km today!", "Nice \u{1F600}", "plain words here"]).unwrap();
        assert!((m.avg_words_per_user_message - 10.0 / 3.0).abs() < 1e-12);
        assert!((m.emoji_or_exclaim_rate - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.digit_token_ratio - 0.1).abs() < 1e-12);
        assert_eq!(m.contraction_slang_rate, 0.0);
    }

    #[test]
    fn dartboard() {
        assert_eq!(dartboard_view(None), Err(MetricsError::NotReady));
        assert!((dart_radius(3) - 5.0 / 7.0).abs() < 1e-12);
        assert!((dart_radius(7) - 1.0 / 7.0).abs() < 1e-12);
        assert_eq!(dart_radius(1), 1.0);
        for s in 1..7u8 {
            assert!(dart_radius(s) > dart_radius(s + 1));
        }
    }

    #[test]
    fn theme_cleaning() {
        let doc = serde_json::json!({"themes": [
            "exam stress", "Exam  stress", "", 3,
            "this phrase is far too long to be a theme at all", "guitar practice", "sleep", "a", "b", "c"
        ]});
        assert_eq!(clean_themes(&doc).unwrap(), vec!["exam stress", "guitar practice", "sleep", "a", "b"]);
    }
}
