//! Phase-specific prompt assembly.
//!
//! Each phase has its own task template; placeholders in square brackets
//! (`[user_profile]`, `[history]`, `[currentStep]`, `[domainIndex]`) are
//! substituted here. The tool schema attached to a bundle only exposes the
//! sections the phase may write.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::domain::{BevsRecord, BevsStep, Phase, Speaker, Turn, UserProfile};
use crate::settings::CoachPersona;
use crate::store::{PhaseFieldMap, Section};

pub const DEFAULT_HISTORY_WINDOW: usize = 20;

const SYSTEM: &str = include_str!("../../templates/system.txt");
const INTRODUCTION: &str = include_str!("../../templates/introduction.txt");
const VALUES_CHECKIN: &str = include_str!("../../templates/values_checkin.txt");
const GOAL_SETTING: &str = include_str!("../../templates/goal_setting.txt");
const ACTIVE_COACHING: &str = include_str!("../../templates/active_coaching.txt");
pub(crate) const COMMUNICATION_STYLE: &str = include_str!("../../templates/communication_style.txt");
pub(crate) const THEMES: &str = include_str!("../../templates/themes.txt");

pub const SAVE_PROFILE_TOOL: &str = "saveProfile";

/// What a bundle asks the model to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "task", content = "phase", rename_all = "snake_case")]
pub enum PromptTask {
    Coaching(Phase),
    StyleClassification,
    ThemeSummary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub user: String,
    pub coach: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub task: PromptTask,
    /// Index of the current user turn within the active phase.
    pub phase_turn: u32,
    pub system: String,
    pub instructions: String,
    pub few_shot: Vec<Exemplar>,
    pub directives: Vec<String>,
    pub history: Vec<Turn>,
    pub user_text: String,
    pub tool_schema: Option<Value>,
}

impl PromptBundle {
    pub fn phase(&self) -> Option<Phase> {
        match self.task {
            PromptTask::Coaching(p) => Some(p),
            _ => None,
        }
    }

    /// True when there is nothing for a model to respond to.
    pub fn is_empty(&self) -> bool {
        self.user_text.trim().is_empty() && self.instructions.trim().is_empty()
    }

    /// System text followed by the task instructions and any directives.
    pub fn full_system_text(&self) -> String {
        let mut out = self.system.clone();
        if !self.instructions.is_empty() {
            out.push_str("\n\n");
            out.push_str(&self.instructions);
        }
        if !self.directives.is_empty() {
            out.push_str("\n\nFor this reply:\n");
            for d in &self.directives {
                out.push_str("- ");
                out.push_str(d);
                out.push('\n');
            }
        }
        out
    }
}

/// Turn-specific context beyond phase, profile, and history.
#[derive(Debug, Clone, Default)]
pub struct PromptExtras<'a> {
    pub phase_turn: u32,
    pub bevs: Option<&'a BevsRecord>,
    pub directives: Vec<String>,
    pub display_name: Option<&'a str>,
    pub user_text: &'a str,
    pub history_window: Option<usize>,
}

pub fn render_history(history: &[Turn]) -> String {
    if history.is_empty() {
        return "(none yet)".into();
    }
    history
        .iter()
        .map(|t| {
            let who = match t.speaker {
                Speaker::User => "User",
                Speaker::Coach => "Coach",
            };
            format!("{who}: {}", t.text)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn step_name(step: BevsStep) -> &'static str {
    match step {
        BevsStep::Intro => "intro",
        BevsStep::CollectValues => "collect_values",
        BevsStep::CollectScores => "collect_scores",
        BevsStep::Confirm => "confirm",
        BevsStep::Done => "done",
    }
}

fn personalization(profile: &UserProfile, persona: &CoachPersona, display_name: Option<&str>) -> String {
    let mut out = SYSTEM.replace("[coach_name]", &persona.name);
    if let Some(name) = display_name {
        out.push_str(&format!("\nThe student's first name is {name}.\n"));
    }
    if let Some(style) = &profile.communication_style {
        let v = serde_json::to_value(style).unwrap_or(Value::Null);
        out.push_str(&format!(
            "\nMatch the student's communication style: tone {}, length {}, emotional style {}, thinking style {}.\n",
            v["tone"].as_str().unwrap_or("casual"),
            v["length"].as_str().unwrap_or("short"),
            v["emotional_style"].as_str().unwrap_or("neutral"),
            v["thinking_style"].as_str().unwrap_or("experience-based"),
        ));
    }
    if let Some(pref) = profile.mental_health_profile.encouragement_preference {
        let pref = serde_json::to_value(pref).ok();
        if let Some(p) = pref.as_ref().and_then(Value::as_str) {
            out.push_str(&format!("When encouraging them, emphasize {p}.\n"));
        }
    }
    out
}

fn few_shot(phase: Phase) -> Vec<Exemplar> {
    let pairs: &[(&str, &str)] = match phase {
        Phase::Introduction => &[
            ("Hi! I am feeling good.", "Glad you're here. Can I know your first name, your college year, and what you're studying?"),
            ("I love trying new things.", "That makes sense. How are you with staying organized and disciplined - natural for you or more of a struggle?"),
        ],
        Phase::ValuesCheckIn => &[
            ("Being successful and receiving good grades.", "Wanting to be successful is a strong value for Work/Studies. On a scale of 1 to 7, how close do you feel your current actions are to that value? (1 = not close at all, 7 = very close)"),
        ],
        Phase::GoalSetting => &[
            ("Stress relief.", "What's one small thing you could do this week that might help reduce your stress?"),
            ("I could play my guitar.", "Nice choice. To make it clearer, how long would you want to play each time?"),
        ],
        Phase::ActiveCoaching => &[
            ("It helped, but some days I was too stressed to start...", "That makes sense. Stress can show up even when you're doing something helpful. When you felt that resistance, what was going through your mind?"),
        ],
    };
    pairs.iter().map(|(u, c)| Exemplar { user: (*u).into(), coach: (*c).into() }).collect()
}

/// Builds the bundle for one coaching turn.
pub fn build_prompt(
    phase: Phase,
    profile: &UserProfile,
    history: &[Turn],
    persona: &CoachPersona,
    extras: &PromptExtras<'_>,
) -> PromptBundle {
    let window = extras.history_window.unwrap_or(DEFAULT_HISTORY_WINDOW);
    let recent = &history[history.len().saturating_sub(window)..];
    let history_text = render_history(recent);
    let profile_text = serde_json::to_string(profile).unwrap_or_default();

    let instructions = match phase {
        Phase::Introduction => {
            let missing = crate::domain::intro_missing_fields(profile);
            let missing = if missing.is_empty() { "none".to_string() } else { missing.join(", ") };
            INTRODUCTION.replace("[missing_fields]", &missing)
        }
        Phase::ValuesCheckIn => {
            let (step, index) = extras
                .bevs
                .map_or((BevsStep::Intro, 0), |b| (b.current_step, b.domain_index));
            VALUES_CHECKIN
                .replace("[history]", &history_text)
                .replace("[currentStep]", step_name(step))
                .replace("[domainIndex]", &index.to_string())
        }
        Phase::GoalSetting => GOAL_SETTING
            .replace("[user_profile]", &profile_text)
            .replace("[history]", &history_text),
        Phase::ActiveCoaching => ACTIVE_COACHING
            .replace("[user_profile]", &profile_text)
            .replace("[history]", &history_text),
    };

    PromptBundle {
        task: PromptTask::Coaching(phase),
        phase_turn: extras.phase_turn,
        system: personalization(profile, persona, extras.display_name),
        instructions,
        few_shot: few_shot(phase),
        directives: extras.directives.clone(),
        history: recent.to_vec(),
        user_text: extras.user_text.to_string(),
        tool_schema: Some(tool_schema(phase, profile)),
    }
}

const LEVELS: [&str; 3] = ["high", "moderate", "low"];

fn section_schema(section: Section, phase: Phase, profile: &UserProfile) -> Value {
    match section {
        Section::Demographic => json!({
            "type": "object",
            "additionalProperties": false,
            "properties": {
                "name": {"type": "string"},
                "college_year": {"type": "string"},
                "major": {"type": "string"}
            },
            "required": ["college_year", "major"]
        }),
        Section::PersonalityTraits => {
            let props: serde_json::Map<String, Value> = crate::domain::OceanTrait::ALL
                .iter()
                .map(|t| (t.as_str().to_string(), json!({"enum": LEVELS})))
                .collect();
            json!({
                "type": "object",
                "additionalProperties": false,
                "properties": props,
                "required": crate::domain::OceanTrait::ALL.iter().map(|t| t.as_str()).collect::<Vec<_>>()
            })
        }
        Section::MentalHealthProfile => json!({
            "type": "object",
            "additionalProperties": false,
            "properties": {
                "emotional_awareness": {"enum": ["high", "medium", "low"]},
                "coping_style": {"enum": ["healthy", "mixed", "avoidant"]},
                "encouragement_preference": {"enum": ["praise", "progress", "achievement", "effort"]}
            },
            "required": ["emotional_awareness", "coping_style", "encouragement_preference"]
        }),
        Section::Bevs => json!({
            "type": "object",
            "properties": {
                "startedAt": {"type": "string", "format": "date-time"},
                "completedAt": {"type": "string", "format": "date-time"},
                "currentStep": {"const": "done"},
                "domainIndex": {"const": 3},
                "domains": {"type": "array", "items": {"enum": ["Work/Studies", "Relationships", "Personal Growth/Health", "Leisure"]}},
                "assessments": {
                    "type": "array",
                    "minItems": 4,
                    "maxItems": 4,
                    "items": {
                        "type": "object",
                        "properties": {
                            "domain": {"type": "string"},
                            "value_statement": {"type": "string"},
                            "score": {"type": "integer", "minimum": 1, "maximum": 7}
                        },
                        "required": ["domain", "value_statement", "score"]
                    }
                }
            },
            "required": ["startedAt", "completedAt", "currentStep", "domainIndex", "domains", "assessments"]
        }),
        Section::MentalHealthGoals => match phase {
            Phase::ActiveCoaching => {
                let ids: Vec<&str> = profile.mental_health_goals.iter().map(|g| g.goal_id.as_str()).collect();
                json!({
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": false,
                        "properties": {
                            "goal_id": {"enum": ids},
                            "description": {"type": "string"},
                            "progress": {"type": "integer", "minimum": 0, "maximum": 100},
                            "completed_units": {"type": "integer", "minimum": 0},
                            "completed": {"type": "boolean"},
                            "status": {"enum": ["active", "paused", "completed"]},
                            "steps": {"type": "array", "items": {"type": "string"}},
                            "obstacles": {"type": "array", "items": {"type": "string"}},
                            "duration_days": {"type": "integer", "minimum": 1},
                            "lastUpdated": {"type": "string", "format": "date-time"}
                        },
                        "required": ["goal_id"]
                    }
                })
            }
            _ => json!({
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "additionalProperties": false,
                    "properties": {
                        "description": {"type": "string"},
                        "measures": {
                            "type": "object",
                            "additionalProperties": false,
                            "properties": {
                                "unit": {"enum": ["count", "frequency", "minutes"]},
                                "weekly_target": {"type": "integer", "minimum": 1},
                                "completed_units": {"type": "integer", "minimum": 0}
                            },
                            "required": ["unit", "weekly_target"]
                        },
                        "timeframe": {
                            "type": "object",
                            "additionalProperties": false,
                            "properties": {
                                "start_date": {"type": "string", "format": "date"},
                                "duration_days": {"type": "integer", "minimum": 1}
                            },
                            "required": ["start_date", "duration_days"]
                        },
                        "steps": {"type": "array", "minItems": 1, "maxItems": 3, "items": {"type": "string"}},
                        "obstacles": {"type": "array", "items": {"type": "string"}},
                        "completed": {"const": false},
                        "progress": {"const": 0}
                    },
                    "required": ["description", "measures", "timeframe", "steps", "completed", "progress"]
                }
            }),
        },
    }
}

/// `saveProfile` parameter schema restricted to the phase's sections.
pub fn tool_schema(phase: Phase, profile: &UserProfile) -> Value {
    let permitted = PhaseFieldMap::permitted(phase);
    let props: serde_json::Map<String, Value> = permitted
        .iter()
        .map(|s| (s.key().to_string(), section_schema(*s, phase, profile)))
        .collect();
    let required: Vec<&str> = permitted.iter().map(|s| s.key()).collect();
    json!({
        "type": "object",
        "additionalProperties": false,
        "properties": props,
        "required": required
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::UserId;

    fn fresh() -> UserProfile {
        UserProfile::new(UserId::new("u"))
    }

    fn schema_sections(schema: &Value) -> Vec<String> {
        schema["properties"].as_object().unwrap().keys().cloned().collect()
    }

    #[test]
    fn introduction_bundle_has_checklist() {
        let b = build_prompt(Phase::Introduction, &fresh(), &[], &CoachPersona::default(), &PromptExtras::default());
        assert_eq!(b.task, PromptTask::Coaching(Phase::Introduction));
        assert!(b.instructions.contains("REQUIRED SEQUENCE"));
        assert!(b.instructions.contains("collect all 10 pieces"));
        assert!(b.instructions.contains("personality_traits.Neuroticism"));
        assert_eq!(
            schema_sections(b.tool_schema.as_ref().unwrap()),
            vec!["demographic", "mental_health_profile", "personality_traits"]
        );
    }

    #[test]
    fn values_bundle_has_step_context() {
        let rec = BevsRecord::new(chrono::Utc::now());
        let extras = PromptExtras { bevs: Some(&rec), ..Default::default() };
        let b = build_prompt(Phase::ValuesCheckIn, &fresh(), &[], &CoachPersona::default(), &extras);
        assert!(b.instructions.contains("Current domain index: 0"));
        assert!(b.instructions.contains("Current step: intro"));
        assert_eq!(schema_sections(b.tool_schema.as_ref().unwrap()), vec!["bevs"]);
    }

    #[test]
    fn schemas_match_field_map() {
        for phase in Phase::ALL {
            let schema = tool_schema(phase, &fresh());
            let mut expected: Vec<String> =
                PhaseFieldMap::permitted(phase).iter().map(|s| s.key().to_string()).collect();
            expected.sort();
            assert_eq!(schema_sections(&schema), expected, "{phase}");
        }
    }

    #[test]
    fn active_coaching_schema_is_update_only() {
        let mut p = fresh();
        p.mental_health_goals.push(crate::testing::goal("goal-1", 7));
        let b = build_prompt(Phase::ActiveCoaching, &p, &[], &CoachPersona::default(), &PromptExtras::default());
        let items = &b.tool_schema.as_ref().unwrap()["properties"]["mental_health_goals"]["items"];
        assert_eq!(items["required"], json!(["goal_id"]));
        assert_eq!(items["properties"]["goal_id"]["enum"], json!(["goal-1"]));
        assert!(items["properties"].get("measures").is_none());
        assert!(b.instructions.contains("goal-1"));
    }

    #[test]
    fn history_is_windowed() {
        let now = chrono::Utc::now();
        let history: Vec<Turn> = (0..30).map(|i| Turn::user(format!("message {i}"), now)).collect();
        let extras = PromptExtras { history_window: Some(20), ..Default::default() };
        let b = build_prompt(Phase::GoalSetting, &fresh(), &history, &CoachPersona::default(), &extras);
        assert_eq!(b.history.len(), 20);
        assert!(!b.instructions.contains("message 9\n"));
        assert!(b.instructions.contains("message 29"));
    }

    #[test]
    fn persona_and_name_in_system_text() {
        let persona = CoachPersona { name: "Sage".into(), ..Default::default() };
        let extras = PromptExtras { display_name: Some("Miya"), ..Default::default() };
        let b = build_prompt(Phase::Introduction, &fresh(), &[], &persona, &extras);
        assert!(b.system.contains("You are Sage"));
        assert!(b.system.contains("Miya"));
    }
}
