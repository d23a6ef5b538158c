//! Phase-scoped write protocol for `saveProfile` tool calls.
//!
//! A patch is checked in a fixed order: section names, phase permission,
//! duplicate writes, section schemas, then goal lookup. The first failing
//! check decides the rejection code.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{
    compute_goal_progress, BevsRecord, CopingStyle, EmotionalAwareness, EncouragementPreference,
    Goal, GoalStatus, MeasureUnit, Measures, OceanTrait, Phase, Timeframe, TraitLevel,
    UserProfile, ValueDomain,
};

use super::SaveError;

/// Top-level sections of the profile document the model may write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Demographic,
    PersonalityTraits,
    MentalHealthProfile,
    Bevs,
    MentalHealthGoals,
}

impl Section {
    pub const ALL: [Section; 5] = [
        Section::Demographic,
        Section::PersonalityTraits,
        Section::MentalHealthProfile,
        Section::Bevs,
        Section::MentalHealthGoals,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Section::Demographic => "demographic",
            Section::PersonalityTraits => "personality_traits",
            Section::MentalHealthProfile => "mental_health_profile",
            Section::Bevs => "bevs",
            Section::MentalHealthGoals => "mental_health_goals",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.key() == key)
    }
}

/// How goals may be written in a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalWriteMode {
    CreateOnly,
    UpdateOnly,
}

/// Sections each phase may write.
pub struct PhaseFieldMap;

impl PhaseFieldMap {
    pub fn permitted(phase: Phase) -> &'static [Section] {
        match phase {
            Phase::Introduction => &[
                Section::Demographic,
                Section::PersonalityTraits,
                Section::MentalHealthProfile,
            ],
            Phase::ValuesCheckIn => &[Section::Bevs],
            Phase::GoalSetting | Phase::ActiveCoaching => &[Section::MentalHealthGoals],
        }
    }

    pub fn goal_mode(phase: Phase) -> Option<GoalWriteMode> {
        match phase {
            Phase::GoalSetting => Some(GoalWriteMode::CreateOnly),
            Phase::ActiveCoaching => Some(GoalWriteMode::UpdateOnly),
            _ => None,
        }
    }

    pub fn allows(phase: Phase, section: Section) -> bool {
        Self::permitted(phase).contains(&section)
    }
}

/// A structured write proposed by the model, tagged with the phase that
/// was active when it was emitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCallPatch {
    pub phase_tag: Phase,
    pub payload: Value,
}

impl ToolCallPatch {
    pub fn new(phase_tag: Phase, payload: Value) -> Self {
        Self { phase_tag, payload }
    }

    /// Sections named by the payload's top-level keys.
    pub fn sections(&self) -> Result<BTreeSet<Section>, SaveError> {
        let obj = self
            .payload
            .as_object()
            .ok_or_else(|| SaveError::schema("payload must be an object"))?;
        if obj.is_empty() {
            return Err(SaveError::schema("payload names no sections"));
        }
        obj.keys()
            .map(|k| Section::from_key(k).ok_or_else(|| SaveError::schema(format!("unknown section `{k}`"))))
            .collect()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemographicIn {
    college_year: String,
    major: String,
    /// Accepted so the engine can use it transiently; never stored.
    #[serde(default)]
    name: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MentalHealthProfileIn {
    emotional_awareness: EmotionalAwareness,
    coping_style: CopingStyle,
    encouragement_preference: EncouragementPreference,
}

#[derive(Debug, Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum UnitIn {
    Count,
    Frequency,
    Minutes,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasuresIn {
    unit: UnitIn,
    weekly_target: u32,
    #[serde(default)]
    completed_units: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GoalCreateIn {
    description: String,
    measures: MeasuresIn,
    timeframe: Timeframe,
    steps: Vec<String>,
    #[serde(default)]
    obstacles: Vec<String>,
    completed: bool,
    progress: u32,
    #[serde(default, rename = "lastUpdated")]
    _last_updated: Option<DateTime<Utc>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GoalUpdateIn {
    goal_id: String,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    progress: Option<u32>,
    #[serde(default)]
    completed_units: Option<u32>,
    #[serde(default)]
    completed: Option<bool>,
    #[serde(default)]
    status: Option<GoalStatus>,
    #[serde(default)]
    steps: Option<Vec<String>>,
    #[serde(default)]
    obstacles: Option<Vec<String>>,
    #[serde(default)]
    duration_days: Option<u32>,
    #[serde(default, rename = "lastUpdated")]
    _last_updated: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalDraft {
    pub description: String,
    pub measures: Measures,
    pub timeframe: Timeframe,
    pub steps: Vec<String>,
    pub obstacles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalChange {
    pub goal_id: String,
    pub description: Option<String>,
    pub progress: Option<u8>,
    pub completed_units: Option<u32>,
    pub status: Option<GoalStatus>,
    pub steps: Option<Vec<String>>,
    pub obstacles: Option<Vec<String>>,
    pub duration_days: Option<u32>,
}

/// A patch whose payload has been checked against its section schemas.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidatedPatch {
    Introduction {
        college_year: String,
        major: String,
        display_name: Option<String>,
        traits: BTreeMap<OceanTrait, TraitLevel>,
        emotional_awareness: EmotionalAwareness,
        coping_style: CopingStyle,
        encouragement_preference: EncouragementPreference,
    },
    Bevs(BevsRecord),
    CreateGoals(Vec<GoalDraft>),
    UpdateGoals(Vec<GoalChange>),
}

/// Result of applying a validated patch to a profile.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ApplyOutcome {
    /// False when the patch matched current state and nothing changed.
    pub changed: bool,
    pub created_goals: Vec<String>,
    pub completed_goals: Vec<String>,
    pub rescheduled_goals: Vec<String>,
    pub display_name: Option<String>,
}

fn section(patch: &ToolCallPatch, s: Section) -> Option<&Value> {
    patch.payload.get(s.key())
}

fn parse<T: serde::de::DeserializeOwned>(value: &Value, what: &str) -> Result<T, SaveError> {
    T::deserialize(value).map_err(|e| SaveError::schema(format!("{what}: {e}")))
}

fn non_blank(s: &str, what: &str) -> Result<String, SaveError> {
    let t = s.trim();
    if t.is_empty() {
        Err(SaveError::schema(format!("{what} must not be empty")))
    } else {
        Ok(t.to_string())
    }
}

fn clean_list(items: Vec<String>, what: &str) -> Result<Vec<String>, SaveError> {
    items.iter().map(|s| non_blank(s, what)).collect()
}

/// Runs every check short of mutating the profile.
pub fn validate(profile: &UserProfile, patch: &ToolCallPatch) -> Result<ValidatedPatch, SaveError> {
    let sections = patch.sections()?;
    let phase = patch.phase_tag;

    if let Some(bad) = sections.iter().find(|s| !PhaseFieldMap::allows(phase, **s)) {
        return Err(SaveError::WriteOutOfPhase { phase, section: *bad });
    }

    match phase {
        Phase::Introduction => {
            if profile.intro_complete {
                return Err(SaveError::DuplicateWrite(Section::Demographic));
            }
            validate_intro(patch, &sections)
        }
        Phase::ValuesCheckIn => {
            if profile.bevs_done() {
                return Err(SaveError::DuplicateWrite(Section::Bevs));
            }
            validate_bevs(section(patch, Section::Bevs).unwrap_or(&Value::Null)).map(ValidatedPatch::Bevs)
        }
        Phase::GoalSetting => {
            let goals = goal_items(patch)?;
            goals.iter().map(validate_goal_create).collect::<Result<_, _>>().map(ValidatedPatch::CreateGoals)
        }
        Phase::ActiveCoaching => {
            let goals = goal_items(patch)?;
            let changes = goals.iter().map(validate_goal_update).collect::<Result<Vec<_>, _>>()?;
            let mut seen = BTreeSet::new();
            for c in &changes {
                if !seen.insert(c.goal_id.as_str()) {
                    return Err(SaveError::schema(format!("goal `{}` named twice", c.goal_id)));
                }
            }
            for c in &changes {
                let goal = profile.goal(&c.goal_id).ok_or_else(|| SaveError::UnknownGoal(c.goal_id.clone()))?;
                if c.completed_units.is_some() {
                    compute_goal_progress(c.completed_units.unwrap_or(0), goal.measures.weekly_target)
                        .map_err(|e| SaveError::schema(e.to_string()))?;
                }
            }
            Ok(ValidatedPatch::UpdateGoals(changes))
        }
    }
}

fn validate_intro(patch: &ToolCallPatch, sections: &BTreeSet<Section>) -> Result<ValidatedPatch, SaveError> {
    let required = PhaseFieldMap::permitted(Phase::Introduction);
    if let Some(missing) = required.iter().find(|s| !sections.contains(s)) {
        return Err(SaveError::schema(format!(
            "introduction saves must be complete; `{}` missing",
            missing.key()
        )));
    }
    let demo: DemographicIn = parse(section(patch, Section::Demographic).unwrap_or(&Value::Null), "demographic")?;
    let traits: BTreeMap<OceanTrait, TraitLevel> =
        parse(section(patch, Section::PersonalityTraits).unwrap_or(&Value::Null), "personality_traits")?;
    if traits.len() != OceanTrait::ALL.len() {
        return Err(SaveError::schema(format!(
            "personality_traits needs all five traits, got {}",
            traits.len()
        )));
    }
    let mhp: MentalHealthProfileIn =
        parse(section(patch, Section::MentalHealthProfile).unwrap_or(&Value::Null), "mental_health_profile")?;
    Ok(ValidatedPatch::Introduction {
        college_year: non_blank(&demo.college_year, "college_year")?,
        major: non_blank(&demo.major, "major")?,
        display_name: demo.name.map(|n| n.trim().to_string()).filter(|n| !n.is_empty()),
        traits,
        emotional_awareness: mhp.emotional_awareness,
        coping_style: mhp.coping_style,
        encouragement_preference: mhp.encouragement_preference,
    })
}

fn validate_bevs(value: &Value) -> Result<BevsRecord, SaveError> {
    let mut rec: BevsRecord = parse(value, "bevs")?;
    rec.pending_value = None;
    if !rec.is_done() {
        return Err(SaveError::schema("bevs may only be saved once complete"));
    }
    if rec.domain_index != 3 {
        return Err(SaveError::schema("completed bevs must have domainIndex 3"));
    }
    if rec.completed_at.is_some_and(|c| c < rec.started_at) {
        return Err(SaveError::schema("completedAt precedes startedAt"));
    }
    if rec.assessments.iter().any(|a| a.value_statement.trim().is_empty()) {
        return Err(SaveError::schema("value statements must not be empty"));
    }
    if !rec.is_consistent() {
        return Err(SaveError::schema(
            "bevs needs one 1-7 score for each of the four domains and a completedAt",
        ));
    }
    // Canonical domain order.
    rec.assessments.sort_by_key(|a| a.domain as usize);
    debug_assert!(rec.assessments.iter().map(|a| a.domain).eq(ValueDomain::ALL));
    Ok(rec)
}

fn goal_items(patch: &ToolCallPatch) -> Result<&Vec<Value>, SaveError> {
    let items = section(patch, Section::MentalHealthGoals)
        .and_then(Value::as_array)
        .ok_or_else(|| SaveError::schema("mental_health_goals must be an array"))?;
    if items.is_empty() {
        return Err(SaveError::schema("mental_health_goals is empty"));
    }
    Ok(items)
}

fn validate_goal_create(value: &Value) -> Result<GoalDraft, SaveError> {
    let g: GoalCreateIn = parse(value, "goal")?;
    if g.completed {
        return Err(SaveError::schema("new goals must have completed: false"));
    }
    if g.progress != 0 {
        return Err(SaveError::schema("new goals must have progress: 0"));
    }
    if g.measures.weekly_target == 0 {
        return Err(SaveError::schema("weekly_target must be at least 1"));
    }
    if g.timeframe.duration_days == 0 {
        return Err(SaveError::schema("duration_days must be at least 1"));
    }
    if !(1..=3).contains(&g.steps.len()) {
        return Err(SaveError::schema("a new goal needs 1 to 3 steps"));
    }
    let unit = match g.measures.unit {
        UnitIn::Count | UnitIn::Frequency => MeasureUnit::Count,
        UnitIn::Minutes => MeasureUnit::Minutes,
    };
    Ok(GoalDraft {
        description: non_blank(&g.description, "description")?,
        measures: Measures {
            unit,
            weekly_target: g.measures.weekly_target,
            completed_units: g.measures.completed_units.unwrap_or(0),
        },
        timeframe: g.timeframe,
        steps: clean_list(g.steps, "step")?,
        obstacles: clean_list(g.obstacles, "obstacle")?,
    })
}

fn validate_goal_update(value: &Value) -> Result<GoalChange, SaveError> {
    let g: GoalUpdateIn = parse(value, "goal update")?;
    if g.progress.is_some_and(|p| p > 100) {
        return Err(SaveError::schema("progress must be within 0..=100"));
    }
    if g.duration_days == Some(0) {
        return Err(SaveError::schema("duration_days must be at least 1"));
    }
    let status = match (g.completed, g.status) {
        (Some(true), None | Some(GoalStatus::Completed)) => Some(GoalStatus::Completed),
        (Some(true), Some(_)) => return Err(SaveError::schema("completed: true conflicts with status")),
        (Some(false), Some(GoalStatus::Completed)) => {
            return Err(SaveError::schema("completed: false conflicts with status"))
        }
        (_, s) => s,
    };
    if status == Some(GoalStatus::Completed) && g.progress.is_some_and(|p| p != 100) {
        return Err(SaveError::schema("a completed goal has progress 100"));
    }
    let description = g.description.map(|d| non_blank(&d, "description")).transpose()?;
    let steps = g.steps.map(|s| clean_list(s, "step")).transpose()?;
    let obstacles = g.obstacles.map(|s| clean_list(s, "obstacle")).transpose()?;
    Ok(GoalChange {
        goal_id: g.goal_id,
        description,
        progress: g.progress.map(|p| p as u8),
        completed_units: g.completed_units,
        status,
        steps,
        obstacles,
        duration_days: g.duration_days,
    })
}

/// Applies a validated patch. `next_goal_seq` supplies ids for new goals.
pub fn apply(
    profile: &mut UserProfile,
    patch: ValidatedPatch,
    now: DateTime<Utc>,
    next_goal_seq: &mut u64,
) -> Result<ApplyOutcome, SaveError> {
    let mut out = ApplyOutcome::default();
    match patch {
        ValidatedPatch::Introduction {
            college_year,
            major,
            display_name,
            traits,
            emotional_awareness,
            coping_style,
            encouragement_preference,
        } => {
            profile.demographic.college_year = Some(college_year);
            profile.demographic.major = Some(major);
            profile.personality_traits = traits;
            profile.mental_health_profile.emotional_awareness = Some(emotional_awareness);
            profile.mental_health_profile.coping_style = Some(coping_style);
            profile.mental_health_profile.encouragement_preference = Some(encouragement_preference);
            profile.refresh_intro_complete();
            out.changed = true;
            out.display_name = display_name;
        }
        ValidatedPatch::Bevs(rec) => {
            profile.bevs = Some(rec);
            out.changed = true;
        }
        ValidatedPatch::CreateGoals(drafts) => {
            for d in drafts {
                *next_goal_seq += 1;
                let goal_id = format!("goal-{}", next_goal_seq);
                let progress = compute_goal_progress(d.measures.completed_units, d.measures.weekly_target)
                    .map_err(|e| SaveError::schema(e.to_string()))?;
                profile.mental_health_goals.push(Goal {
                    goal_id: goal_id.clone(),
                    description: d.description,
                    measures: d.measures,
                    timeframe: d.timeframe,
                    steps: d.steps,
                    obstacles: d.obstacles,
                    progress,
                    status: GoalStatus::Active,
                    last_updated: now,
                });
                out.created_goals.push(goal_id);
            }
            out.changed = true;
        }
        ValidatedPatch::UpdateGoals(changes) => {
            let mut staged = profile.mental_health_goals.clone();
            for c in changes {
                let goal = staged
                    .iter_mut()
                    .find(|g| g.goal_id == c.goal_id)
                    .ok_or_else(|| SaveError::UnknownGoal(c.goal_id.clone()))?;
                let before = goal.clone();
                update_goal(goal, &c)?;
                if *goal != before {
                    goal.last_updated = now;
                    out.changed = true;
                    if goal.status == GoalStatus::Completed && before.status != GoalStatus::Completed {
                        out.completed_goals.push(goal.goal_id.clone());
                    }
                    if goal.timeframe != before.timeframe {
                        out.rescheduled_goals.push(goal.goal_id.clone());
                    }
                }
            }
            profile.mental_health_goals = staged;
        }
    }
    Ok(out)
}

fn update_goal(goal: &mut Goal, c: &GoalChange) -> Result<(), SaveError> {
    if let Some(d) = &c.description {
        goal.description.clone_from(d);
    }
    if let Some(s) = &c.steps {
        goal.steps.clone_from(s);
    }
    if let Some(o) = &c.obstacles {
        goal.obstacles.clone_from(o);
    }
    if let Some(days) = c.duration_days {
        goal.timeframe.duration_days = days;
    }
    if let Some(units) = c.completed_units {
        let derived = compute_goal_progress(units, goal.measures.weekly_target)
            .map_err(|e| SaveError::schema(e.to_string()))?;
        if c.progress.is_some_and(|p| p != derived) && c.status != Some(GoalStatus::Completed) {
            return Err(SaveError::schema(format!(
                "progress {} disagrees with completed_units {units} (expected {derived})",
                c.progress.unwrap_or_default()
            )));
        }
        goal.measures.completed_units = units;
        goal.progress = derived;
    } else if let Some(p) = c.progress {
        goal.progress = p;
    }
    if let Some(s) = c.status {
        goal.status = s;
    }
    // A completed goal stays at 100 until a write reopens it.
    if goal.status == GoalStatus::Completed {
        goal.progress = 100;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BevsAssessment, BevsStep, UserId};
    use serde_json::json;

    pub(crate) fn intro_payload() -> Value {
        json!({
            "demographic": {"college_year": "senior", "major": "Computer Science", "name": "Miya"},
            "personality_traits": {
                "Openness": "high", "Conscientiousness": "high", "Extraversion": "low",
                "Agreeableness": "high", "Neuroticism": "high"
            },
            "mental_health_profile": {
                "emotional_awareness": "high", "coping_style": "mixed", "encouragement_preference": "progress"
            }
        })
    }

    fn now() -> DateTime<Utc> {
        "2026-10-19T12:00:00Z".parse().unwrap()
    }

    fn check(profile: &UserProfile, phase: Phase, payload: Value) -> Result<ValidatedPatch, SaveError> {
        validate(profile, &ToolCallPatch::new(phase, payload))
    }

    #[test]
    fn field_map_is_total_and_disjoint_per_phase() {
        for p in Phase::ALL {
            assert!(!PhaseFieldMap::permitted(p).is_empty());
        }
        assert_eq!(PhaseFieldMap::goal_mode(Phase::GoalSetting), Some(GoalWriteMode::CreateOnly));
        assert_eq!(PhaseFieldMap::goal_mode(Phase::ActiveCoaching), Some(GoalWriteMode::UpdateOnly));
    }

    #[test]
    fn intro_save_accepted_and_name_dropped() {
        let mut p = UserProfile::new(UserId::new("u"));
        let v = check(&p, Phase::Introduction, intro_payload()).unwrap();
        let mut seq = 0;
        let out = apply(&mut p, v, now(), &mut seq).unwrap();
        assert!(p.intro_complete);
        assert_eq!(out.display_name.as_deref(), Some("Miya"));
        assert!(!serde_json::to_string(&p).unwrap().contains("Miya"));
    }

    #[test]
    fn partial_intro_rejected() {
        let p = UserProfile::new(UserId::new("u"));
        let mut payload = intro_payload();
        payload.as_object_mut().unwrap().remove("mental_health_profile");
        assert!(matches!(check(&p, Phase::Introduction, payload), Err(SaveError::SchemaViolation(_))));

        let mut payload = intro_payload();
        payload["personality_traits"].as_object_mut().unwrap().remove("Neuroticism");
        assert!(matches!(check(&p, Phase::Introduction, payload), Err(SaveError::SchemaViolation(_))));
    }

    #[test]
    fn goals_during_intro_out_of_phase() {
        let p = UserProfile::new(UserId::new("u"));
        let err = check(&p, Phase::Introduction, json!({"mental_health_goals": []})).unwrap_err();
        assert_eq!(err.code(), "write_out_of_phase");
    }

    #[test]
    fn second_intro_is_duplicate() {
        let mut p = UserProfile::new(UserId::new("u"));
        let v = check(&p, Phase::Introduction, intro_payload()).unwrap();
        apply(&mut p, v, now(), &mut 0).unwrap();
        let err = check(&p, Phase::Introduction, intro_payload()).unwrap_err();
        assert_eq!(err.code(), "duplicate_write");
    }

    #[test]
    fn unknown_section_is_schema_violation() {
        let p = UserProfile::new(UserId::new("u"));
        let err = check(&p, Phase::Introduction, json!({"email": "a@b.com"})).unwrap_err();
        assert_eq!(err.code(), "schema_violation");
        let err = check(&p, Phase::Introduction, json!([1, 2])).unwrap_err();
        assert_eq!(err.code(), "schema_violation");
    }

    fn goal_payload() -> Value {
        json!({"mental_health_goals": [{
            "description": "Play guitar for 10 minutes",
            "measures": {"unit": "frequency", "weekly_target": 7},
            "timeframe": {"start_date": "2026-10-19", "duration_days": 7},
            "steps": ["Place the guitar near the bed"],
            "obstacles": ["Busy days"],
            "completed": false,
            "progress": 0
        }]})
    }

    #[test]
    fn goal_create_then_update() {
        let mut p = UserProfile::new(UserId::new("u"));
        let mut seq = 0;
        let v = check(&p, Phase::GoalSetting, goal_payload()).unwrap();
        let out = apply(&mut p, v, now(), &mut seq).unwrap();
        assert_eq!(out.created_goals, vec!["goal-1"]);
        assert_eq!(p.mental_health_goals[0].measures.unit, MeasureUnit::Count);
        assert_eq!(p.mental_health_goals[0].progress, 0);

        let upd = json!({"mental_health_goals": [{"goal_id": "goal-1", "completed_units": 3}]});
        let v = check(&p, Phase::ActiveCoaching, upd.clone()).unwrap();
        let out = apply(&mut p, v, now(), &mut seq).unwrap();
        assert!(out.changed);
        assert_eq!(p.mental_health_goals[0].progress, 43);

        // identical update is a no-op
        let v = check(&p, Phase::ActiveCoaching, upd).unwrap();
        assert!(!apply(&mut p, v, now(), &mut seq).unwrap().changed);

        let done = json!({"mental_health_goals": [{"goal_id": "goal-1", "completed": true}]});
        let v = check(&p, Phase::ActiveCoaching, done).unwrap();
        let out = apply(&mut p, v, now(), &mut seq).unwrap();
        assert_eq!(out.completed_goals, vec!["goal-1"]);
        assert_eq!(p.mental_health_goals[0].progress, 100);
        assert!(p.mental_health_goals[0].is_consistent());
    }

    #[test]
    fn goal_create_rules() {
        let p = UserProfile::new(UserId::new("u"));
        for (path, bad) in [
            ("completed", json!(true)),
            ("progress", json!(10)),
            ("steps", json!([])),
            ("steps", json!(["a", "b", "c", "d"])),
            ("goal_id", json!("goal-9")),
        ] {
            let mut payload = goal_payload();
            payload["mental_health_goals"][0][path] = bad;
            assert_eq!(check(&p, Phase::GoalSetting, payload).unwrap_err().code(), "schema_violation", "{path}");
        }
        let mut payload = goal_payload();
        payload["mental_health_goals"][0]["measures"]["weekly_target"] = json!(0);
        assert_eq!(check(&p, Phase::GoalSetting, payload).unwrap_err().code(), "schema_violation");
    }

    #[test]
    fn update_unknown_goal() {
        let p = UserProfile::new(UserId::new("u"));
        let err = check(
            &p,
            Phase::ActiveCoaching,
            json!({"mental_health_goals": [{"goal_id": "goal-7", "progress": 10}]}),
        )
        .unwrap_err();
        assert_eq!(err.code(), "unknown_goal");
    }

    #[test]
    fn bevs_requires_completion() {
        let p = UserProfile::new(UserId::new("u"));
        let mut rec = BevsRecord::new(now());
        let v = json!({"bevs": rec});
        assert_eq!(check(&p, Phase::ValuesCheckIn, v).unwrap_err().code(), "schema_violation");

        rec.current_step = BevsStep::Done;
        rec.domain_index = 3;
        rec.completed_at = Some(now());
        rec.assessments = ValueDomain::ALL
            .iter()
            .rev()
            .map(|d| BevsAssessment { domain: *d, value_statement: "x".into(), score: 4 })
            .collect();
        let ValidatedPatch::Bevs(saved) = check(&p, Phase::ValuesCheckIn, json!({"bevs": rec})).unwrap() else {
            panic!()
        };
        assert_eq!(saved.assessments[0].domain, ValueDomain::WorkStudies);

        rec.assessments[0].score = 8;
        assert_eq!(check(&p, Phase::ValuesCheckIn, json!({"bevs": rec})).unwrap_err().code(), "schema_violation");
    }
}
