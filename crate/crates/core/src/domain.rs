//! Core value types shared by every other module.
//!
//! Nothing in here performs I/O. Serialized field names follow the wire
//! format the model sees in its tool schema (`lastUpdated`, `startedAt`, ...).

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque pseudonymous identifier issued by the identity provider.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(String);

impl UserId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Introduction,
    ValuesCheckIn,
    GoalSetting,
    ActiveCoaching,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::Introduction,
        Phase::ValuesCheckIn,
        Phase::GoalSetting,
        Phase::ActiveCoaching,
    ];

    /// The only edges of the phase graph.
    pub fn can_transition_to(self, next: Phase) -> bool {
        matches!(
            (self, next),
            (Phase::Introduction, Phase::ValuesCheckIn)
                | (Phase::ValuesCheckIn, Phase::GoalSetting)
                | (Phase::GoalSetting, Phase::ActiveCoaching)
                | (Phase::ActiveCoaching, Phase::GoalSetting)
        )
    }

    /// Label shown in the dashboard header. The values check-in is part of
    /// the introduction from the student's point of view.
    pub fn display_label(self) -> &'static str {
        match self {
            Phase::Introduction | Phase::ValuesCheckIn => "Introduction",
            Phase::GoalSetting => "Goal Setting",
            Phase::ActiveCoaching => "Active Coaching",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Introduction => "introduction",
            Phase::ValuesCheckIn => "values_check_in",
            Phase::GoalSetting => "goal_setting",
            Phase::ActiveCoaching => "active_coaching",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OceanTrait {
    Openness,
    Conscientiousness,
    Extraversion,
    Agreeableness,
    Neuroticism,
}

impl OceanTrait {
    pub const ALL: [OceanTrait; 5] = [
        OceanTrait::Openness,
        OceanTrait::Conscientiousness,
        OceanTrait::Extraversion,
        OceanTrait::Agreeableness,
        OceanTrait::Neuroticism,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OceanTrait::Openness => "Openness",
            OceanTrait::Conscientiousness => "Conscientiousness",
            OceanTrait::Extraversion => "Extraversion",
            OceanTrait::Agreeableness => "Agreeableness",
            OceanTrait::Neuroticism => "Neuroticism",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraitLevel {
    High,
    Moderate,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmotionalAwareness {
    High,
    Medium,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopingStyle {
    Healthy,
    Mixed,
    Avoidant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncouragementPreference {
    Praise,
    Progress,
    Achievement,
    Effort,
}

/// Demographic context. The display name only ever lives in memory for
/// the current session; it is skipped on serialization.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographic {
    #[serde(skip)]
    pub name_transient: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub college_year: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub major: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentalHealthProfile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotional_awareness: Option<EmotionalAwareness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coping_style: Option<CopingStyle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encouragement_preference: Option<EncouragementPreference>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureUnit {
    Count,
    Minutes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measures {
    pub unit: MeasureUnit,
    pub weekly_target: u32,
    #[serde(default)]
    pub completed_units: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeframe {
    pub start_date: NaiveDate,
    pub duration_days: u32,
}

impl Timeframe {
    /// Last calendar day covered by the timeframe.
    pub fn last_day(&self) -> NaiveDate {
        self.start_date + chrono::Days::new(u64::from(self.duration_days.saturating_sub(1)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalStatus {
    Active,
    Paused,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub goal_id: String,
    pub description: String,
    pub measures: Measures,
    pub timeframe: Timeframe,
    pub steps: Vec<String>,
    #[serde(default)]
    pub obstacles: Vec<String>,
    pub progress: u8,
    pub status: GoalStatus,
    #[serde(rename = "lastUpdated")]
    pub last_updated: DateTime<Utc>,
}

impl Goal {
    /// Checks the progress/status invariants.
    pub fn is_consistent(&self) -> bool {
        self.progress <= 100
            && self.measures.weekly_target >= 1
            && (self.status != GoalStatus::Completed || self.progress == 100)
    }
}

/// The four life areas of the values check-in, in the order they are asked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValueDomain {
    #[serde(rename = "Work/Studies")]
    WorkStudies,
    #[serde(rename = "Relationships")]
    Relationships,
    #[serde(rename = "Personal Growth/Health")]
    PersonalGrowthHealth,
    #[serde(rename = "Leisure")]
    Leisure,
}

impl ValueDomain {
    pub const ALL: [ValueDomain; 4] = [
        ValueDomain::WorkStudies,
        ValueDomain::Relationships,
        ValueDomain::PersonalGrowthHealth,
        ValueDomain::Leisure,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ValueDomain::WorkStudies => "Work/Studies",
            ValueDomain::Relationships => "Relationships",
            ValueDomain::PersonalGrowthHealth => "Personal Growth/Health",
            ValueDomain::Leisure => "Leisure",
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BevsStep {
    Intro,
    CollectValues,
    CollectScores,
    Confirm,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BevsAssessment {
    pub domain: ValueDomain,
    pub value_statement: String,
    pub score: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BevsRecord {
    pub started_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completed_at: Option<DateTime<Utc>>,
    pub current_step: BevsStep,
    pub domain_index: u8,
    pub domains: Vec<ValueDomain>,
    pub assessments: Vec<BevsAssessment>,
    /// Value statement collected for the current domain, awaiting its score.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_value: Option<String>,
}

impl BevsRecord {
    pub fn new(started_at: DateTime<Utc>) -> Self {
        Self {
            started_at,
            completed_at: None,
            current_step: BevsStep::Intro,
            domain_index: 0,
            domains: ValueDomain::ALL.to_vec(),
            assessments: Vec::new(),
            pending_value: None,
        }
    }

    pub fn is_done(&self) -> bool {
        self.current_step == BevsStep::Done
    }

    pub fn current_domain(&self) -> ValueDomain {
        ValueDomain::from_index(usize::from(self.domain_index.min(3))).unwrap_or(ValueDomain::Leisure)
    }

    pub fn score_for(&self, domain: ValueDomain) -> Option<u8> {
        self.assessments.iter().find(|a| a.domain == domain).map(|a| a.score)
    }

    /// Structural invariants: scores in range, a finished record covers
    /// every domain exactly once, and the index tracks assessed domains
    /// while collection is in progress.
    pub fn is_consistent(&self) -> bool {
        if self.domains != ValueDomain::ALL {
            return false;
        }
        if self.domain_index > 3 || self.assessments.iter().any(|a| !(1..=7).contains(&a.score)) {
            return false;
        }
        let mut seen = [false; 4];
        for a in &self.assessments {
            let slot = &mut seen[a.domain as usize];
            if *slot {
                return false;
            }
            *slot = true;
        }
        match self.current_step {
            BevsStep::Done => self.assessments.len() == 4 && self.completed_at.is_some(),
            BevsStep::Confirm => self.assessments.len() == 4,
            _ => usize::from(self.domain_index) == self.assessments.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tone {
    Formal,
    Casual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageLength {
    Short,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmotionalStyle {
    Expressive,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThinkingStyle {
    #[serde(rename = "data-driven")]
    DataDriven,
    #[serde(rename = "experience-based")]
    ExperienceBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommunicationStyle {
    pub tone: Tone,
    pub length: MessageLength,
    pub emotional_style: EmotionalStyle,
    pub thinking_style: ThinkingStyle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: UserId,
    #[serde(default)]
    pub demographic: Demographic,
    #[serde(default)]
    pub personality_traits: BTreeMap<OceanTrait, TraitLevel>,
    #[serde(default)]
    pub mental_health_profile: MentalHealthProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bevs: Option<BevsRecord>,
    #[serde(default)]
    pub mental_health_goals: Vec<Goal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub communication_style: Option<CommunicationStyle>,
    #[serde(default)]
    pub intro_complete: bool,
}

impl UserProfile {
    pub fn new(user_id: UserId) -> Self {
        Self {
            user_id,
            demographic: Demographic::default(),
            personality_traits: BTreeMap::new(),
            mental_health_profile: MentalHealthProfile::default(),
            bevs: None,
            mental_health_goals: Vec::new(),
            communication_style: None,
            intro_complete: false,
        }
    }

    pub fn bevs_done(&self) -> bool {
        self.bevs.as_ref().is_some_and(BevsRecord::is_done)
    }

    pub fn goal(&self, goal_id: &str) -> Option<&Goal> {
        self.mental_health_goals.iter().find(|g| g.goal_id == goal_id)
    }

    /// Recomputes `intro_complete` from the collected fields.
    pub fn refresh_intro_complete(&mut self) {
        self.intro_complete = intro_missing_fields(self).is_empty();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Coach,
}

/// One chat message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    pub timestamp: DateTime<Utc>,
}

impl Turn {
    pub fn user(text: impl Into<String>, timestamp: DateTime<Utc>) -> Self {
        Self { speaker: Speaker::User, text: text.into(), timestamp }
    }

    pub fn coach(text: impl Into<String>, timestamp: DateTime<Utc>) -> Self {
        Self { speaker: Speaker::Coach, text: text.into(), timestamp }
    }
}

/// The ten items the introduction must collect, in the order they are asked.
pub const INTRO_FIELDS: [&str; 10] = [
    "demographic.college_year",
    "demographic.major",
    "mental_health_profile.emotional_awareness",
    "mental_health_profile.coping_style",
    "mental_health_profile.encouragement_preference",
    "personality_traits.Openness",
    "personality_traits.Conscientiousness",
    "personality_traits.Extraversion",
    "personality_traits.Agreeableness",
    "personality_traits.Neuroticism",
];

/// Names of the required introduction items that are still missing.
pub fn intro_missing_fields(profile: &UserProfile) -> Vec<&'static str> {
    let present = |s: &Option<String>| s.as_deref().is_some_and(|v| !v.trim().is_empty());
    let mhp = &profile.mental_health_profile;
    let checks = [
        present(&profile.demographic.college_year),
        present(&profile.demographic.major),
        mhp.emotional_awareness.is_some(),
        mhp.coping_style.is_some(),
        mhp.encouragement_preference.is_some(),
    ];
    let basic = INTRO_FIELDS[..5]
        .iter()
        .zip(checks)
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| *name);
    let traits = INTRO_FIELDS[5..]
        .iter()
        .zip(OceanTrait::ALL)
        .filter(|(_, t)| !profile.personality_traits.contains_key(t))
        .map(|(name, _)| *name);
    basic.chain(traits).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("weekly target must be at least 1")]
    InvalidTarget,
    #[error("score must be an integer between 1 and 7")]
    ScoreOutOfRange,
}

/// Integer division of non-negative values, rounding halves away from zero.
pub fn div_round_half_away(numerator: u64, denominator: u64) -> u64 {
    debug_assert!(denominator > 0);
    (2 * numerator + denominator) / (2 * denominator)
}

/// Weekly-window progress percent for a goal, capped at 100.
pub fn compute_goal_progress(completed_units: u32, weekly_target: u32) -> Result<u8, DomainError> {
    if weekly_target == 0 {
        return Err(DomainError::InvalidTarget);
    }
    let pct = div_round_half_away(100 * u64::from(completed_units), u64::from(weekly_target));
    Ok(pct.min(100) as u8)
}

/// Parses a closeness-to-values score token.
pub fn validate_bevs_score(raw: &str) -> Result<u8, DomainError> {
    let trimmed = raw.trim().trim_end_matches(['.', '!']);
    match trimmed.parse::<u8>() {
        Ok(n) if (1..=7).contains(&n) => Ok(n),
        _ => Err(DomainError::ScoreOutOfRange),
    }
}
