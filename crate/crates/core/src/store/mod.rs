//! Profile store: phase-scoped writes, scrubbed transcripts, settings, and
//! scheduled check-ins, all keyed by the pseudonymous user id.
//!
//! The store is in-memory and optionally snapshots to a JSON file after
//! every mutation. Writes are serialized by a single lock.

pub mod patch;
pub mod scrub;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::domain::{CommunicationStyle, Phase, Turn, UserId, UserProfile};
use crate::scheduler::CheckinEvent;
use crate::settings::UserSettings;

pub use patch::{ApplyOutcome, GoalWriteMode, PhaseFieldMap, Section, ToolCallPatch};
pub use scrub::Scrubber;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SaveError {
    #[error("section `{}` may not be written during {phase}", section.key())]
    WriteOutOfPhase { phase: Phase, section: Section },
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("section `{}` is already complete", .0.key())]
    DuplicateWrite(Section),
    #[error("no goal with id `{0}`")]
    UnknownGoal(String),
    #[error("user not found")]
    UserNotFound,
    #[error("storage unavailable: {0}")]
    StorageUnavailable(String),
}

impl SaveError {
    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        SaveError::SchemaViolation(msg.into())
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            SaveError::WriteOutOfPhase { .. } => "write_out_of_phase",
            SaveError::SchemaViolation(_) => "schema_violation",
            SaveError::DuplicateWrite(_) => "duplicate_write",
            SaveError::UnknownGoal(_) => "unknown_goal",
            SaveError::UserNotFound => "user_not_found",
            SaveError::StorageUnavailable(_) => "storage_unavailable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("user not found")]
    UserNotFound,
    #[error("storage unavailable: {0}")]
    StorageUnavailable(String),
}

impl From<StoreError> for SaveError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UserNotFound => SaveError::UserNotFound,
            StoreError::StorageUnavailable(m) => SaveError::StorageUnavailable(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredTurn {
    pub id: u64,
    #[serde(flatten)]
    pub turn: Turn,
}

/// An accepted write, in the order it was applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoggedWrite {
    Patch { patch: ToolCallPatch, at: DateTime<Utc> },
    Style { style: CommunicationStyle },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredThemes {
    pub themes: Vec<String>,
    pub computed_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct UserRecord {
    profile: UserProfile,
    #[serde(default)]
    transcript: Vec<StoredTurn>,
    #[serde(default)]
    next_turn_id: u64,
    #[serde(default)]
    goal_seq: u64,
    #[serde(default)]
    settings: UserSettings,
    #[serde(default)]
    checkins: Vec<ScheduledCheckin>,
    #[serde(default)]
    write_log: Vec<LoggedWrite>,
    #[serde(default)]
    themes: Option<StoredThemes>,
}

impl UserRecord {
    fn new(user: UserId) -> Self {
        Self {
            profile: UserProfile::new(user),
            transcript: Vec::new(),
            next_turn_id: 0,
            goal_seq: 0,
            settings: UserSettings::default(),
            checkins: Vec::new(),
            write_log: Vec::new(),
            themes: None,
        }
    }
}

/// A check-in event together with the provider's id for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledCheckin {
    pub event: CheckinEvent,
    pub provider_event_id: String,
}

/// Outcome of a successful `save_profile`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaveResult {
    pub profile: UserProfile,
    pub outcome: ApplyOutcome,
}

pub struct ProfileStore {
    users: RwLock<BTreeMap<UserId, UserRecord>>,
    snapshot: Option<PathBuf>,
    retention: chrono::Duration,
}

impl Default for ProfileStore {
    fn default() -> Self {
        Self::in_memory()
    }
}

/// Default transcript retention.
pub const DEFAULT_RETENTION_DAYS: i64 = 90;

impl ProfileStore {
    pub fn in_memory() -> Self {
        Self {
            users: RwLock::new(BTreeMap::new()),
            snapshot: None,
            retention: chrono::Duration::days(DEFAULT_RETENTION_DAYS),
        }
    }

    /// Opens (or creates) a store backed by a JSON snapshot file.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let users = match std::fs::read_to_string(&path) {
            Ok(text) if !text.trim().is_empty() => serde_json::from_str(&text)
                .map_err(|e| StoreError::StorageUnavailable(format!("corrupt snapshot: {e}")))?,
            Ok(_) => BTreeMap::new(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(StoreError::StorageUnavailable(e.to_string())),
        };
        Ok(Self { users: RwLock::new(users), snapshot: Some(path), ..Self::in_memory() })
    }

    pub fn with_retention_days(mut self, days: i64) -> Self {
        self.retention = chrono::Duration::days(days);
        self
    }

    fn persist(&self, users: &BTreeMap<UserId, UserRecord>) -> Result<(), StoreError> {
        let Some(path) = &self.snapshot else { return Ok(()) };
        let text = serde_json::to_string(users).map_err(|e| StoreError::StorageUnavailable(e.to_string()))?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, text)
            .and_then(|()| std::fs::rename(&tmp, path))
            .map_err(|e| StoreError::StorageUnavailable(e.to_string()))
    }

    fn read<T>(&self, user: &UserId, f: impl FnOnce(&UserRecord) -> T) -> Result<T, StoreError> {
        let users = self.users.read().map_err(|_| StoreError::StorageUnavailable("lock poisoned".into()))?;
        users.get(user).map(f).ok_or(StoreError::UserNotFound)
    }

    /// Runs `f` against a copy of the record and commits it only if `f`
    /// succeeds and the snapshot write goes through.
    fn write<T, E: From<StoreError>>(
        &self,
        user: &UserId,
        f: impl FnOnce(&mut UserRecord) -> Result<T, E>,
    ) -> Result<T, E> {
        let mut users = self.users.write().map_err(|_| StoreError::StorageUnavailable("lock poisoned".into()))?;
        let current = users.get(user).ok_or(StoreError::UserNotFound)?;
        let mut staged = current.clone();
        let out = f(&mut staged)?;
        let previous = users.insert(user.clone(), staged);
        if let Err(e) = self.persist(&users) {
            if let Some(prev) = previous {
                users.insert(user.clone(), prev);
            }
            return Err(e.into());
        }
        Ok(out)
    }

    /// Creates an empty profile if the user is new; returns the profile.
    pub fn register(&self, user: &UserId) -> Result<UserProfile, StoreError> {
        let mut users = self.users.write().map_err(|_| StoreError::StorageUnavailable("lock poisoned".into()))?;
        if let Some(r) = users.get(user) {
            return Ok(r.profile.clone());
        }
        let rec = UserRecord::new(user.clone());
        let profile = rec.profile.clone();
        users.insert(user.clone(), rec);
        if let Err(e) = self.persist(&users) {
            users.remove(user);
            return Err(e);
        }
        Ok(profile)
    }

    pub fn contains(&self, user: &UserId) -> bool {
        self.users.read().map(|u| u.contains_key(user)).unwrap_or(false)
    }

    pub fn profile(&self, user: &UserId) -> Result<UserProfile, StoreError> {
        self.read(user, |r| r.profile.clone())
    }

    /// Validates a model-proposed patch against the phase field map and the
    /// section schemas, then merges it atomically.
    ///
    /// String values are scrubbed before they are stored, and any display
    /// name in the payload is handed back to the caller rather than kept.
    pub fn save_profile(
        &self,
        user: &UserId,
        patch: &ToolCallPatch,
        now: DateTime<Utc>,
        display_name: Option<&str>,
    ) -> Result<SaveResult, SaveError> {
        let payload_name = patch
            .payload
            .pointer("/demographic/name")
            .and_then(Value::as_str)
            .map(str::to_string);
        let scrubber = Scrubber::with_display_name(payload_name.as_deref().or(display_name));
        let mut clean = patch.clone();
        if let Some(demo) = clean.payload.get_mut("demographic").and_then(Value::as_object_mut) {
            demo.remove("name");
        }
        scrub_strings(&mut clean.payload, &scrubber);

        self.write(user, |rec| {
            let validated = patch::validate(&rec.profile, &clean)?;
            let mut outcome = patch::apply(&mut rec.profile, validated, now, &mut rec.goal_seq)?;
            if outcome.changed {
                rec.write_log.push(LoggedWrite::Patch { patch: clean.clone(), at: now });
            }
            outcome.display_name = payload_name.clone();
            Ok(SaveResult { profile: rec.profile.clone(), outcome })
        })
    }

    pub fn set_communication_style(&self, user: &UserId, style: CommunicationStyle) -> Result<(), StoreError> {
        self.write(user, |rec| {
            if rec.profile.communication_style != Some(style) {
                rec.profile.communication_style = Some(style);
                rec.write_log.push(LoggedWrite::Style { style });
            }
            Ok::<_, StoreError>(())
        })
    }

    pub fn write_log(&self, user: &UserId) -> Result<Vec<LoggedWrite>, StoreError> {
        self.read(user, |r| r.write_log.clone())
    }

    /// Scrubs and appends a transcript turn, returning its id.
    pub fn append_transcript(&self, user: &UserId, turn: &Turn, display_name: Option<&str>) -> Result<u64, StoreError> {
        let text = Scrubber::with_display_name(display_name).scrub(&turn.text);
        self.write(user, |rec| {
            let id = rec.next_turn_id;
            rec.next_turn_id += 1;
            rec.transcript.push(StoredTurn { id, turn: Turn { text: text.clone(), ..turn.clone() } });
            Ok::<_, StoreError>(id)
        })
    }

    /// Re-scrubs every stored turn with a display name learned after those
    /// turns were written.
    pub fn redact_name(&self, user: &UserId, display_name: &str) -> Result<(), StoreError> {
        let scrubber = Scrubber::with_display_name(Some(display_name));
        self.write(user, |rec| {
            for t in &mut rec.transcript {
                t.turn.text = scrubber.scrub(&t.turn.text);
            }
            Ok::<_, StoreError>(())
        })
    }

    pub fn transcript(&self, user: &UserId) -> Result<Vec<StoredTurn>, StoreError> {
        self.read(user, |r| r.transcript.clone())
    }

    /// Drops transcript turns older than the retention period.
    pub fn prune_transcripts(&self, now: DateTime<Utc>) -> Result<usize, StoreError> {
        let cutoff = now - self.retention;
        let mut users = self.users.write().map_err(|_| StoreError::StorageUnavailable("lock poisoned".into()))?;
        let mut removed = 0;
        for rec in users.values_mut() {
            let before = rec.transcript.len();
            rec.transcript.retain(|t| t.turn.timestamp >= cutoff);
            removed += before - rec.transcript.len();
        }
        if removed > 0 {
            self.persist(&users)?;
        }
        Ok(removed)
    }

    pub fn settings(&self, user: &UserId) -> Result<UserSettings, StoreError> {
        self.read(user, |r| r.settings.clone())
    }

    pub fn update_settings<T, E: From<StoreError>>(
        &self,
        user: &UserId,
        f: impl FnOnce(&mut UserSettings) -> Result<T, E>,
    ) -> Result<T, E> {
        self.write(user, |rec| f(&mut rec.settings))
    }

    pub fn all_settings(&self) -> Vec<(UserId, UserSettings)> {
        self.users
            .read()
            .map(|u| u.iter().map(|(k, v)| (k.clone(), v.settings.clone())).collect())
            .unwrap_or_default()
    }

    pub fn checkins(&self, user: &UserId) -> Result<Vec<ScheduledCheckin>, StoreError> {
        self.read(user, |r| r.checkins.clone())
    }

    /// Replaces all stored check-ins for one goal.
    pub fn replace_checkins(&self, user: &UserId, goal_id: &str, events: Vec<ScheduledCheckin>) -> Result<(), StoreError> {
        self.write(user, |rec| {
            rec.checkins.retain(|c| c.event.goal_id != goal_id);
            rec.checkins.extend(events);
            Ok::<_, StoreError>(())
        })
    }

    pub fn themes(&self, user: &UserId) -> Result<Option<StoredThemes>, StoreError> {
        self.read(user, |r| r.themes.clone())
    }

    pub fn set_themes(&self, user: &UserId, themes: Vec<String>, at: DateTime<Utc>) -> Result<(), StoreError> {
        let scrub = Scrubber::new();
        let themes = themes.iter().map(|t| scrub.scrub(t)).collect();
        self.write(user, |rec| {
            rec.themes = Some(StoredThemes { themes, computed_at: at });
            Ok::<_, StoreError>(())
        })
    }

    /// Removes every record held for the user.
    pub fn delete_user(&self, user: &UserId) -> Result<(), StoreError> {
        let mut users = self.users.write().map_err(|_| StoreError::StorageUnavailable("lock poisoned".into()))?;
        let removed = users.remove(user).ok_or(StoreError::UserNotFound)?;
        if let Err(e) = self.persist(&users) {
            users.insert(user.clone(), removed);
            return Err(e);
        }
        Ok(())
    }

    /// Full serialized contents of the datastore.
    pub fn dump(&self) -> String {
        self.users
            .read()
            .map(|u| serde_json::to_string_pretty(&*u).unwrap_or_default())
            .unwrap_or_default()
    }
}

fn scrub_strings(value: &mut Value, scrubber: &Scrubber) {
    match value {
        Value::String(s) => *s = scrubber.scrub(s),
        Value::Array(items) => items.iter_mut().for_each(|v| scrub_strings(v, scrubber)),
        Value::Object(map) => map.values_mut().for_each(|v| scrub_strings(v, scrubber)),
        _ => {}
    }
}

/// Rebuilds a profile by replaying a write log from an empty record.
pub fn replay(user: &UserId, log: &[LoggedWrite]) -> Result<UserProfile, SaveError> {
    let mut profile = UserProfile::new(user.clone());
    let mut seq = 0;
    for entry in log {
        match entry {
            LoggedWrite::Patch { patch, at } => {
                let v = patch::validate(&profile, patch)?;
                patch::apply(&mut profile, v, *at, &mut seq)?;
            }
            LoggedWrite::Style { style } => profile.communication_style = Some(*style),
        }
    }
    Ok(profile)
}
