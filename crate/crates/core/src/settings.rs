//! Per-user preferences: reminder cadence, check-in window, coach persona.

use chrono::{DateTime, FixedOffset, Utc};
use serde::{Deserialize, Serialize};

use crate::scheduler::{ReminderFrequency, ReminderSettings, TimeWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonaGender {
    Female,
    Male,
    NonBinary,
    #[default]
    Unspecified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoachPersona {
    pub name: String,
    pub avatar: String,
    #[serde(default)]
    pub gender: PersonaGender,
}

impl Default for CoachPersona {
    fn default() -> Self {
        Self { name: "Coach".into(), avatar: "sprout".into(), gender: PersonaGender::Unspecified }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSettings {
    #[serde(default)]
    pub reminders: ReminderSettings,
    pub window: TimeWindow,
    #[serde(default)]
    pub persona: CoachPersona,
    /// Fixed offset of the user's local time from UTC.
    #[serde(default)]
    pub utc_offset_minutes: i32,
    #[serde(default)]
    pub calendar_connected: bool,
}

impl Default for UserSettings {
    fn default() -> Self {
        Self {
            reminders: ReminderSettings::default(),
            window: TimeWindow::Morning,
            persona: CoachPersona::default(),
            utc_offset_minutes: 0,
            calendar_connected: false,
        }
    }
}

impl UserSettings {
    pub fn offset(&self) -> FixedOffset {
        FixedOffset::east_opt(self.utc_offset_minutes * 60).unwrap_or(FixedOffset::east_opt(0).expect("zero offset"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonaUpdate {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub avatar: Option<String>,
    #[serde(default)]
    pub gender: Option<PersonaGender>,
}

/// Partial settings update as accepted by `PUT /api/settings`. Unknown
/// keys and out-of-enum values fail deserialization.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsUpdate {
    #[serde(default)]
    pub frequency: Option<ReminderFrequency>,
    #[serde(default)]
    pub reminders_enabled: Option<bool>,
    #[serde(default)]
    pub window: Option<TimeWindow>,
    #[serde(default)]
    pub persona: Option<PersonaUpdate>,
    #[serde(default)]
    pub utc_offset_minutes: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct InvalidSettings(pub String);

impl SettingsUpdate {
    pub fn apply(&self, settings: &mut UserSettings, now: DateTime<Utc>) -> Result<(), InvalidSettings> {
        if let Some(off) = self.utc_offset_minutes {
            if !(-14 * 60..=14 * 60).contains(&off) {
                return Err(InvalidSettings("utc_offset_minutes out of range".into()));
            }
        }
        if let Some(p) = &self.persona {
            for (field, v) in [("name", &p.name), ("avatar", &p.avatar)] {
                if v.as_deref().is_some_and(|s| s.trim().is_empty() || s.chars().count() > 40) {
                    return Err(InvalidSettings(format!("persona {field} must be 1-40 characters")));
                }
            }
        }
        if let Some(f) = self.frequency {
            settings.reminders.frequency = f;
        }
        if let Some(on) = self.reminders_enabled {
            if on && !settings.reminders.enabled {
                settings.reminders.enabled_since = Some(now);
            }
            settings.reminders.enabled = on;
        }
        if let Some(w) = self.window {
            settings.window = w;
        }
        if let Some(off) = self.utc_offset_minutes {
            settings.utc_offset_minutes = off;
        }
        if let Some(p) = &self.persona {
            if let Some(n) = &p.name {
                settings.persona.name = n.trim().to_string();
            }
            if let Some(a) = &p.avatar {
                settings.persona.avatar = a.trim().to_string();
            }
            if let Some(g) = p.gender {
                settings.persona.gender = g;
            }
        }
        Ok(())
    }
}
