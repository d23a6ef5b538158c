//! Application service behind the HTTP API. Every call is made on behalf
//! of one authenticated pseudonymous user.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Days, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::domain::{GoalStatus, Phase, Speaker, UserId};
use crate::engine::distress::RESOURCE_FOOTER;
use crate::engine::{advance, resume_phase, start_session, EngineConfig, EngineError, EngineOutput, SessionState};
use crate::gateway::LlmGateway;
use crate::metrics::{
    checkin_consistency, classify_style, dartboard_view, overall_goal_progress, summarize_themes, user_messages,
    DashboardPayload, GoalView, Insights, DEFAULT_CONSISTENCY_WINDOW,
};
use crate::providers::{CalendarProvider, EmailProvider, NewEvent};
use crate::resources::{ResourceCatalog, SupportResource};
use crate::scheduler::{
    due_reminders, next_reminder, reschedule_goal_checkins, BusyInterval, CheckinEvent,
    ReminderFrequency, TimeWindow, TimeWindowPref, WindowBounds, MAX_DAY_SHIFT,
};
use crate::settings::{CoachPersona, SettingsUpdate};
use crate::store::{ProfileStore, ScheduledCheckin, StoreError};

/// Communication style is re-derived after this many student messages.
pub const STYLE_REFRESH_EVERY: u32 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: u16, code: &str, message: impl Into<String>) -> Self {
        Self { status, code: code.into(), message: message.into() }
    }

    pub fn unauthorized() -> Self {
        Self::new(401, "unauthorized", "missing or unknown session token")
    }

    pub fn validation(code: &str, message: impl Into<String>) -> Self {
        Self::new(422, code, message)
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", self.status, self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UserNotFound => Self::new(404, "user_not_found", e.to_string()),
            StoreError::StorageUnavailable(_) => Self::new(503, "storage_unavailable", e.to_string()),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::EmptyMessage => Self::validation("empty_message", "message text must not be empty"),
            EngineError::GatewayUnavailable { retry_message, .. } => Self::new(503, "model_unavailable", retry_message),
            EngineError::Store(s) => s.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    #[serde(flatten)]
    pub output: EngineOutput,
    pub display_phase: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource_footer: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettingsView {
    pub frequency: ReminderFrequency,
    pub reminders_enabled: bool,
    pub next_reminder: Option<DateTime<Utc>>,
    pub window: TimeWindow,
    /// Minutes after local midnight.
    pub window_bounds: (u32, u32),
    pub persona: CoachPersona,
    pub utc_offset_minutes: i32,
    pub calendar_connected: bool,
}

pub struct ServiceConfig {
    pub engine: EngineConfig,
    pub dashboard_url: String,
    pub consistency_window: u32,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            engine: EngineConfig::default(),
            dashboard_url: "http://localhost:8080/dashboard".into(),
            consistency_window: DEFAULT_CONSISTENCY_WINDOW,
        }
    }
}

pub struct GrowService {
    store: Arc<ProfileStore>,
    gateway: Arc<dyn LlmGateway>,
    calendar: Arc<dyn CalendarProvider>,
    email: Arc<dyn EmailProvider>,
    clock: Arc<dyn Clock>,
    catalog: ResourceCatalog,
    config: ServiceConfig,
    sessions: Mutex<HashMap<UserId, Arc<Mutex<SessionState>>>>,
    tokens: RwLock<HashMap<String, UserId>>,
}

impl GrowService {
    pub fn new(
        store: Arc<ProfileStore>,
        gateway: Arc<dyn LlmGateway>,
        calendar: Arc<dyn CalendarProvider>,
        email: Arc<dyn EmailProvider>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            store,
            gateway,
            calendar,
            email,
            clock,
            catalog: ResourceCatalog::default(),
            config: ServiceConfig::default(),
            sessions: Mutex::new(HashMap::new()),
            tokens: RwLock::new(HashMap::new()),
        }
    }

    pub fn with_catalog(mut self, catalog: ResourceCatalog) -> Self {
        self.catalog = catalog;
        self
    }

    pub fn with_config(mut self, config: ServiceConfig) -> Self {
        self.config = config;
        self
    }

    pub fn store(&self) -> &ProfileStore {
        &self.store
    }

    /// Registers the user if needed and binds a new opaque bearer token to
    /// them. Stands in for the identity provider.
    pub fn issue_token(&self, user: &UserId) -> Result<String, ApiError> {
        self.store.register(user)?;
        let token = uuid::Uuid::new_v4().simple().to_string();
        self.tokens.write().expect("token lock").insert(token.clone(), user.clone());
        Ok(token)
    }

    /// Binds a caller-chosen token; used by deployments with an external
    /// identity provider and by tests.
    pub fn bind_token(&self, token: &str, user: &UserId) -> Result<(), ApiError> {
        self.store.register(user)?;
        self.tokens.write().expect("token lock").insert(token.to_string(), user.clone());
        Ok(())
    }

    pub fn authenticate(&self, token: Option<&str>) -> Result<UserId, ApiError> {
        let token = token.filter(|t| !t.is_empty()).ok_or_else(ApiError::unauthorized)?;
        self.tokens.read().expect("token lock").get(token).cloned().ok_or_else(ApiError::unauthorized)
    }

    fn session(&self, user: &UserId) -> Result<Arc<Mutex<SessionState>>, ApiError> {
        let mut sessions = self.sessions.lock().expect("session map lock");
        if let Some(s) = sessions.get(user) {
            return Ok(s.clone());
        }
        let s = Arc::new(Mutex::new(start_session(user, &self.store, self.config.engine.history_window)?));
        sessions.insert(user.clone(), s.clone());
        Ok(s)
    }

    pub fn current_phase(&self, user: &UserId) -> Result<Phase, ApiError> {
        if let Some(s) = self.sessions.lock().expect("session map lock").get(user) {
            return Ok(s.lock().expect("session lock").phase);
        }
        Ok(resume_phase(&self.store.profile(user)?))
    }

    pub fn chat(&self, user: &UserId, text: &str) -> Result<ChatResponse, ApiError> {
        let session = self.session(user)?;
        let mut guard = session.lock().expect("session lock");
        let now = self.clock.now();
        let output = advance(&mut guard, text, self.gateway.as_ref(), &self.store, &self.config.engine, now)?;
        let turns = guard.turn_count;
        drop(guard);

        if let Err(e) = self.sync_checkins(user, &output) {
            tracing::warn!(error = %e, "check-in scheduling failed");
        }
        if turns % STYLE_REFRESH_EVERY == 0 {
            self.refresh_style(user)?;
        }
        Ok(ChatResponse {
            display_phase: output.phase.display_label().to_string(),
            resource_footer: output.resource_footer_attached.then(|| RESOURCE_FOOTER.to_string()),
            output,
        })
    }

    fn refresh_style(&self, user: &UserId) -> Result<(), ApiError> {
        let transcript: Vec<_> = self.store.transcript(user)?.into_iter().map(|t| t.turn).collect();
        let msgs = user_messages(&transcript);
        if let Ok(c) = classify_style(&msgs, Some(self.gateway.as_ref()), &self.config.engine.params) {
            self.store.set_communication_style(user, c.style)?;
        }
        Ok(())
    }

    fn sync_checkins(&self, user: &UserId, output: &EngineOutput) -> Result<(), ApiError> {
        if !self.store.settings(user)?.calendar_connected {
            return Ok(());
        }
        for id in &output.completed_goals {
            self.clear_future_checkins(user, id)?;
        }
        for id in output.created_goals.iter().chain(&output.rescheduled_goals) {
            self.schedule_goal(user, id)?;
        }
        Ok(())
    }

    fn clear_future_checkins(&self, user: &UserId, goal_id: &str) -> Result<(), ApiError> {
        let now_local = self.clock.now().with_timezone(&self.store.settings(user)?.offset()).naive_local();
        let existing = self.store.checkins(user)?;
        let mut keep = Vec::new();
        for c in existing.into_iter().filter(|c| c.event.goal_id == goal_id) {
            if c.event.start > now_local {
                self.calendar.delete_event(user, &c.provider_event_id).map_err(provider_err)?;
            } else {
                keep.push(c);
            }
        }
        self.store.replace_checkins(user, goal_id, keep)?;
        Ok(())
    }

    /// Places (or re-places) both check-ins for one goal.
    fn schedule_goal(&self, user: &UserId, goal_id: &str) -> Result<Vec<CheckinEvent>, ApiError> {
        let profile = self.store.profile(user)?;
        let Some(goal) = profile.goal(goal_id).filter(|g| g.status == GoalStatus::Active) else {
            return Ok(Vec::new());
        };
        let settings = self.store.settings(user)?;
        let pref = TimeWindowPref::new(settings.window);
        let from = goal.timeframe.start_date.and_hms_opt(0, 0, 0).expect("midnight");
        let to = (goal.timeframe.last_day() + Days::new(MAX_DAY_SHIFT + 1)).and_hms_opt(0, 0, 0).expect("midnight");
        let busy: Vec<BusyInterval> = self.calendar.free_busy(user, from, to).map_err(provider_err)?;
        let existing: Vec<ScheduledCheckin> =
            self.store.checkins(user)?.into_iter().filter(|c| c.event.goal_id == goal_id).collect();
        let existing_events: Vec<CheckinEvent> = existing.iter().map(|c| c.event.clone()).collect();
        let events = match reschedule_goal_checkins(&existing_events, goal, &pref, &busy, &self.config.dashboard_url) {
            Ok(pair) => pair.into_vec(),
            Err(short) => vec![short.end],
        };
        if existing_events == events {
            return Ok(events);
        }
        for c in &existing {
            self.calendar.delete_event(user, &c.provider_event_id).map_err(provider_err)?;
        }
        let mut stored = Vec::new();
        for e in &events {
            let id = self
                .calendar
                .create_event(
                    user,
                    &NewEvent {
                        title: e.title(goal),
                        start: e.start,
                        duration_minutes: e.duration_minutes,
                        description: e.description(goal),
                    },
                )
                .map_err(provider_err)?;
            stored.push(ScheduledCheckin { event: e.clone(), provider_event_id: id });
        }
        self.store.replace_checkins(user, goal_id, stored)?;
        Ok(events)
    }

    /// Marks the calendar as connected and schedules check-ins for every
    /// active goal.
    pub fn connect_calendar(&self, user: &UserId) -> Result<Vec<CheckinEvent>, ApiError> {
        self.store.update_settings(user, |s| {
            s.calendar_connected = true;
            Ok::<_, StoreError>(())
        })?;
        self.schedule_all(user)
    }

    fn schedule_all(&self, user: &UserId) -> Result<Vec<CheckinEvent>, ApiError> {
        let profile = self.store.profile(user)?;
        let mut out = Vec::new();
        for g in profile.mental_health_goals.iter().filter(|g| g.status == GoalStatus::Active) {
            out.extend(self.schedule_goal(user, &g.goal_id)?);
        }
        Ok(out)
    }

    pub fn settings(&self, user: &UserId) -> Result<SettingsView, ApiError> {
        let s = self.store.settings(user)?;
        let now = self.clock.now();
        let next = next_reminder(
            &crate::scheduler::ReminderSettings {
                last_sent: s.reminders.last_sent.or(s.reminders.enabled_since),
                ..s.reminders.clone()
            },
            now,
        );
        Ok(SettingsView {
            frequency: s.reminders.frequency,
            reminders_enabled: s.reminders.enabled,
            next_reminder: next,
            window: s.window,
            window_bounds: WindowBounds::default().get(s.window),
            persona: s.persona,
            utc_offset_minutes: s.utc_offset_minutes,
            calendar_connected: s.calendar_connected,
        })
    }

    pub fn update_settings(&self, user: &UserId, update: &SettingsUpdate) -> Result<SettingsView, ApiError> {
        let now = self.clock.now();
        let before = self.store.settings(user)?;
        self.store.update_settings(user, |s| {
            update.apply(s, now).map_err(|e| ApiError::validation("invalid_settings", e.0))
        })?;
        let after = self.store.settings(user)?;
        if after.calendar_connected && (after.window != before.window || after.utc_offset_minutes != before.utc_offset_minutes) {
            self.schedule_all(user)?;
        }
        self.settings(user)
    }

    pub fn resources(&self) -> Vec<SupportResource> {
        self.catalog.entries().to_vec()
    }

    pub fn dashboard(&self, user: &UserId) -> Result<DashboardPayload, ApiError> {
        let profile = self.store.profile(user)?;
        let settings = self.store.settings(user)?;
        let phase = self.current_phase(user)?;
        let now = self.clock.now();
        let offset = settings.offset();
        let transcript: Vec<_> = self.store.transcript(user)?.into_iter().map(|t| t.turn).collect();

        let today = now.with_timezone(&offset).date_naive();
        let days: Vec<NaiveDate> = transcript
            .iter()
            .filter(|t| t.speaker == Speaker::User)
            .map(|t| t.timestamp.with_timezone(&offset).date_naive())
            .collect();
        let consistency = checkin_consistency(&days, today, self.config.consistency_window);
        let overall = overall_goal_progress(&profile.mental_health_goals);

        let checkins = self.store.checkins(user)?;
        let goals_view = profile
            .mental_health_goals
            .iter()
            .map(|g| GoalView {
                goal_id: g.goal_id.clone(),
                description: g.description.clone(),
                duration_days: g.timeframe.duration_days,
                next_steps: g.steps.clone(),
                progress: g.progress,
                status: g.status,
                scheduled_checkins: checkins.iter().filter(|c| c.event.goal_id == g.goal_id).map(|c| c.event.clone()).collect(),
            })
            .collect();

        let (themes, themes_stale) = self.themes(user, &transcript, now)?;
        Ok(DashboardPayload {
            display_phase: phase.display_label().to_string(),
            overall_progress: overall.percent,
            active_goal_count: overall.active_count,
            consistency,
            goals_view,
            insights: Insights {
                themes,
                themes_stale,
                style: profile.communication_style,
                dartboard: dartboard_view(profile.bevs.as_ref()).unwrap_or_default(),
            },
            resources: self.resources(),
        })
    }

    /// Stored themes, recomputed at most once per day.
    fn themes(
        &self,
        user: &UserId,
        transcript: &[crate::domain::Turn],
        now: DateTime<Utc>,
    ) -> Result<(Vec<String>, bool), ApiError> {
        let stored = self.store.themes(user)?;
        if let Some(s) = &stored {
            if now - s.computed_at < Duration::days(1) {
                return Ok((s.themes.clone(), false));
            }
        }
        if transcript.is_empty() {
            return Ok((Vec::new(), false));
        }
        let previous = stored.map(|s| s.themes).unwrap_or_default();
        let window = &transcript[transcript.len().saturating_sub(self.config.engine.history_window * 3)..];
        match summarize_themes(window, self.gateway.as_ref(), &self.config.engine.params, &previous) {
            Ok(summary) if !summary.stale => {
                self.store.set_themes(user, summary.themes, now)?;
                Ok((self.store.themes(user)?.map(|t| t.themes).unwrap_or_default(), false))
            }
            Ok(summary) => Ok((summary.themes, true)),
            Err(_) => Ok((previous, false)),
        }
    }

    /// Removes the profile, transcripts, settings, scheduled events, the
    /// live session, and every token bound to the user.
    pub fn delete_user(&self, user: &UserId) -> Result<(), ApiError> {
        let checkins = self.store.checkins(user)?;
        for c in &checkins {
            if let Err(e) = self.calendar.delete_event(user, &c.provider_event_id) {
                tracing::warn!(error = %e, "could not delete calendar event");
            }
        }
        self.store.delete_user(user)?;
        self.sessions.lock().expect("session map lock").remove(user);
        self.tokens.write().expect("token lock").retain(|_, u| u != user);
        Ok(())
    }

    /// One pass of the reminder worker: prunes expired transcripts, then
    /// emails every user with a reminder due. Returns who was emailed.
    pub fn run_reminders(&self) -> Result<Vec<UserId>, ApiError> {
        let now = self.clock.now();
        self.store.prune_transcripts(now)?;
        let all = self.store.all_settings();
        let due = due_reminders(all.iter().map(|(u, s)| (u, &s.reminders)), now);
        let mut sent = Vec::new();
        for user in due {
            let body = format!(
                "Hi! This is your reminder to check in on your goals. Your dashboard: {}",
                self.config.dashboard_url
            );
            match self.email.send(&user, "Time for a quick goal check-in", &body) {
                Ok(()) => {
                    self.store.update_settings(&user, |s| {
                        s.reminders.last_sent = Some(now);
                        Ok::<_, StoreError>(())
                    })?;
                    sent.push(user);
                }
                Err(e) => tracing::warn!(error = %e, "reminder email failed"),
            }
        }
        Ok(sent)
    }
}

fn provider_err(e: crate::providers::ProviderError) -> ApiError {
    ApiError::new(502, "provider_error", e.0)
}
