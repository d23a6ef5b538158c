//! Calendar check-in placement and email reminder cadence.
//!
//! All calendar times are naive local times in the user's configured
//! timezone; provider adapters convert at the boundary.

use chrono::{DateTime, Days, Duration, NaiveDate, NaiveDateTime, NaiveTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Goal, UserId};

/// Check-in slot grid and event length.
pub const SLOT_MINUTES: u32 = 30;
/// How many days past the target day the slot search may shift.
pub const MAX_DAY_SHIFT: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeWindow {
    Morning,
    Afternoon,
    Evening,
    Night,
}

impl TimeWindow {
    pub const ALL: [TimeWindow; 4] = [TimeWindow::Morning, TimeWindow::Afternoon, TimeWindow::Evening, TimeWindow::Night];
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid window bounds: {0}")]
pub struct InvalidBounds(pub String);

/// Opening and closing minute-of-day for each window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowBounds {
    bounds: [(u32, u32); 4],
}

impl Default for WindowBounds {
    fn default() -> Self {
        Self { bounds: [(8 * 60, 12 * 60), (12 * 60, 17 * 60), (17 * 60, 21 * 60), (21 * 60, 24 * 60)] }
    }
}

impl WindowBounds {
    /// Bounds in minutes since midnight, ordered morning..night. Each window
    /// must fit at least one slot and windows may not overlap.
    pub fn new(bounds: [(u32, u32); 4]) -> Result<Self, InvalidBounds> {
        for (i, (open, close)) in bounds.iter().enumerate() {
            if *close > 24 * 60 || close.saturating_sub(*open) < SLOT_MINUTES {
                return Err(InvalidBounds(format!("window {i} is {open}..{close}")));
            }
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                let (a, b) = (bounds[i], bounds[j]);
                if a.0 < b.1 && b.0 < a.1 {
                    return Err(InvalidBounds(format!("windows {i} and {j} overlap")));
                }
            }
        }
        Ok(Self { bounds })
    }

    pub fn get(&self, window: TimeWindow) -> (u32, u32) {
        self.bounds[window as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindowPref {
    pub window: TimeWindow,
    #[serde(default)]
    pub bounds: WindowBounds,
}

impl TimeWindowPref {
    pub fn new(window: TimeWindow) -> Self {
        Self { window, bounds: WindowBounds::default() }
    }

    fn open_close(&self, day: NaiveDate) -> (NaiveDateTime, NaiveDateTime) {
        let (open, close) = self.bounds.get(self.window);
        let midnight = day.and_time(NaiveTime::MIN);
        (midnight + Duration::minutes(open.into()), midnight + Duration::minutes(close.into()))
    }
}

/// A free/busy interval. Carries no titles or descriptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusyInterval {
    start: NaiveDateTime,
    end: NaiveDateTime,
}

impl BusyInterval {
    pub fn new(start: NaiveDateTime, end: NaiveDateTime) -> Option<Self> {
        (start < end).then_some(Self { start, end })
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn end(&self) -> NaiveDateTime {
        self.end
    }

    pub fn intersects(&self, start: NaiveDateTime, end: NaiveDateTime) -> bool {
        self.start < end && start < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckinKind {
    Midpoint,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckinEvent {
    pub goal_id: String,
    pub kind: CheckinKind,
    pub start: NaiveDateTime,
    pub duration_minutes: u32,
    pub link: String,
    /// Set when no free slot existed and the event was placed at the
    /// window's opening slot regardless of conflicts.
    #[serde(default)]
    pub fallback: bool,
}

impl CheckinEvent {
    pub fn end(&self) -> NaiveDateTime {
        self.start + Duration::minutes(self.duration_minutes.into())
    }

    /// Calendar event body: the goal's planned steps and the dashboard link.
    pub fn description(&self, goal: &Goal) -> String {
        let mut out = String::from("Time for a quick check-in on your goal.\n\nPlanned steps:\n");
        for step in &goal.steps {
            out.push_str("- ");
            out.push_str(step);
            out.push('\n');
        }
        out.push_str("\nOpen your dashboard: ");
        out.push_str(&self.link);
        out
    }

    pub fn title(&self, goal: &Goal) -> String {
        let when = match self.kind {
            CheckinKind::Midpoint => "Midpoint check-in",
            CheckinKind::End => "Final check-in",
        };
        format!("{when}: {}", goal.description)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("goal spans fewer than two days; only an end check-in was scheduled")]
pub struct GoalTooShort {
    pub end: CheckinEvent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckinPair {
    pub midpoint: CheckinEvent,
    pub end: CheckinEvent,
}

impl CheckinPair {
    pub fn into_vec(self) -> Vec<CheckinEvent> {
        vec![self.midpoint, self.end]
    }
}

fn slot_after(open: NaiveDateTime, after: NaiveDateTime) -> NaiveDateTime {
    if after < open {
        return open;
    }
    let slot = i64::from(SLOT_MINUTES);
    let offset = (after - open).num_minutes();
    open + Duration::minutes((offset / slot + 1) * slot)
}

fn align_up(open: NaiveDateTime, t: NaiveDateTime) -> NaiveDateTime {
    if t <= open {
        return open;
    }
    let slot = i64::from(SLOT_MINUTES) * 60;
    let secs = (t - open).num_seconds();
    open + Duration::seconds((secs + slot - 1) / slot * slot)
}

/// Earliest free grid slot on `day` inside the window, strictly after
/// `after` when given. Skips over whole busy intervals instead of testing
/// each slot.
fn earliest_free_on(
    day: NaiveDate,
    pref: &TimeWindowPref,
    busy: &[BusyInterval],
    after: Option<NaiveDateTime>,
) -> Option<NaiveDateTime> {
    let (open, close) = pref.open_close(day);
    let len = Duration::minutes(SLOT_MINUTES.into());
    let mut cursor = after.map_or(open, |a| slot_after(open, a));
    loop {
        if cursor + len > close {
            return None;
        }
        let blocking_end = busy
            .iter()
            .filter(|b| b.intersects(cursor, cursor + len))
            .map(|b| b.end)
            .max();
        match blocking_end {
            None => return Some(cursor),
            Some(end) => cursor = align_up(open, end),
        }
    }
}

/// First window slot on or after `day` that starts strictly after `after`,
/// ignoring busy time.
fn fallback_slot(day: NaiveDate, pref: &TimeWindowPref, after: Option<NaiveDateTime>) -> NaiveDateTime {
    let len = Duration::minutes(SLOT_MINUTES.into());
    let mut d = day;
    loop {
        let (open, close) = pref.open_close(d);
        let s = after.map_or(open, |a| slot_after(open, a));
        if s + len <= close {
            return s;
        }
        d = d + Days::new(1);
    }
}

fn place(
    target: NaiveDate,
    pref: &TimeWindowPref,
    busy: &[BusyInterval],
    after: Option<NaiveDateTime>,
) -> (NaiveDateTime, bool) {
    (0..=MAX_DAY_SHIFT)
        .find_map(|shift| earliest_free_on(target + Days::new(shift), pref, busy, after))
        .map_or_else(|| (fallback_slot(target, pref, after), true), |s| (s, false))
}

/// Places the midpoint and end check-ins for a goal.
///
/// Target days are `start + floor(duration / 2)` and the timeframe's last
/// day. Each event takes the earliest free 30-minute slot in the preferred
/// window, shifting up to two days forward before falling back to the
/// window's opening slot on the target day. The end event always starts
/// after the midpoint.
pub fn schedule_goal_checkins(
    goal: &Goal,
    pref: &TimeWindowPref,
    busy: &[BusyInterval],
    link: &str,
) -> Result<CheckinPair, GoalTooShort> {
    let tf = &goal.timeframe;
    let end_day = tf.last_day();
    let event = |kind, (start, fallback): (NaiveDateTime, bool)| CheckinEvent {
        goal_id: goal.goal_id.clone(),
        kind,
        start,
        duration_minutes: SLOT_MINUTES,
        link: link.to_string(),
        fallback,
    };
    if tf.duration_days < 2 {
        return Err(GoalTooShort { end: event(CheckinKind::End, place(end_day, pref, busy, None)) });
    }
    let mid_day = tf.start_date + Days::new(u64::from(tf.duration_days / 2));
    let midpoint = event(CheckinKind::Midpoint, place(mid_day, pref, busy, None));
    let end = event(CheckinKind::End, place(end_day, pref, busy, Some(midpoint.start)));
    Ok(CheckinPair { midpoint, end })
}

/// Re-derives a goal's check-ins after its timeframe changed. Busy
/// intervals that coincide exactly with the goal's previous events are
/// treated as those events and ignored, so repeated calls are stable.
pub fn reschedule_goal_checkins(
    existing: &[CheckinEvent],
    goal: &Goal,
    pref: &TimeWindowPref,
    busy: &[BusyInterval],
    link: &str,
) -> Result<CheckinPair, GoalTooShort> {
    let own: Vec<_> = existing.iter().filter(|e| e.goal_id == goal.goal_id).collect();
    let others: Vec<BusyInterval> = busy
        .iter()
        .filter(|b| !own.iter().any(|e| e.start == b.start && e.end() == b.end))
        .copied()
        .collect();
    schedule_goal_checkins(goal, pref, &others, link)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReminderFrequency {
    Daily,
    /// Twice a week.
    Biweekly,
    #[default]
    Weekly,
}

impl ReminderFrequency {
    pub fn period(self) -> Duration {
        match self {
            ReminderFrequency::Daily => Duration::days(1),
            ReminderFrequency::Biweekly => Duration::days(3),
            ReminderFrequency::Weekly => Duration::days(7),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReminderSettings {
    #[serde(default)]
    pub frequency: ReminderFrequency,
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub last_sent: Option<DateTime<Utc>>,
    /// When reminders were switched on; anchors the first reminder.
    #[serde(default)]
    pub enabled_since: Option<DateTime<Utc>>,
}

/// When the next reminder is due, or `None` if reminders are off.
pub fn next_reminder(settings: &ReminderSettings, now: DateTime<Utc>) -> Option<DateTime<Utc>> {
    if !settings.enabled {
        return None;
    }
    Some(settings.last_sent.unwrap_or(now) + settings.frequency.period())
}

/// Users with a reminder due at `now`, each listed once no matter how many
/// periods have elapsed.
pub fn due_reminders<'a, I>(all_settings: I, now: DateTime<Utc>) -> Vec<UserId>
where
    I: IntoIterator<Item = (&'a UserId, &'a ReminderSettings)>,
{
    let mut out: Vec<UserId> = Vec::new();
    for (user, s) in all_settings {
        let Some(anchor) = s.last_sent.or(s.enabled_since) else { continue };
        let Some(due) = next_reminder(&ReminderSettings { last_sent: Some(anchor), ..s.clone() }, now) else {
            continue;
        };
        if due <= now && !out.contains(user) {
            out.push(user.clone());
        }
    }
    out
}
