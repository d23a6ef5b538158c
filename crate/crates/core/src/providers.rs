//! Calendar and email seams. Live adapters plug in behind these traits;
//! the in-memory versions back the tests and the demo server.

use std::collections::HashMap;
use std::sync::Mutex;

use chrono::{DateTime, Duration, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::UserId;
use crate::scheduler::BusyInterval;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("provider error: {0}")]
pub struct ProviderError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewEvent {
    pub title: String,
    pub start: NaiveDateTime,
    pub duration_minutes: u32,
    pub description: String,
}

pub trait CalendarProvider: Send + Sync {
    /// Busy intervals overlapping `[from, to)`; times are the user's local time.
    fn free_busy(&self, user: &UserId, from: NaiveDateTime, to: NaiveDateTime) -> Result<Vec<BusyInterval>, ProviderError>;
    fn create_event(&self, user: &UserId, event: &NewEvent) -> Result<String, ProviderError>;
    fn delete_event(&self, user: &UserId, event_id: &str) -> Result<(), ProviderError>;
}

pub trait EmailProvider: Send + Sync {
    fn send(&self, user: &UserId, subject: &str, body: &str) -> Result<(), ProviderError>;
}

#[derive(Debug, Default)]
struct CalendarState {
    busy: HashMap<UserId, Vec<BusyInterval>>,
    events: HashMap<UserId, Vec<(String, NewEvent)>>,
    next_id: u64,
}

/// Calendar held in memory. Created events count as busy time.
#[derive(Debug, Default)]
pub struct InMemoryCalendar {
    state: Mutex<CalendarState>,
}

impl InMemoryCalendar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_busy(&self, user: &UserId, interval: BusyInterval) {
        self.state.lock().expect("calendar lock").busy.entry(user.clone()).or_default().push(interval);
    }

    pub fn events(&self, user: &UserId) -> Vec<(String, NewEvent)> {
        self.state.lock().expect("calendar lock").events.get(user).cloned().unwrap_or_default()
    }
}

impl CalendarProvider for InMemoryCalendar {
    fn free_busy(&self, user: &UserId, from: NaiveDateTime, to: NaiveDateTime) -> Result<Vec<BusyInterval>, ProviderError> {
        let st = self.state.lock().map_err(|_| ProviderError("calendar lock poisoned".into()))?;
        let mut out: Vec<BusyInterval> =
            st.busy.get(user).into_iter().flatten().filter(|b| b.intersects(from, to)).copied().collect();
        for (_, e) in st.events.get(user).into_iter().flatten() {
            let end = e.start + Duration::minutes(e.duration_minutes.into());
            if let Some(b) = BusyInterval::new(e.start, end).filter(|b| b.intersects(from, to)) {
                out.push(b);
            }
        }
        Ok(out)
    }

    fn create_event(&self, user: &UserId, event: &NewEvent) -> Result<String, ProviderError> {
        let mut st = self.state.lock().map_err(|_| ProviderError("calendar lock poisoned".into()))?;
        st.next_id += 1;
        let id = format!("evt-{}", st.next_id);
        st.events.entry(user.clone()).or_default().push((id.clone(), event.clone()));
        Ok(id)
    }

    fn delete_event(&self, user: &UserId, event_id: &str) -> Result<(), ProviderError> {
        let mut st = self.state.lock().map_err(|_| ProviderError("calendar lock poisoned".into()))?;
        if let Some(list) = st.events.get_mut(user) {
            list.retain(|(id, _)| id != event_id);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentEmail {
    pub user: UserId,
    pub subject: String,
    pub body: String,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Default)]
pub struct InMemoryMailbox {
    sent: Mutex<Vec<SentEmail>>,
}

impl InMemoryMailbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sent(&self) -> Vec<SentEmail> {
        self.sent.lock().expect("mailbox lock").clone()
    }
}

impl EmailProvider for InMemoryMailbox {
    fn send(&self, user: &UserId, subject: &str, body: &str) -> Result<(), ProviderError> {
        self.sent.lock().map_err(|_| ProviderError("mailbox lock poisoned".into()))?.push(SentEmail {
            user: user.clone(),
            subject: subject.into(),
            body: body.into(),
            at: Utc::now(),
        });
        Ok(())
    }
}
