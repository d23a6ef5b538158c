//! Python module `grow`. Structured results cross the boundary as plain
//! dicts and lists (via JSON), so Python callers see the same shapes as the
//! HTTP API.

use std::sync::Arc;

use chrono::{NaiveDate, NaiveDateTime};
use grow_core::clock::SystemClock;
use grow_core::domain::{self, Goal, Phase, UserId};
use grow_core::engine::markers;
use grow_core::gateway::{Script, ScriptedBackend};
use grow_core::metrics;
use grow_core::providers::{InMemoryCalendar, InMemoryMailbox};
use grow_core::scheduler::{schedule_goal_checkins, BusyInterval, TimeWindow, TimeWindowPref};
use grow_core::service::{ApiError, GrowService};
use grow_core::store::{ProfileStore, Scrubber};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_str_enum<T: DeserializeOwned>(raw: &str, what: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(raw.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} `{raw}`")))
}

fn api_err(e: ApiError) -> PyErr {
    PyRuntimeError::new_err(format!("{}: {}", e.code, e.message))
}

fn date(raw: &str) -> PyResult<NaiveDate> {
    raw.parse().map_err(|e| PyValueError::new_err(format!("bad date `{raw}`: {e}")))
}

fn datetime(raw: &str) -> PyResult<NaiveDateTime> {
    raw.parse().map_err(|e| PyValueError::new_err(format!("bad datetime `{raw}`: {e}")))
}

/// Weekly progress percent for a goal.
#[pyfunction]
fn compute_goal_progress(completed_units: u32, weekly_target: u32) -> PyResult<u8> {
    domain::compute_goal_progress(completed_units, weekly_target).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Share of the trailing window with a check-in; days are ISO dates.
#[pyfunction]
#[pyo3(signature = (days, today, window = metrics::DEFAULT_CONSISTENCY_WINDOW))]
fn checkin_consistency(days: Vec<String>, today: &str, window: u32) -> PyResult<u8> {
    let days = days.iter().map(|d| date(d)).collect::<PyResult<Vec<_>>>()?;
    Ok(metrics::checkin_consistency(&days, date(today)?, window))
}

/// Strips phase markers; returns `{clean_text, transition, illegal}`.
#[pyfunction]
fn parse_markers(py: Python<'_>, text: &str, phase: &str) -> PyResult<Py<PyAny>> {
    let current: Phase = from_str_enum(phase, "phase")?;
    let parsed = markers::parse_markers(text, current);
    to_py(
        py,
        &serde_json::json!({
            "clean_text": parsed.clean_text,
            "transition": parsed.transition,
            "illegal": parsed.illegal,
        }),
    )
}

#[pyfunction]
fn dart_radius(score: u8) -> f64 {
    metrics::dart_radius(score)
}

#[pyfunction]
fn style_metrics(py: Python<'_>, messages: Vec<String>) -> PyResult<Py<PyAny>> {
    let m = metrics::style_metrics(&messages).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &m)
}

/// Threshold classification of the student's messages (no model call).
#[pyfunction]
fn classify_style(py: Python<'_>, messages: Vec<String>) -> PyResult<Py<PyAny>> {
    let c = metrics::classify_style(&messages, None, &Default::default())
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &c.style)
}

/// Replaces emails, phone numbers, and the display name with tokens.
#[pyfunction]
#[pyo3(signature = (text, display_name = None))]
fn scrub(text: &str, display_name: Option<&str>) -> String {
    Scrubber::with_display_name(display_name).scrub(text)
}

/// Midpoint and end check-ins for a goal. `goal` is the goal document,
/// `busy` a list of `(start, end)` local ISO datetimes.
#[pyfunction]
#[pyo3(signature = (goal, window = "morning", busy = Vec::new()))]
fn schedule_checkins(py: Python<'_>, goal: &str, window: &str, busy: Vec<(String, String)>) -> PyResult<Py<PyAny>> {
    let goal: Goal = serde_json::from_str(goal).map_err(|e| PyValueError::new_err(format!("bad goal: {e}")))?;
    let window: TimeWindow = from_str_enum(window, "window")?;
    let busy = busy
        .iter()
        .map(|(s, e)| {
            BusyInterval::new(datetime(s)?, datetime(e)?)
                .ok_or_else(|| PyValueError::new_err(format!("empty busy interval {s}..{e}")))
        })
        .collect::<PyResult<Vec<_>>>()?;
    let events = match schedule_goal_checkins(&goal, &TimeWindowPref::new(window), &busy, "/dashboard") {
        Ok(pair) => pair.into_vec(),
        Err(short) => vec![short.end],
    };
    to_py(py, &events)
}

/// A coaching session against a scripted model and an in-memory store.
#[pyclass]
struct Coach {
    service: GrowService,
    user: UserId,
}

#[pymethods]
impl Coach {
    /// `script` is the JSON text of a script file.
    #[new]
    #[pyo3(signature = (script, user_id = "py-user"))]
    fn new(script: &str, user_id: &str) -> PyResult<Self> {
        let script = Script::from_json(script).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let service = GrowService::new(
            Arc::new(ProfileStore::in_memory()),
            Arc::new(ScriptedBackend::new(script)),
            Arc::new(InMemoryCalendar::new()),
            Arc::new(InMemoryMailbox::new()),
            Arc::new(SystemClock),
        );
        let user = UserId::new(user_id);
        service.issue_token(&user).map_err(api_err)?;
        Ok(Self { service, user })
    }

    #[getter]
    fn phase(&self) -> PyResult<String> {
        Ok(self.service.current_phase(&self.user).map_err(api_err)?.as_str().to_string())
    }

    fn chat(&self, py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
        let out = self.service.chat(&self.user, text).map_err(api_err)?;
        to_py(py, &out)
    }

    fn dashboard(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let d = self.service.dashboard(&self.user).map_err(api_err)?;
        to_py(py, &d)
    }

    fn profile(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let p = self.service.store().profile(&self.user).map_err(|e| api_err(e.into()))?;
        to_py(py, &p)
    }

    /// Everything the store holds, as JSON text.
    fn dump(&self) -> String {
        self.service.store().dump()
    }
}

#[pymodule]
pub fn grow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(compute_goal_progress, m)?)?;
    m.add_function(wrap_pyfunction!(checkin_consistency, m)?)?;
    m.add_function(wrap_pyfunction!(parse_markers, m)?)?;
    m.add_function(wrap_pyfunction!(dart_radius, m)?)?;
    m.add_function(wrap_pyfunction!(style_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(classify_style, m)?)?;
    m.add_function(wrap_pyfunction!(scrub, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_checkins, m)?)?;
    m.add_class::<Coach>()?;
    Ok(())
}
