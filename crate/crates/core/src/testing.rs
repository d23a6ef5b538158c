//! Shared builders for unit tests.

use chrono::NaiveDate;

use crate::domain::{Goal, GoalStatus, MeasureUnit, Measures, Timeframe};

pub fn goal(id: &str, weekly_target: u32) -> Goal {
    Goal {
        goal_id: id.into(),
        description: "Play guitar for 10 minutes".into(),
        measures: Measures { unit: MeasureUnit::Count, weekly_target, completed_units: 0 },
        timeframe: Timeframe { start_date: NaiveDate::from_ymd_opt(2026, 10, 19).unwrap(), duration_days: 7 },
        steps: vec!["Place the guitar near the bed".into()],
        obstacles: vec![],
        progress: 0,
        status: GoalStatus::Active,
        last_updated: "2026-10-19T00:00:00Z".parse().unwrap(),
    }
}
