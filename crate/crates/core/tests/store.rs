use chrono::{DateTime, Duration, Utc};
use grow_core::domain::{Phase, UserId};
use grow_core::store::{replay, ProfileStore, ToolCallPatch};
use proptest::prelude::*;
use serde_json::{json, Value};

fn t0() -> DateTime<Utc> {
    "2026-10-19T09:00:00Z".parse().unwrap()
}

fn intro(level: &str) -> Value {
    json!({
        "demographic": {"college_year": "junior", "major": "Art", "name": "Rowan"},
        "personality_traits": {"Openness": level, "Conscientiousness": "high", "Extraversion": "low",
            "Agreeableness": "moderate", "Neuroticism": level},
        "mental_health_profile": {"emotional_awareness": "medium", "coping_style": "mixed",
            "encouragement_preference": "effort"}
    })
}

fn bevs(score: u8) -> Value {
    let a = |d: &str| json!({"domain": d, "value_statement": "matters to me", "score": score});
    json!({"bevs": {
        "startedAt": "2026-10-19T09:00:00Z", "completedAt": "2026-10-19T09:10:00Z",
        "currentStep": "done", "domainIndex": 3,
        "domains": ["Work/Studies", "Relationships", "Personal Growth/Health", "Leisure"],
        "assessments": [a("Work/Studies"), a("Relationships"), a("Personal Growth/Health"), a("Leisure")]
    }})
}

fn goal(target: u32, days: u32) -> Value {
    json!({"mental_health_goals": [{
        "description": "Stretch in the morning", "measures": {"unit": "minutes", "weekly_target": target},
        "timeframe": {"start_date": "2026-10-19", "duration_days": days}, "steps": ["Mat by the bed"],
        "completed": false, "progress": 0
    }]})
}

/// One write attempt; many of these are rejected on purpose.
fn op() -> impl Strategy<Value = (Phase, Value)> {
    prop_oneof![
        prop::sample::select(vec!["low", "moderate", "high"]).prop_map(|l| (Phase::Introduction, intro(l))),
        (0u8..9).prop_map(|s| (Phase::ValuesCheckIn, bevs(s))),
        (0u32..8, 0u32..15).prop_map(|(t, d)| (Phase::GoalSetting, goal(t, d))),
        (1u32..4, 0u32..20, any::<bool>()).prop_map(|(id, units, done)| {
            let mut u = json!({"goal_id": format!("goal-{id}"), "completed_units": units});
            if done {
                u["completed"] = json!(true);
            }
            (Phase::ActiveCoaching, json!({"mental_health_goals": [u]}))
        }),
        (1u32..4, 1u32..30).prop_map(|(id, d)| (
            Phase::ActiveCoaching,
            json!({"mental_health_goals": [{"goal_id": format!("goal-{id}"), "duration_days": d}]})
        )),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn write_log_replays_to_stored_profile(ops in prop::collection::vec(op(), 0..25)) {
        let store = ProfileStore::in_memory();
        let user = UserId::new("u-replay");
        store.register(&user).unwrap();
        for (i, (phase, payload)) in ops.into_iter().enumerate() {
            let _ = store.save_profile(&user, &ToolCallPatch::new(phase, payload), t0() + Duration::minutes(i as i64), None);
        }
        let profile = store.profile(&user).unwrap();
        prop_assert_eq!(replay(&user, &store.write_log(&user).unwrap()).unwrap(), profile.clone());
        prop_assert!(profile.mental_health_goals.iter().all(|g| g.is_consistent()));
        prop_assert!(!store.dump().contains("Rowan"));
    }
}

#[test]
fn snapshot_file_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.json");
    let user = UserId::new("u-disk");
    {
        let store = ProfileStore::open(&path).unwrap();
        store.register(&user).unwrap();
        store.save_profile(&user, &ToolCallPatch::new(Phase::Introduction, intro("high")), t0(), None).unwrap();
    }
    let store = ProfileStore::open(&path).unwrap();
    let p = store.profile(&user).unwrap();
    assert!(p.intro_complete);
    assert!(!std::fs::read_to_string(&path).unwrap().contains("Rowan"));
    assert_eq!(replay(&user, &store.write_log(&user).unwrap()).unwrap(), p);
}
