use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use grow_core::domain::{BevsStep, GoalStatus, Phase, UserId};
use grow_core::engine::markers::contains_marker;
use grow_core::engine::{advance, start_session, EngineConfig, EngineError, RETRY_MESSAGE};
use grow_core::gateway::{
    load_script, LlmResult, Script, ScriptEntry, ScriptMatch, ScriptedBackend, ToolCall, UnavailableBackend,
};
use grow_core::store::ProfileStore;
use serde_json::json;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/coaching_session.json");
const USER_TURNS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/coaching_session_user.json");

fn t0() -> DateTime<Utc> {
    "2026-10-19T09:00:00Z".parse().unwrap()
}

fn user_turns() -> BTreeMap<String, Vec<String>> {
    serde_json::from_str(&std::fs::read_to_string(USER_TURNS).unwrap()).unwrap()
}

fn fresh(store: &ProfileStore, id: &str) -> UserId {
    let user = UserId::new(id);
    store.register(&user).unwrap();
    user
}

#[test]
fn fixture_has_enough_entries() {
    assert!(load_script(FIXTURE).unwrap().len() >= 12);
}

#[test]
fn full_scripted_session() {
    let store = ProfileStore::in_memory();
    let user = fresh(&store, "u-full");
    let backend = ScriptedBackend::new(load_script(FIXTURE).unwrap());
    let config = EngineConfig::default();
    let mut session = start_session(&user, &store, config.history_window).unwrap();
    assert_eq!(session.phase, Phase::Introduction);

    let turns = user_turns();
    let mut now = t0();
    let mut phases = vec![session.phase];
    for phase in ["introduction", "values_check_in", "goal_setting", "active_coaching"] {
        for (i, text) in turns[phase].iter().enumerate() {
            now += Duration::minutes(1);
            let before = store.profile(&user).unwrap();
            let out = advance(&mut session, text, &backend, &store, &config, now).unwrap();
            assert!(!contains_marker(&out.reply_text));
            assert!(!out.reply_text.is_empty());
            let after = store.profile(&user).unwrap();
            if phase == "introduction" {
                // the move to the values check-in happens exactly on the completing save
                let last = i + 1 == turns[phase].len();
                assert_eq!(out.transition.is_some(), last, "turn {i}");
                assert_eq!(after.intro_complete, last);
                assert!(!before.intro_complete);
            }
            if let Some(p) = out.transition {
                phases.push(p);
            }
        }
    }
    assert_eq!(phases, vec![Phase::Introduction, Phase::ValuesCheckIn, Phase::GoalSetting, Phase::ActiveCoaching]);
    for w in phases.windows(2) {
        assert!(w[0].can_transition_to(w[1]));
    }

    let profile = store.profile(&user).unwrap();
    let bevs = profile.bevs.as_ref().unwrap();
    assert_eq!(bevs.current_step, BevsStep::Done);
    assert_eq!(bevs.assessments.iter().map(|a| a.score).collect::<Vec<_>>(), vec![3, 5, 4, 6]);
    let goal = profile.goal("goal-1").unwrap();
    assert_eq!(goal.measures.completed_units, 3);
    assert_eq!(goal.progress, 43);
    assert_eq!(goal.status, GoalStatus::Active);

    let dump = store.dump();
    assert!(!dump.contains("Miya"), "display name persisted");
}

#[test]
fn scripted_session_is_deterministic() {
    let run = || {
        let store = ProfileStore::in_memory();
        let user = fresh(&store, "u-det");
        let backend = ScriptedBackend::new(load_script(FIXTURE).unwrap());
        let config = EngineConfig::default();
        let mut session = start_session(&user, &store, 20).unwrap();
        let mut replies = Vec::new();
        for text in user_turns()["introduction"].iter() {
            replies.push(advance(&mut session, text, &backend, &store, &config, t0()).unwrap().reply_text);
        }
        (replies, store.dump())
    };
    assert_eq!(run(), run());
}

#[test]
fn gateway_failure_leaves_session_untouched() {
    let store = ProfileStore::in_memory();
    let user = fresh(&store, "u-down");
    let mut session = start_session(&user, &store, 20).unwrap();
    let before = session.clone();
    let err = advance(&mut session, "hello", &UnavailableBackend, &store, &EngineConfig::default(), t0()).unwrap_err();
    match err {
        EngineError::GatewayUnavailable { retry_message, .. } => assert_eq!(retry_message, RETRY_MESSAGE),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(session, before);
    assert!(store.transcript(&user).unwrap().is_empty());
}

#[test]
fn empty_message_rejected() {
    let store = ProfileStore::in_memory();
    let user = fresh(&store, "u-empty");
    let mut session = start_session(&user, &store, 20).unwrap();
    let backend = ScriptedBackend::default();
    assert!(matches!(
        advance(&mut session, "   ", &backend, &store, &EngineConfig::default(), t0()),
        Err(EngineError::EmptyMessage)
    ));
}

fn one_entry(phase: Phase, turn: u32, result: LlmResult) -> ScriptedBackend {
    ScriptedBackend::new(Script::new(vec![ScriptEntry { matcher: ScriptMatch::turn(phase, turn), result }]).unwrap())
}

#[test]
fn out_of_phase_write_rejected_but_reply_delivered() {
    let store = ProfileStore::in_memory();
    let user = fresh(&store, "u-oop");
    let mut session = start_session(&user, &store, 20).unwrap();
    let backend = one_entry(
        Phase::Introduction,
        0,
        LlmResult {
            text: "Nice to meet you.".into(),
            tool_calls: vec![ToolCall {
                tool_name: "saveProfile".into(),
                payload: json!({"mental_health_goals": [{"description": "x"}]}),
            }],
        },
    );
    let out = advance(&mut session, "hi", &backend, &store, &EngineConfig::default(), t0()).unwrap();
    assert_eq!(out.reply_text, "Nice to meet you.");
    assert_eq!(out.applied_patches.len(), 1);
    assert_eq!(out.applied_patches[0].error.as_deref(), Some("write_out_of_phase"));
    assert!(store.profile(&user).unwrap().mental_health_goals.is_empty());
    assert!(store.write_log(&user).unwrap().is_empty());
}

#[test]
fn inline_payload_is_extracted_and_hidden() {
    let store = ProfileStore::in_memory();
    let user = fresh(&store, "u-inline");
    let mut session = start_session(&user, &store, 20).unwrap();
    let payload = json!({
        "demographic": {"college_year": "junior", "major": "Biology"},
        "personality_traits": {"Openness": "high", "Conscientiousness": "moderate", "Extraversion": "high",
            "Agreeableness": "high", "Neuroticism": "low"},
        "mental_health_profile": {"emotional_awareness": "medium", "coping_style": "healthy",
            "encouragement_preference": "effort"}
    });
    let backend = one_entry(Phase::Introduction, 0, LlmResult::text(format!("All noted! {payload}")));
    let out = advance(&mut session, "that's everything", &backend, &store, &EngineConfig::default(), t0()).unwrap();
    assert_eq!(out.reply_text, "All noted!");
    assert_eq!(out.transition, Some(Phase::ValuesCheckIn));
    assert!(store.profile(&user).unwrap().intro_complete);
}

#[test]
fn illegal_marker_is_stripped_and_ignored() {
    let store = ProfileStore::in_memory();
    let user = fresh(&store, "u-marker");
    let mut session = start_session(&user, &store, 20).unwrap();
    let backend = one_entry(Phase::Introduction, 0, LlmResult::text("Let's go [ONGOING_PHASE]"));
    let out = advance(&mut session, "hi", &backend, &store, &EngineConfig::default(), t0()).unwrap();
    assert_eq!(out.reply_text, "Let's go");
    assert_eq!(out.transition, None);
    assert_eq!(out.illegal_transition, Some(Phase::ActiveCoaching));
    assert_eq!(session.phase, Phase::Introduction);
}

#[test]
fn distress_guard_adds_directive_and_flag() {
    let store = ProfileStore::in_memory();
    let user = fresh(&store, "u-distress");
    let mut session = start_session(&user, &store, 20).unwrap();
    let backend = ScriptedBackend::default();
    let out = advance(&mut session, "some days I want to die", &backend, &store, &EngineConfig::default(), t0()).unwrap();
    assert!(out.resource_footer_attached);
    let before = store.profile(&user).unwrap();
    let out = advance(&mut session, "I'm feeling good", &backend, &store, &EngineConfig::default(), t0()).unwrap();
    assert!(!out.resource_footer_attached);
    assert_eq!(store.profile(&user).unwrap(), before);
}

#[test]
fn resume_rules() {
    let store = ProfileStore::in_memory();
    let user = fresh(&store, "u-resume");
    let backend = ScriptedBackend::new(load_script(FIXTURE).unwrap());
    let config = EngineConfig::default();
    let mut session = start_session(&user, &store, 20).unwrap();
    let turns = user_turns();
    for text in turns["introduction"].iter().chain(turns["values_check_in"].iter()) {
        advance(&mut session, text, &backend, &store, &config, t0()).unwrap();
    }
    assert_eq!(start_session(&user, &store, 20).unwrap().phase, Phase::GoalSetting);
    for text in &turns["goal_setting"] {
        advance(&mut session, text, &backend, &store, &config, t0()).unwrap();
    }
    assert_eq!(start_session(&user, &store, 20).unwrap().phase, Phase::ActiveCoaching);
    assert!(start_session(&UserId::new("nobody"), &store, 20).is_err());
}
