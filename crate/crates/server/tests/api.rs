use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use grow_core::clock::FixedClock;
use grow_core::domain::UserId;
use grow_core::gateway::{load_script, ScriptedBackend, UnavailableBackend};
use grow_core::providers::{InMemoryCalendar, InMemoryMailbox};
use grow_core::service::GrowService;
use grow_core::store::ProfileStore;
use grow_server::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/coaching_session.json");
const USER_TURNS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/coaching_session_user.json");
const TOKEN: &str = "t-123";

fn service(gateway: Arc<dyn grow_core::gateway::LlmGateway>) -> Arc<GrowService> {
    let svc = GrowService::new(
        Arc::new(ProfileStore::in_memory()),
        gateway,
        Arc::new(InMemoryCalendar::new()),
        Arc::new(InMemoryMailbox::new()),
        Arc::new(FixedClock::new("2026-10-19T08:00:00Z".parse().unwrap())),
    );
    svc.bind_token(TOKEN, &UserId::new("student-1")).unwrap();
    Arc::new(svc)
}

fn app() -> Router {
    let backend = Arc::new(ScriptedBackend::new(load_script(FIXTURE).unwrap()));
    router(AppState { service: service(backend), dev_login: false })
}

async fn call(app: &Router, method: Method, path: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(path);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

fn turns(phase: &str) -> Vec<String> {
    let all: Value = serde_json::from_str(&std::fs::read_to_string(USER_TURNS).unwrap()).unwrap();
    serde_json::from_value(all[phase].clone()).unwrap()
}

#[tokio::test]
async fn every_route_requires_a_token() {
    let app = app();
    let routes = [
        (Method::POST, "/api/chat", Some(json!({"text": "hi"}))),
        (Method::GET, "/api/dashboard", None),
        (Method::GET, "/api/settings", None),
        (Method::PUT, "/api/settings", Some(json!({}))),
        (Method::POST, "/api/calendar/connect", None),
        (Method::GET, "/api/resources", None),
        (Method::DELETE, "/api/user", None),
    ];
    for (method, path, body) in routes {
        for token in [None, Some("wrong")] {
            let (status, v) = call(&app, method.clone(), path, token, body.clone()).await;
            assert_eq!(status, StatusCode::UNAUTHORIZED, "{method} {path}");
            assert_eq!(v["code"], "unauthorized");
        }
    }
}

#[tokio::test]
async fn chat_round_trip_opens_with_the_introduction() {
    let app = app();
    let (status, v) = call(&app, Method::POST, "/api/chat", Some(TOKEN), Some(json!({"text": turns("introduction")[0]}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["phase"], "introduction");
    assert_eq!(v["display_phase"], "Introduction");
    assert!(!v["reply_text"].as_str().unwrap().is_empty());
    assert_eq!(v["resource_footer_attached"], false);
    assert!(v["resource_footer"].is_null());
}

#[tokio::test]
async fn chat_validation_errors_are_422() {
    let app = app();
    let (status, v) = call(&app, Method::POST, "/api/chat", Some(TOKEN), Some(json!({"text": "  "}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "empty_message");
    let (status, v) = call(&app, Method::POST, "/api/chat", Some(TOKEN), Some(json!({"message": "hi"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "invalid_body");
}

#[tokio::test]
async fn model_outage_is_503_with_retry_message() {
    let app = router(AppState { service: service(Arc::new(UnavailableBackend)), dev_login: false });
    let (status, v) = call(&app, Method::POST, "/api/chat", Some(TOKEN), Some(json!({"text": "hello"}))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(v["code"], "model_unavailable");
    assert!(!v["message"].as_str().unwrap().is_empty());
}

#[tokio::test]
async fn dashboard_mid_values_checkin_reads_introduction() {
    let app = app();
    for text in turns("introduction").iter().chain(turns("values_check_in").iter().take(2)) {
        let (status, _) = call(&app, Method::POST, "/api/chat", Some(TOKEN), Some(json!({"text": text}))).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (status, v) = call(&app, Method::GET, "/api/dashboard", Some(TOKEN), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["display_phase"], "Introduction");
    assert_eq!(v["overall_progress"], 0);
}

#[tokio::test]
async fn dashboard_after_check_in() {
    let app = app();
    for phase in ["introduction", "values_check_in", "goal_setting", "active_coaching"] {
        for text in turns(phase) {
            call(&app, Method::POST, "/api/chat", Some(TOKEN), Some(json!({"text": text}))).await;
        }
    }
    let (_, v) = call(&app, Method::GET, "/api/dashboard", Some(TOKEN), None).await;
    assert_eq!(v["display_phase"], "Active Coaching");
    assert_eq!(v["overall_progress"], 43);
    assert_eq!(v["goals_view"][0]["progress"], 43);
    assert_eq!(v["insights"]["dartboard"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn settings_round_trip() {
    let app = app();
    let (status, v) = call(&app, Method::PUT, "/api/settings", Some(TOKEN), Some(json!({"frequency": "monthly"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "invalid_settings");

    let update = json!({"frequency": "biweekly", "reminders_enabled": true, "window": "afternoon",
        "persona": {"name": "Juniper", "avatar": "fox", "gender": "female"}});
    let (status, _) = call(&app, Method::PUT, "/api/settings", Some(TOKEN), Some(update)).await;
    assert_eq!(status, StatusCode::OK);
    let (_, v) = call(&app, Method::GET, "/api/settings", Some(TOKEN), None).await;
    assert_eq!(v["frequency"], "biweekly");
    assert_eq!(v["reminders_enabled"], true);
    assert_eq!(v["window"], "afternoon");
    assert_eq!(v["persona"]["name"], "Juniper");
    assert!(v["next_reminder"].is_string());

    let (status, v) =
        call(&app, Method::PUT, "/api/settings", Some(TOKEN), Some(json!({"utc_offset_minutes": 5000}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "invalid_settings");
}

#[tokio::test]
async fn resources_always_include_crisis_lines() {
    let (status, v) = call(&app(), Method::GET, "/api/resources", Some(TOKEN), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(v.as_array().unwrap().iter().any(|r| r["category"] == "crisis"));
}

#[tokio::test]
async fn calendar_connect_and_delete() {
    let app = app();
    let (status, v) = call(&app, Method::POST, "/api/calendar/connect", Some(TOKEN), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["connected"], true);
    let (_, s) = call(&app, Method::GET, "/api/settings", Some(TOKEN), None).await;
    assert_eq!(s["calendar_connected"], true);

    let (status, _) = call(&app, Method::DELETE, "/api/user", Some(TOKEN), None).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = call(&app, Method::GET, "/api/dashboard", Some(TOKEN), None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn dev_login_issues_tokens_only_when_enabled() {
    let (status, _) = call(&app(), Method::POST, "/api/session", None, Some(json!({"user_id": "s2"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let backend = Arc::new(ScriptedBackend::new(load_script(FIXTURE).unwrap()));
    let app = router(AppState { service: service(backend), dev_login: true });
    let (status, v) = call(&app, Method::POST, "/api/session", None, Some(json!({"user_id": "s2"}))).await;
    assert_eq!(status, StatusCode::OK);
    let token = v["token"].as_str().unwrap().to_string();
    let (status, v) = call(&app, Method::GET, "/api/dashboard", Some(&token), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["display_phase"], "Introduction");
}
