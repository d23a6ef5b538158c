//! HTTP routes over [`GrowService`]. Handlers run the blocking service on
//! tokio's blocking pool.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequestParts, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use grow_core::domain::UserId;
use grow_core::service::{ApiError, GrowService};
use grow_core::settings::SettingsUpdate;
use serde::{Deserialize, Serialize};

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<GrowService>,
    /// Exposes `POST /api/session`, which issues a token for any user id.
    /// For local use and tests only; production sits behind an identity
    /// provider that calls [`GrowService::bind_token`].
    pub dev_login: bool,
}

/// Error body: `{"code": ..., "message": ...}` with the matching status.
pub struct HttpError(pub ApiError);

impl From<ApiError> for HttpError {
    fn from(e: ApiError) -> Self {
        Self(e)
    }
}

impl IntoResponse for HttpError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.0)).into_response()
    }
}

fn body_error(e: JsonRejection, code: &str) -> HttpError {
    HttpError(ApiError::validation(code, e.body_text()))
}

/// The authenticated caller.
pub struct Caller(pub UserId);

impl FromRequestParts<AppState> for Caller {
    type Rejection = HttpError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let token = parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim);
        Ok(Caller(state.service.authenticate(token)?))
    }
}

async fn blocking<T, F>(state: &AppState, f: F) -> Result<T, HttpError>
where
    T: Send + 'static,
    F: FnOnce(&GrowService) -> Result<T, ApiError> + Send + 'static,
{
    let service = state.service.clone();
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| HttpError(ApiError::new(500, "internal", e.to_string())))?
        .map_err(HttpError)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatRequest {
    pub text: String,
}

#[derive(Debug, Deserialize)]
pub struct LoginRequest {
    pub user_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LoginResponse {
    pub token: String,
}

async fn chat(
    State(state): State<AppState>,
    Caller(user): Caller,
    body: Result<Json<ChatRequest>, JsonRejection>,
) -> Result<impl IntoResponse, HttpError> {
    let Json(req) = body.map_err(|e| body_error(e, "invalid_body"))?;
    let out = blocking(&state, move |s| s.chat(&user, &req.text)).await?;
    Ok(Json(out))
}

async fn dashboard(State(state): State<AppState>, Caller(user): Caller) -> Result<impl IntoResponse, HttpError> {
    Ok(Json(blocking(&state, move |s| s.dashboard(&user)).await?))
}

async fn get_settings(State(state): State<AppState>, Caller(user): Caller) -> Result<impl IntoResponse, HttpError> {
    Ok(Json(blocking(&state, move |s| s.settings(&user)).await?))
}

async fn put_settings(
    State(state): State<AppState>,
    Caller(user): Caller,
    body: Result<Json<SettingsUpdate>, JsonRejection>,
) -> Result<impl IntoResponse, HttpError> {
    let Json(update) = body.map_err(|e| body_error(e, "invalid_settings"))?;
    Ok(Json(blocking(&state, move |s| s.update_settings(&user, &update)).await?))
}

async fn connect_calendar(
    State(state): State<AppState>,
    Caller(user): Caller,
) -> Result<impl IntoResponse, HttpError> {
    let events = blocking(&state, move |s| s.connect_calendar(&user)).await?;
    Ok(Json(serde_json::json!({ "connected": true, "scheduled": events })))
}

async fn resources(State(state): State<AppState>, Caller(_): Caller) -> impl IntoResponse {
    Json(state.service.resources())
}

async fn delete_user(State(state): State<AppState>, Caller(user): Caller) -> Result<impl IntoResponse, HttpError> {
    blocking(&state, move |s| s.delete_user(&user)).await?;
    Ok(Json(serde_json::json!({ "deleted": true })))
}

async fn login(
    State(state): State<AppState>,
    body: Result<Json<LoginRequest>, JsonRejection>,
) -> Result<impl IntoResponse, HttpError> {
    if !state.dev_login {
        return Err(HttpError(ApiError::new(404, "not_found", "login is handled by the identity provider")));
    }
    let Json(req) = body.map_err(|e| body_error(e, "invalid_body"))?;
    if req.user_id.trim().is_empty() {
        return Err(HttpError(ApiError::validation("invalid_body", "user_id must not be empty")));
    }
    let token = blocking(&state, move |s| s.issue_token(&UserId::new(req.user_id.trim()))).await?;
    Ok(Json(LoginResponse { token }))
}

async fn health() -> &'static str {
    "ok"
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/api/session", post(login))
        .route("/api/chat", post(chat))
        .route("/api/dashboard", get(dashboard))
        .route("/api/settings", get(get_settings).put(put_settings))
        .route("/api/calendar/connect", post(connect_calendar))
        .route("/api/resources", get(resources))
        .route("/api/user", axum::routing::delete(delete_user))
        .with_state(state)
}
