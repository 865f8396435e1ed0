//! HTTP front end for the operator UI and the clock driver that keeps the
//! virtual time moving while the server runs.

use std::convert::Infallible;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use grs_core::time::{Instant, Span};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast;

use crate::gateway::{Gateway, GatewayError, StreamMsg};

pub type Shared = Arc<Mutex<Gateway>>;

fn lock(g: &Shared) -> MutexGuard<'_, Gateway> {
    // a panicked handler must not wedge every later request
    g.lock().unwrap_or_else(|e| e.into_inner())
}

pub fn status_for(e: &GatewayError) -> StatusCode {
    match e {
        GatewayError::Unauthorized | GatewayError::BadCredentials => StatusCode::UNAUTHORIZED,
        GatewayError::LockedOut => StatusCode::LOCKED,
        GatewayError::UnknownPanel(_) => StatusCode::NOT_FOUND,
        GatewayError::ModeLocked => StatusCode::CONFLICT,
        GatewayError::PanelOffline => StatusCode::SERVICE_UNAVAILABLE,
        GatewayError::UnknownButton(_)
        | GatewayError::UnknownSelector(_)
        | GatewayError::UnknownSignal(_)
        | GatewayError::Range(_)
        | GatewayError::BadRequest(_) => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

pub struct ApiError(pub GatewayError);

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(json!({ "error": self.0.code(), "message": self.0.to_string() }));
        (status_for(&self.0), body).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn bearer(headers: &HeaderMap) -> Option<&str> {
    let v = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = v.split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim())
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, GatewayError> {
    serde_json::from_slice(bytes).map_err(|e| GatewayError::BadRequest(format!("invalid body: {e}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LoginBody {
    user: String,
    password: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ButtonBody {
    signal: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectorBody {
    signal: String,
    position: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AutoBody {
    on: bool,
    #[serde(default)]
    setpoint: Option<f64>,
}

async fn login(State(g): State<Shared>, bytes: Bytes) -> ApiResult<serde_json::Value> {
    let b: LoginBody = body(&bytes)?;
    let s = lock(&g).login(&b.user, &b.password)?;
    Ok(Json(json!({ "token": s.token, "user": s.user, "expires_at": s.expiry.as_secs() })))
}

async fn logout(State(g): State<Shared>, headers: HeaderMap) -> StatusCode {
    if let Some(t) = bearer(&headers) {
        lock(&g).logout(t);
    }
    StatusCode::NO_CONTENT
}

async fn panels(State(g): State<Shared>, headers: HeaderMap) -> ApiResult<serde_json::Value> {
    let list = lock(&g).list_panels(bearer(&headers))?;
    Ok(Json(json!({ "panels": list })))
}

async fn state(State(g): State<Shared>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<serde_json::Value> {
    let v = lock(&g).panel_state(bearer(&headers), &id)?;
    Ok(Json(serde_json::to_value(v).expect("view serializes")))
}

// Mutating handlers check the token before looking at the body, so a
// caller without a session learns nothing about the payload format.

async fn button(
    State(g): State<Shared>,
    headers: HeaderMap,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<serde_json::Value> {
    let mut gw = lock(&g);
    gw.panel_state(bearer(&headers), &id)?;
    let b: ButtonBody = body(&bytes)?;
    let r = gw.press_button(bearer(&headers), &id, &b.signal)?;
    Ok(Json(serde_json::to_value(r).expect("receipt serializes")))
}

async fn selector(
    State(g): State<Shared>,
    headers: HeaderMap,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<serde_json::Value> {
    let mut gw = lock(&g);
    gw.panel_state(bearer(&headers), &id)?;
    let b: SelectorBody = body(&bytes)?;
    let r = gw.set_selector(bearer(&headers), &id, &b.signal, &b.position)?;
    Ok(Json(serde_json::to_value(r).expect("receipt serializes")))
}

async fn auto(
    State(g): State<Shared>,
    headers: HeaderMap,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<serde_json::Value> {
    let mut gw = lock(&g);
    gw.panel_state(bearer(&headers), &id)?;
    let b: AutoBody = body(&bytes)?;
    let r = gw.set_auto_mode(bearer(&headers), &id, b.on, b.setpoint)?;
    Ok(Json(serde_json::to_value(r).expect("receipt serializes")))
}

async fn general_reset(
    State(g): State<Shared>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> ApiResult<serde_json::Value> {
    let r = lock(&g).general_reset(bearer(&headers), &id)?;
    Ok(Json(json!({ "commands": r })))
}

fn event(msg: &StreamMsg) -> Event {
    Event::default().event(msg.kind()).id(msg.seq().to_string()).json_data(msg).expect("stream message serializes")
}

/// Snapshot first, then every published message. A subscriber that falls
/// behind gets one `resync` event and the stream ends; it should reconnect
/// and start again from a fresh snapshot.
pub fn event_stream(
    first: StreamMsg,
    rx: broadcast::Receiver<StreamMsg>,
) -> impl Stream<Item = Result<Event, Infallible>> + Send {
    enum St {
        First(Box<StreamMsg>, broadcast::Receiver<StreamMsg>),
        Live(broadcast::Receiver<StreamMsg>),
        Done,
    }
    futures::stream::unfold(St::First(Box::new(first), rx), |st| async move {
        match st {
            St::First(m, rx) => Some((Ok(event(&m)), St::Live(rx))),
            St::Live(mut rx) => match rx.recv().await {
                Ok(m) => Some((Ok(event(&m)), St::Live(rx))),
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    let e = Event::default().event("resync").data(json!({ "missed": n }).to_string());
                    Some((Ok(e), St::Done))
                }
                Err(broadcast::error::RecvError::Closed) => None,
            },
            St::Done => None,
        }
    })
}

async fn stream(State(g): State<Shared>, headers: HeaderMap, Path(id): Path<String>) -> Result<Response, ApiError> {
    let (view, rx) = lock(&g).subscribe(bearer(&headers), &id)?;
    let s = event_stream(StreamMsg::Snapshot(view), rx);
    Ok(Sse::new(s).keep_alive(KeepAlive::default()).into_response())
}

pub fn router(g: Shared) -> Router {
    Router::new()
        .route("/login", post(login))
        .route("/logout", post(logout))
        .route("/panels", get(panels))
        .route("/panels/{id}/state", get(state))
        .route("/panels/{id}/button", post(button))
        .route("/panels/{id}/selector", post(selector))
        .route("/panels/{id}/auto", post(auto))
        .route("/panels/{id}/general-reset", post(general_reset))
        .route("/panels/{id}/stream", get(stream))
        .with_state(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pace {
    /// Virtual time follows the wall clock.
    Realtime,
    /// Virtual time runs as fast as the host allows.
    Fast,
}

/// Moves the virtual clock in `step` increments until `until` (forever if
/// `None`). `after_step` runs with the lock held after every step; the
/// command line uses it to flush trace lines.
pub async fn drive_clock<F>(g: Shared, pace: Pace, step: Span, until: Option<Instant>, mut after_step: F)
where
    F: FnMut(&mut Gateway) + Send,
{
    let start_wall = tokio::time::Instant::now();
    let start_virtual = lock(&g).now();
    let mut tick = tokio::time::interval(Duration::from_nanos((step.as_secs_f64() * 1e9) as u64));
    tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
    loop {
        let target = match pace {
            Pace::Realtime => {
                tick.tick().await;
                start_virtual + Span::from_secs_f64(start_wall.elapsed().as_secs_f64())
            }
            Pace::Fast => {
                tokio::task::yield_now().await;
                lock(&g).now() + step
            }
        };
        let target = until.map_or(target, |u| target.min(u));
        {
            let mut gw = lock(&g);
            gw.advance_to(target);
            after_step(&mut gw);
        }
        if until.is_some_and(|u| target >= u) {
            return;
        }
    }
}
