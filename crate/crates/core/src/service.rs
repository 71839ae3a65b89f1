//! HTTP/JSON front end of the repository.
//!
//! Writes go through the store's single writer; every successful POST is
//! synced to the event log before the response is sent. GETs never change
//! state and render deterministically.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::RwLock;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::input::MeasurementInput;
use crate::model::{Implementation, Metric, Platform, PolicyKind, ProblemKey, ProblemSpec, StudyDefinition};
use crate::render::{finding_views, score_views, FindingView, ScoreView};
use crate::store::{Payload, Store, StoreError};

pub type SharedStore = Arc<RwLock<Store>>;

pub fn shared(store: Store) -> SharedStore {
    Arc::new(RwLock::new(store))
}

pub fn router(store: SharedStore) -> Router {
    Router::new()
        .route("/api/v1/platforms", post(post_platform))
        .route("/api/v1/implementations", post(post_implementation))
        .route("/api/v1/problems", post(post_problem))
        .route("/api/v1/studies", post(post_study))
        .route("/api/v1/measurements", post(post_measurement))
        .route("/api/v1/scores", get(get_scores))
        .route("/api/v1/history", get(get_history))
        .route("/api/v1/audit", get(get_audit))
        .with_state(store)
}

/// Serves until ctrl-c.
pub async fn serve(store: SharedStore, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, message: message.into() }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::Duplicate(_) => StatusCode::CONFLICT,
            StoreError::Io(_) | StoreError::Corrupt { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError { status, message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid body: {e}")))
}

#[derive(Serialize)]
struct Ingested {
    seq: u64,
    recalculated: Vec<String>,
}

fn ingest(store: &SharedStore, payload: Payload) -> Result<Json<Ingested>, ApiError> {
    let outcome = store.write().ingest(payload)?;
    Ok(Json(Ingested { seq: outcome.seq, recalculated: outcome.recalculated }))
}

async fn post_platform(State(store): State<SharedStore>, body: Bytes) -> Result<Json<Ingested>, ApiError> {
    let p: Platform = parse_body(&body)?;
    ingest(&store, Payload::AddPlatform(p))
}

async fn post_implementation(
    State(store): State<SharedStore>,
    body: Bytes,
) -> Result<Json<Ingested>, ApiError> {
    let i: Implementation = parse_body(&body)?;
    ingest(&store, Payload::AddImplementation(i))
}

async fn post_problem(State(store): State<SharedStore>, body: Bytes) -> Result<Json<Ingested>, ApiError> {
    let p: ProblemSpec = parse_body(&body)?;
    ingest(&store, Payload::AddProblem(p))
}

async fn post_study(State(store): State<SharedStore>, body: Bytes) -> Result<Json<Ingested>, ApiError> {
    let s: StudyDefinition = parse_body(&body)?;
    ingest(&store, Payload::DefineStudy(s))
}

async fn post_measurement(
    State(store): State<SharedStore>,
    body: Bytes,
) -> Result<Json<Ingested>, ApiError> {
    let input: MeasurementInput = parse_body(&body)?;
    if !(input.value.is_finite() && input.value > 0.0) {
        return Err(ApiError::bad_request(format!("value: must be strictly positive, got {}", input.value)));
    }
    let mut guard = store.write();
    if !input.model.is_empty() {
        if let Some(registered) = guard.state().catalog.implementation(&input.app, &input.implementation) {
            if registered.model != input.model {
                return Err(ApiError::bad_request(format!(
                    "model: {} is registered with model {}, not {}",
                    input.implementation, registered.model, input.model
                )));
            }
        }
    }
    let outcome = guard.ingest(Payload::AddMeasurement(input.to_measurement()))?;
    Ok(Json(Ingested { seq: outcome.seq, recalculated: outcome.recalculated }))
}

#[derive(Debug, Deserialize)]
pub struct ScoreParams {
    app: Option<String>,
    problem: Option<String>,
    policy: Option<String>,
    metric: Option<String>,
}

fn problem_key(app: Option<String>, problem: Option<String>) -> Result<ProblemKey, ApiError> {
    match (app, problem) {
        (Some(a), Some(p)) => Ok(ProblemKey::new(a, p)),
        _ => Err(ApiError::bad_request("app and problem are required")),
    }
}

async fn get_scores(
    State(store): State<SharedStore>,
    Query(q): Query<ScoreParams>,
) -> Result<Json<Vec<ScoreView>>, ApiError> {
    let key = problem_key(q.app, q.problem)?;
    let policy = q.policy.as_deref().map(str::parse::<PolicyKind>).transpose().map_err(StoreError::from)?;
    let metric = q.metric.as_deref().map(str::parse::<Metric>).transpose().map_err(StoreError::from)?;
    let scores = store.read().query_scores(&key, policy, metric);
    Ok(Json(score_views(&scores)))
}

#[derive(Debug, Deserialize)]
pub struct HistoryParams {
    app: Option<String>,
    problem: Option<String>,
    implementation: String,
}

#[derive(Serialize)]
struct HistoryPoint {
    seq: u64,
    score: ScoreView,
}

#[derive(Serialize)]
struct HistoryView {
    study: String,
    implementation: String,
    entries: Vec<HistoryPoint>,
}

async fn get_history(
    State(store): State<SharedStore>,
    Query(q): Query<HistoryParams>,
) -> Result<Json<Vec<HistoryView>>, ApiError> {
    let key = problem_key(q.app, q.problem)?;
    let histories = store.read().history(&key, &q.implementation);
    Ok(Json(
        histories
            .into_iter()
            .map(|h| HistoryView {
                study: h.study,
                implementation: h.implementation,
                entries: h
                    .entries
                    .iter()
                    .map(|e| HistoryPoint { seq: e.seq, score: ScoreView::from(&e.score) })
                    .collect(),
            })
            .collect(),
    ))
}

#[derive(Debug, Deserialize)]
pub struct AuditParams {
    app: Option<String>,
    problem: Option<String>,
    from_seq: Option<u64>,
    to_seq: Option<u64>,
    policy: Option<String>,
}

#[derive(Serialize)]
struct StudyAuditView {
    study: String,
    policy: PolicyKind,
    metric: Metric,
    findings: Vec<FindingView>,
}

#[derive(Serialize)]
struct AuditView {
    app: String,
    problem: String,
    from_seq: u64,
    to_seq: u64,
    studies: Vec<StudyAuditView>,
}

async fn get_audit(
    State(store): State<SharedStore>,
    Query(q): Query<AuditParams>,
) -> Result<Json<AuditView>, ApiError> {
    let key = problem_key(q.app, q.problem)?;
    let policy = q.policy.as_deref().map(str::parse::<PolicyKind>).transpose().map_err(StoreError::from)?;
    let guard = store.read();
    let to = q.to_seq.unwrap_or(guard.seq());
    let from = q.from_seq.unwrap_or(0);
    let audits = guard.audit_between(&key, from, to)?;
    Ok(Json(AuditView {
        app: key.app,
        problem: key.problem,
        from_seq: from,
        to_seq: to,
        studies: audits
            .into_iter()
            .filter(|a| policy.map_or(true, |p| a.policy == p))
            .map(|a| StudyAuditView {
                study: a.study,
                policy: a.policy,
                metric: a.metric,
                findings: finding_views(&a.report),
            })
            .collect(),
    }))
}
