//! Loopback HTTP service over the same operations as the CLI.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::workspace::{to_json, QueryRequest, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
struct JobStatus {
    job: String,
    state: JobState,
}

#[derive(Clone)]
pub struct AppState {
    ws: Arc<Workspace>,
    jobs: Arc<Mutex<BTreeMap<String, JobState>>>,
}

fn json(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.class().http_status()).expect("valid status");
        json(status, to_json(&self.body()))
    }
}

fn ok<T: Serialize>(r: Result<T, ApiError>) -> Response {
    match r {
        Ok(v) => json(StatusCode::OK, to_json(&v)),
        Err(e) => e.into_response(),
    }
}

pub fn router(ws: Arc<Workspace>) -> Router {
    let state = AppState { ws, jobs: Arc::default() };
    Router::new()
        .route("/project", get(project))
        .route("/source", get(source))
        .route("/blockers", get(blockers))
        .route("/runs", get(runs))
        .route("/coverage", get(coverage))
        .route("/query", post(query))
        .route("/query/{job}/status", get(job_status))
        .with_state(state)
}

async fn project(State(s): State<AppState>) -> Response {
    ok(Ok::<_, ApiError>(s.ws.project_info()))
}

#[derive(Deserialize)]
struct SourceParams {
    file: Option<String>,
}

async fn source(State(s): State<AppState>, Query(p): Query<SourceParams>) -> Response {
    match p.file {
        Some(f) => ok(s.ws.source(&f)),
        None => ApiError::BadRequest("missing `file` parameter".into()).into_response(),
    }
}

async fn blockers(State(s): State<AppState>) -> Response {
    let ws = s.ws.clone();
    ok(tokio::task::spawn_blocking(move || ws.blockers()).await.expect("blockers task"))
}

async fn runs(State(s): State<AppState>) -> Response {
    ok(s.ws.runs())
}

async fn coverage(State(s): State<AppState>) -> Response {
    let ws = s.ws.clone();
    ok(tokio::task::spawn_blocking(move || ws.coverage()).await.expect("coverage task"))
}

/// Runs the query to completion; `/query/<job>/status` reports progress of
/// in-flight requests, keyed by the request hash.
async fn query(State(s): State<AppState>, body: Bytes) -> Response {
    let req: QueryRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return ApiError::BadRequest(format!("bad query body: {e}")).into_response(),
    };
    let job = req.job_id();
    s.jobs.lock().expect("jobs lock").insert(job.clone(), JobState::Running);
    let ws = s.ws.clone();
    let result = tokio::task::spawn_blocking(move || ws.query(&req)).await.expect("query task");
    let state = if result.is_ok() { JobState::Done } else { JobState::Failed };
    s.jobs.lock().expect("jobs lock").insert(job.clone(), state);
    let mut resp = ok(result);
    resp.headers_mut().insert("x-fuzzlens-job", job.parse().expect("hex header"));
    resp
}

async fn job_status(State(s): State<AppState>, Path(job): Path<String>) -> Response {
    let state = s.jobs.lock().expect("jobs lock").get(&job).copied();
    ok(state.map(|state| JobStatus { job: job.clone(), state }).ok_or(ApiError::UnknownJob(job)))
}
