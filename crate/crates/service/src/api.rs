//! Routes under `/v1`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use havnfp::availability::{fragment_breakdown, Fragment};
use havnfp::model::InstanceDoc;
use havnfp::{Placement, ProblemInstance, RequestId, ServerId};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::oneshot;

use crate::delta::{self, Delta};
use crate::session::{self, build_instance, Failure, HistoryEntry, Outcome, ReportView, Session, SolveSettings};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// How long a solve call waits before answering 202 with a poll URL.
    pub sync_window: Duration,
    /// Per-start VNS budget (and exact time limit) for what-if runs that
    /// give no `timeLimit` of their own.
    pub whatif_time_limit: Duration,
    /// Directory for one JSON snapshot per session.
    pub persist_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            sync_window: Duration::from_secs(2),
            whatif_time_limit: Duration::from_secs(10),
            persist_dir: None,
        }
    }
}

enum Job {
    Running,
    Done(StatusCode, Value),
}

pub struct AppState {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Session>>,
    jobs: Mutex<HashMap<String, Job>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Arc<Self> {
        Arc::new(AppState {
            config,
            sessions: Mutex::new(HashMap::new()),
            jobs: Mutex::new(HashMap::new()),
        })
    }

    /// Loads the snapshots found in the persistence directory, if any.
    pub fn restore(config: ServiceConfig) -> havnfp::Result<Arc<Self>> {
        let sessions = match &config.persist_dir {
            Some(dir) if dir.exists() => session::load_snapshots(dir)?,
            _ => Vec::new(),
        };
        let state = Self::new(config);
        lock(&state.sessions).extend(sessions.into_iter().map(|s| (s.id.clone(), s)));
        Ok(state)
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = lock(&self.sessions).keys().cloned().collect();
        ids.sort();
        ids
    }

    fn persist(&self, session: &Session) {
        if let Some(dir) = &self.config.persist_dir {
            let saved = std::fs::create_dir_all(dir).and_then(|_| session::save_snapshot(dir, session));
            if let Err(e) = saved {
                eprintln!("could not save session {}: {e}", session.id);
            }
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/solve", post(solve))
        .route("/v1/sessions/{id}/whatif", post(what_if))
        .route("/v1/sessions/{id}/jobs/{job}", get(get_job))
        .route("/v1/sessions/{id}/placement", get(get_placement))
        .route("/v1/sessions/{id}/availability", get(get_availability))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError(StatusCode, Value);

impl ApiError {
    fn unprocessable(errors: Vec<String>) -> Self {
        ApiError(StatusCode::UNPROCESSABLE_ENTITY, json!({ "errors": errors }))
    }

    fn not_found(what: &str) -> Self {
        ApiError(StatusCode::NOT_FOUND, json!({ "error": format!("{what} not found") }))
    }

    fn busy() -> Self {
        ApiError(StatusCode::CONFLICT, json!({ "error": "a solve is already running for this session" }))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::unprocessable(vec![e.to_string()]))
}

/// Clears the busy flag of a session when dropped, even if the solver
/// panicked.
struct BusyGuard {
    state: Arc<AppState>,
    id: String,
}

impl Drop for BusyGuard {
    fn drop(&mut self) {
        if let Some(s) = lock(&self.state.sessions).get_mut(&self.id) {
            s.busy = false;
        }
    }
}

/// Runs `work` on the blocking pool. Answers with its result if it ends
/// within the sync window, otherwise with 202 and a job to poll.
async fn dispatch<F>(state: Arc<AppState>, session: String, work: F) -> Response
where
    F: FnOnce() -> (StatusCode, Value) + Send + 'static,
{
    let job = uuid::Uuid::new_v4().simple().to_string();
    lock(&state.jobs).insert(job.clone(), Job::Running);
    let (tx, rx) = oneshot::channel();
    let bg_state = state.clone();
    let bg_job = job.clone();
    tokio::spawn(async move {
        let result = tokio::task::spawn_blocking(work).await.unwrap_or_else(|e| {
            (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": format!("solver task failed: {e}") }))
        });
        lock(&bg_state.jobs).insert(bg_job, Job::Done(result.0, result.1.clone()));
        let _ = tx.send(result);
    });
    match tokio::time::timeout(state.config.sync_window, rx).await {
        Ok(Ok((status, body))) => {
            lock(&state.jobs).remove(&job);
            (status, Json(body)).into_response()
        }
        _ => {
            let poll = format!("/v1/sessions/{session}/jobs/{job}");
            (StatusCode::ACCEPTED, Json(json!({ "job": job, "poll": poll }))).into_response()
        }
    }
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let doc: InstanceDoc = parse(&body)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session::new(id.clone(), doc).map_err(ApiError::unprocessable)?;
    let summary = json!({
        "id": id,
        "requests": session.instance.requests().len(),
        "servers": session.instance.servers().len(),
        "settings": session.settings,
    });
    state.persist(&session);
    lock(&state.sessions).insert(id, session);
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let sessions = lock(&state.sessions);
    let s = sessions.get(&id).ok_or_else(|| ApiError::not_found("session"))?;
    Ok(Json(json!({
        "id": s.id,
        "initial": s.initial,
        "instance": s.doc,
        "settings": s.settings,
        "placement": s.placement.as_ref().map(Placement::export),
        "report": s.report.as_ref().map(|r| ReportView::new(&s.instance, r)),
        "history": s.history,
        "busy": s.busy,
    }))
    .into_response())
}

async fn get_job(State(state): State<Arc<AppState>>, Path((id, job)): Path<(String, String)>) -> ApiResult {
    if !lock(&state.sessions).contains_key(&id) {
        return Err(ApiError::not_found("session"));
    }
    match lock(&state.jobs).get(&job) {
        None => Err(ApiError::not_found("job")),
        Some(Job::Running) => Ok((StatusCode::ACCEPTED, Json(json!({ "job": job, "status": "running" }))).into_response()),
        Some(Job::Done(status, body)) => Ok((*status, Json(body.clone())).into_response()),
    }
}

fn outcome_json(instance: &ProblemInstance, outcome: &Outcome) -> Value {
    json!({
        "feasible": true,
        "usedSplit": outcome.used_split,
        "optimal": outcome.optimal,
        "report": ReportView::new(instance, &outcome.report),
        "placement": outcome.placement.export(),
    })
}

fn failure_response(failure: Failure) -> (StatusCode, Value) {
    match failure {
        Failure::Infeasible(m) => (StatusCode::OK, json!({ "feasible": false, "error": m })),
        Failure::Rejected(m) => (StatusCode::UNPROCESSABLE_ENTITY, json!({ "errors": [m] })),
        Failure::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": m })),
    }
}

/// Marks a session busy and returns its current state.
fn claim(state: &Arc<AppState>, id: &str) -> Result<(Session, BusyGuard), ApiError> {
    let mut sessions = lock(&state.sessions);
    let s = sessions.get_mut(id).ok_or_else(|| ApiError::not_found("session"))?;
    if s.busy {
        return Err(ApiError::busy());
    }
    s.busy = true;
    let guard = BusyGuard {
        state: state.clone(),
        id: id.to_string(),
    };
    Ok((s.clone(), guard))
}

async fn solve(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let settings: SolveSettings = parse(&body)?;
    settings.check().map_err(|e| ApiError::unprocessable(vec![e]))?;
    let (current, guard) = claim(&state, &id)?;
    let bg = state.clone();
    let work = move || {
        let instance = current.instance.clone();
        let result = session::run(instance.clone(), &settings, None, None);
        let mut sessions = lock(&bg.sessions);
        let s = sessions.get_mut(&current.id).expect("sessions are never removed");
        let response = match result {
            Ok(outcome) => {
                let body = outcome_json(&instance, &outcome);
                s.placement = Some(outcome.placement);
                s.report = Some(outcome.report);
                s.settings = settings;
                (StatusCode::OK, body)
            }
            Err(f) => failure_response(f),
        };
        bg.persist(s);
        drop(sessions);
        drop(guard);
        response
    };
    Ok(dispatch(state, id, work).await)
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct WhatIfBody {
    delta: Delta,
    #[serde(default)]
    commit: bool,
    time_limit: Option<f64>,
}

fn by_name(report: Option<&ReportView>) -> BTreeMap<String, f64> {
    report.map(|r| r.per_request.clone()).unwrap_or_default()
}

async fn what_if(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let body: WhatIfBody = parse(&body)?;
    if let Some(t) = body.time_limit {
        if !(t.is_finite() && t >= 0.0) {
            return Err(ApiError::unprocessable(vec![format!("timeLimit must be a non-negative number, got {t}")]));
        }
    }
    let (current, guard) = claim(&state, &id)?;
    let mut doc = current.doc.clone();
    let mut settings = current.settings.clone();
    delta::apply(&mut doc, &mut settings.split, &body.delta).map_err(|e| ApiError::unprocessable(vec![e]))?;
    let instance = build_instance(&doc).map_err(ApiError::unprocessable)?;

    let limit = Some(body.time_limit.map_or(state.config.whatif_time_limit, Duration::from_secs_f64));
    let bg = state.clone();
    let work = move || {
        let old_report = match (&current.placement, &current.report) {
            (Some(_), Some(r)) => Ok(Some(r.clone())),
            _ => match session::run(current.instance.clone(), &current.settings, None, limit) {
                Ok(o) => Ok(Some(o.report)),
                Err(Failure::Infeasible(_)) => Ok(None),
                Err(f) => Err(f),
            },
        };
        let old_report = match old_report {
            Ok(r) => r,
            Err(f) => return failure_response(f),
        };
        let result = session::run(instance.clone(), &settings, current.placement.as_ref(), limit);
        let (placement, report, error) = match result {
            Ok(o) => (Some(o.placement), Some(o.report), None),
            Err(Failure::Infeasible(m)) => (None, None, Some(m)),
            Err(f) => return failure_response(f),
        };

        let old_view = old_report.as_ref().map(|r| ReportView::new(&current.instance, r));
        let new_view = report.as_ref().map(|r| ReportView::new(&instance, r));
        let (old_map, new_map) = (by_name(old_view.as_ref()), by_name(new_view.as_ref()));
        let names: BTreeSet<&String> = old_map.keys().chain(new_map.keys()).collect();
        let changes: Vec<Value> = names
            .into_iter()
            .map(|n| json!({ "request": n, "old": old_map.get(n), "new": new_map.get(n) }))
            .collect();
        let worst = |v: &Option<ReportView>| -> BTreeSet<String> {
            v.as_ref().map(|r| r.worst_requests.iter().cloned().collect()).unwrap_or_default()
        };
        let (old_worst, new_worst) = (worst(&old_view), worst(&new_view));
        let response = json!({
            "feasible": placement.is_some(),
            "vacuous": instance.requests().is_empty(),
            "committed": body.commit,
            "settings": settings,
            "old": old_view,
            "new": new_view,
            "changes": changes,
            "worst": {
                "added": new_worst.difference(&old_worst).collect::<Vec<_>>(),
                "removed": old_worst.difference(&new_worst).collect::<Vec<_>>(),
            },
            "placement": placement.as_ref().map(Placement::export),
            "error": error,
        });

        if body.commit {
            let mut sessions = lock(&bg.sessions);
            let s = sessions.get_mut(&current.id).expect("sessions are never removed");
            s.doc = doc;
            s.instance = instance;
            s.settings = settings;
            s.placement = placement;
            s.report = report;
            s.history.push(HistoryEntry {
                delta: body.delta,
                report: new_view,
            });
            bg.persist(s);
        }
        drop(guard);
        (StatusCode::OK, response)
    };
    Ok(dispatch(state, id, work).await)
}

async fn get_placement(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let sessions = lock(&state.sessions);
    let s = sessions.get(&id).ok_or_else(|| ApiError::not_found("session"))?;
    let p = s.placement.as_ref().ok_or_else(|| ApiError::not_found("placement"))?;
    Ok(Json(p.export()).into_response())
}

async fn get_availability(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let (instance, placement) = {
        let sessions = lock(&state.sessions);
        let s = sessions.get(&id).ok_or_else(|| ApiError::not_found("session"))?;
        let p = s.placement.clone().ok_or_else(|| ApiError::not_found("placement"))?;
        (s.instance.clone(), p)
    };
    availability_view(&instance, &placement)
        .map(|v| Json(v).into_response())
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": e.to_string() })))
}

/// Per-request availability with every fragment split into cluster terms.
pub fn availability_view(instance: &ProblemInstance, placement: &Placement) -> havnfp::Result<Value> {
    let server = |s: ServerId| instance.server(s).name.clone();
    let report = placement.evaluate()?;
    let mut requests = Vec::new();
    for r in instance.request_ids() {
        let mut fragments = Vec::new();
        if let Some(config) = placement.configuration(r) {
            for (fragment, fraction) in config.fragments() {
                let b = fragment_breakdown(instance, r, &Fragment::new(fragment.master(), fragment.slaves()))?;
                let clusters: Vec<Value> = b
                    .clusters
                    .iter()
                    .map(|t| {
                        json!({
                            "cluster": instance.cluster(t.cluster).name,
                            "servers": t.servers.iter().map(|&s| server(s)).collect::<Vec<_>>(),
                            "access": t.access,
                            "clusterAvailability": t.cluster_availability,
                            "sync": t.sync,
                            "serverSet": t.server_set,
                            "term": t.term,
                        })
                    })
                    .collect();
                fragments.push(json!({
                    "master": server(b.master),
                    "protection": b.protection.iter().map(|&s| server(s)).collect::<Vec<_>>(),
                    "fraction": fraction,
                    "availability": b.availability,
                    "clusters": clusters,
                }));
            }
        }
        requests.push(json!({
            "request": instance.request(r).name,
            "availability": report.per_request[r.0],
            "worst": report.worst_requests.contains(&RequestId(r.0)),
            "fragments": fragments,
        }));
    }
    Ok(json!({
        "objective": report.objective,
        "vacuous": report.vacuous,
        "requests": requests,
    }))
}
