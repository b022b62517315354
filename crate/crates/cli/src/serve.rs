//! HTTP API for the blinded review study.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use synstarts_core::corpus::Corpus;
use synstarts_core::gateway::derive_seed;
use synstarts_core::review::{
    create_session, external_sources, synthetic_sources, PairSource, ReviewError, ReviewStore, SessionPlan,
    SessionStatus, Side,
};
use synstarts_core::sampling::{load_triage_adult, MismatchPolicy};

use crate::{CliError, ReviewServeArgs, Summary};

pub struct ReviewState {
    store: Mutex<ReviewStore>,
    synthetic: Vec<PairSource>,
    external: Vec<PairSource>,
    questions: usize,
    same_pairs: bool,
    seed: u64,
}

impl ReviewState {
    pub fn new(
        store: ReviewStore,
        synthetic: Vec<PairSource>,
        external: Vec<PairSource>,
        questions: usize,
        same_pairs: bool,
        seed: u64,
    ) -> Self {
        ReviewState { store: Mutex::new(store), synthetic, external, questions, same_pairs, seed }
    }
}

pub struct ApiError(StatusCode, String, String);

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        let (status, code) = match &e {
            ReviewError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            ReviewError::UnknownQuestion { .. } => (StatusCode::BAD_REQUEST, "unknown_question"),
            ReviewError::AlreadyAnswered(_) => (StatusCode::CONFLICT, "already_answered"),
            ReviewError::SessionComplete(_) => (StatusCode::CONFLICT, "session_complete"),
            ReviewError::SessionIncomplete(_) => (StatusCode::CONFLICT, "session_incomplete"),
            ReviewError::InvalidConfig(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
            ReviewError::InsufficientPairs { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "insufficient_pairs"),
            ReviewError::Log { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "log_error"),
        };
        ApiError(status, code.to_string(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({"error": self.1, "message": self.2}))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(e.status(), "invalid_body".into(), e.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub rater_id: String,
    #[serde(default)]
    pub questions: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Session overview; never exposes which side is synthetic.
#[derive(Debug, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub rater_id: String,
    pub total: usize,
    pub answered: usize,
    pub status: SessionStatus,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitAnswer {
    pub index: usize,
    pub chosen: Side,
}

async fn create(State(st): State<Arc<ReviewState>>, body: Result<Json<CreateSession>, JsonRejection>) -> ApiResult<Response> {
    let Json(body) = body?;
    if body.rater_id.trim().is_empty() {
        return Err(ReviewError::InvalidConfig("rater_id must not be empty".into()).into());
    }
    let mut store = st.store.lock().expect("store lock");
    let seed = body.seed.unwrap_or_else(|| {
        if st.same_pairs {
            derive_seed(st.seed, "review")
        } else {
            derive_seed(st.seed, &format!("review:{}:{}", body.rater_id, store.len()))
        }
    });
    let id = store.next_session_id(&body.rater_id, seed);
    let plan = SessionPlan { questions: body.questions.unwrap_or(st.questions), seed, quotas: None };
    let session = create_session(&id, &body.rater_id, &st.synthetic, &st.external, &plan)?;
    let info = info(&session);
    store.insert(session)?;
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

fn info(s: &synstarts_core::review::ReviewSession) -> SessionInfo {
    SessionInfo {
        session_id: s.session_id.clone(),
        rater_id: s.rater_id.clone(),
        total: s.total(),
        answered: s.answers.len(),
        status: s.status(),
    }
}

async fn show(State(st): State<Arc<ReviewState>>, Path(id): Path<String>) -> ApiResult<Json<SessionInfo>> {
    let store = st.store.lock().expect("store lock");
    Ok(Json(info(store.get(&id)?)))
}

async fn next(State(st): State<Arc<ReviewState>>, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let store = st.store.lock().expect("store lock");
    let s = store.get(&id)?;
    Ok(Json(match s.next_question() {
        Some(q) => json!({"status": s.status(), "question": q}),
        None => json!({"status": s.status()}),
    }))
}

async fn answer(
    State(st): State<Arc<ReviewState>>,
    Path(id): Path<String>,
    body: Result<Json<SubmitAnswer>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let ts = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    let ack = st.store.lock().expect("store lock").submit(&id, body.index, body.chosen, &ts)?;
    Ok(Json(ack).into_response())
}

async fn session_results(State(st): State<Arc<ReviewState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let store = st.store.lock().expect("store lock");
    Ok(Json(store.results(&[id])?).into_response())
}

#[derive(Debug, Deserialize)]
struct ResultsQuery {
    sessions: Option<String>,
}

/// Aggregate over the listed sessions, or every complete one.
async fn all_results(State(st): State<Arc<ReviewState>>, Query(q): Query<ResultsQuery>) -> ApiResult<Response> {
    let store = st.store.lock().expect("store lock");
    let ids: Vec<String> = match q.sessions {
        Some(list) => list.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect(),
        None => store
            .sessions()
            .filter(|s| s.status() == SessionStatus::Complete)
            .map(|s| s.session_id.clone())
            .collect(),
    };
    Ok(Json(store.results(&ids)?).into_response())
}

pub fn router(state: Arc<ReviewState>, ui: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/sessions", post(create))
        .route("/api/sessions/{id}", get(show))
        .route("/api/sessions/{id}/next", get(next))
        .route("/api/sessions/{id}/answers", post(answer))
        .route("/api/sessions/{id}/results", get(session_results))
        .route("/api/results", get(all_results))
        .with_state(state);
    match ui {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

pub fn review_serve(seed: u64, a: &ReviewServeArgs) -> Result<Summary, CliError> {
    let corpus = Corpus::load_dir(&a.corpus)?;
    let external = load_triage_adult(&a.external, MismatchPolicy::Warn)?;
    let store = ReviewStore::open(&a.log)?;
    let resumed = store.len();
    let state = Arc::new(ReviewState::new(
        store,
        synthetic_sources(&corpus),
        external_sources(&external.cases),
        a.questions,
        a.same_pairs,
        seed,
    ));
    let app = router(state, a.ui.clone());
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(format!("runtime: {e}")))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.addr)
            .await
            .map_err(|e| CliError::Usage(format!("bind {}: {e}", a.addr)))?;
        eprintln!("review server on http://{} ({resumed} session(s) restored from {})", a.addr, a.log.display());
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Data(format!("server: {e}")))
    })?;
    Ok(Summary::ok(
        format!("review server stopped; log at {}", a.log.display()),
        json!({"command": "review-serve", "log": a.log}),
    ))
}
