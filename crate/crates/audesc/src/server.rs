//! HTTP API.
//!
//! Generation runs as a background job that clients poll; questions are
//! answered synchronously. Every successful mutating request appends exactly
//! one event to the store.

#![allow(clippy::result_large_err)]

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use audesc_core::analytics::{
    customization_distribution, length_trend, question_distribution, render_report, render_trend, DailyRatings,
    LogEvent, SessionRecord, SessionSettings,
};
use audesc_core::customization::{validate_json, CustomizationSettings};
use audesc_core::gateway::{GatewayError, ProviderError};
use audesc_core::track::{schedule, serialize, tts_rate_for_multiplier, AdTrack, TrackFormat};
use audesc_core::vqa::{InputMode, VqaError, VqaRequest};
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::ingest::{IngestError, VideoRef};
use crate::pipeline::{AskError, Pipeline, PipelineError, Prepared, Stage};
use crate::store::{now_ms, Store, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Ingesting,
    Timing,
    Generating,
    Ready,
    Failed,
}

impl JobState {
    fn progress(self) -> f64 {
        match self {
            JobState::Queued => 0.0,
            JobState::Ingesting => 0.1,
            JobState::Timing => 0.4,
            JobState::Generating => 0.7,
            JobState::Ready => 1.0,
            JobState::Failed => 1.0,
        }
    }

    fn is_terminal(self) -> bool {
        matches!(self, JobState::Ready | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: String,
    pub video_id: String,
    pub state: JobState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub progress: f64,
    /// Every state entered, in order, starting with `queued`.
    pub history: Vec<JobState>,
}

#[derive(Default)]
struct Video {
    source: Option<VideoRef>,
    prepared: Option<Arc<Prepared>>,
    track: Option<AdTrack>,
}

pub struct AppState {
    pipeline: Arc<Pipeline>,
    store: Arc<Store>,
    jobs: Mutex<HashMap<String, JobStatus>>,
    videos: Mutex<HashMap<String, Video>>,
    video_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    utc_offset_minutes: i32,
}

impl AppState {
    pub fn new(pipeline: Arc<Pipeline>, store: Arc<Store>) -> Arc<Self> {
        let utc_offset_minutes = pipeline.config().analytics.utc_offset_minutes;
        Arc::new(Self {
            pipeline,
            store,
            jobs: Mutex::new(HashMap::new()),
            videos: Mutex::new(HashMap::new()),
            video_locks: Mutex::new(HashMap::new()),
            utc_offset_minutes,
        })
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn pipeline(&self) -> &Arc<Pipeline> {
        &self.pipeline
    }

    pub fn job(&self, id: &str) -> Option<JobStatus> {
        self.jobs.lock().expect("jobs").get(id).cloned()
    }

    fn set_state(&self, job_id: &str, state: JobState, detail: Option<String>) {
        let mut jobs = self.jobs.lock().expect("jobs");
        if let Some(j) = jobs.get_mut(job_id) {
            if j.state.is_terminal() || state < j.state {
                return;
            }
            if state != j.state {
                j.history.push(state);
            }
            j.state = state;
            j.progress = state.progress();
            if detail.is_some() {
                j.detail = detail;
            }
        }
    }

    fn video_lock(&self, video_id: &str) -> Arc<Mutex<()>> {
        self.video_locks.lock().expect("video locks").entry(video_id.to_string()).or_default().clone()
    }

    fn new_job(&self, video_id: &str) -> String {
        let job_id = uuid::Uuid::new_v4().to_string();
        self.jobs.lock().expect("jobs").insert(
            job_id.clone(),
            JobStatus {
                job_id: job_id.clone(),
                video_id: video_id.to_string(),
                state: JobState::Queued,
                detail: None,
                progress: 0.0,
                history: vec![JobState::Queued],
            },
        );
        job_id
    }

    /// Runs a generation job to completion on the current thread.
    fn run_job(&self, job_id: &str, video_id: &str, settings: &CustomizationSettings) {
        let lock = self.video_lock(video_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let on_stage = |s: Stage| {
            let state = match s {
                Stage::Ingesting => JobState::Ingesting,
                Stage::Timing => JobState::Timing,
                Stage::Generating => JobState::Generating,
            };
            self.set_state(job_id, state, None);
        };
        let (source, prepared) = {
            let videos = self.videos.lock().expect("videos");
            let v = videos.get(video_id);
            (v.and_then(|v| v.source.clone()), v.and_then(|v| v.prepared.clone()))
        };
        let result = (|| -> Result<AdTrack, PipelineError> {
            let prepared = match prepared {
                Some(p) => p,
                None => {
                    on_stage(Stage::Ingesting);
                    let source = source.ok_or(IngestError::UnreachableSource("no source recorded".into()))?;
                    let resolved = self.pipeline.resolve(&source)?;
                    let p = self.pipeline.prepare(resolved, &on_stage)?;
                    self.videos.lock().expect("videos").entry(video_id.to_string()).or_default().prepared =
                        Some(p.clone());
                    p
                }
            };
            on_stage(Stage::Timing);
            Ok(self.pipeline.generate(&prepared, settings, &on_stage)?.track)
        })();
        match result {
            Ok(track) => {
                self.videos.lock().expect("videos").entry(video_id.to_string()).or_default().track = Some(track);
                self.set_state(job_id, JobState::Ready, None);
            }
            Err(e) => {
                tracing::warn!(job_id, video_id, error = %e, "job failed");
                self.set_state(job_id, JobState::Failed, Some(format!("{}: {e}", e.kind())));
            }
        }
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    detail: String,
}

fn error(status: StatusCode, kind: &str, detail: impl ToString) -> Response {
    (status, Json(ErrorBody { error: kind.to_string(), detail: detail.to_string() })).into_response()
}

fn store_error(e: StoreError) -> Response {
    match e {
        StoreError::SchemaViolation(e) => error(StatusCode::BAD_REQUEST, "schema_violation", e),
        StoreError::StorageFailure(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "storage_failure", e),
    }
}

fn settings_from(value: Option<&serde_json::Value>) -> Result<Option<CustomizationSettings>, Response> {
    match value {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(v) => validate_json(v).map(Some).map_err(|e| error(StatusCode::BAD_REQUEST, "invalid_settings", e)),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(serde_json::json!({ "status": "ok" })) }))
        .route("/videos", post(create_video))
        .route("/jobs/{id}", get(get_job))
        .route("/videos/{id}/track", get(get_track))
        .route("/videos/{id}/track.vtt", get(get_track_vtt))
        .route("/videos/{id}/schedule", get(get_schedule))
        .route("/videos/{id}/regenerate", post(regenerate))
        .route("/videos/{id}/questions", post(ask))
        .route("/sessions/{id}/ratings", post(rate))
        .route("/analytics/{report}", get(analytics))
        .layer(middleware::from_fn(access_log))
        .with_state(state)
}

async fn access_log(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_string();
    let started = Instant::now();
    let resp = next.run(req).await;
    tracing::info!(
        target: "access",
        method = %method,
        path = %path,
        status = resp.status().as_u16(),
        latency_ms = started.elapsed().as_millis() as u64,
    );
    resp
}

#[derive(Debug, Deserialize)]
struct CreateVideo {
    source: String,
    #[serde(default)]
    settings: Option<serde_json::Value>,
    #[serde(default)]
    user_id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Accepted {
    pub job_id: String,
    pub video_id: String,
    pub session_id: String,
}

fn start_session(
    state: &AppState,
    video_id: &str,
    user_id: Option<String>,
    settings: Option<&CustomizationSettings>,
) -> Result<String, Response> {
    let session_id = uuid::Uuid::new_v4().to_string();
    let record = SessionRecord {
        session_id: session_id.clone(),
        user_id: user_id.unwrap_or_else(|| "anonymous".into()),
        started_at_ms: now_ms(),
        video_id: video_id.to_string(),
        settings: settings.map_or(SessionSettings::Default, |s| SessionSettings::Custom(s.clone())),
        exchanges: Vec::new(),
        daily_ratings: None,
    };
    state.store.record(LogEvent::Session(record)).map_err(store_error)?;
    Ok(session_id)
}

fn spawn_job(state: &Arc<AppState>, job_id: &str, video_id: &str, settings: CustomizationSettings) {
    let (st, job, vid) = (state.clone(), job_id.to_string(), video_id.to_string());
    tokio::task::spawn_blocking(move || st.run_job(&job, &vid, &settings));
}

async fn create_video(State(state): State<Arc<AppState>>, body: Option<Json<CreateVideo>>) -> Response {
    let Some(Json(body)) = body else {
        return error(StatusCode::BAD_REQUEST, "bad_request", "expected a JSON body with a source");
    };
    let settings = match settings_from(body.settings.as_ref()) {
        Ok(s) => s,
        Err(r) => return r,
    };
    let source = VideoRef::parse(body.source.trim());
    if let VideoRef::Url(url) = &source {
        if state.pipeline.config().ingest.resolver_cmd.is_none() {
            return error(StatusCode::BAD_GATEWAY, "unreachable_source", format!("{url}: no resolver configured"));
        }
    }
    let video_id = match state.pipeline.video_id(&source) {
        Ok(id) => id,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.kind(), e),
    };
    let session_id = match start_session(&state, &video_id, body.user_id, settings.as_ref()) {
        Ok(s) => s,
        Err(r) => return r,
    };
    let job_id = state.new_job(&video_id);
    {
        let mut videos = state.videos.lock().expect("videos");
        let v = videos.entry(video_id.clone()).or_default();
        if v.source.as_ref() != Some(&source) {
            v.source = Some(source);
        }
    }
    spawn_job(&state, &job_id, &video_id, settings.unwrap_or_default());
    (StatusCode::ACCEPTED, Json(Accepted { job_id, video_id, session_id })).into_response()
}

async fn get_job(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match state.job(&id) {
        Some(j) => Json(j).into_response(),
        None => error(StatusCode::NOT_FOUND, "not_found", format!("job {id}")),
    }
}

fn current_track(state: &AppState, video_id: &str) -> Result<AdTrack, Response> {
    let videos = state.videos.lock().expect("videos");
    let v =
        videos.get(video_id).ok_or_else(|| error(StatusCode::NOT_FOUND, "not_found", format!("video {video_id}")))?;
    v.track
        .clone()
        .ok_or_else(|| error(StatusCode::CONFLICT, "not_ready", format!("video {video_id} has no track yet")))
}

async fn get_track(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let track = match current_track(&state, &id) {
        Ok(t) => t,
        Err(r) => return r,
    };
    match serialize(&track, TrackFormat::Structured) {
        Ok(bytes) => ([(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "serialization", e),
    }
}

async fn get_track_vtt(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let track = match current_track(&state, &id) {
        Ok(t) => t,
        Err(r) => return r,
    };
    match serialize(&track, TrackFormat::Vtt) {
        Ok(bytes) => ([(header::CONTENT_TYPE, "text/vtt; charset=utf-8")], bytes).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "serialization", e),
    }
}

#[derive(Debug, Deserialize)]
struct ScheduleQuery {
    #[serde(default = "one")]
    rate_multiplier: f64,
}

fn one() -> f64 {
    1.0
}

async fn get_schedule(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<ScheduleQuery>,
) -> Response {
    let track = match current_track(&state, &id) {
        Ok(t) => t,
        Err(r) => return r,
    };
    match schedule(&track, tts_rate_for_multiplier(q.rate_multiplier)) {
        Ok(s) => Json(s).into_response(),
        Err(e) => error(StatusCode::BAD_REQUEST, "rate_out_of_range", e),
    }
}

#[derive(Debug, Deserialize)]
struct Regenerate {
    #[serde(default)]
    settings: Option<serde_json::Value>,
    #[serde(default)]
    user_id: Option<String>,
}

async fn regenerate(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Option<Json<Regenerate>>,
) -> Response {
    let body = body.map(|b| b.0).unwrap_or(Regenerate { settings: None, user_id: None });
    let settings = match settings_from(body.settings.as_ref()) {
        Ok(s) => s,
        Err(r) => return r,
    };
    {
        let videos = state.videos.lock().expect("videos");
        match videos.get(&id) {
            None => return error(StatusCode::NOT_FOUND, "not_found", format!("video {id}")),
            Some(v) if v.prepared.is_none() => {
                return error(StatusCode::CONFLICT, "not_ready", format!("video {id} has not been ingested"))
            }
            Some(_) => {}
        }
    }
    let session_id = match start_session(&state, &id, body.user_id, settings.as_ref()) {
        Ok(s) => s,
        Err(r) => return r,
    };
    let job_id = state.new_job(&id);
    spawn_job(&state, &job_id, &id, settings.unwrap_or_default());
    (StatusCode::ACCEPTED, Json(Accepted { job_id, video_id: id, session_id })).into_response()
}

#[derive(Debug, Deserialize)]
struct Question {
    t_s: f64,
    question: String,
    #[serde(default = "typed")]
    input_mode: InputMode,
    #[serde(default)]
    session_id: Option<String>,
}

fn typed() -> InputMode {
    InputMode::Typed
}

async fn ask(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Option<Json<Question>>) -> Response {
    let Some(Json(q)) = body else {
        return error(StatusCode::BAD_REQUEST, "bad_request", "expected t_s and question");
    };
    let (prepared, track) = {
        let videos = state.videos.lock().expect("videos");
        let Some(v) = videos.get(&id) else {
            return error(StatusCode::NOT_FOUND, "not_found", format!("video {id}"));
        };
        match (&v.prepared, &v.track) {
            (Some(p), Some(t)) => (p.clone(), t.clone()),
            _ => return error(StatusCode::CONFLICT, "not_ready", format!("video {id} has no track yet")),
        }
    };
    let session_id = match q.session_id.clone().or_else(|| state.store.latest_session_for(&id)) {
        Some(s) if state.store.has_session(&s) => s,
        Some(s) => return error(StatusCode::NOT_FOUND, "not_found", format!("session {s}")),
        None => return error(StatusCode::CONFLICT, "no_session", format!("video {id} has no session")),
    };
    let request = VqaRequest { video_id: id, t_s: q.t_s, question: q.question, input_mode: q.input_mode };
    let st = state.clone();
    let joined =
        tokio::task::spawn_blocking(move || st.pipeline.ask(&st.store, &session_id, &prepared, &track, request)).await;
    match joined {
        Ok(Ok(exchange)) => Json(exchange).into_response(),
        Ok(Err(AskError::Invalid(VqaError::EmptyQuestion))) => {
            error(StatusCode::UNPROCESSABLE_ENTITY, "empty_question", VqaError::EmptyQuestion)
        }
        Ok(Err(AskError::Invalid(e))) => error(StatusCode::BAD_REQUEST, "invalid_request", e),
        Ok(Err(AskError::Prompt(e))) => error(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", e),
        Ok(Err(AskError::Gateway { error: e, .. })) => match e {
            GatewayError::Provider(ProviderError::Timeout(_)) => {
                error(StatusCode::GATEWAY_TIMEOUT, "provider_timeout", e)
            }
            GatewayError::EmptyAnswer => error(StatusCode::BAD_GATEWAY, "empty_answer", e),
            e => error(StatusCode::BAD_GATEWAY, "provider_error", e),
        },
        Ok(Err(AskError::Store(e))) => store_error(e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e),
    }
}

async fn rate(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Option<Json<DailyRatings>>,
) -> Response {
    let Some(Json(ratings)) = body else {
        return error(StatusCode::BAD_REQUEST, "bad_request", "expected effectiveness, enjoyment, immersion");
    };
    if !state.store.has_session(&id) {
        return error(StatusCode::NOT_FOUND, "not_found", format!("session {id}"));
    }
    match state.store.record(LogEvent::Rating { session_id: id, ratings }) {
        Ok(_) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => store_error(e),
    }
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn analytics(
    State(state): State<Arc<AppState>>,
    Path(report): Path<String>,
    Query(q): Query<ReportQuery>,
) -> Response {
    let log = state.store.log();
    let text = q.format.as_deref() == Some("text");
    let plain = |s: String| ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], s).into_response();
    match report.as_str() {
        "customization" => {
            let r = customization_distribution(&log);
            if text {
                plain(render_report(&r))
            } else {
                Json(r).into_response()
            }
        }
        "questions" => {
            let r = question_distribution(&log);
            if text {
                plain(render_report(&r))
            } else {
                Json(r).into_response()
            }
        }
        "length-trend" => {
            let t = length_trend(&log, state.utc_offset_minutes);
            if text {
                plain(render_trend(&t))
            } else {
                Json(t).into_response()
            }
        }
        other => error(StatusCode::NOT_FOUND, "unknown_report", other),
    }
}

/// Binds and serves until interrupted.
pub async fn serve(state: Arc<AppState>, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
