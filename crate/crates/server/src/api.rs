//! HTTP+JSON routes under `/api`.
//!
//! Core calls can block (log fsync, password hashing, gateway requests), so
//! every handler runs them on the blocking pool.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::header::{AUTHORIZATION, CONTENT_DISPOSITION, CONTENT_TYPE, COOKIE, SET_COOKIE};
use axum::http::request::Parts;
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use barangay_core::access::{require, Action, Officer, Role};
use barangay_core::analytics::{ChartGroupBy, LearnerKind, LikelihoodTask};
use barangay_core::casework::{CaseStatus, CertificateKind, NewCase};
use barangay_core::dates::{parse_date, DateRange};
use barangay_core::geo::{GeoDocument, MarkerKind};
use barangay_core::health::{HealthGroupBy, NewChild, NewHealthCase};
use barangay_core::notify::{segment_message, AudienceFilter};
use barangay_core::opendata::DatasetId;
use barangay_core::registry::{NewResident, Page, ResidentId};
use barangay_core::{Error, System};
use chrono::{NaiveDate, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{ApiError, ApiResult};
use crate::sessions::SessionStore;

pub const SESSION_COOKIE: &str = "session";

#[derive(Clone)]
pub struct AppState {
    pub sys: Arc<System>,
    pub sessions: Arc<SessionStore>,
}

impl AppState {
    pub fn new(sys: Arc<System>, sessions: Arc<SessionStore>) -> Self {
        AppState { sys, sessions }
    }
}

// ---- extractors ----

/// JSON body whose rejections use the error envelope.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        let Json(v) = Json::<T>::from_request(req, state).await?;
        Ok(Body(v))
    }
}

/// Query string whose rejections use the error envelope.
pub struct Q<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Q<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        let Query(v) = Query::<T>::from_request_parts(parts, state).await?;
        Ok(Q(v))
    }
}

/// Path parameter whose rejections use the error envelope.
pub struct P<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned + Send> FromRequestParts<S> for P<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        let Path(v) = Path::<T>::from_request_parts(parts, state).await?;
        Ok(P(v))
    }
}

fn session_token(headers: &HeaderMap) -> Option<String> {
    if let Some(v) = headers.get(AUTHORIZATION).and_then(|v| v.to_str().ok()) {
        if let Some(t) = v.strip_prefix("Bearer ") {
            return Some(t.trim().to_string());
        }
    }
    headers
        .get_all(COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|kv| kv.trim().split_once('='))
        .find(|(k, _)| *k == SESSION_COOKIE)
        .map(|(_, v)| v.to_string())
}

/// The signed-in official; rejects with 401 without a live session.
pub struct Auth(pub Officer);

impl FromRequestParts<AppState> for Auth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let token = session_token(&parts.headers).ok_or_else(ApiError::unauthenticated)?;
        let session = state
            .sessions
            .get(&token, Utc::now())
            .ok_or_else(ApiError::unauthenticated)?;
        Ok(Auth(session.officer()))
    }
}

impl Auth {
    fn require(&self, action: Action) -> ApiResult<&Officer> {
        require(&self.0, action)?;
        Ok(&self.0)
    }

    fn require_any(&self, actions: &[Action]) -> ApiResult<&Officer> {
        match actions.iter().find(|a| require(&self.0, **a).is_ok()) {
            Some(_) => Ok(&self.0),
            None => Err(require(&self.0, actions[0]).unwrap_err().into()),
        }
    }
}

async fn run<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&System) -> barangay_core::Result<T> + Send + 'static,
{
    let sys = state.sys.clone();
    tokio::task::spawn_blocking(move || f(&sys))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))?
        .map_err(ApiError::from)
}

fn created<T: Serialize>(v: T) -> Response {
    (StatusCode::CREATED, Json(v)).into_response()
}

fn resident_id(raw: &str) -> ApiResult<ResidentId> {
    ResidentId::parse(raw).map_err(|_| Error::not_found("resident", raw).into())
}

#[derive(Debug, Default, Deserialize)]
pub struct WindowQuery {
    pub from: Option<String>,
    pub to: Option<String>,
}

impl WindowQuery {
    fn range(&self) -> ApiResult<Option<DateRange>> {
        if self.from.is_none() && self.to.is_none() {
            return Ok(None);
        }
        let from = match &self.from {
            Some(s) => parse_date("from", s)?,
            None => NaiveDate::MIN,
        };
        let to = match &self.to {
            Some(s) => parse_date("to", s)?,
            None => NaiveDate::MAX,
        };
        Ok(Some(DateRange::new(from, to)?))
    }
}

// ---- router ----

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/health-check", get(health_check))
        .route("/sessions", post(sign_in).delete(sign_out))
        .route("/me", get(me))
        .route("/accounts", post(create_account))
        .route("/residents", get(list_residents).post(register_resident))
        .route("/residents/import", post(import_residents))
        .route("/residents/export.csv", get(export_residents))
        .route("/residents/{id}", get(get_resident))
        .route("/residents/{id}/history", get(resident_history))
        .route("/blotter", get(list_cases).post(file_blotter))
        .route("/blotter/import", post(import_blotter))
        .route("/blotter/{case}", get(get_case).patch(update_case))
        .route("/clearance", post(issue_clearance))
        .route("/clearance/{resident}", get(clearance_history))
        .route("/certificates/{id}", get(get_certificate))
        .route("/certificates/{id}/text", get(certificate_text))
        .route("/health/children", get(list_children).post(register_child))
        .route("/health/cases", post(record_health_case))
        .route("/health/summary", get(health_summary))
        .route("/geo/zones", get(geo_zones))
        .route("/geo/markers", get(geo_markers))
        .route("/geo/hotspots", get(geo_hotspots))
        .route("/analytics/chart", get(analytics_chart))
        .route("/analytics/report", get(analytics_report))
        .route("/analytics/train", post(analytics_train))
        .route("/analytics/evaluate", post(analytics_evaluate))
        .route("/analytics/predict", post(analytics_predict))
        .route("/broadcasts", get(list_broadcasts).post(create_broadcast))
        .route("/broadcasts/preview", post(preview_broadcast))
        .route("/broadcasts/{id}", get(get_broadcast))
        .route("/broadcasts/{id}/dispatch", post(dispatch_broadcast))
        .route("/opendata", get(opendata_catalog))
        .route("/opendata/privacy-scan", post(privacy_scan))
        .route("/opendata/{file}", get(opendata_download))
        .route("/advisories", get(list_advisories).post(publish_advisory))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such route") })
        .with_state(state);
    Router::new()
        .nest("/api", api)
        .layer(middleware::from_fn(log_requests))
}

async fn log_requests(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_string();
    let started = Instant::now();
    let res = next.run(req).await;
    tracing::info!(
        %method,
        %path,
        status = res.status().as_u16(),
        ms = started.elapsed().as_millis() as u64,
        "request"
    );
    res
}

// ---- sessions and accounts ----

async fn health_check() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Deserialize)]
struct SignIn {
    username: String,
    password: String,
}

async fn sign_in(State(st): State<AppState>, Body(req): Body<SignIn>) -> ApiResult<Response> {
    let officer = run(&st, move |sys| sys.authenticate(&req.username, &req.password)).await?;
    let session = st.sessions.create(&officer, Utc::now());
    let cookie = format!(
        "{SESSION_COOKIE}={}; HttpOnly; SameSite=Strict; Path=/; Max-Age={}",
        session.token,
        st.sessions.ttl().num_seconds()
    );
    let mut res = created(&session);
    res.headers_mut()
        .insert(SET_COOKIE, HeaderValue::from_str(&cookie).expect("token is hex"));
    Ok(res)
}

async fn sign_out(State(st): State<AppState>, headers: HeaderMap) -> StatusCode {
    if let Some(t) = session_token(&headers) {
        st.sessions.revoke(&t);
    }
    StatusCode::NO_CONTENT
}

async fn me(auth: Auth) -> Json<Officer> {
    Json(auth.0)
}

#[derive(Deserialize)]
struct NewAccount {
    username: String,
    password: String,
    role: Role,
    #[serde(default)]
    linked_resident_id: Option<ResidentId>,
}

async fn create_account(State(st): State<AppState>, auth: Auth, Body(req): Body<NewAccount>) -> ApiResult<Response> {
    if auth.0.role != Role::Secretary {
        return Err(Error::Forbidden("only a secretary may create accounts".into()).into());
    }
    let acct = run(&st, move |sys| {
        sys.create_account(&req.username, &req.password, req.role, req.linked_resident_id)
    })
    .await?;
    Ok(created(json!({
        "username": acct.username,
        "role": acct.role,
        "linked_resident_id": acct.linked_resident_id,
    })))
}

// ---- registry ----

#[derive(Deserialize)]
struct FindQuery {
    #[serde(default)]
    q: String,
    #[serde(default)]
    offset: usize,
    limit: Option<usize>,
}

async fn list_residents(State(st): State<AppState>, auth: Auth, Q(q): Q<FindQuery>) -> ApiResult<Response> {
    auth.require(Action::RegistryRead)?;
    let page = Page {
        offset: q.offset,
        limit: q.limit.unwrap_or(usize::MAX),
    };
    let rows = run(&st, move |sys| Ok(sys.find_residents(&q.q, page))).await?;
    Ok(Json(rows).into_response())
}

async fn register_resident(State(st): State<AppState>, auth: Auth, Body(p): Body<NewResident>) -> ApiResult<Response> {
    let officer = auth.0;
    Ok(created(run(&st, move |sys| sys.register_resident(&officer, p)).await?))
}

async fn get_resident(State(st): State<AppState>, auth: Auth, P(id): P<String>) -> ApiResult<Response> {
    auth.require(Action::RegistryRead)?;
    let id = resident_id(&id)?;
    let p = run(&st, move |sys| sys.get_profile(&id)).await?;
    Ok(Json(p.resident).into_response())
}

async fn resident_history(State(st): State<AppState>, auth: Auth, P(id): P<String>) -> ApiResult<Response> {
    auth.require(Action::RegistryRead)?;
    let id = resident_id(&id)?;
    let p = run(&st, move |sys| sys.get_profile(&id)).await?;
    Ok(Json(p.transactions).into_response())
}

async fn import_residents(State(st): State<AppState>, auth: Auth, body: Bytes) -> ApiResult<Response> {
    let officer = auth.0;
    let ids = run(&st, move |sys| sys.import_residents(&officer, &body)).await?;
    Ok(created(json!({ "imported": ids })))
}

fn csv_response(name: &str, bytes: Vec<u8>) -> Response {
    (
        [
            (CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (CONTENT_DISPOSITION, format!("attachment; filename=\"{name}\"")),
        ],
        bytes,
    )
        .into_response()
}

async fn export_residents(State(st): State<AppState>, auth: Auth) -> ApiResult<Response> {
    auth.require(Action::RegistryWrite)?;
    let bytes = run(&st, |sys| sys.export_residents()).await?;
    Ok(csv_response("residents.csv", bytes))
}

// ---- casework ----

async fn list_cases(State(st): State<AppState>, auth: Auth) -> ApiResult<Response> {
    auth.require(Action::BlotterWrite)?;
    Ok(Json(run(&st, |sys| Ok(sys.cases())).await?).into_response())
}

async fn file_blotter(State(st): State<AppState>, auth: Auth, Body(c): Body<NewCase>) -> ApiResult<Response> {
    let officer = auth.0;
    Ok(created(run(&st, move |sys| sys.file_blotter(&officer, c)).await?))
}

async fn import_blotter(State(st): State<AppState>, auth: Auth, body: Bytes) -> ApiResult<Response> {
    let officer = auth.0;
    let numbers = run(&st, move |sys| sys.import_blotter(&officer, &body)).await?;
    Ok(created(json!({ "imported": numbers })))
}

async fn get_case(State(st): State<AppState>, auth: Auth, P(n): P<String>) -> ApiResult<Response> {
    auth.require(Action::BlotterWrite)?;
    Ok(Json(run(&st, move |sys| sys.case(&n)).await?).into_response())
}

#[derive(Deserialize)]
struct StatusChange {
    status: CaseStatus,
}

async fn update_case(
    State(st): State<AppState>,
    auth: Auth,
    P(n): P<String>,
    Body(req): Body<StatusChange>,
) -> ApiResult<Response> {
    let officer = auth.0;
    Ok(Json(run(&st, move |sys| sys.update_case_status(&officer, &n, req.status)).await?).into_response())
}

#[derive(Deserialize)]
struct ClearanceRequest {
    resident_id: ResidentId,
    #[serde(default = "default_kind")]
    kind: CertificateKind,
    purpose: String,
    #[serde(default, rename = "override")]
    override_check: bool,
}

fn default_kind() -> CertificateKind {
    CertificateKind::Clearance
}

async fn issue_clearance(State(st): State<AppState>, auth: Auth, Body(r): Body<ClearanceRequest>) -> ApiResult<Response> {
    let officer = auth.0;
    let cert = run(&st, move |sys| {
        sys.issue_clearance(&officer, &r.resident_id, r.kind, &r.purpose, r.override_check)
    })
    .await?;
    Ok(created(cert))
}

async fn clearance_history(State(st): State<AppState>, auth: Auth, P(id): P<String>) -> ApiResult<Response> {
    auth.require(Action::ClearanceRead)?;
    let id = resident_id(&id)?;
    Ok(Json(run(&st, move |sys| sys.clearance_history(&id)).await?).into_response())
}

async fn get_certificate(State(st): State<AppState>, auth: Auth, P(id): P<String>) -> ApiResult<Response> {
    auth.require(Action::ClearanceRead)?;
    Ok(Json(run(&st, move |sys| sys.certificate(&id)).await?).into_response())
}

async fn certificate_text(State(st): State<AppState>, auth: Auth, P(id): P<String>) -> ApiResult<Response> {
    auth.require(Action::ClearanceRead)?;
    let text = run(&st, move |sys| sys.render_certificate(&id)).await?;
    Ok(([(CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}

// ---- health ----

async fn list_children(State(st): State<AppState>, auth: Auth) -> ApiResult<Response> {
    auth.require(Action::HealthWrite)?;
    Ok(Json(run(&st, |sys| Ok(sys.children())).await?).into_response())
}

async fn register_child(State(st): State<AppState>, auth: Auth, Body(c): Body<NewChild>) -> ApiResult<Response> {
    let officer = auth.0;
    Ok(created(run(&st, move |sys| sys.register_child(&officer, c)).await?))
}

async fn record_health_case(State(st): State<AppState>, auth: Auth, Body(c): Body<NewHealthCase>) -> ApiResult<Response> {
    let officer = auth.0;
    Ok(created(run(&st, move |sys| sys.record_health_case(&officer, c)).await?))
}

#[derive(Deserialize)]
struct SummaryQuery {
    group_by: HealthGroupBy,
    #[serde(flatten)]
    window: WindowQuery,
}

async fn health_summary(State(st): State<AppState>, auth: Auth, Q(q): Q<SummaryQuery>) -> ApiResult<Response> {
    auth.require_any(&[Action::StatsRead, Action::HealthWrite])?;
    let w = q.window.range()?;
    Ok(Json(run(&st, move |sys| Ok(sys.health_summary(w.as_ref(), q.group_by))).await?).into_response())
}

// ---- geo ----

async fn geo_zones(State(st): State<AppState>, auth: Auth) -> ApiResult<Json<GeoDocument>> {
    auth.require(Action::GeoRead)?;
    Ok(Json(GeoDocument::zones(st.sys.zones())))
}

#[derive(Deserialize)]
struct MarkerQuery {
    kind: MarkerKind,
    #[serde(flatten)]
    window: WindowQuery,
}

async fn geo_markers(State(st): State<AppState>, auth: Auth, Q(q): Q<MarkerQuery>) -> ApiResult<Json<GeoDocument>> {
    auth.require(Action::GeoRead)?;
    let w = q.window.range()?;
    let markers = run(&st, move |sys| Ok(sys.build_markers(q.kind, w.as_ref()))).await?;
    Ok(Json(GeoDocument::markers(&markers)))
}

#[derive(Deserialize)]
struct HotspotQuery {
    kind: MarkerKind,
    #[serde(default = "default_cell")]
    cell: f64,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(flatten)]
    window: WindowQuery,
}

fn default_cell() -> f64 {
    100.0
}

fn default_k() -> usize {
    10
}

async fn geo_hotspots(State(st): State<AppState>, auth: Auth, Q(q): Q<HotspotQuery>) -> ApiResult<Json<GeoDocument>> {
    auth.require(Action::GeoRead)?;
    let w = q.window.range()?;
    let rep = run(&st, move |sys| sys.hotspots(q.kind, w.as_ref(), q.cell, q.k)).await?;
    Ok(Json(GeoDocument::hotspots(rep)))
}

// ---- analytics ----

#[derive(Deserialize)]
struct ChartQuery {
    group_by: ChartGroupBy,
    #[serde(flatten)]
    window: WindowQuery,
}

async fn analytics_chart(State(st): State<AppState>, auth: Auth, Q(q): Q<ChartQuery>) -> ApiResult<Response> {
    auth.require(Action::StatsRead)?;
    let w = q.window.range()?;
    Ok(Json(run(&st, move |sys| Ok(sys.crime_chart(w.as_ref(), q.group_by))).await?).into_response())
}

#[derive(Deserialize)]
struct TaskQuery {
    task: LikelihoodTask,
}

async fn analytics_report(State(st): State<AppState>, auth: Auth, Q(q): Q<TaskQuery>) -> ApiResult<Response> {
    auth.require(Action::StatsRead)?;
    Ok(Json(run(&st, move |sys| sys.likelihood_report(q.task)).await?).into_response())
}

#[derive(Deserialize)]
struct TrainRequest {
    task: LikelihoodTask,
    #[serde(default = "LearnerKind::naive_bayes")]
    learner: LearnerKind,
}

async fn analytics_train(State(st): State<AppState>, auth: Auth, Body(r): Body<TrainRequest>) -> ApiResult<Response> {
    auth.require(Action::AnalyticsTrain)?;
    Ok(Json(run(&st, move |sys| sys.train(r.task, r.learner)).await?).into_response())
}

#[derive(Deserialize)]
struct EvaluateRequest {
    task: LikelihoodTask,
    #[serde(default = "LearnerKind::naive_bayes")]
    learner: LearnerKind,
    #[serde(default = "default_folds")]
    k: usize,
    #[serde(default)]
    seed: u64,
}

fn default_folds() -> usize {
    5
}

async fn analytics_evaluate(State(st): State<AppState>, auth: Auth, Body(r): Body<EvaluateRequest>) -> ApiResult<Response> {
    auth.require(Action::AnalyticsTrain)?;
    Ok(Json(run(&st, move |sys| sys.evaluate(r.task, r.learner, r.k, r.seed)).await?).into_response())
}

#[derive(Deserialize)]
struct PredictRequest {
    task: LikelihoodTask,
    #[serde(default = "LearnerKind::naive_bayes")]
    learner: LearnerKind,
    /// Feature name to value; absent features are unknown.
    features: BTreeMap<String, String>,
}

async fn analytics_predict(State(st): State<AppState>, auth: Auth, Body(r): Body<PredictRequest>) -> ApiResult<Response> {
    auth.require(Action::AnalyticsTrain)?;
    let pred = run(&st, move |sys| {
        let model = sys.train(r.task, r.learner)?;
        let x = barangay_core::analytics::encode_named(model.schema(), &r.features)?;
        model.predict(&x)
    })
    .await?;
    Ok(Json(pred).into_response())
}

// ---- notify ----

#[derive(Deserialize)]
struct BroadcastRequest {
    message: String,
    #[serde(default = "all_residents")]
    audience_filter: AudienceFilter,
}

fn all_residents() -> AudienceFilter {
    AudienceFilter::All
}

async fn list_broadcasts(State(st): State<AppState>, auth: Auth) -> ApiResult<Response> {
    auth.require(Action::SmsBroadcast)?;
    Ok(Json(run(&st, |sys| Ok(sys.broadcasts())).await?).into_response())
}

async fn create_broadcast(State(st): State<AppState>, auth: Auth, Body(r): Body<BroadcastRequest>) -> ApiResult<Response> {
    let officer = auth.0;
    let job = run(&st, move |sys| sys.create_broadcast(&officer, &r.message, r.audience_filter)).await?;
    Ok(created(job))
}

async fn preview_broadcast(State(st): State<AppState>, auth: Auth, Body(r): Body<BroadcastRequest>) -> ApiResult<Response> {
    auth.require(Action::SmsBroadcast)?;
    let segments = segment_message(&r.message)?.len();
    let recipients = run(&st, move |sys| Ok(sys.resolve_audience(&r.audience_filter).len())).await?;
    Ok(Json(json!({ "segments": segments, "recipients": recipients })).into_response())
}

async fn get_broadcast(State(st): State<AppState>, auth: Auth, P(id): P<String>) -> ApiResult<Response> {
    auth.require(Action::SmsBroadcast)?;
    Ok(Json(run(&st, move |sys| sys.broadcast(&id)).await?).into_response())
}

#[derive(Deserialize)]
struct DispatchQuery {
    #[serde(default)]
    wait: bool,
}

/// Starts sending. Returns 202 at once unless `?wait=true`, in which case
/// it answers with the settled job.
async fn dispatch_broadcast(
    State(st): State<AppState>,
    auth: Auth,
    P(id): P<String>,
    Q(q): Q<DispatchQuery>,
) -> ApiResult<Response> {
    auth.require(Action::SmsBroadcast)?;
    let job = st.sys.broadcast(&id)?;
    if !st.sys.has_gateway() {
        return Err(Error::GatewayUnconfigured.into());
    }
    if q.wait {
        return Ok(Json(run(&st, move |sys| sys.dispatch(&id)).await?).into_response());
    }
    spawn_dispatch(st.sys.clone(), id);
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

/// Sends a job in the background; progress is visible through the job.
pub fn spawn_dispatch(sys: Arc<System>, job_id: String) {
    tokio::task::spawn_blocking(move || {
        if let Err(e) = sys.dispatch(&job_id) {
            tracing::error!(job = %job_id, error = %e, "dispatch stopped");
        }
    });
}

// ---- open data ----

async fn opendata_catalog(State(st): State<AppState>) -> Json<Value> {
    Json(json!(st.sys.list_datasets()))
}

async fn opendata_download(
    State(st): State<AppState>,
    P(file): P<String>,
    Q(w): Q<WindowQuery>,
) -> ApiResult<Response> {
    let name = file
        .strip_suffix(".csv")
        .ok_or_else(|| Error::not_found("dataset", &file))?;
    let dataset = DatasetId::parse(name)?;
    let window = w.range()?;
    let bytes = run(&st, move |sys| sys.export_dataset(dataset, window.as_ref())).await?;
    Ok(csv_response(&file, bytes))
}

async fn privacy_scan(State(st): State<AppState>, auth: Auth, body: Bytes) -> ApiResult<Response> {
    auth.require(Action::RegistryWrite)?;
    let v = run(&st, move |sys| sys.privacy_scan(&body)).await?;
    Ok(Json(json!({ "violations": v })).into_response())
}

async fn list_advisories(State(st): State<AppState>) -> Json<Value> {
    Json(json!(st.sys.advisories()))
}

#[derive(Deserialize)]
struct AdvisoryRequest {
    title: String,
    body: String,
    #[serde(default)]
    broadcast_to: Option<AudienceFilter>,
}

async fn publish_advisory(State(st): State<AppState>, auth: Auth, Body(r): Body<AdvisoryRequest>) -> ApiResult<Response> {
    let officer = auth.0;
    let (advisory, job) = run(&st, move |sys| sys.publish_advisory(&officer, &r.title, &r.body, r.broadcast_to)).await?;
    Ok(created(json!({ "advisory": advisory, "broadcast": job })))
}
