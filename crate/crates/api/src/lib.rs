//! HTTP facade over `settle-core`.
//!
//! Every route lives under `/v1` and speaks JSON. Scenario documents use the
//! same layout as scenario files. Computation endpoints accept exactly one
//! scenario source: a stored `id`, an inline `document`, or a `preset` name.
//! Numbers in responses are the library's `f64` values, serialized without
//! any rounding.

pub mod error;
pub mod store;

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use settle_core::engine::{
    compare_alternate, evaluate_point, simulate, AlternateComparison, SimulationTrace,
};
use settle_core::io::{ScenarioDocument, SimulationOverrides};
use settle_core::model::{AlternateSupplierOffer, Decision};
use settle_core::optimizer::{optimize_at, SolveReport};
use settle_core::presets::{load_preset, preset_names, PresetError};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use error::{ApiError, ErrorBody};
pub use store::SessionStore;

/// Largest trace a single request may ask for.
pub const MAX_STEPS: usize = 10_000;

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
}

impl AppState {
    pub fn new(store: SessionStore) -> Self {
        AppState {
            store: Arc::new(store),
        }
    }
}

impl Default for AppState {
    fn default() -> Self {
        AppState::new(SessionStore::in_memory())
    }
}

/// Build the service. `cors_origin` restricts cross-origin access to one
/// origin; `None` allows any.
pub fn router(state: AppState, cors_origin: Option<HeaderValue>) -> Router {
    let cors = CorsLayer::new()
        .allow_methods(Any)
        .allow_headers(Any)
        .allow_origin(match cors_origin {
            Some(origin) => AllowOrigin::exact(origin),
            None => AllowOrigin::any(),
        });
    let v1 = Router::new()
        .route("/scenarios", post(create_scenario))
        .route(
            "/scenarios/{id}",
            get(get_scenario).put(put_scenario).delete(delete_scenario),
        )
        .route("/presets", get(list_presets))
        .route("/presets/{name}", get(get_preset))
        .route("/optimize", post(optimize))
        .route("/simulate", post(simulate_route))
        .route("/compare", post(compare))
        .with_state(state);
    Router::new().nest("/v1", v1).layer(cors)
}

/// Serve until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => ApiError::request("request_shape", e.to_string()),
        _ => ApiError::bad_json(e.to_string()),
    })
}

fn parse_document(body: &Bytes) -> ApiResult<ScenarioDocument> {
    let value: serde_json::Value =
        serde_json::from_slice(body).map_err(|e| ApiError::bad_json(e.to_string()))?;
    Ok(ScenarioDocument::from_json(value)?)
}

fn io_error(e: std::io::Error) -> ApiError {
    ApiError::internal(format!("scenario store: {e}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Revision {
    pub id: String,
    pub revision: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StoredScenario {
    pub id: String,
    pub revision: u64,
    pub document: ScenarioDocument,
}

async fn create_scenario(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let doc = parse_document(&body)?;
    let (id, revision) = state.store.create(doc).map_err(io_error)?;
    Ok((StatusCode::CREATED, Json(Revision { id, revision })).into_response())
}

#[derive(Debug, Deserialize)]
struct PutQuery {
    /// Optimistic concurrency: only write if the stored revision matches.
    revision: Option<u64>,
}

async fn put_scenario(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<PutQuery>,
    body: Bytes,
) -> ApiResult<Json<Revision>> {
    if state.store.get(&id).is_none() {
        return Err(ApiError::not_found(format!("no scenario `{id}`")));
    }
    let doc = parse_document(&body)?;
    match state.store.update(&id, doc, q.revision).map_err(io_error)? {
        Ok(revision) => Ok(Json(Revision { id, revision })),
        Err(store::StoreError::NotFound) => Err(ApiError::not_found(format!("no scenario `{id}`"))),
        Err(store::StoreError::RevisionMismatch { current }) => Err(ApiError::conflict(format!(
            "scenario `{id}` is at revision {current}"
        ))),
    }
}

async fn get_scenario(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<StoredScenario>> {
    let entry = state
        .store
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("no scenario `{id}`")))?;
    Ok(Json(StoredScenario {
        id,
        revision: entry.revision,
        document: entry.document,
    }))
}

async fn delete_scenario(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<StatusCode> {
    if state.store.delete(&id).map_err(io_error)? {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found(format!("no scenario `{id}`")))
    }
}

async fn list_presets() -> Json<Vec<&'static str>> {
    Json(preset_names())
}

async fn get_preset(Path(name): Path<String>) -> ApiResult<Json<ScenarioDocument>> {
    Ok(Json(resolve_preset(&name)?))
}

fn resolve_preset(name: &str) -> ApiResult<ScenarioDocument> {
    load_preset(name).map_err(|e| match e {
        PresetError::Unknown(_) => ApiError::not_found(e.to_string()),
        PresetError::Parse { source, .. } => source.into(),
        PresetError::Io { .. } => ApiError::internal(e.to_string()),
    })
}

/// Where a computation request takes its scenario from.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct Source {
    pub id: Option<String>,
    pub document: Option<serde_json::Value>,
    pub preset: Option<String>,
}

impl Source {
    fn resolve(self, state: &AppState) -> ApiResult<ScenarioDocument> {
        match (self.id, self.document, self.preset) {
            (Some(id), None, None) => state
                .store
                .get(&id)
                .map(|e| e.document)
                .ok_or_else(|| ApiError::not_found(format!("no scenario `{id}`"))),
            (None, Some(doc), None) => Ok(ScenarioDocument::from_json(doc)?),
            (None, None, Some(name)) => resolve_preset(&name),
            _ => Err(ApiError::request(
                "exactly_one_source",
                "give exactly one of `id`, `document` or `preset`",
            )),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizeRequest {
    id: Option<String>,
    document: Option<serde_json::Value>,
    preset: Option<String>,
    t: f64,
}

async fn optimize(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<SolveReport>> {
    let req: OptimizeRequest = parse_body(&body)?;
    let doc = Source {
        id: req.id,
        document: req.document,
        preset: req.preset,
    }
    .resolve(&state)?;
    Ok(Json(optimize_at(&doc.scenario, req.t)?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateRequest {
    id: Option<String>,
    document: Option<serde_json::Value>,
    preset: Option<String>,
    t_max: Option<f64>,
    steps: Option<usize>,
    alternate: Option<AlternateSupplierOffer>,
}

impl SimulateRequest {
    fn run(
        self,
        state: &AppState,
    ) -> ApiResult<(
        ScenarioDocument,
        SimulationTrace,
        Option<AlternateSupplierOffer>,
    )> {
        let doc = Source {
            id: self.id,
            document: self.document,
            preset: self.preset,
        }
        .resolve(state)?;
        let overrides = SimulationOverrides {
            t_max: self.t_max,
            steps: self.steps,
        };
        let cfg = overrides.apply(doc.simulation_config());
        if cfg.steps > MAX_STEPS {
            return Err(ApiError::request(
                "simulation_steps_max",
                format!("steps must be at most {MAX_STEPS}, got {}", cfg.steps),
            ));
        }
        let trace = simulate(&doc.scenario, &cfg)?;
        Ok((doc, trace, self.alternate))
    }
}

async fn simulate_route(
    State(state): State<AppState>,
    body: Bytes,
) -> ApiResult<Json<SimulationTrace>> {
    let req: SimulateRequest = parse_body(&body)?;
    if req.alternate.is_some() {
        return Err(ApiError::request(
            "request_shape",
            "`alternate` belongs to /v1/compare",
        ));
    }
    let (_, trace, _) = req.run(&state)?;
    Ok(Json(trace))
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareResponse {
    /// Comparison at the settlement, or at the end of the trace if the
    /// parties never settle.
    #[serde(flatten)]
    pub comparison: AlternateComparison,
    pub settled: bool,
    pub decision: Decision,
}

async fn compare(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<CompareResponse>> {
    let req: SimulateRequest = parse_body(&body)?;
    let (doc, trace, alternate) = req.run(&state)?;
    let offer = alternate.or(doc.alternate_offer).ok_or_else(|| {
        ApiError::request(
            "alternate_offer_present",
            "no `alternate` in the request and none in the scenario",
        )
    })?;
    let at = match &trace.settlement {
        Some(ev) => evaluate_point(&doc.scenario, ev.t_star)?,
        None => trace
            .points
            .last()
            .cloned()
            .ok_or_else(|| ApiError::internal("empty trace"))?,
    };
    let comparison = compare_alternate(&doc.scenario, &trace, &at, &offer)?;
    Ok(Json(CompareResponse {
        decision: comparison.outcome.decision,
        settled: trace.settlement.is_some(),
        comparison,
    }))
}
