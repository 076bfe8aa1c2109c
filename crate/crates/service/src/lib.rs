//! JSON-over-HTTP front end for the `delaymid` core.
//!
//! Every endpoint takes a POST body, echoes `n`, `m` and `mode` in its
//! reply and answers
//!
//! * 200 with the result,
//! * 400 with an `InvalidRequest` envelope when the body does not parse,
//! * 422 with the core error envelope (`NoAdmissibleRoot` carries the
//!   compatibility equation in `details`),
//! * 504 with a `BudgetExceeded` envelope once the compute budget runs out.
//!
//! Request and response shapes are published in `schemas/api.schema.json`.

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use delaymid::mid_solver::FixedVariable;
use delaymid::rootfinder::{find_roots_with, FinderConfig};
use delaymid::sensitivity::delay_sweep_with;
use delaymid::simulator::{DEFAULT_STEPS_PER_DELAY, MAX_SERIALIZED_POINTS};
use delaymid::{
    classic_mid, control_oriented_mid, simulate, ControlSpec, Error, InitialCondition, MidDesign, MidMode,
    Quasipolynomial, Rectangle,
};
use log::{debug, warn};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

/// Simulations above this many samples are refused rather than allocated.
pub const MAX_SIMULATION_SAMPLES: f64 = 2e7;

/// Slack granted to a blocking job past its deadline before the request is
/// abandoned.
const DEADLINE_GRACE: Duration = Duration::from_millis(250);

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    /// Default per-request compute budget.
    pub budget_secs: f64,
    /// Allowed CORS origins; empty allows any origin.
    pub cors_origins: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1".into(),
            port: 8080,
            budget_secs: 30.0,
            cors_origins: Vec::new(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

struct AppState {
    budget: Duration,
}

pub fn app(config: &ServiceConfig) -> Router {
    let state = Arc::new(AppState {
        budget: Duration::from_secs_f64(config.budget_secs.max(1e-3)),
    });
    let origins = if config.cors_origins.is_empty() {
        AllowOrigin::from(Any)
    } else {
        let parsed: Vec<HeaderValue> = config
            .cors_origins
            .iter()
            .filter_map(|o| match HeaderValue::from_str(o) {
                Ok(v) => Some(v),
                Err(_) => {
                    warn!("ignoring malformed CORS origin {o:?}");
                    None
                }
            })
            .collect();
        AllowOrigin::list(parsed)
    };
    let cors = CorsLayer::new()
        .allow_origin(origins)
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/health", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/classic-mid", post(classic_handler))
        .route("/control-mid", post(control_handler))
        .route("/roots", post(roots_handler))
        .route("/simulate", post(simulate_handler))
        .route("/sensitivity", post(sensitivity_handler))
        .layer(cors)
        .with_state(state)
}

enum ApiError {
    BadRequest(String),
    Core(Error),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::BadRequest(message) => (
                StatusCode::BAD_REQUEST,
                json!({"error_name": "InvalidRequest", "message": message, "details": {}}),
            ),
            ApiError::Core(err) => {
                let status = match err {
                    Error::BudgetExceeded => StatusCode::GATEWAY_TIMEOUT,
                    _ => StatusCode::UNPROCESSABLE_ENTITY,
                };
                (status, serde_json::to_value(err.envelope()).expect("envelopes serialize"))
            }
            ApiError::Internal(message) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                json!({"error_name": "Internal", "message": message, "details": {}}),
            ),
        };
        (status, Json(body)).into_response()
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(e.to_string()))
}

impl AppState {
    fn budget_for(&self, budget_ms: Option<u64>) -> Result<Duration, ApiError> {
        match budget_ms {
            Some(0) => Err(ApiError::BadRequest("budget_ms must be positive".into())),
            Some(ms) => Ok(Duration::from_millis(ms)),
            None => Ok(self.budget),
        }
    }
}

/// Runs `job` on the blocking pool with a deadline; a job that overruns
/// its deadline plus a grace period is abandoned with `BudgetExceeded`.
async fn run_bounded<T, F>(budget: Duration, job: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(Instant) -> delaymid::Result<T> + Send + 'static,
{
    let deadline = Instant::now() + budget;
    let handle = tokio::task::spawn_blocking(move || job(deadline));
    match tokio::time::timeout(budget + DEADLINE_GRACE, handle).await {
        Ok(Ok(result)) => result.map_err(ApiError::Core),
        Ok(Err(join)) => Err(ApiError::Internal(join.to_string())),
        Err(_) => Err(ApiError::Core(Error::BudgetExceeded)),
    }
}

fn finder(deadline: Instant) -> FinderConfig {
    FinderConfig {
        deadline: Some(deadline),
        ..FinderConfig::default()
    }
}

/// `{n, m, mode}` followed by the fields of `payload`.
fn echoed(n: usize, m: usize, mode: Option<MidMode>, payload: Value) -> Json<Value> {
    let mut out = Map::new();
    out.insert("n".into(), json!(n));
    out.insert("m".into(), json!(m));
    out.insert("mode".into(), json!(mode));
    match payload {
        Value::Object(fields) => out.extend(fields),
        other => {
            out.insert("result".into(), other);
        }
    }
    Json(Value::Object(out))
}

fn design_reply(design: &MidDesign) -> Json<Value> {
    let qp = &design.qp;
    let mut payload = serde_json::to_value(design).expect("designs serialize");
    if let Value::Object(fields) = &mut payload {
        fields.insert("a".into(), json!(qp.a()));
        fields.insert("b".into(), json!(qp.b()));
        fields.insert("tau".into(), json!(qp.tau()));
    }
    echoed(qp.n(), qp.m(), Some(design.mode), payload)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassicRequest {
    n: usize,
    m: usize,
    s0: f64,
    tau: f64,
    #[serde(default)]
    budget_ms: Option<u64>,
}

async fn classic_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: ClassicRequest = parse(&body)?;
    debug!("classic-mid {req:?}");
    let budget = state.budget_for(req.budget_ms)?;
    let design = run_bounded(budget, move |_| classic_mid(req.n, req.m, req.s0, req.tau)).await?;
    Ok(design_reply(&design))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControlRequest {
    n: usize,
    m: usize,
    a: Vec<f64>,
    fixed: FixedVariable,
    value: f64,
    #[serde(default)]
    window: Option<(f64, f64)>,
    #[serde(default)]
    candidate: Option<usize>,
    #[serde(default)]
    budget_ms: Option<u64>,
}

async fn control_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: ControlRequest = parse(&body)?;
    debug!("control-mid {req:?}");
    let budget = state.budget_for(req.budget_ms)?;
    let spec = ControlSpec {
        n: req.n,
        m: req.m,
        a: req.a,
        fixed_variable: req.fixed,
        fixed_value: req.value,
        window: req.window,
        candidate: req.candidate,
    };
    let design = run_bounded(budget, move |_| control_oriented_mid(&spec)).await?;
    Ok(design_reply(&design))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RootsRequest {
    qp: Quasipolynomial,
    rect: Rectangle,
    #[serde(default)]
    mode: Option<MidMode>,
    #[serde(default)]
    budget_ms: Option<u64>,
}

async fn roots_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: RootsRequest = parse(&body)?;
    let budget = state.budget_for(req.budget_ms)?;
    let (n, m) = (req.qp.n(), req.qp.m());
    let set = run_bounded(budget, move |deadline| find_roots_with(&req.qp, &req.rect, &finder(deadline))).await?;
    Ok(echoed(n, m, req.mode, serde_json::to_value(set).expect("root sets serialize")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateRequest {
    qp: Quasipolynomial,
    ic: InitialCondition,
    #[serde(rename = "T")]
    horizon: f64,
    #[serde(default)]
    steps_per_delay: Option<usize>,
    #[serde(default)]
    mode: Option<MidMode>,
    #[serde(default)]
    budget_ms: Option<u64>,
}

async fn simulate_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: SimulateRequest = parse(&body)?;
    let budget = state.budget_for(req.budget_ms)?;
    let steps = req.steps_per_delay.unwrap_or(DEFAULT_STEPS_PER_DELAY);
    let samples = (req.horizon / req.qp.tau() + 1.0) * steps as f64;
    if samples > MAX_SIMULATION_SAMPLES {
        return Err(ApiError::Core(Error::InvalidInput(format!(
            "simulation would need {samples:.3e} samples, more than {MAX_SIMULATION_SAMPLES:e}"
        ))));
    }
    let (n, m) = (req.qp.n(), req.qp.m());
    let trajectory = run_bounded(budget, move |_| simulate(&req.qp, &req.ic, req.horizon, steps)).await?;
    let payload = serde_json::to_value(trajectory.decimated(MAX_SERIALIZED_POINTS)).expect("trajectories serialize");
    Ok(echoed(n, m, req.mode, payload))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SensitivityRequest {
    qp: Quasipolynomial,
    rect: Rectangle,
    epsilon: f64,
    #[serde(rename = "K")]
    k_max: usize,
    #[serde(default)]
    mode: Option<MidMode>,
    #[serde(default)]
    budget_ms: Option<u64>,
}

async fn sensitivity_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: SensitivityRequest = parse(&body)?;
    let budget = state.budget_for(req.budget_ms)?;
    let (n, m) = (req.qp.n(), req.qp.m());
    let sweep = run_bounded(budget, move |deadline| {
        delay_sweep_with(&req.qp, &req.rect, req.epsilon, req.k_max, &finder(deadline))
    })
    .await?;
    Ok(echoed(n, m, req.mode, serde_json::to_value(sweep).expect("sweeps serialize")))
}
