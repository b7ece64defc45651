//! JSON-over-HTTP read API over a loaded audit cache.
//!
//! Endpoints (GET unless noted):
//!
//! - `/api/health` — plain `ok`
//! - `/api/summary` — node, edge and label counts
//! - `/api/sensitivity` — sorted, paginated table; `sessionId` applies that
//!   session's rules
//! - `/api/perturbation/{node}` — full report, `k` defaults to
//!   `min(100, n - 1)`
//! - `/api/perturbation/{node}/influence` — influence graph filtered by
//!   `hopMin`, `hopMax` and `direction`
//! - `POST /api/session`, `POST /api/session/{id}/rules`,
//!   `DELETE /api/session/{id}`
//!
//! Every body is a pure function of the cache, the session's rules and the
//! query. Errors are `{"error": {"code", "param", "message"}}`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::constraints::{filter_table, ConstraintRule, RuleSet};
use crate::diagnosis::{build_influence_graph, diagnose_precomputed, filter_influence, Direction, Hop, InfluenceGraph, PerturbationReport};
use crate::graph::{DirectedGraph, GraphSummary, Label};
use crate::sensitivity::SensitivityRecord;
use crate::store::{AuditCache, StoreError};

pub const DEFAULT_TOP_K: usize = 100;
pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(3600);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub idle_timeout: Duration,
    /// Directory with the built UI, mounted at `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            static_dir: None,
        }
    }
}

/// Machine-readable API error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub param: Option<String>,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, param: Option<&str>, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.to_owned(),
            param: param.map(str::to_owned),
            message: message.into(),
        }
    }

    fn bad_param(param: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_parameter", Some(param), message)
    }

    fn unknown_node(param: &str, node: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_node", Some(param), format!("no node `{node}`"))
    }

    fn unknown_session(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "unknown_session",
            Some("sessionId"),
            format!("no session `{id}`"),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        #[derive(Serialize)]
        struct Envelope<'a> {
            error: &'a ApiError,
        }
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = serde_json::to_vec(&Envelope { error: &self }).expect("error serializes");
        (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SortKey {
    Rank,
    Si,
    SiPos,
    SiNeg,
    /// Positive plus negative mass on one label.
    PerLabel(Label),
    PerLabelPos(Label),
    PerLabelNeg(Label),
}

impl std::str::FromStr for SortKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let label = |rest: &str| {
            if rest.is_empty() {
                Err("missing label after `:`".to_owned())
            } else {
                Ok(Label::from(rest))
            }
        };
        match s {
            "rank" => Ok(SortKey::Rank),
            "si" => Ok(SortKey::Si),
            "siPos" => Ok(SortKey::SiPos),
            "siNeg" => Ok(SortKey::SiNeg),
            _ => match s.split_once(':') {
                Some(("perLabel", rest)) => label(rest).map(SortKey::PerLabel),
                Some(("perLabelPos", rest)) => label(rest).map(SortKey::PerLabelPos),
                Some(("perLabelNeg", rest)) => label(rest).map(SortKey::PerLabelNeg),
                _ => Err(format!("unknown sort key `{s}`")),
            },
        }
    }
}

impl SortKey {
    fn value(&self, r: &SensitivityRecord) -> u64 {
        let pos = |l: &Label| r.per_label_pos.get(l).copied().unwrap_or(0);
        let neg = |l: &Label| r.per_label_neg.get(l).copied().unwrap_or(0);
        match self {
            SortKey::Rank => u64::from(r.original_rank),
            SortKey::Si => r.si,
            SortKey::SiPos => r.si_pos,
            SortKey::SiNeg => r.si_neg,
            SortKey::PerLabel(l) => pos(l) + neg(l),
            SortKey::PerLabelPos(l) => pos(l),
            SortKey::PerLabelNeg(l) => neg(l),
        }
    }

    /// Ranks read best-first; every other column largest-first.
    pub fn default_order(&self) -> SortOrder {
        match self {
            SortKey::Rank => SortOrder::Asc,
            _ => SortOrder::Desc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitivityPage {
    /// Records left after rule filtering, before pagination.
    pub total: usize,
    pub offset: usize,
    pub limit: Option<usize>,
    pub records: Vec<SensitivityRecord>,
}

/// Filters the cached table by `rules`, sorts (ties by node id ascending)
/// and paginates.
pub fn query_sensitivity(
    cache: &AuditCache,
    rules: &RuleSet,
    sort: &SortKey,
    order: SortOrder,
    offset: usize,
    limit: Option<usize>,
) -> Result<SensitivityPage, crate::constraints::ConstraintError> {
    let mut records = filter_table(&cache.table, rules, cache)?.records;
    records.sort_by(|a, b| {
        let by_key = sort.value(a).cmp(&sort.value(b));
        let by_key = match order {
            SortOrder::Asc => by_key,
            SortOrder::Desc => by_key.reverse(),
        };
        by_key.then_with(|| a.node.cmp(&b.node))
    });
    let total = records.len();
    let records = records
        .into_iter()
        .skip(offset)
        .take(limit.unwrap_or(usize::MAX))
        .collect();
    Ok(SensitivityPage {
        total,
        offset,
        limit,
        records,
    })
}

struct Session {
    rules: Arc<RuleSet>,
    last_seen: Instant,
}

/// Shared, read-only audit plus per-session rule sets.
pub struct AppState {
    graph: DirectedGraph,
    cache: AuditCache,
    summary: GraphSummary,
    sessions: Mutex<HashMap<String, Session>>,
    config: ServiceConfig,
}

impl AppState {
    /// Refuses a cache that was not computed from `graph`.
    pub fn new(cache: AuditCache, graph: DirectedGraph, config: ServiceConfig) -> Result<Self, StoreError> {
        cache.verify_graph(&graph)?;
        Ok(Self {
            summary: graph.summary(),
            graph,
            cache,
            sessions: Mutex::new(HashMap::new()),
            config,
        })
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn cache(&self) -> &AuditCache {
        &self.cache
    }

    pub fn default_k(&self) -> usize {
        DEFAULT_TOP_K.min(self.graph.node_count().saturating_sub(1)).max(1)
    }

    fn with_sessions<T>(&self, f: impl FnOnce(&mut HashMap<String, Session>) -> T) -> T {
        let mut sessions = self.sessions.lock().expect("session lock poisoned");
        let timeout = self.config.idle_timeout;
        sessions.retain(|_, s| s.last_seen.elapsed() <= timeout);
        f(&mut sessions)
    }

    pub fn create_session(&self) -> String {
        let id = uuid::Uuid::new_v4().to_string();
        self.with_sessions(|s| {
            s.insert(
                id.clone(),
                Session {
                    rules: Arc::new(RuleSet::default()),
                    last_seen: Instant::now(),
                },
            )
        });
        id
    }

    pub fn session_rules(&self, id: &str) -> Option<Arc<RuleSet>> {
        self.with_sessions(|s| {
            s.get_mut(id).map(|session| {
                session.last_seen = Instant::now();
                Arc::clone(&session.rules)
            })
        })
    }

    /// Replaces a session's rules; returns false for unknown sessions.
    pub fn replace_rules(&self, id: &str, rules: RuleSet) -> bool {
        self.with_sessions(|s| match s.get_mut(id) {
            Some(session) => {
                session.rules = Arc::new(rules);
                session.last_seen = Instant::now();
                true
            }
            None => false,
        })
    }

    pub fn delete_session(&self, id: &str) -> bool {
        self.with_sessions(|s| s.remove(id).is_some())
    }

    pub fn report(&self, node: &str, k: usize) -> Result<PerturbationReport, ApiError> {
        let delta = self
            .cache
            .delta(node)
            .ok_or_else(|| ApiError::unknown_node("node", node))?;
        let max = self.graph.node_count() - 1;
        if k == 0 || k > max {
            return Err(ApiError::bad_param("k", format!("k must be in 1..={max}")));
        }
        diagnose_precomputed(
            &self.graph,
            &self.cache.positions,
            self.cache.config.mode,
            delta,
            k,
            &self.cache.fingerprint,
        )
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", None, e.to_string()))
    }

    pub fn influence(&self, node: &str, hop_min: u32, hop_max: Hop, direction: Direction) -> Result<InfluenceGraph, ApiError> {
        let delta = self
            .cache
            .delta(node)
            .ok_or_else(|| ApiError::unknown_node("node", node))?;
        let ig = build_influence_graph(&self.graph, delta)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", None, e.to_string()))?;
        filter_influence(&ig, hop_min, hop_max, direction).map_err(|e| ApiError::bad_param("hopMin", e.to_string()))
    }
}

fn json<T: Serialize>(status: StatusCode, value: &T) -> Response {
    let body = serde_json::to_vec(value).expect("response serializes");
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

type Params = Query<HashMap<String, String>>;

fn parse_param<T: std::str::FromStr>(params: &HashMap<String, String>, name: &str) -> Result<Option<T>, ApiError>
where
    T::Err: std::fmt::Display,
{
    params
        .get(name)
        .map(|raw| {
            raw.parse::<T>()
                .map_err(|e| ApiError::bad_param(name, format!("cannot parse `{raw}`: {e}")))
        })
        .transpose()
}

async fn health() -> &'static str {
    "ok"
}

async fn summary(State(state): State<Arc<AppState>>) -> Response {
    json(StatusCode::OK, &state.summary)
}

async fn sensitivity(State(state): State<Arc<AppState>>, Query(params): Params) -> Result<Response, ApiError> {
    let sort: SortKey = parse_param(&params, "sort")?.unwrap_or(SortKey::Rank);
    let order = match params.get("order").map(String::as_str) {
        None => sort.default_order(),
        Some("asc") => SortOrder::Asc,
        Some("desc") => SortOrder::Desc,
        Some(other) => return Err(ApiError::bad_param("order", format!("expected asc or desc, got `{other}`"))),
    };
    let offset = parse_param(&params, "offset")?.unwrap_or(0);
    let limit = parse_param(&params, "limit")?;
    let rules = match params.get("sessionId") {
        Some(id) => state.session_rules(id).ok_or_else(|| ApiError::unknown_session(id))?,
        None => Arc::new(RuleSet::default()),
    };
    let page = query_sensitivity(&state.cache, &rules, &sort, order, offset, limit)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "incomplete_cache", None, e.to_string()))?;
    Ok(json(StatusCode::OK, &page))
}

async fn perturbation(
    State(state): State<Arc<AppState>>,
    Path(node): Path<String>,
    Query(params): Params,
) -> Result<Response, ApiError> {
    let k = parse_param(&params, "k")?.unwrap_or_else(|| state.default_k());
    Ok(json(StatusCode::OK, &state.report(&node, k)?))
}

async fn influence(
    State(state): State<Arc<AppState>>,
    Path(node): Path<String>,
    Query(params): Params,
) -> Result<Response, ApiError> {
    let hop_min = parse_param(&params, "hopMin")?.unwrap_or(1);
    let hop_max = parse_param(&params, "hopMax")?.unwrap_or(Hop::Inf);
    let direction = parse_param(&params, "direction")?.unwrap_or_default();
    Ok(json(StatusCode::OK, &state.influence(&node, hop_min, hop_max, direction)?))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SessionCreated {
    session_id: String,
}

async fn create_session(State(state): State<Arc<AppState>>) -> Response {
    json(
        StatusCode::CREATED,
        &SessionCreated {
            session_id: state.create_session(),
        },
    )
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "camelCase")]
pub struct RulesApplied {
    pub session_id: String,
    pub rules: usize,
    pub retained: usize,
}

async fn replace_rules(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let rules: Vec<ConstraintRule> =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_param("rules", e.to_string()))?;
    for (i, rule) in rules.iter().enumerate() {
        if let Some(unknown) = rule.protected.iter().find(|p| !state.graph.contains(p.as_str())) {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "unknown_node",
                Some(&format!("rules[{i}].protected")),
                format!("no node `{unknown}`"),
            ));
        }
    }
    let count = rules.len();
    let rules = RuleSet::new(rules).map_err(|e| ApiError::bad_param("rules", e.to_string()))?;
    let retained = filter_table(&state.cache.table, &rules, &state.cache)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "incomplete_cache", None, e.to_string()))?
        .records
        .len();
    if !state.replace_rules(&id, rules) {
        return Err(ApiError::unknown_session(&id));
    }
    Ok(json(
        StatusCode::OK,
        &RulesApplied {
            session_id: id,
            rules: count,
            retained,
        },
    ))
}

async fn delete_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    if state.delete_session(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::unknown_session(&id))
    }
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", None, "no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/summary", get(summary))
        .route("/api/sensitivity", get(sensitivity))
        .route("/api/perturbation/{node}", get(perturbation))
        .route("/api/perturbation/{node}/influence", get(influence))
        .route("/api/session", post(create_session))
        .route("/api/session/{id}", axum::routing::delete(delete_session))
        .route("/api/session/{id}/rules", post(replace_rules))
        .route("/api/{*rest}", get(not_found).post(not_found));
    let app = match &state.config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(CorsLayer::permissive()).with_state(state)
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
