//! C ABI over the `rankaudit` library.
//!
//! Every fallible function returns an [`RaStatus`] and writes its result
//! through an out-pointer. On failure a message is kept per thread and can be
//! read with [`ra_last_error`]. Strings handed out by the library must be
//! released with [`ra_string_free`]; graphs and audits with their own `_free`
//! functions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rankaudit::diagnosis::{diagnose_precomputed, DiagnosisError};
use rankaudit::graph::{parse_graph, DirectedGraph, GraphError, ParseOptions};
use rankaudit::ranking::{HitsScoreKind, Method, RankingConfig, RankingError};
use rankaudit::sensitivity::{sweep, AuditConfig, AuditError, BaselineMode};
use rankaudit::store::{read_cache_path, write_cache_path, AuditCache, StoreError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    NotFound = 5,
    RankingFailed = 6,
    Io = 7,
    CorruptCache = 8,
    FingerprintMismatch = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaMethod {
    PageRank = 0,
    Hits = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaHitsScore {
    Authority = 0,
    Hub = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaBaselineMode {
    Compact = 0,
    Gap = 1,
}

/// Ranking and baseline settings; fill with [`ra_config_default`] first.
/// `method`, `hits_score` and `mode` hold [`RaMethod`], [`RaHitsScore`] and
/// [`RaBaselineMode`] values; anything else is rejected.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RaConfig {
    pub method: u32,
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: u32,
    pub hits_score: u32,
    pub mode: u32,
}

/// Sensitivity indices of one removal.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RaRecord {
    pub original_rank: u32,
    pub si: u64,
    pub si_pos: u64,
    pub si_neg: u64,
}

/// Parsed labeled graph.
pub struct RaGraph {
    graph: DirectedGraph,
}

/// Completed audit together with the graph it was computed on.
pub struct RaAudit {
    graph: DirectedGraph,
    cache: AuditCache,
}

struct Failure {
    status: RaStatus,
    message: String,
}

impl Failure {
    fn new(status: RaStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        let status = match e {
            GraphError::NodeNotFound(_) => RaStatus::NotFound,
            _ => RaStatus::ParseError,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<RankingError> for Failure {
    fn from(e: RankingError) -> Self {
        let status = match e {
            RankingError::InvalidConfig(_) => RaStatus::InvalidArgument,
            _ => RaStatus::RankingFailed,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<AuditError> for Failure {
    fn from(e: AuditError) -> Self {
        match e {
            AuditError::Config(inner) => inner.into(),
            AuditError::Graph(inner) => inner.into(),
            AuditError::TooFewNodes(_) => Failure::new(RaStatus::InvalidArgument, e.to_string()),
            other => Failure::new(RaStatus::RankingFailed, other.to_string()),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::Io(_) => RaStatus::Io,
            StoreError::FingerprintMismatch { .. } => RaStatus::FingerprintMismatch,
            _ => RaStatus::CorruptCache,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<DiagnosisError> for Failure {
    fn from(e: DiagnosisError) -> Self {
        match e {
            DiagnosisError::Graph(inner) => inner.into(),
            DiagnosisError::Audit(inner) => inner.into(),
            DiagnosisError::KOutOfRange { .. } | DiagnosisError::InvalidHopRange { .. } => {
                Failure::new(RaStatus::InvalidArgument, e.to_string())
            }
            DiagnosisError::MissingPosition(_) => Failure::new(RaStatus::NotFound, e.to_string()),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RaStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(_) => {
            set_last_error("internal panic");
            RaStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::new(RaStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(RaStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(RaStatus::InvalidArgument, "string contains a nul byte"))
}

fn audit_config(c: &RaConfig) -> Result<AuditConfig, Failure> {
    let bad = |field: &str, v: u32| Failure::new(RaStatus::InvalidArgument, format!("unknown {field} {v}"));
    let method = match c.method {
        m if m == RaMethod::PageRank as u32 => Method::PageRank,
        m if m == RaMethod::Hits as u32 => Method::Hits,
        m => return Err(bad("method", m)),
    };
    let hits_score = match c.hits_score {
        h if h == RaHitsScore::Authority as u32 => HitsScoreKind::Authority,
        h if h == RaHitsScore::Hub as u32 => HitsScoreKind::Hub,
        h => return Err(bad("hits_score", h)),
    };
    let mode = match c.mode {
        m if m == RaBaselineMode::Compact as u32 => BaselineMode::Compact,
        m if m == RaBaselineMode::Gap as u32 => BaselineMode::Gap,
        m => return Err(bad("mode", m)),
    };
    Ok(AuditConfig {
        ranking: RankingConfig {
            method,
            damping: c.damping,
            tolerance: c.tolerance,
            max_iterations: c.max_iterations as usize,
            hits_score,
            teleportation: None,
        },
        mode,
    })
}

/// Message describing the last failure on this thread, or NULL. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ra_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ra_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses edge text (`source,target` rows) and optional label text
/// (`node,label` rows; NULL for none).
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_graph_parse(
    edges: *const c_char,
    labels: *const c_char,
    header: bool,
    out: *mut *mut RaGraph,
) -> RaStatus {
    guard(|| {
        let edges = str_arg(edges, "edges")?;
        let labels = if labels.is_null() { "" } else { str_arg(labels, "labels")? };
        let parsed = parse_graph(edges, labels, ParseOptions { header })?;
        let handle = Box::into_raw(Box::new(RaGraph { graph: parsed.graph }));
        put(out, handle, "out").inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// # Safety
/// `g` must come from [`ra_graph_parse`] and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ra_graph_free(g: *mut RaGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live graph handle; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_graph_counts(g: *const RaGraph, nodes: *mut usize, edges: *mut usize) -> RaStatus {
    guard(|| {
        let g = &ref_arg(g, "graph")?.graph;
        put(nodes, g.node_count(), "nodes")?;
        put(edges, g.edge_count(), "edges")
    })
}

/// In- and out-degree of `node`.
///
/// # Safety
/// `g` must be a live graph handle, `node` NUL-terminated, out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn ra_graph_degree(
    g: *const RaGraph,
    node: *const c_char,
    in_degree: *mut usize,
    out_degree: *mut usize,
) -> RaStatus {
    guard(|| {
        let g = &ref_arg(g, "graph")?.graph;
        let d = g.degree(str_arg(node, "node")?)?;
        put(in_degree, d.in_degree, "in_degree")?;
        put(out_degree, d.out_degree, "out_degree")
    })
}

/// Fills `out` with PageRank, damping 0.85, tolerance 1e-8, 1000 iterations,
/// HITS authority scores and the compact baseline.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_config_default(out: *mut RaConfig) -> RaStatus {
    guard(|| {
        let d = AuditConfig::default();
        let cfg = RaConfig {
            method: RaMethod::PageRank as u32,
            damping: d.ranking.damping,
            tolerance: d.ranking.tolerance,
            max_iterations: d.ranking.max_iterations as u32,
            hits_score: RaHitsScore::Authority as u32,
            mode: RaBaselineMode::Compact as u32,
        };
        put(out, cfg, "out")
    })
}

/// Runs the full removal sweep. `threads == 0` uses every available core.
/// The audit keeps its own copy of the graph.
///
/// # Safety
/// `g` and `cfg` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_audit_run(
    g: *const RaGraph,
    cfg: *const RaConfig,
    threads: u32,
    out: *mut *mut RaAudit,
) -> RaStatus {
    guard(|| {
        let graph = &ref_arg(g, "graph")?.graph;
        let config = audit_config(ref_arg(cfg, "config")?)?;
        let threads = (threads > 0).then_some(threads as usize);
        let cache = AuditCache::from(sweep(graph, &config, threads)?);
        let handle = Box::into_raw(Box::new(RaAudit {
            graph: graph.clone(),
            cache,
        }));
        put(out, handle, "out").inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// Loads a cache file (gzip when the path ends in `.gz`) and checks that it
/// was computed from `g`.
///
/// # Safety
/// `path` must be NUL-terminated, `g` a live graph handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ra_audit_read(path: *const c_char, g: *const RaGraph, out: *mut *mut RaAudit) -> RaStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let graph = &ref_arg(g, "graph")?.graph;
        let cache = read_cache_path(Path::new(path))?;
        cache.verify_graph(graph)?;
        let handle = Box::into_raw(Box::new(RaAudit {
            graph: graph.clone(),
            cache,
        }));
        put(out, handle, "out").inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// # Safety
/// `a` must be a live audit handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ra_audit_write(a: *const RaAudit, path: *const c_char) -> RaStatus {
    guard(|| {
        let a = ref_arg(a, "audit")?;
        write_cache_path(&a.cache, Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `a` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ra_audit_free(a: *mut RaAudit) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Serialized cache document; free with [`ra_string_free`].
///
/// # Safety
/// `a` must be a live audit handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_audit_to_json(a: *const RaAudit, out: *mut *mut c_char) -> RaStatus {
    guard(|| {
        let a = ref_arg(a, "audit")?;
        let text = String::from_utf8(a.cache.to_bytes()).expect("cache JSON is UTF-8");
        let s = c_string(text.trim_end().to_owned())?;
        put(out, s, "out").inspect_err(|_| drop(CString::from_raw(s)))
    })
}

/// Hex fingerprint of graph and configuration; free with [`ra_string_free`].
///
/// # Safety
/// `a` must be a live audit handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_audit_fingerprint(a: *const RaAudit, out: *mut *mut c_char) -> RaStatus {
    guard(|| {
        let a = ref_arg(a, "audit")?;
        let s = c_string(a.cache.fingerprint.clone())?;
        put(out, s, "out").inspect_err(|_| drop(CString::from_raw(s)))
    })
}

/// Sensitivity indices for removing `node`.
///
/// # Safety
/// `a` must be a live audit handle, `node` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ra_audit_record(a: *const RaAudit, node: *const c_char, out: *mut RaRecord) -> RaStatus {
    guard(|| {
        let a = ref_arg(a, "audit")?;
        let node = str_arg(node, "node")?;
        let r = a
            .cache
            .table
            .get(node)
            .ok_or_else(|| Failure::new(RaStatus::NotFound, format!("no node `{node}`")))?;
        let rec = RaRecord {
            original_rank: r.original_rank,
            si: r.si,
            si_pos: r.si_pos,
            si_neg: r.si_neg,
        };
        put(out, rec, "out")
    })
}

/// Position change of `node` when `removed` is deleted; positive means it
/// moved up.
///
/// # Safety
/// `a` must be a live audit handle, strings NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ra_audit_delta(
    a: *const RaAudit,
    removed: *const c_char,
    node: *const c_char,
    out: *mut i64,
) -> RaStatus {
    guard(|| {
        let a = ref_arg(a, "audit")?;
        let (removed, node) = (str_arg(removed, "removed")?, str_arg(node, "node")?);
        let d = a
            .cache
            .delta(removed)
            .ok_or_else(|| Failure::new(RaStatus::NotFound, format!("no node `{removed}`")))?;
        let v = d
            .get(node)
            .ok_or_else(|| Failure::new(RaStatus::NotFound, format!("`{node}` is not a survivor of removing `{removed}`")))?;
        put(out, v, "out")
    })
}

/// Full diagnosis of removing `node` as JSON. `k == 0` picks
/// `min(100, n - 1)`. Free the result with [`ra_string_free`].
///
/// # Safety
/// `a` must be a live audit handle, `node` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ra_audit_report_json(
    a: *const RaAudit,
    node: *const c_char,
    k: u32,
    out: *mut *mut c_char,
) -> RaStatus {
    guard(|| {
        let a = ref_arg(a, "audit")?;
        let node = str_arg(node, "node")?;
        let d = a
            .cache
            .delta(node)
            .ok_or_else(|| Failure::new(RaStatus::NotFound, format!("no node `{node}`")))?;
        let k = match k {
            0 => 100.min(a.graph.node_count().saturating_sub(1)).max(1),
            k => k as usize,
        };
        let report = diagnose_precomputed(&a.graph, &a.cache.positions, a.cache.config.mode, d, k, &a.cache.fingerprint)?;
        let json = serde_json::to_string(&report).expect("report serializes");
        let s = c_string(json)?;
        put(out, s, "out").inspect_err(|_| drop(CString::from_raw(s)))
    })
}
