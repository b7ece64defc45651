//! Per-node sensitivity indices under single-node removal.
//!
//! For every node `v` the graph is re-ranked without `v`, each survivor's
//! position change `delta = rp - rp'` is recorded (positive means the
//! survivor moved up), and the L1 mass of those changes is split into
//! positive and negative parts, overall and per label.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::fingerprint;
use crate::graph::{DirectedGraph, GraphError, Label, NodeId};
use crate::ranking::{rank_indexed, RankingConfig, RankingError, RankingPositions};

/// How pre-removal positions are aligned with post-removal positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMode {
    /// Original ranking minus the removed node, re-densified to `1..n-1`.
    #[default]
    Compact,
    /// Original `1..n` positions kept as they are.
    Gap,
}

impl BaselineMode {
    /// Baseline position of a survivor originally at `position` when the
    /// removed node was originally at `removed_position`.
    pub fn align(self, position: u32, removed_position: u32) -> u32 {
        match self {
            BaselineMode::Compact if position > removed_position => position - 1,
            _ => position,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AuditConfig {
    pub ranking: RankingConfig,
    pub mode: BaselineMode,
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("ranking the original graph failed: {0}")]
    Original(#[source] RankingError),
    #[error("ranking the graph without `{node}` failed: {source}")]
    Perturbed {
        node: NodeId,
        #[source]
        source: RankingError,
    },
    #[error(transparent)]
    Config(RankingError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph needs at least 2 nodes for a removal audit, found {0}")]
    TooFewNodes(usize),
    #[error("could not build worker pool: {0}")]
    ThreadPool(String),
}

/// Position changes of all survivors when `removed` is deleted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaVector {
    pub removed: NodeId,
    pub deltas: BTreeMap<NodeId, i64>,
}

impl DeltaVector {
    pub fn get(&self, id: &str) -> Option<i64> {
        self.deltas.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Survivors whose position changed.
    pub fn influenced(&self) -> impl Iterator<Item = (&NodeId, i64)> {
        self.deltas.iter().filter(|(_, d)| **d != 0).map(|(k, &d)| (k, d))
    }

    pub fn sum(&self) -> i64 {
        self.deltas.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SensitivityRecord {
    pub node: NodeId,
    pub original_rank: u32,
    pub si: u64,
    pub si_pos: u64,
    pub si_neg: u64,
    pub per_label_pos: BTreeMap<Label, u64>,
    pub per_label_neg: BTreeMap<Label, u64>,
}

impl SensitivityRecord {
    /// Folds a delta vector into sensitivity indices. `labels` is the label
    /// universe; `label_of` resolves each survivor's label.
    pub fn from_deltas<'a>(
        original_rank: u32,
        delta: &DeltaVector,
        labels: impl IntoIterator<Item = &'a Label>,
        label_of: impl Fn(&str) -> &'a Label,
    ) -> Self {
        let zeroes: BTreeMap<Label, u64> = labels.into_iter().map(|l| (l.clone(), 0)).collect();
        let mut rec = SensitivityRecord {
            node: delta.removed.clone(),
            original_rank,
            si: 0,
            si_pos: 0,
            si_neg: 0,
            per_label_pos: zeroes.clone(),
            per_label_neg: zeroes,
        };
        for (id, &d) in &delta.deltas {
            let magnitude = d.unsigned_abs();
            rec.si += magnitude;
            let bucket = match d {
                d if d > 0 => &mut rec.per_label_pos,
                d if d < 0 => &mut rec.per_label_neg,
                _ => continue,
            };
            *bucket.entry(label_of(id.as_str()).clone()).or_insert(0) += magnitude;
        }
        rec.si_pos = rec.per_label_pos.values().sum();
        rec.si_neg = rec.per_label_neg.values().sum();
        rec
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitivityTable {
    pub fingerprint: String,
    /// One record per node, ascending by id.
    pub records: Vec<SensitivityRecord>,
}

impl SensitivityTable {
    pub fn get(&self, id: &str) -> Option<&SensitivityRecord> {
        self.records
            .binary_search_by(|r| r.node.as_str().cmp(id))
            .ok()
            .map(|i| &self.records[i])
    }
}

/// Iteration counts gathered during a sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepStats {
    pub original_iterations: usize,
    pub min_iterations: usize,
    pub max_iterations: usize,
    pub total_iterations: usize,
    pub perturbations: usize,
}

impl SweepStats {
    pub fn mean_iterations(&self) -> f64 {
        if self.perturbations == 0 {
            0.0
        } else {
            self.total_iterations as f64 / self.perturbations as f64
        }
    }
}

/// Everything produced by one full removal sweep.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub config: AuditConfig,
    pub fingerprint: String,
    pub original: RankingPositions,
    /// One delta vector per node, ascending by removed id.
    pub deltas: Vec<DeltaVector>,
    pub table: SensitivityTable,
    pub stats: SweepStats,
}

struct Perturbation {
    delta: DeltaVector,
    iterations: usize,
}

fn perturb(
    g: &DirectedGraph,
    cfg: &RankingConfig,
    mode: BaselineMode,
    original: &[u32],
    removed: usize,
) -> Result<Perturbation, AuditError> {
    let h = g.remove_index(removed);
    let after = rank_indexed(&h, cfg).map_err(|source| AuditError::Perturbed {
        node: g.id(removed).clone(),
        source,
    })?;
    let removed_pos = original[removed];
    let deltas = after
        .positions
        .iter()
        .enumerate()
        .map(|(j, &new_pos)| {
            let u = if j < removed { j } else { j + 1 };
            let before = mode.align(original[u], removed_pos);
            (g.id(u).clone(), i64::from(before) - i64::from(new_pos))
        })
        .collect();
    Ok(Perturbation {
        delta: DeltaVector {
            removed: g.id(removed).clone(),
            deltas,
        },
        iterations: after.iterations,
    })
}

fn check_inputs(g: &DirectedGraph, cfg: &RankingConfig) -> Result<(), AuditError> {
    if g.node_count() < 2 {
        return Err(AuditError::TooFewNodes(g.node_count()));
    }
    cfg.validate_for(g).map_err(AuditError::Config)
}

/// Position changes caused by removing `v`.
pub fn ranking_deltas(
    g: &DirectedGraph,
    cfg: &RankingConfig,
    mode: BaselineMode,
    v: &str,
) -> Result<DeltaVector, AuditError> {
    check_inputs(g, cfg)?;
    let removed = g
        .index_of(v)
        .ok_or_else(|| GraphError::NodeNotFound(v.to_owned()))?;
    let original = rank_indexed(g, cfg).map_err(AuditError::Original)?;
    Ok(perturb(g, cfg, mode, &original.positions, removed)?.delta)
}

/// Sensitivity table for every node, computed on the global worker pool.
pub fn sensitivity_initial_check(
    g: &DirectedGraph,
    cfg: &RankingConfig,
    mode: BaselineMode,
) -> Result<SensitivityTable, AuditError> {
    let config = AuditConfig {
        ranking: cfg.clone(),
        mode,
    };
    Ok(sweep(g, &config, None)?.table)
}

/// Runs the full removal sweep.
///
/// `threads` bounds the worker pool; `None` uses the global pool. Output is
/// identical for any thread count: per-node tasks share nothing mutable and
/// results are assembled in id order.
pub fn sweep(g: &DirectedGraph, config: &AuditConfig, threads: Option<usize>) -> Result<Sweep, AuditError> {
    check_inputs(g, &config.ranking)?;
    let cfg = &config.ranking;
    let original = rank_indexed(g, cfg).map_err(AuditError::Original)?;

    let run = || -> Vec<Result<Perturbation, AuditError>> {
        (0..g.node_count())
            .into_par_iter()
            .map(|v| perturb(g, cfg, config.mode, &original.positions, v))
            .collect()
    };
    let results = match threads {
        None => run(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| AuditError::ThreadPool(e.to_string()))?
            .install(run),
    };

    let mut stats = SweepStats {
        original_iterations: original.iterations,
        min_iterations: usize::MAX,
        ..SweepStats::default()
    };
    let mut deltas = Vec::with_capacity(results.len());
    for r in results {
        let p = r?;
        stats.min_iterations = stats.min_iterations.min(p.iterations);
        stats.max_iterations = stats.max_iterations.max(p.iterations);
        stats.total_iterations += p.iterations;
        stats.perturbations += 1;
        deltas.push(p.delta);
    }

    let universe = g.label_set();
    let label_of = |id: &str| g.label_of(id).expect("survivor belongs to graph");
    let records = deltas
        .iter()
        .enumerate()
        .map(|(v, d)| SensitivityRecord::from_deltas(original.positions[v], d, &universe, label_of))
        .collect();
    let fp = fingerprint(g, config);
    Ok(Sweep {
        config: config.clone(),
        original: RankingPositions::from_index_positions(g, &original.positions),
        table: SensitivityTable {
            fingerprint: fp.clone(),
            records,
        },
        fingerprint: fp,
        deltas,
        stats,
    })
}
