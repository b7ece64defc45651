//! Graph ranking methods and score-to-position conversion.
//!
//! [`rank`] is the single dispatch point: a new method only needs a
//! [`Method`] variant and a score routine returning one value per node
//! index.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DirectedGraph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    PageRank,
    Hits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HitsScoreKind {
    #[default]
    Authority,
    Hub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankingConfig {
    pub method: Method,
    pub damping: f64,
    /// Convergence threshold on the L1 change between iterations.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub hits_score: HitsScoreKind,
    /// PageRank teleportation distribution; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teleportation: Option<BTreeMap<NodeId, f64>>,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            method: Method::PageRank,
            damping: 0.85,
            tolerance: 1e-8,
            max_iterations: 1000,
            hits_score: HitsScoreKind::Authority,
            teleportation: None,
        }
    }
}

impl RankingConfig {
    pub fn pagerank() -> Self {
        Self::default()
    }

    pub fn hits() -> Self {
        Self {
            method: Method::Hits,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), RankingError> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(RankingError::InvalidConfig(format!(
                "damping factor {} outside (0, 1)",
                self.damping
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(RankingError::InvalidConfig(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(RankingError::InvalidConfig("max iterations must be at least 1".into()));
        }
        if let Some(t) = &self.teleportation {
            if let Some((id, w)) = t.iter().find(|(_, w)| !(**w >= 0.0 && w.is_finite())) {
                return Err(RankingError::InvalidConfig(format!(
                    "teleportation weight {w} for `{id}` is negative or not finite"
                )));
            }
            let sum: f64 = t.values().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(RankingError::InvalidConfig(format!(
                    "teleportation weights sum to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }

    /// Checks the config against the graph it will be applied to.
    pub fn validate_for(&self, g: &DirectedGraph) -> Result<(), RankingError> {
        self.validate()?;
        if let Some(t) = &self.teleportation {
            if let Some(id) = t.keys().find(|id| !g.contains(id.as_str())) {
                return Err(RankingError::InvalidConfig(format!(
                    "teleportation names unknown node `{id}`"
                )));
            }
        }
        Ok(())
    }

    /// Teleportation vector restricted to the nodes of `g` and renormalized.
    fn teleport_vector(&self, g: &DirectedGraph) -> Result<Vec<f64>, RankingError> {
        let n = g.node_count();
        match &self.teleportation {
            None => Ok(vec![1.0 / n as f64; n]),
            Some(t) => {
                let raw: Vec<f64> = g
                    .ids()
                    .iter()
                    .map(|id| t.get(id).copied().unwrap_or(0.0))
                    .collect();
                let sum: f64 = raw.iter().sum();
                if sum <= 0.0 {
                    return Err(RankingError::InvalidConfig(
                        "teleportation has no mass on the remaining nodes".into(),
                    ));
                }
                Ok(raw.into_iter().map(|w| w / sum).collect())
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankingError {
    #[error("invalid ranking config: {0}")]
    InvalidConfig(String),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("graph has no edges; HITS vectors are all zero")]
    Degenerate,
    #[error("score for `{0}` is NaN")]
    InvalidScore(String),
}

/// Per-node scores plus the iteration count that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingScores {
    pub scores: BTreeMap<NodeId, f64>,
    pub iterations: usize,
}

impl RankingScores {
    fn from_values(g: &DirectedGraph, values: &[f64], iterations: usize) -> Self {
        Self {
            scores: g.ids().iter().cloned().zip(values.iter().copied()).collect(),
            iterations,
        }
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.scores.get(id).copied()
    }
}

/// Dense 1-based ranking positions; 1 is best.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankingPositions(pub BTreeMap<NodeId, u32>);

impl RankingPositions {
    pub fn get(&self, id: &str) -> Option<u32> {
        self.0.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, u32)> {
        self.0.iter().map(|(k, &v)| (k, v))
    }

    pub(crate) fn from_index_positions(g: &DirectedGraph, positions: &[u32]) -> Self {
        Self(g.ids().iter().cloned().zip(positions.iter().copied()).collect())
    }
}

/// Converged iteration output, indexed like the graph's nodes.
#[derive(Debug, Clone)]
pub(crate) struct Converged {
    pub values: Vec<f64>,
    pub iterations: usize,
}

fn l1_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Power iteration for `r = cAr + (1-c)t`, where dangling nodes spread
/// their mass uniformly.
pub(crate) fn pagerank_values(g: &DirectedGraph, cfg: &RankingConfig) -> Result<Converged, RankingError> {
    let n = g.node_count();
    if n == 0 {
        return Err(RankingError::EmptyGraph);
    }
    let c = cfg.damping;
    let teleport = cfg.teleport_vector(g)?;
    let inv_out: Vec<f64> = (0..n)
        .map(|i| match g.out_degree(i) {
            0 => 0.0,
            d => 1.0 / d as f64,
        })
        .collect();
    let dangling: Vec<usize> = (0..n).filter(|&i| g.out_degree(i) == 0).collect();

    let mut rank = teleport.clone();
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iteration in 1..=cfg.max_iterations {
        let dangling_mass: f64 = dangling.iter().map(|&i| rank[i]).sum();
        let spread = dangling_mass / n as f64;
        for (v, slot) in next.iter_mut().enumerate() {
            let inflow: f64 = g
                .predecessors(v)
                .iter()
                .map(|&u| rank[u as usize] * inv_out[u as usize])
                .sum();
            *slot = c * (inflow + spread) + (1.0 - c) * teleport[v];
        }
        residual = l1_change(&next, &rank);
        std::mem::swap(&mut rank, &mut next);
        if residual < cfg.tolerance {
            return Ok(Converged {
                values: rank,
                iterations: iteration,
            });
        }
    }
    Err(RankingError::NoConvergence {
        iterations: cfg.max_iterations,
        residual,
    })
}

fn l2_normalize(v: &mut [f64]) -> Result<(), RankingError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(RankingError::Degenerate);
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(())
}

/// Authority and hub vectors after convergence.
#[derive(Debug, Clone)]
pub(crate) struct HitsVectors {
    pub authority: Vec<f64>,
    pub hub: Vec<f64>,
    pub iterations: usize,
}

/// Alternating authority/hub updates starting from all-ones, each vector
/// L2-normalized after its sweep.
pub(crate) fn hits_values(g: &DirectedGraph, cfg: &RankingConfig) -> Result<HitsVectors, RankingError> {
    let n = g.node_count();
    if n == 0 {
        return Err(RankingError::EmptyGraph);
    }
    if g.edge_count() == 0 {
        return Err(RankingError::Degenerate);
    }
    let mut auth = vec![1.0; n];
    let mut hub = vec![1.0; n];
    let mut residual = f64::INFINITY;
    for iteration in 1..=cfg.max_iterations {
        let mut next_auth: Vec<f64> = (0..n)
            .map(|v| g.predecessors(v).iter().map(|&w| hub[w as usize]).sum())
            .collect();
        l2_normalize(&mut next_auth)?;
        let mut next_hub: Vec<f64> = (0..n)
            .map(|v| g.successors(v).iter().map(|&w| next_auth[w as usize]).sum())
            .collect();
        l2_normalize(&mut next_hub)?;
        let auth_change = l1_change(&next_auth, &auth);
        let hub_change = l1_change(&next_hub, &hub);
        residual = auth_change.max(hub_change);
        auth = next_auth;
        hub = next_hub;
        if residual < cfg.tolerance {
            return Ok(HitsVectors {
                authority: auth,
                hub,
                iterations: iteration,
            });
        }
    }
    Err(RankingError::NoConvergence {
        iterations: cfg.max_iterations,
        residual,
    })
}

pub fn pagerank(g: &DirectedGraph, cfg: &RankingConfig) -> Result<RankingScores, RankingError> {
    cfg.validate()?;
    let out = pagerank_values(g, cfg)?;
    Ok(RankingScores::from_values(g, &out.values, out.iterations))
}

/// Returns `(authority, hub)`.
pub fn hits(g: &DirectedGraph, cfg: &RankingConfig) -> Result<(RankingScores, RankingScores), RankingError> {
    cfg.validate()?;
    let out = hits_values(g, cfg)?;
    Ok((
        RankingScores::from_values(g, &out.authority, out.iterations),
        RankingScores::from_values(g, &out.hub, out.iterations),
    ))
}

/// Scores for the configured method, indexed like the graph's nodes.
pub(crate) fn method_values(g: &DirectedGraph, cfg: &RankingConfig) -> Result<Converged, RankingError> {
    match cfg.method {
        Method::PageRank => pagerank_values(g, cfg),
        Method::Hits => {
            let h = hits_values(g, cfg)?;
            let values = match cfg.hits_score {
                HitsScoreKind::Authority => h.authority,
                HitsScoreKind::Hub => h.hub,
            };
            Ok(Converged {
                values,
                iterations: h.iterations,
            })
        }
    }
}

/// Positions for scores listed in ascending-id order: highest score first,
/// exact ties resolved by the earlier id.
pub(crate) fn positions_from_values(values: &[f64]) -> Result<Vec<u32>, usize> {
    if let Some(bad) = values.iter().position(|v| v.is_nan()) {
        return Err(bad);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut positions = vec![0u32; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        positions[i] = pos as u32 + 1;
    }
    Ok(positions)
}

pub fn scores_to_positions(s: &RankingScores) -> Result<RankingPositions, RankingError> {
    let values: Vec<f64> = s.scores.values().copied().collect();
    let positions = positions_from_values(&values).map_err(|bad| {
        RankingError::InvalidScore(s.scores.keys().nth(bad).map(|k| k.to_string()).unwrap_or_default())
    })?;
    Ok(RankingPositions(
        s.scores.keys().cloned().zip(positions).collect(),
    ))
}

/// Positions plus the iteration count of the underlying method.
#[derive(Debug, Clone)]
pub(crate) struct IndexRanking {
    pub positions: Vec<u32>,
    pub iterations: usize,
}

pub(crate) fn rank_indexed(g: &DirectedGraph, cfg: &RankingConfig) -> Result<IndexRanking, RankingError> {
    let out = method_values(g, cfg)?;
    let positions = positions_from_values(&out.values)
        .map_err(|bad| RankingError::InvalidScore(g.id(bad).to_string()))?;
    Ok(IndexRanking {
        positions,
        iterations: out.iterations,
    })
}

/// Ranks every node of `g` with the configured method.
pub fn rank(g: &DirectedGraph, cfg: &RankingConfig) -> Result<RankingPositions, RankingError> {
    cfg.validate()?;
    let r = rank_indexed(g, cfg)?;
    Ok(RankingPositions::from_index_positions(g, &r.positions))
}
