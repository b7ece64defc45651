//! What-if diagnosis of a single node removal.
//!
//! A [`PerturbationReport`] bundles the eight overview metrics, the
//! per-survivor change rows, the top-k label proportions before and after,
//! and the influence graph.
//!
//! Hop distances come from a breadth-first search out of the removed node
//! that only steps onto influenced nodes. A node whose shortest directed path
//! from the removed node passes through an uninfluenced node can therefore get
//! a larger hop, or `inf`, than its plain geodesic distance.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::graph::{DirectedGraph, GraphError, Label, NodeId};
use crate::ranking::{rank_indexed, RankingConfig, RankingPositions};
use crate::sensitivity::{ranking_deltas, AuditConfig, AuditError, BaselineMode, DeltaVector};

/// Deepest hop ring drawn individually; deeper nodes share ring 10 ("≥ 10").
pub const MAX_HOP_RING: u32 = 9;

#[derive(Debug, Error)]
pub enum DiagnosisError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error("k = {k} outside 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("invalid hop range [{min}, {max}]")]
    InvalidHopRange { min: u32, max: Hop },
    #[error("`{0}` has no baseline position")]
    MissingPosition(String),
}

/// Influence distance: finite BFS depth or unreachable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Hop {
    Finite(u32),
    Inf,
}

impl Hop {
    /// Ring used for drawing: hops past [`MAX_HOP_RING`] collapse into one band.
    pub fn ring(self) -> Hop {
        match self {
            Hop::Finite(h) if h > MAX_HOP_RING => Hop::Finite(MAX_HOP_RING + 1),
            other => other,
        }
    }
}

impl fmt::Display for Hop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hop::Finite(h) => write!(f, "{h}"),
            Hop::Inf => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Hop {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("inf") {
            Ok(Hop::Inf)
        } else {
            s.parse().map(Hop::Finite).map_err(|_| format!("bad hop `{s}`"))
        }
    }
}

impl Serialize for Hop {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Hop::Finite(h) => s.serialize_u32(*h),
            Hop::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Hop {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct HopVisitor;
        impl Visitor<'_> for HopVisitor {
            type Value = Hop;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a non-negative integer or \"inf\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Hop, E> {
                u32::try_from(v).map(Hop::Finite).map_err(E::custom)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Hop, E> {
                match v {
                    "inf" => Ok(Hop::Inf),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(HopVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PerturbationOverview {
    pub influenced_count: usize,
    pub increased_count: usize,
    pub decreased_count: usize,
    pub max_increase: u64,
    pub max_decrease: u64,
    pub median_increase: f64,
    pub median_decrease: f64,
    pub removed_degree: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankingChangeRecord {
    pub node: NodeId,
    pub previous_rank: u32,
    pub perturbed_rank: u32,
    pub delta: i64,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKProportions {
    pub k: usize,
    pub before: BTreeMap<Label, f64>,
    pub after: BTreeMap<Label, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Traversal,
    InfAttach,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfluenceNode {
    pub node: NodeId,
    pub hop: Hop,
    pub ring: Hop,
    pub delta: i64,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfluenceEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub kind: EdgeKind,
}

/// Removed node (hop 0) plus every influenced survivor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfluenceGraph {
    pub removed: NodeId,
    pub nodes: Vec<InfluenceNode>,
    pub edges: Vec<InfluenceEdge>,
}

impl InfluenceGraph {
    pub fn hop_of(&self, id: &str) -> Option<Hop> {
        self.nodes.iter().find(|n| n.node.as_str() == id).map(|n| n.hop)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    All,
    Increased,
    Decreased,
}

impl Direction {
    fn admits(self, delta: i64) -> bool {
        match self {
            Direction::All => true,
            Direction::Increased => delta > 0,
            Direction::Decreased => delta < 0,
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(Direction::All),
            "increased" => Ok(Direction::Increased),
            "decreased" => Ok(Direction::Decreased),
            _ => Err(format!("unknown direction `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PerturbationReport {
    pub removed: NodeId,
    pub fingerprint: String,
    pub mode: BaselineMode,
    pub overview: PerturbationOverview,
    /// One row per survivor, ordered by previous rank.
    pub changes: Vec<RankingChangeRecord>,
    pub topk: TopKProportions,
    pub influence: InfluenceGraph,
}

/// Resolves node labels for [`topk_proportions`].
pub trait LabelLookup {
    fn label_for(&self, id: &str) -> Option<&Label>;
}

impl LabelLookup for DirectedGraph {
    fn label_for(&self, id: &str) -> Option<&Label> {
        self.label_of(id)
    }
}

impl LabelLookup for BTreeMap<NodeId, Label> {
    fn label_for(&self, id: &str) -> Option<&Label> {
        self.get(id)
    }
}

fn median(sorted: &[u64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2] as f64,
        n => (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0,
    }
}

pub fn overview_stats(d: &DeltaVector, g: &DirectedGraph) -> Result<PerturbationOverview, DiagnosisError> {
    let mut inc: Vec<u64> = d.deltas.values().filter(|&&x| x > 0).map(|&x| x as u64).collect();
    let mut dec: Vec<u64> = d.deltas.values().filter(|&&x| x < 0).map(|&x| x.unsigned_abs()).collect();
    inc.sort_unstable();
    dec.sort_unstable();
    Ok(PerturbationOverview {
        influenced_count: inc.len() + dec.len(),
        increased_count: inc.len(),
        decreased_count: dec.len(),
        max_increase: inc.last().copied().unwrap_or(0),
        max_decrease: dec.last().copied().unwrap_or(0),
        median_increase: median(&inc),
        median_decrease: median(&dec),
        removed_degree: g.degree(d.removed.as_str())?.total,
    })
}

fn label_fractions<L: LabelLookup + ?Sized>(
    positions: &RankingPositions,
    labels: &L,
    k: usize,
) -> Result<BTreeMap<Label, usize>, DiagnosisError> {
    let mut order: Vec<(u32, &NodeId)> = positions.iter().map(|(id, p)| (p, id)).collect();
    order.sort_unstable();
    let mut counts = BTreeMap::new();
    for (_, id) in order.into_iter().take(k) {
        let label = labels
            .label_for(id.as_str())
            .ok_or_else(|| GraphError::NodeNotFound(id.to_string()))?;
        *counts.entry(label.clone()).or_insert(0usize) += 1;
    }
    Ok(counts)
}

/// Label composition of the `k` best-ranked nodes before and after.
pub fn topk_proportions<L: LabelLookup + ?Sized>(
    before: &RankingPositions,
    after: &RankingPositions,
    labels: &L,
    k: usize,
) -> Result<TopKProportions, DiagnosisError> {
    let max = before.len().min(after.len());
    if k == 0 || k > max {
        return Err(DiagnosisError::KOutOfRange { k, max });
    }
    let b = label_fractions(before, labels, k)?;
    let a = label_fractions(after, labels, k)?;
    let fractions = |counts: &BTreeMap<Label, usize>| -> BTreeMap<Label, f64> {
        b.keys()
            .chain(a.keys())
            .map(|l| (l.clone(), counts.get(l).copied().unwrap_or(0) as f64 / k as f64))
            .collect()
    };
    Ok(TopKProportions {
        k,
        before: fractions(&b),
        after: fractions(&a),
    })
}

/// BFS over successors from the removed node, stepping only onto influenced
/// nodes; influenced nodes never reached hang off the removed node at hop
/// `inf`. Neighbors are visited in id order.
pub fn build_influence_graph(g: &DirectedGraph, d: &DeltaVector) -> Result<InfluenceGraph, DiagnosisError> {
    let root = g
        .index_of(d.removed.as_str())
        .ok_or_else(|| GraphError::NodeNotFound(d.removed.to_string()))?;
    let n = g.node_count();
    let mut influenced = vec![false; n];
    let mut delta_at = vec![0i64; n];
    for (id, delta) in d.influenced() {
        let i = g
            .index_of(id.as_str())
            .ok_or_else(|| GraphError::NodeNotFound(id.to_string()))?;
        influenced[i] = true;
        delta_at[i] = delta;
    }
    influenced[root] = false;

    let node = |i: usize, hop: Hop| InfluenceNode {
        node: g.id(i).clone(),
        hop,
        ring: hop.ring(),
        delta: delta_at[i],
        label: g.label(i).clone(),
    };
    let edge = |s: usize, t: usize, kind| InfluenceEdge {
        source: g.id(s).clone(),
        target: g.id(t).clone(),
        kind,
    };

    let mut hop: Vec<Option<u32>> = vec![None; n];
    hop[root] = Some(0);
    let mut nodes = vec![node(root, Hop::Finite(0))];
    let mut edges = Vec::new();
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let h = hop[v].expect("queued nodes have a hop");
        for &w in g.successors(v) {
            let w = w as usize;
            if influenced[w] && hop[w].is_none() {
                hop[w] = Some(h + 1);
                nodes.push(node(w, Hop::Finite(h + 1)));
                edges.push(edge(v, w, EdgeKind::Traversal));
                queue.push_back(w);
            }
        }
    }
    for i in (0..n).filter(|&i| influenced[i] && hop[i].is_none()) {
        nodes.push(node(i, Hop::Inf));
        edges.push(edge(root, i, EdgeKind::InfAttach));
    }
    Ok(InfluenceGraph {
        removed: d.removed.clone(),
        nodes,
        edges,
    })
}

/// Keeps the removed node plus nodes whose hop lies in `[hop_min, hop_max]`
/// and whose delta sign matches `direction`. `inf` nodes survive only when
/// `hop_max` is `inf`.
pub fn filter_influence(
    ig: &InfluenceGraph,
    hop_min: u32,
    hop_max: Hop,
    direction: Direction,
) -> Result<InfluenceGraph, DiagnosisError> {
    if hop_min < 1 || Hop::Finite(hop_min) > hop_max {
        return Err(DiagnosisError::InvalidHopRange {
            min: hop_min,
            max: hop_max,
        });
    }
    let keep = |n: &InfluenceNode| {
        n.node == ig.removed
            || (n.hop >= Hop::Finite(hop_min) && n.hop <= hop_max && direction.admits(n.delta))
    };
    let nodes: Vec<InfluenceNode> = ig.nodes.iter().filter(|n| keep(n)).cloned().collect();
    let kept = |id: &NodeId| nodes.iter().any(|n| &n.node == id);
    let edges = ig
        .edges
        .iter()
        .filter(|e| kept(&e.source) && kept(&e.target))
        .cloned()
        .collect();
    Ok(InfluenceGraph {
        removed: ig.removed.clone(),
        nodes,
        edges,
    })
}

/// Mode-aligned baseline positions of the survivors of removing `removed`.
pub fn baseline_positions(
    original: &RankingPositions,
    removed: &str,
    mode: BaselineMode,
) -> Result<RankingPositions, DiagnosisError> {
    let removed_pos = original
        .get(removed)
        .ok_or_else(|| DiagnosisError::MissingPosition(removed.to_owned()))?;
    Ok(RankingPositions(
        original
            .iter()
            .filter(|(id, _)| id.as_str() != removed)
            .map(|(id, p)| (id.clone(), mode.align(p, removed_pos)))
            .collect(),
    ))
}

/// Assembles a report from precomputed pieces; no ranking is recomputed.
pub fn diagnose_precomputed(
    g: &DirectedGraph,
    original: &RankingPositions,
    mode: BaselineMode,
    d: &DeltaVector,
    k: usize,
    fingerprint: &str,
) -> Result<PerturbationReport, DiagnosisError> {
    let before = baseline_positions(original, d.removed.as_str(), mode)?;
    let mut changes = Vec::with_capacity(d.len());
    let mut after = BTreeMap::new();
    for (id, &delta) in &d.deltas {
        let previous = before
            .get(id.as_str())
            .ok_or_else(|| DiagnosisError::MissingPosition(id.to_string()))?;
        let perturbed = (i64::from(previous) - delta) as u32;
        after.insert(id.clone(), perturbed);
        changes.push(RankingChangeRecord {
            node: id.clone(),
            previous_rank: previous,
            perturbed_rank: perturbed,
            delta,
            label: g
                .label_of(id.as_str())
                .ok_or_else(|| GraphError::NodeNotFound(id.to_string()))?
                .clone(),
        });
    }
    changes.sort_by(|a, b| a.previous_rank.cmp(&b.previous_rank).then_with(|| a.node.cmp(&b.node)));
    let after = RankingPositions(after);
    Ok(PerturbationReport {
        removed: d.removed.clone(),
        fingerprint: fingerprint.to_owned(),
        mode,
        overview: overview_stats(d, g)?,
        changes,
        topk: topk_proportions(&before, &after, g, k)?,
        influence: build_influence_graph(g, d)?,
    })
}

/// Full diagnosis of removing `v`, computing both rankings live.
pub fn diagnose(
    g: &DirectedGraph,
    cfg: &RankingConfig,
    mode: BaselineMode,
    v: &str,
    k: usize,
) -> Result<PerturbationReport, DiagnosisError> {
    let d = ranking_deltas(g, cfg, mode, v)?;
    let original = rank_indexed(g, cfg).map_err(AuditError::Original)?;
    let original = RankingPositions::from_index_positions(g, &original.positions);
    let fp = crate::fingerprint::fingerprint(
        g,
        &AuditConfig {
            ranking: cfg.clone(),
            mode,
        },
    );
    diagnose_precomputed(g, &original, mode, &d, k, &fp)
}
