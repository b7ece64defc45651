//! Seeded graph generators and reference implementations shared by the
//! integration tests. The oracles deliberately avoid the library's internal
//! helpers: PageRank is an exact dense linear solve, HITS a dense-matrix power
//! iteration, hop distances a fixed-point relaxation.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rankaudit::constraints::{ConstraintRule, RuleDirection, ThresholdKind};
use rankaudit::graph::{parse_graph, DirectedGraph, ParseOptions};
use rankaudit::ranking::{rank, RankingConfig};
use rankaudit::sensitivity::{BaselineMode, SensitivityRecord};
use rankaudit::{Label, NodeId};

pub const LABELS: [&str; 3] = ["A", "B", "C"];

/// A graph together with the text it was parsed from.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub edges: Vec<(String, String)>,
    pub labels: Vec<(String, String)>,
    pub graph: DirectedGraph,
}

impl Fixture {
    pub fn from_pairs(edges: Vec<(String, String)>, labels: Vec<(String, String)>) -> Self {
        let graph = parse(&edges, &labels);
        Self { edges, labels, graph }
    }

    pub fn edge_text(&self) -> String {
        join(&self.edges)
    }

    pub fn label_text(&self) -> String {
        join(&self.labels)
    }

    /// Reparses the inputs with every row that mentions `v` dropped.
    pub fn without(&self, v: &str) -> DirectedGraph {
        let edges: Vec<_> = self.edges.iter().filter(|(s, t)| s != v && t != v).cloned().collect();
        let labels: Vec<_> = self.labels.iter().filter(|(n, _)| n != v).cloned().collect();
        parse(&edges, &labels)
    }
}

fn join(rows: &[(String, String)]) -> String {
    rows.iter().map(|(a, b)| format!("{a},{b}\n")).collect()
}

fn parse(edges: &[(String, String)], labels: &[(String, String)]) -> DirectedGraph {
    parse_graph(&join(edges), &join(labels), ParseOptions::default())
        .expect("fixture parses")
        .graph
}

/// Erdős–Rényi digraph on `n` labeled nodes (isolated nodes included).
pub fn random_fixture(seed: u64, n: usize, p: f64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..n).map(|i| format!("v{i:02}")).collect();
    let labels = ids
        .iter()
        .map(|id| (id.clone(), LABELS[rng.gen_range(0..LABELS.len())].to_owned()))
        .collect();
    let mut edges = Vec::new();
    for s in &ids {
        for t in &ids {
            if s != t && rng.gen_bool(p) {
                edges.push((s.clone(), t.clone()));
            }
        }
    }
    Fixture::from_pairs(edges, labels)
}

/// Random graph of fixed size with exactly `m` distinct edges.
pub fn random_fixture_with_edges(seed: u64, n: usize, m: usize) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..n).map(|i| format!("n{i:04}")).collect();
    let labels = ids
        .iter()
        .map(|id| (id.clone(), LABELS[rng.gen_range(0..LABELS.len())].to_owned()))
        .collect();
    let mut seen = BTreeSet::new();
    while seen.len() < m {
        let s = rng.gen_range(0..n);
        let t = rng.gen_range(0..n);
        if s != t {
            seen.insert((s, t));
        }
    }
    let edges = seen.into_iter().map(|(s, t)| (ids[s].clone(), ids[t].clone())).collect();
    Fixture::from_pairs(edges, labels)
}

/// True when every single-node removal still leaves at least one edge, so
/// HITS is defined on all perturbed graphs.
pub fn hits_safe(g: &DirectedGraph) -> bool {
    let edges: Vec<(usize, usize)> = g.edges().collect();
    (0..g.node_count()).all(|v| edges.iter().any(|&(s, t)| s != v && t != v))
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn toy() -> Fixture {
    let read = |name: &str| std::fs::read_to_string(fixtures_dir().join(name)).expect("fixture file");
    let pairs = |text: String| -> Vec<(String, String)> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (a, b) = l.split_once(',').expect("two columns");
                (a.to_owned(), b.to_owned())
            })
            .collect()
    };
    Fixture::from_pairs(pairs(read("toy_edges.csv")), pairs(read("toy_labels.csv")))
}

fn adjacency(g: &DirectedGraph) -> DMatrix<f64> {
    let n = g.node_count();
    let mut a = DMatrix::zeros(n, n);
    for (s, t) in g.edges() {
        a[(s, t)] = 1.0;
    }
    a
}

/// Solves `(I - cM) r = (1 - c) / n` exactly, where `M` is the column-stochastic
/// transition matrix with dangling columns spread uniformly.
pub fn dense_pagerank(g: &DirectedGraph, c: f64) -> Vec<f64> {
    let n = g.node_count();
    let a = adjacency(g);
    let mut m = DMatrix::zeros(n, n);
    for s in 0..n {
        let out: f64 = a.row(s).sum();
        for t in 0..n {
            m[(t, s)] = if out == 0.0 { 1.0 / n as f64 } else { a[(s, t)] / out };
        }
    }
    let lhs = DMatrix::identity(n, n) - m * c;
    let rhs = DVector::from_element(n, (1.0 - c) / n as f64);
    let r = lhs.lu().solve(&rhs).expect("I - cM is nonsingular");
    r.iter().copied().collect()
}

/// HITS by dense power iteration to a much tighter tolerance than the
/// library default. Returns `(authority, hub)`.
pub fn dense_hits(g: &DirectedGraph) -> (Vec<f64>, Vec<f64>) {
    let n = g.node_count();
    let a = adjacency(g);
    let at = a.transpose();
    let mut auth = DVector::from_element(n, 1.0);
    let mut hub = DVector::from_element(n, 1.0);
    for _ in 0..200_000 {
        let new_auth = (&at * &hub).normalize();
        let new_hub = (&a * &new_auth).normalize();
        let change = (&new_auth - &auth).abs().sum() + (&new_hub - &hub).abs().sum();
        auth = new_auth;
        hub = new_hub;
        if change < 1e-15 {
            break;
        }
    }
    (auth.iter().copied().collect(), hub.iter().copied().collect())
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Algorithm 1 written out directly: rerank every reduced graph from scratch
/// and fold the position changes by hand.
pub struct NaiveAudit {
    pub original: BTreeMap<String, u32>,
    pub deltas: BTreeMap<String, BTreeMap<String, i64>>,
    pub records: Vec<SensitivityRecord>,
}

pub fn naive_audit(f: &Fixture, cfg: &RankingConfig, mode: BaselineMode) -> NaiveAudit {
    let to_map = |p: rankaudit::RankingPositions| -> BTreeMap<String, u32> {
        p.iter().map(|(id, r)| (id.to_string(), r)).collect()
    };
    let original = to_map(rank(&f.graph, cfg).expect("original ranks"));
    let label_of: BTreeMap<&str, &str> = f.labels.iter().map(|(n, l)| (n.as_str(), l.as_str())).collect();
    let universe: BTreeSet<Label> = f
        .graph
        .ids()
        .iter()
        .map(|id| Label::from(*label_of.get(id.as_str()).unwrap_or(&"UNLABELED")))
        .collect();

    let mut deltas = BTreeMap::new();
    let mut records = Vec::new();
    for v in f.graph.ids().iter().map(NodeId::as_str) {
        let after = to_map(rank(&f.without(v), cfg).expect("perturbed ranks"));
        let rv = original[v];
        let mut d = BTreeMap::new();
        for (u, &pa) in &after {
            let ru = original[u];
            let baseline = match mode {
                BaselineMode::Compact => {
                    if ru > rv {
                        ru - 1
                    } else {
                        ru
                    }
                }
                BaselineMode::Gap => ru,
            };
            d.insert(u.clone(), i64::from(baseline) - i64::from(pa));
        }

        let mut pos: BTreeMap<Label, u64> = universe.iter().map(|l| (l.clone(), 0)).collect();
        let mut neg = pos.clone();
        let (mut si, mut sp, mut sn) = (0u64, 0u64, 0u64);
        for (u, &x) in &d {
            let l = Label::from(*label_of.get(u.as_str()).unwrap_or(&"UNLABELED"));
            si += x.unsigned_abs();
            if x > 0 {
                sp += x as u64;
                *pos.get_mut(&l).unwrap() += x as u64;
            } else if x < 0 {
                sn += x.unsigned_abs();
                *neg.get_mut(&l).unwrap() += x.unsigned_abs();
            }
        }
        records.push(SensitivityRecord {
            node: NodeId::from(v),
            original_rank: rv,
            si,
            si_pos: sp,
            si_neg: sn,
            per_label_pos: pos,
            per_label_neg: neg,
        });
        deltas.insert(v.to_owned(), d);
    }
    NaiveAudit {
        original,
        deltas,
        records,
    }
}

/// Shortest hop from `removed` to every influenced node, where paths may only
/// pass through influenced nodes; `None` when unreachable. Computed by
/// repeated edge relaxation rather than a queue.
pub fn hop_oracle(g: &DirectedGraph, removed: &str, influenced: &BTreeSet<String>) -> BTreeMap<String, Option<u32>> {
    let edges: Vec<(String, String)> = g
        .edges()
        .map(|(s, t)| (g.id(s).to_string(), g.id(t).to_string()))
        .collect();
    let mut dist: BTreeMap<String, Option<u32>> = influenced.iter().map(|u| (u.clone(), None)).collect();
    dist.insert(removed.to_owned(), Some(0));
    loop {
        let mut changed = false;
        for (s, t) in &edges {
            if !influenced.contains(t) {
                continue;
            }
            if let Some(Some(ds)) = dist.get(s).copied() {
                let dt = dist[t];
                if dt.is_none_or(|d| d > ds + 1) {
                    dist.insert(t.clone(), Some(ds + 1));
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist.remove(removed);
    dist
}

pub fn random_rules(rng: &mut ChaCha8Rng, ids: &[String], count: usize) -> Vec<ConstraintRule> {
    (0..count)
        .map(|i| {
            let k = rng.gen_range(1..=3.min(ids.len()));
            let protected = ids.choose_multiple(rng, k).map(|s| NodeId::from(s.as_str())).collect();
            let kind = if rng.gen_bool(0.5) {
                ThresholdKind::AbsolutePositions
            } else {
                ThresholdKind::PercentOfN
            };
            let threshold = match kind {
                ThresholdKind::AbsolutePositions => f64::from(rng.gen_range(0..4)),
                ThresholdKind::PercentOfN => f64::from(rng.gen_range(0..=20)),
            };
            ConstraintRule {
                id: format!("r{i}"),
                protected,
                direction: if rng.gen_bool(0.5) {
                    RuleDirection::NoDecrease
                } else {
                    RuleDirection::NoIncrease
                },
                threshold,
                kind,
            }
        })
        .collect()
}

/// Removals admitted by every rule, found by scanning each perturbation.
pub fn brute_force_retained(deltas: &BTreeMap<String, BTreeMap<String, i64>>, rules: &[ConstraintRule]) -> Vec<String> {
    deltas
        .iter()
        .filter(|(removed, d)| {
            let survivors = d.len() as u64;
            rules.iter().all(|r| {
                if r.protected.iter().any(|p| p.as_str() == removed.as_str()) {
                    return false;
                }
                let allowed = match r.kind {
                    ThresholdKind::AbsolutePositions => r.threshold,
                    // thresholds are drawn as whole percentages
                    ThresholdKind::PercentOfN => ((r.threshold as u64 * survivors).div_ceil(100)) as f64,
                };
                r.protected.iter().all(|p| {
                    let x = d.get(p.as_str()).copied().unwrap_or(0) as f64;
                    let moved = match r.direction {
                        RuleDirection::NoDecrease => -x,
                        RuleDirection::NoIncrease => x,
                    };
                    moved <= allowed
                })
            })
        })
        .map(|(removed, _)| removed.clone())
        .collect()
}
