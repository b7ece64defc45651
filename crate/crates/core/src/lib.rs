//! Sensitivity auditing of graph ranking methods under node removal.
//!
//! The pipeline: parse a labeled directed graph ([`graph`]), rank it with
//! PageRank or HITS ([`ranking`]), remove every node in turn and measure how
//! the remaining positions move ([`sensitivity`]), persist the result
//! ([`store`]) and serve per-removal diagnoses ([`diagnosis`]) filtered by
//! analyst rules ([`constraints`]) over HTTP ([`service`]).

pub mod constraints;
pub mod diagnosis;
pub mod fingerprint;
pub mod graph;
pub mod ranking;
pub mod sensitivity;
pub mod service;
pub mod store;

pub use constraints::{filter_table, violates, ConstraintRule, RuleDirection, RuleSet, ThresholdKind};
pub use diagnosis::{
    build_influence_graph, diagnose, diagnose_precomputed, filter_influence, overview_stats, topk_proportions,
    Direction, Hop, InfluenceGraph, PerturbationReport,
};
pub use graph::{parse_graph, DirectedGraph, Label, NodeId, ParseOptions};
pub use ranking::{hits, pagerank, rank, scores_to_positions, HitsScoreKind, Method, RankingConfig, RankingPositions};
pub use sensitivity::{
    ranking_deltas, sensitivity_initial_check, sweep, AuditConfig, BaselineMode, DeltaVector, SensitivityRecord,
    SensitivityTable,
};
pub use store::{read_cache, write_cache, AuditCache};
