//! Protection rules that exclude perturbations from the sensitivity table.
//!
//! A rule protects a set of nodes against moving too far in one direction.
//! Thresholds are strict: with threshold `t` a protected node may move by
//! `t` places and no more, so `t = 0` forbids any movement in that
//! direction. Removing a protected node always violates the rule.
//!
//! Percentage thresholds are taken against the number of surviving nodes
//! (`n - 1` for an `n`-node graph) and rounded up to whole positions.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;
use crate::sensitivity::{DeltaVector, SensitivityTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleDirection {
    NoDecrease,
    NoIncrease,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThresholdKind {
    #[serde(rename = "abs")]
    AbsolutePositions,
    #[serde(rename = "pct")]
    PercentOfN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRule {
    pub id: String,
    pub protected: BTreeSet<NodeId>,
    pub direction: RuleDirection,
    pub threshold: f64,
    pub kind: ThresholdKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("rule `{0}` protects no nodes")]
    NoProtectedNodes(String),
    #[error("rule `{id}` has invalid threshold {threshold}")]
    InvalidThreshold { id: String, threshold: f64 },
    #[error("duplicate rule id `{0}`")]
    DuplicateId(String),
    #[error("no cached deltas for perturbation `{0}`")]
    IncompleteCache(String),
}

impl ConstraintRule {
    pub fn validate(&self) -> Result<(), ConstraintError> {
        if self.protected.is_empty() {
            return Err(ConstraintError::NoProtectedNodes(self.id.clone()));
        }
        let max = match self.kind {
            ThresholdKind::AbsolutePositions => f64::INFINITY,
            ThresholdKind::PercentOfN => 100.0,
        };
        if !(self.threshold >= 0.0 && self.threshold <= max) || self.threshold.is_nan() {
            return Err(ConstraintError::InvalidThreshold {
                id: self.id.clone(),
                threshold: self.threshold,
            });
        }
        Ok(())
    }

    /// Largest allowed move in whole positions for a population of `n`.
    pub fn effective_threshold(&self, n: usize) -> f64 {
        match self.kind {
            ThresholdKind::AbsolutePositions => self.threshold,
            ThresholdKind::PercentOfN => (self.threshold * n as f64 / 100.0).ceil(),
        }
    }
}

/// Whether the perturbation described by `d` breaks `rule`; `n` is the
/// population used for percentage thresholds.
pub fn violates(rule: &ConstraintRule, d: &DeltaVector, n: usize) -> bool {
    if rule.protected.contains(&d.removed) {
        return true;
    }
    let limit = rule.effective_threshold(n);
    rule.protected.iter().any(|id| {
        let Some(delta) = d.get(id.as_str()) else {
            return false;
        };
        let moved = match rule.direction {
            RuleDirection::NoDecrease => -delta,
            RuleDirection::NoIncrease => delta,
        };
        moved as f64 > limit
    })
}

/// Ordered conjunction of rules with unique ids.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleSet {
    rules: Vec<ConstraintRule>,
}

impl RuleSet {
    pub fn new(rules: Vec<ConstraintRule>) -> Result<Self, ConstraintError> {
        let mut seen = HashSet::new();
        for r in &rules {
            r.validate()?;
            if !seen.insert(r.id.as_str()) {
                return Err(ConstraintError::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self { rules })
    }

    pub fn rules(&self) -> &[ConstraintRule] {
        &self.rules
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// True when the perturbation satisfies every rule.
    pub fn admits(&self, d: &DeltaVector) -> bool {
        self.rules.iter().all(|r| !violates(r, d, d.len()))
    }
}

/// Source of per-perturbation delta vectors, keyed by removed node.
pub trait DeltaSource {
    fn delta_for(&self, removed: &str) -> Option<&DeltaVector>;
}

impl DeltaSource for BTreeMap<NodeId, DeltaVector> {
    fn delta_for(&self, removed: &str) -> Option<&DeltaVector> {
        self.get(removed)
    }
}

impl DeltaSource for [DeltaVector] {
    fn delta_for(&self, removed: &str) -> Option<&DeltaVector> {
        self.binary_search_by(|d| d.removed.as_str().cmp(removed))
            .ok()
            .map(|i| &self[i])
    }
}

impl DeltaSource for Vec<DeltaVector> {
    fn delta_for(&self, removed: &str) -> Option<&DeltaVector> {
        self.as_slice().delta_for(removed)
    }
}

/// Records whose perturbation violates no rule, in their original order.
pub fn filter_table<S: DeltaSource + ?Sized>(
    table: &SensitivityTable,
    rules: &RuleSet,
    deltas: &S,
) -> Result<SensitivityTable, ConstraintError> {
    let mut records = Vec::new();
    for rec in &table.records {
        if rules.is_empty() {
            records.push(rec.clone());
            continue;
        }
        let d = deltas
            .delta_for(rec.node.as_str())
            .ok_or_else(|| ConstraintError::IncompleteCache(rec.node.to_string()))?;
        if rules.admits(d) {
            records.push(rec.clone());
        }
    }
    Ok(SensitivityTable {
        fingerprint: table.fingerprint.clone(),
        records,
    })
}
