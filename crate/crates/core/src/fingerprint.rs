//! Provenance hash over (graph, ranking config, baseline mode).

use sha2::{Digest, Sha256};

use crate::graph::DirectedGraph;
use crate::sensitivity::AuditConfig;

/// Hex SHA-256 of the canonical graph text and the serialized audit config.
pub fn fingerprint(g: &DirectedGraph, config: &AuditConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"rankaudit/fingerprint/v1\n");
    hasher.update(b"edges\n");
    hasher.update(g.to_edge_text().as_bytes());
    hasher.update(b"labels\n");
    hasher.update(g.to_label_text().as_bytes());
    hasher.update(b"config\n");
    // serde_json output for this type is deterministic: fixed field order, sorted maps
    hasher.update(serde_json::to_vec(config).expect("config serializes").as_slice());
    hex::encode(hasher.finalize())
}
