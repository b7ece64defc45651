//! Persistent audit cache.
//!
//! The cache is one JSON document with top-level keys `version`,
//! `fingerprint`, `config`, `positions`, `table`, `deltas` and a trailing
//! `checksum`. Maps are keyed and ordered by node id and every stored
//! position or delta is an integer, so identical audits serialize to
//! identical bytes. `checksum` is the SHA-256 of the serialized payload and
//! lets [`read_cache`] reject files that were edited or damaged.
//!
//! Paths ending in `.gz` are gzip-compressed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::constraints::DeltaSource;
use crate::fingerprint::fingerprint;
use crate::graph::{DirectedGraph, NodeId};
use crate::ranking::RankingPositions;
use crate::sensitivity::{AuditConfig, DeltaVector, SensitivityRecord, SensitivityTable, Sweep};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed cache: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported cache format version {found} (expected {FORMAT_VERSION})")]
    UnsupportedVersion { found: u64 },
    #[error("corrupt cache: {0}")]
    Corrupt(String),
    #[error("cache fingerprint {cached} does not match graph and config ({actual})")]
    FingerprintMismatch { cached: String, actual: String },
}

/// Precomputed audit: everything the interactive phase needs except the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditCache {
    pub version: u32,
    pub fingerprint: String,
    pub config: AuditConfig,
    pub positions: RankingPositions,
    pub table: SensitivityTable,
    /// One entry per node, ascending by removed id.
    pub deltas: Vec<DeltaVector>,
}

impl From<Sweep> for AuditCache {
    fn from(s: Sweep) -> Self {
        Self {
            version: FORMAT_VERSION,
            fingerprint: s.fingerprint,
            config: s.config,
            positions: s.original,
            table: s.table,
            deltas: s.deltas,
        }
    }
}

impl AuditCache {
    pub fn delta(&self, removed: &str) -> Option<&DeltaVector> {
        self.deltas.as_slice().delta_for(removed)
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    /// Fails unless the cache was produced from `g` under the stored config.
    pub fn verify_graph(&self, g: &DirectedGraph) -> Result<(), StoreError> {
        let actual = fingerprint(g, &self.config);
        if actual != self.fingerprint {
            return Err(StoreError::FingerprintMismatch {
                cached: self.fingerprint.clone(),
                actual,
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_cache(self, &mut out).expect("writing to a Vec cannot fail");
        out
    }
}

impl DeltaSource for AuditCache {
    fn delta_for(&self, removed: &str) -> Option<&DeltaVector> {
        self.delta(removed)
    }
}

type DeltaMap = BTreeMap<NodeId, BTreeMap<NodeId, i64>>;

#[derive(Serialize)]
struct PayloadRef<'a> {
    fingerprint: &'a str,
    config: &'a AuditConfig,
    positions: &'a RankingPositions,
    table: &'a [SensitivityRecord],
    deltas: &'a DeltaMap,
}

impl PayloadRef<'_> {
    fn checksum(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("payload serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Serialize)]
struct FileRef<'a> {
    version: u32,
    fingerprint: &'a str,
    config: &'a AuditConfig,
    positions: &'a RankingPositions,
    table: &'a [SensitivityRecord],
    deltas: &'a DeltaMap,
    checksum: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOwned {
    version: u32,
    fingerprint: String,
    config: AuditConfig,
    positions: RankingPositions,
    table: Vec<SensitivityRecord>,
    deltas: DeltaMap,
    checksum: String,
}

/// Writes the canonical serialization of `cache` followed by a newline.
pub fn write_cache<W: Write>(cache: &AuditCache, mut sink: W) -> Result<(), StoreError> {
    let deltas: DeltaMap = cache
        .deltas
        .iter()
        .map(|d| (d.removed.clone(), d.deltas.clone()))
        .collect();
    let payload = PayloadRef {
        fingerprint: &cache.fingerprint,
        config: &cache.config,
        positions: &cache.positions,
        table: &cache.table.records,
        deltas: &deltas,
    };
    let file = FileRef {
        version: cache.version,
        fingerprint: &cache.fingerprint,
        config: &cache.config,
        positions: &cache.positions,
        table: &cache.table.records,
        deltas: &deltas,
        checksum: payload.checksum(),
    };
    serde_json::to_writer(&mut sink, &file)?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(())
}

fn corrupt(msg: impl Into<String>) -> StoreError {
    StoreError::Corrupt(msg.into())
}

/// Reads and validates a cache document.
pub fn read_cache<R: Read>(mut source: R) -> Result<AuditCache, StoreError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)?;
    match value.get("version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(found) => return Err(StoreError::UnsupportedVersion { found }),
        None => return Err(corrupt("missing `version`")),
    }
    let file: FileOwned = serde_json::from_value(value)?;

    let payload = PayloadRef {
        fingerprint: &file.fingerprint,
        config: &file.config,
        positions: &file.positions,
        table: &file.table,
        deltas: &file.deltas,
    };
    if payload.checksum() != file.checksum {
        return Err(corrupt("checksum does not match contents"));
    }

    validate_shape(&file)?;
    let deltas = file
        .deltas
        .into_iter()
        .map(|(removed, deltas)| DeltaVector { removed, deltas })
        .collect();
    Ok(AuditCache {
        version: file.version,
        table: SensitivityTable {
            fingerprint: file.fingerprint.clone(),
            records: file.table,
        },
        fingerprint: file.fingerprint,
        config: file.config,
        positions: file.positions,
        deltas,
    })
}

fn validate_shape(file: &FileOwned) -> Result<(), StoreError> {
    let n = file.positions.len();
    let mut seen: Vec<u32> = file.positions.iter().map(|(_, p)| p).collect();
    seen.sort_unstable();
    if seen.iter().enumerate().any(|(i, &p)| p as usize != i + 1) {
        return Err(corrupt("positions are not a permutation of 1..n"));
    }
    if file.deltas.len() != n || !file.deltas.keys().eq(file.positions.0.keys()) {
        return Err(corrupt("deltas do not cover every node exactly once"));
    }
    for (removed, d) in &file.deltas {
        let survivors = file.positions.0.keys().filter(|k| *k != removed);
        if d.len() != n - 1 || !d.keys().eq(survivors) {
            return Err(corrupt(format!("delta vector for `{removed}` has the wrong domain")));
        }
    }
    if file.table.len() != n
        || !file
            .table
            .iter()
            .map(|r| &r.node)
            .eq(file.positions.0.keys())
    {
        return Err(corrupt("table does not hold one record per node"));
    }
    Ok(())
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

pub fn write_cache_path(cache: &AuditCache, path: &Path) -> Result<(), StoreError> {
    let file = BufWriter::new(File::create(path)?);
    if is_gzip(path) {
        let mut enc = GzEncoder::new(file, Compression::default());
        write_cache(cache, &mut enc)?;
        enc.finish()?.flush()?;
    } else {
        write_cache(cache, file)?;
    }
    Ok(())
}

pub fn read_cache_path(path: &Path) -> Result<AuditCache, StoreError> {
    let file = BufReader::new(File::open(path)?);
    if is_gzip(path) {
        read_cache(GzDecoder::new(file))
    } else {
        read_cache(file)
    }
}
