mod common;

use std::collections::BTreeSet;

use common::{fixtures_dir, hop_oracle, toy};
use rankaudit::diagnosis::{build_influence_graph, filter_influence, Direction, Hop};
use rankaudit::sensitivity::{sweep, AuditConfig};
use rankaudit::store::{read_cache, read_cache_path, AuditCache};

fn golden_bytes() -> Vec<u8> {
    std::fs::read(fixtures_dir().join("toy_cache.json")).unwrap()
}

#[test]
fn toy_cache_matches_golden_file() {
    let f = toy();
    let cache = AuditCache::from(sweep(&f.graph, &AuditConfig::default(), Some(1)).unwrap());
    assert_eq!(cache.to_bytes(), golden_bytes());
}

#[test]
fn golden_file_reads_back_and_verifies() {
    let cache = read_cache_path(&fixtures_dir().join("toy_cache.json")).unwrap();
    cache.verify_graph(&toy().graph).unwrap();
    assert_eq!(cache.to_bytes(), golden_bytes());
}

#[test]
fn golden_deltas() {
    let cache = read_cache(golden_bytes().as_slice()).unwrap();
    let of = |v: &str| -> Vec<i64> { cache.delta(v).unwrap().deltas.values().copied().collect() };
    // survivors in id order; values from an external dense-matrix rerun
    assert_eq!(of("1"), vec![-3, 1, 1, 1, 0]);
    assert_eq!(of("4"), vec![-1, 1, 0, 0, 0]);
    assert_eq!(of("5"), vec![0, 0, 1, -1, 0]);
    for v in ["2", "3", "6"] {
        assert!(of(v).iter().all(|&d| d == 0), "{v}");
    }
    let si: Vec<u64> = cache.table.records.iter().map(|r| r.si).collect();
    assert_eq!(si, vec![6, 0, 0, 2, 2, 0]);
}

#[test]
fn toy_influence_matches_oracle() {
    let f = toy();
    let cache = read_cache(golden_bytes().as_slice()).unwrap();
    for v in f.graph.ids() {
        let d = cache.delta(v.as_str()).unwrap();
        let ig = build_influence_graph(&f.graph, d).unwrap();
        let influenced: BTreeSet<String> = d.influenced().map(|(id, _)| id.to_string()).collect();
        for (u, hop) in hop_oracle(&f.graph, v.as_str(), &influenced) {
            assert_eq!(ig.hop_of(&u), Some(hop.map_or(Hop::Inf, Hop::Finite)), "{v} -> {u}");
        }
        assert_eq!(filter_influence(&ig, 1, Hop::Inf, Direction::All).unwrap(), ig);
    }
}

#[test]
fn toy_decreased_beyond_first_hop() {
    let f = toy();
    let cache = read_cache(golden_bytes().as_slice()).unwrap();
    let ig = build_influence_graph(&f.graph, cache.delta("1").unwrap()).unwrap();
    let kept = filter_influence(&ig, 2, Hop::Inf, Direction::Decreased).unwrap();
    let want: Vec<&str> = ig
        .nodes
        .iter()
        .filter(|n| n.node.as_str() == "1" || (n.hop >= Hop::Finite(2) && n.delta < 0))
        .map(|n| n.node.as_str())
        .collect();
    let got: Vec<&str> = kept.nodes.iter().map(|n| n.node.as_str()).collect();
    assert_eq!(got, want);
}
