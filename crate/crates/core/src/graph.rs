//! Labeled directed graph, edge/label file ingestion and node-removal views.
//!
//! Nodes are stored sorted by [`NodeId`], so a node's index doubles as its
//! rank in the lexicographic order used for every tie-break downstream.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label assigned to nodes that appear in the edge file but not the label file.
pub const UNLABELED: &str = "UNLABELED";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Categorical class label of a node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(String);

impl Label {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn unlabeled() -> Self {
        Self(UNLABELED.to_owned())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Label {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("{file} file, line {line}: expected 2 columns, found {found}")]
    ColumnCount {
        file: &'static str,
        line: usize,
        found: usize,
    },
    #[error("{file} file, line {line}: empty field")]
    EmptyField { file: &'static str, line: usize },
    #[error("label file, line {line}: node `{node}` already labeled `{previous}`")]
    ConflictingLabel {
        line: usize,
        node: String,
        previous: String,
    },
    #[error("graph has no nodes")]
    Empty,
    #[error("node `{0}` not found")]
    NodeNotFound(String),
    #[error("edge endpoint `{0}` is not a node of the graph")]
    DanglingEndpoint(String),
}

/// Immutable directed graph without self-loops or parallel edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    ids: Vec<NodeId>,
    labels: Vec<Label>,
    out_adj: Vec<Vec<u32>>,
    in_adj: Vec<Vec<u32>>,
    edge_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Degree {
    pub in_degree: usize,
    pub out_degree: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphSummary {
    pub node_count: usize,
    pub edge_count: usize,
    pub label_counts: BTreeMap<Label, usize>,
}

/// Rows dropped while ingesting an edge file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropCounts {
    pub self_loops: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Skip the first non-blank row of each file.
    pub header: bool,
}

#[derive(Debug, Clone)]
pub struct ParsedGraph {
    pub graph: DirectedGraph,
    pub dropped: DropCounts,
}

impl DirectedGraph {
    /// Builds a graph from labeled nodes and edges.
    ///
    /// Self-loops and repeated edges are dropped and counted; every edge
    /// endpoint must already be a node.
    pub fn from_parts<I, E>(nodes: I, edges: E) -> Result<(Self, DropCounts), GraphError>
    where
        I: IntoIterator<Item = (NodeId, Label)>,
        E: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut by_id: BTreeMap<NodeId, Label> = BTreeMap::new();
        for (id, label) in nodes {
            by_id.insert(id, label);
        }
        if by_id.is_empty() {
            return Err(GraphError::Empty);
        }
        let (ids, labels): (Vec<_>, Vec<_>) = by_id.into_iter().unzip();
        let index = |id: &NodeId| {
            ids.binary_search(id)
                .map(|i| i as u32)
                .map_err(|_| GraphError::DanglingEndpoint(id.to_string()))
        };

        let mut dropped = DropCounts::default();
        let mut edge_set = BTreeSet::new();
        for (s, t) in edges {
            let (si, ti) = (index(&s)?, index(&t)?);
            if si == ti {
                dropped.self_loops += 1;
            } else if !edge_set.insert((si, ti)) {
                dropped.duplicates += 1;
            }
        }
        Ok((Self::from_index_edges(ids, labels, &edge_set), dropped))
    }

    fn from_index_edges(ids: Vec<NodeId>, labels: Vec<Label>, edges: &BTreeSet<(u32, u32)>) -> Self {
        let n = ids.len();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        // BTreeSet iteration keeps both adjacency lists sorted.
        for &(s, t) in edges {
            out_adj[s as usize].push(t);
            in_adj[t as usize].push(s);
        }
        for list in &mut in_adj {
            list.sort_unstable();
        }
        Self {
            ids,
            labels,
            out_adj,
            in_adj,
            edge_count: edges.len(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Node ids in ascending order; position in this slice is the node index.
    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn id(&self, index: usize) -> &NodeId {
        &self.ids[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.binary_search_by(|probe| probe.as_str().cmp(id)).ok()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index_of(id).is_some()
    }

    pub fn label(&self, index: usize) -> &Label {
        &self.labels[index]
    }

    pub fn label_of(&self, id: &str) -> Option<&Label> {
        self.index_of(id).map(|i| &self.labels[i])
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// The label universe B.
    pub fn label_set(&self) -> BTreeSet<Label> {
        self.labels.iter().cloned().collect()
    }

    /// Out-neighbors of `index`, ascending.
    pub fn successors(&self, index: usize) -> &[u32] {
        &self.out_adj[index]
    }

    /// In-neighbors of `index`, ascending.
    pub fn predecessors(&self, index: usize) -> &[u32] {
        &self.in_adj[index]
    }

    pub fn out_degree(&self, index: usize) -> usize {
        self.out_adj[index].len()
    }

    /// Edges as `(source, target)` index pairs in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(s, ts)| ts.iter().map(move |&t| (s, t as usize)))
    }

    pub fn degree(&self, id: &str) -> Result<Degree, GraphError> {
        let i = self
            .index_of(id)
            .ok_or_else(|| GraphError::NodeNotFound(id.to_owned()))?;
        Ok(self.degree_at(i))
    }

    pub fn degree_at(&self, index: usize) -> Degree {
        let in_degree = self.in_adj[index].len();
        let out_degree = self.out_adj[index].len();
        Degree {
            in_degree,
            out_degree,
            total: in_degree + out_degree,
        }
    }

    /// Returns a copy of the graph without `id` and its incident edges.
    pub fn remove_node(&self, id: &str) -> Result<Self, GraphError> {
        let i = self
            .index_of(id)
            .ok_or_else(|| GraphError::NodeNotFound(id.to_owned()))?;
        Ok(self.remove_index(i))
    }

    /// Index form of [`remove_node`](Self::remove_node). Survivor `j` of the
    /// result is node `j` (if `j < removed`) or `j + 1` of `self`.
    ///
    /// Removing the last node yields a graph with zero nodes; such a value
    /// only exists as an intermediate and is never produced by parsing.
    pub fn remove_index(&self, removed: usize) -> Self {
        let r = removed as u32;
        let shift = |x: u32| if x > r { x - 1 } else { x };
        let strip = |lists: &[Vec<u32>]| -> Vec<Vec<u32>> {
            lists
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != removed)
                .map(|(_, l)| l.iter().filter(|&&x| x != r).map(|&x| shift(x)).collect())
                .collect()
        };
        let out_adj = strip(&self.out_adj);
        let in_adj = strip(&self.in_adj);
        let edge_count = out_adj.iter().map(Vec::len).sum();
        let mut ids = self.ids.clone();
        ids.remove(removed);
        let mut labels = self.labels.clone();
        labels.remove(removed);
        Self {
            ids,
            labels,
            out_adj,
            in_adj,
            edge_count,
        }
    }

    pub fn summary(&self) -> GraphSummary {
        let mut label_counts = BTreeMap::new();
        for l in &self.labels {
            *label_counts.entry(l.clone()).or_insert(0) += 1;
        }
        GraphSummary {
            node_count: self.node_count(),
            edge_count: self.edge_count,
            label_counts,
        }
    }

    fn separator(&self) -> char {
        let has_comma = self
            .ids
            .iter()
            .map(NodeId::as_str)
            .chain(self.labels.iter().map(Label::as_str))
            .any(|s| s.contains(','));
        if has_comma {
            '\t'
        } else {
            ','
        }
    }

    /// Edge file text, one `source<sep>target` row per edge in index order.
    pub fn to_edge_text(&self) -> String {
        let sep = self.separator();
        let mut out = String::new();
        for (s, t) in self.edges() {
            out.push_str(self.ids[s].as_str());
            out.push(sep);
            out.push_str(self.ids[t].as_str());
            out.push('\n');
        }
        out
    }

    /// Label file text covering every node, in id order.
    pub fn to_label_text(&self) -> String {
        let sep = self.separator();
        let mut out = String::new();
        for (id, label) in self.ids.iter().zip(&self.labels) {
            out.push_str(id.as_str());
            out.push(sep);
            out.push_str(label.as_str());
            out.push('\n');
        }
        out
    }
}

struct Row<'a> {
    line: usize,
    first: &'a str,
    second: &'a str,
}

fn rows<'a>(text: &'a str, file: &'static str, header: bool) -> Result<Vec<Row<'a>>, GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();
    let sep = match lines.peek() {
        Some((_, l)) if l.contains('\t') => '\t',
        _ => ',',
    };
    if header {
        lines.next();
    }
    lines
        .map(|(line, l)| {
            let fields: Vec<&str> = l.split(sep).map(str::trim).collect();
            if fields.len() != 2 {
                return Err(GraphError::ColumnCount {
                    file,
                    line,
                    found: fields.len(),
                });
            }
            if fields.iter().any(|f| f.is_empty()) {
                return Err(GraphError::EmptyField { file, line });
            }
            Ok(Row {
                line,
                first: fields[0],
                second: fields[1],
            })
        })
        .collect()
}

/// Parses an edge list and a label list into a graph.
///
/// Rows are `source,target` and `node,label`, separated by `,` or `\t`
/// (decided per file from its first row). Nodes listed only in the label
/// file become isolated nodes; nodes missing from the label file are
/// labeled [`UNLABELED`].
pub fn parse_graph(
    edge_text: &str,
    label_text: &str,
    opts: ParseOptions,
) -> Result<ParsedGraph, GraphError> {
    let edge_rows = rows(edge_text, "edge", opts.header)?;
    let label_rows = rows(label_text, "label", opts.header)?;

    let mut labels: BTreeMap<NodeId, Label> = BTreeMap::new();
    for row in &label_rows {
        let id = NodeId::from(row.first);
        match labels.get(&id) {
            Some(prev) if prev.as_str() != row.second => {
                return Err(GraphError::ConflictingLabel {
                    line: row.line,
                    node: row.first.to_owned(),
                    previous: prev.to_string(),
                });
            }
            Some(_) => {}
            None => {
                labels.insert(id, Label::from(row.second));
            }
        }
    }
    for row in &edge_rows {
        for end in [row.first, row.second] {
            if !labels.contains_key(end) {
                labels.insert(NodeId::from(end), Label::unlabeled());
            }
        }
    }
    let edges = edge_rows
        .iter()
        .map(|r| (NodeId::from(r.first), NodeId::from(r.second)));
    let (graph, dropped) = DirectedGraph::from_parts(labels, edges)?;
    Ok(ParsedGraph { graph, dropped })
}
