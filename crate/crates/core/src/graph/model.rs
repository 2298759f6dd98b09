use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::GraphError;
use crate::cluster::FieldClusters;
use crate::extract::summary::{SummaryRow, SummaryType};
use crate::sentiment::Polarity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeType {
    /// A → B, "because A is B".
    Recognition,
    /// B → C or B → E, the bridge into the claim.
    Link,
    /// C → D, "C should be D".
    Normative,
    /// E → F, "please do F to E".
    Request,
}

impl EdgeType {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeType::Recognition => "recognition",
            EdgeType::Link => "link",
            EdgeType::Normative => "normative",
            EdgeType::Request => "request",
        }
    }
}

impl std::str::FromStr for EdgeType {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "recognition" => Ok(EdgeType::Recognition),
            "link" => Ok(EdgeType::Link),
            "normative" => Ok(EdgeType::Normative),
            "request" => Ok(EdgeType::Request),
            other => Err(GraphError::Integrity(format!("unknown edge type {other:?}"))),
        }
    }
}

/// Node id derived from the representative text, so the same text is the
/// same node in every graph.
pub fn node_id(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    format!("n{}", &hex::encode(digest)[..12])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub text: String,
    /// Summary fields (A–F) this representative was drawn from.
    pub fields: BTreeSet<char>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub edge_type: EdgeType,
    pub weight: u64,
}

/// Weighted simple digraph keyed by `(source, target, edge_type)`.
/// Iteration order is always ascending by key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NarrativeGraph {
    pub polarity: Option<Polarity>,
    nodes: BTreeMap<String, Node>,
    edges: BTreeMap<(String, String, EdgeType), u64>,
}

impl NarrativeGraph {
    pub fn new(polarity: Option<Polarity>) -> Self {
        NarrativeGraph {
            polarity,
            ..Default::default()
        }
    }

    /// Insert (or extend) the node for `text`; returns its id.
    pub fn add_node(&mut self, text: &str, field: Option<char>) -> String {
        let id = node_id(text);
        let node = self.nodes.entry(id.clone()).or_insert_with(|| Node {
            id: id.clone(),
            text: text.to_string(),
            fields: BTreeSet::new(),
        });
        node.fields.extend(field);
        id
    }

    pub fn insert_node(&mut self, node: Node) {
        match self.nodes.get_mut(&node.id) {
            Some(existing) => existing.fields.extend(node.fields),
            None => {
                self.nodes.insert(node.id.clone(), node);
            }
        }
    }

    /// Add `weight` to the edge; both endpoints must exist.
    pub fn add_edge(
        &mut self,
        source: &str,
        target: &str,
        edge_type: EdgeType,
        weight: u64,
    ) -> Result<(), GraphError> {
        for id in [source, target] {
            if !self.nodes.contains_key(id) {
                return Err(GraphError::Integrity(format!("edge endpoint {id} is not a node")));
            }
        }
        *self
            .edges
            .entry((source.to_string(), target.to_string(), edge_type))
            .or_insert(0) += weight;
        Ok(())
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().map(|((s, t, ty), &w)| Edge {
            source: s.clone(),
            target: t.clone(),
            edge_type: *ty,
            weight: w,
        })
    }

    pub fn weight(&self, source: &str, target: &str, edge_type: EdgeType) -> Option<u64> {
        self.edges
            .get(&(source.to_string(), target.to_string(), edge_type))
            .copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }

    /// Number of incident edges (in + out, each typed edge counted once).
    pub fn degree(&self, id: &str) -> usize {
        self.edges
            .keys()
            .filter(|(s, t, _)| s == id || t == id)
            .count()
    }

    /// Sum of incident edge weights; a self-loop counts twice.
    pub fn weighted_degree(&self, id: &str) -> u64 {
        self.edges
            .iter()
            .map(|((s, t, _), &w)| w * (u64::from(s == id) + u64::from(t == id)))
            .sum()
    }
}

fn cluster_text(
    clusters: &BTreeMap<char, FieldClusters>,
    field: char,
    row: usize,
) -> Result<&str, GraphError> {
    clusters
        .get(&field)
        .and_then(|fc| fc.cluster_of(row))
        .map(|c| c.representative_text.as_str())
        .ok_or_else(|| GraphError::Integrity(format!("row {row} has no cluster for field {field}")))
}

/// Chain every row of the given polarity through its field clusters:
/// A→B (recognition), B→C (link), C→D (normative) for normative rows and
/// A→B, B→E (link), E→F (request) for requests. `labels[i]` is the polarity
/// of `rows[i]`.
pub fn build_polarity_graph(
    rows: &[SummaryRow],
    labels: &[Polarity],
    clusters: &BTreeMap<char, FieldClusters>,
    polarity: Polarity,
) -> Result<NarrativeGraph, GraphError> {
    if rows.len() != labels.len() {
        return Err(GraphError::Integrity(format!(
            "{} rows but {} polarity labels",
            rows.len(),
            labels.len()
        )));
    }
    let mut g = NarrativeGraph::new(Some(polarity));
    for (i, row) in rows.iter().enumerate() {
        if labels[i] != polarity {
            continue;
        }
        let chain: [(char, EdgeType); 4] = match row.kind {
            SummaryType::Normative => [
                ('A', EdgeType::Recognition),
                ('B', EdgeType::Link),
                ('C', EdgeType::Normative),
                ('D', EdgeType::Normative),
            ],
            SummaryType::Request => [
                ('A', EdgeType::Recognition),
                ('B', EdgeType::Link),
                ('E', EdgeType::Request),
                ('F', EdgeType::Request),
            ],
        };
        let mut ids = Vec::with_capacity(4);
        for (field, _) in chain {
            let text = cluster_text(clusters, field, i)?;
            ids.push(g.add_node(text, Some(field)));
        }
        for hop in 0..3 {
            g.add_edge(&ids[hop], &ids[hop + 1], chain[hop].1, 1)?;
        }
    }
    Ok(g)
}

/// Keep edges of weight ≥ `min_weight`; nodes that lose every edge go too.
pub fn filter_by_weight(g: &NarrativeGraph, min_weight: u64) -> Result<NarrativeGraph, GraphError> {
    if min_weight == 0 {
        return Err(GraphError::InvalidParameter("min_weight must be >= 1".into()));
    }
    let had_edges: BTreeSet<&str> = g
        .edges
        .keys()
        .flat_map(|(s, t, _)| [s.as_str(), t.as_str()])
        .collect();
    let edges: BTreeMap<_, _> = g
        .edges
        .iter()
        .filter(|(_, &w)| w >= min_weight)
        .map(|(k, &w)| (k.clone(), w))
        .collect();
    let kept: BTreeSet<&str> = edges
        .keys()
        .flat_map(|(s, t, _): &(String, String, EdgeType)| [s.as_str(), t.as_str()])
        .collect();
    let nodes = g
        .nodes
        .iter()
        .filter(|(id, _)| kept.contains(id.as_str()) || !had_edges.contains(id.as_str()))
        .map(|(id, n)| (id.clone(), n.clone()))
        .collect();
    Ok(NarrativeGraph {
        polarity: g.polarity,
        nodes,
        edges,
    })
}

/// Node union with weights summed per `(source, target, edge_type)`.
pub fn union_graph(a: &NarrativeGraph, b: &NarrativeGraph) -> NarrativeGraph {
    let mut out = NarrativeGraph::new(if a.polarity == b.polarity { a.polarity } else { None });
    for n in a.nodes().chain(b.nodes()) {
        out.insert_node(n.clone());
    }
    for (k, &w) in a.edges.iter().chain(&b.edges) {
        *out.edges.entry(k.clone()).or_insert(0) += w;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(&str, &str, u64)]) -> NarrativeGraph {
        let mut g = NarrativeGraph::new(None);
        for (s, t, w) in edges {
            let s = g.add_node(s, None);
            let t = g.add_node(t, None);
            g.add_edge(&s, &t, EdgeType::Link, *w).unwrap();
        }
        g
    }

    #[test]
    fn node_ids_are_stable_and_prefixed() {
        let id = node_id("AI-generated contents");
        assert_eq!(id.len(), 13);
        assert!(id.starts_with('n'));
        assert_eq!(id, node_id("AI-generated contents"));
    }

    #[test]
    fn weight_filter() {
        let g = graph(&[("a", "b", 2), ("b", "c", 1), ("c", "d", 3)]);
        let f = filter_by_weight(&g, 2).unwrap();
        let weights: Vec<u64> = f.edges().map(|e| e.weight).collect();
        assert_eq!(weights.len(), 2);
        assert_eq!(f.node_count(), 4);
        let f3 = filter_by_weight(&g, 3).unwrap();
        assert_eq!(f3.node_count(), 2);
        assert_eq!(filter_by_weight(&g, 1).unwrap(), g);
        assert!(filter_by_weight(&g, 0).is_err());
    }

    #[test]
    fn union_adds_weights() {
        let neg = graph(&[("a", "b", 2)]);
        let pos = graph(&[("a", "b", 1), ("x", "y", 1)]);
        let u = union_graph(&pos, &neg);
        assert_eq!(u.weight(&node_id("a"), &node_id("b"), EdgeType::Link), Some(3));
        assert_eq!(u.node_count(), 4);
        assert_eq!(union_graph(&neg, &NarrativeGraph::new(None)), neg);
    }

    #[test]
    fn missing_endpoint_is_integrity_error() {
        let mut g = NarrativeGraph::new(None);
        assert!(g.add_edge("n1", "n2", EdgeType::Link, 1).is_err());
    }

    #[test]
    fn degrees() {
        let g = graph(&[("a", "b", 2), ("b", "c", 1), ("a", "a", 1)]);
        assert_eq!(g.degree(&node_id("a")), 2);
        assert_eq!(g.weighted_degree(&node_id("a")), 4);
        assert_eq!(g.weighted_degree(&node_id("b")), 3);
    }
}
