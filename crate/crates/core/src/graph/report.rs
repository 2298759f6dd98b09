//! Side-by-side view of the busiest nodes in both polarity graphs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{union_graph, CommunityPartition, EdgeType, NarrativeGraph};
use crate::sentiment::Polarity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Out,
    In,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IncidentEdge {
    pub direction: Direction,
    pub neighbor: String,
    pub neighbor_text: String,
    pub edge_type: EdgeType,
    pub weight: u64,
}

/// One top-ranked node with its edges in each polarity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompareRow {
    pub rank: usize,
    pub node: String,
    pub representative_text: String,
    pub union_degree: u64,
    pub community: Option<usize>,
    pub positive: Vec<IncidentEdge>,
    pub negative: Vec<IncidentEdge>,
}

fn incident(g: &NarrativeGraph, id: &str) -> Vec<IncidentEdge> {
    let text = |n: &str| g.node(n).map(|x| x.text.clone()).unwrap_or_default();
    let mut out: Vec<IncidentEdge> = g
        .edges()
        .flat_map(|e| {
            let mut v = Vec::new();
            if e.source == id {
                v.push(IncidentEdge {
                    direction: Direction::Out,
                    neighbor_text: text(&e.target),
                    neighbor: e.target.clone(),
                    edge_type: e.edge_type,
                    weight: e.weight,
                });
            }
            if e.target == id {
                v.push(IncidentEdge {
                    direction: Direction::In,
                    neighbor_text: text(&e.source),
                    neighbor: e.source.clone(),
                    edge_type: e.edge_type,
                    weight: e.weight,
                });
            }
            v
        })
        .collect();
    out.sort();
    out
}

/// The `k` union nodes of highest weighted degree (ties by node id), each
/// with its incident edges listed separately per polarity.
pub fn compare_report(
    pos: &NarrativeGraph,
    neg: &NarrativeGraph,
    communities: Option<&CommunityPartition>,
    k: usize,
) -> Vec<CompareRow> {
    let union = union_graph(pos, neg);
    let mut ranked: Vec<(u64, &str)> = union
        .node_ids()
        .map(|id| (union.weighted_degree(id), id))
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
    ranked
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (degree, id))| CompareRow {
            rank: i + 1,
            node: id.to_string(),
            representative_text: union.node(id).map(|n| n.text.clone()).unwrap_or_default(),
            union_degree: degree,
            community: communities.and_then(|c| c.assignment.get(id).copied()),
            positive: incident(pos, id),
            negative: incident(neg, id),
        })
        .collect()
}

pub const REPORT_HEADER: [&str; 8] = [
    "rank",
    "node",
    "representative_text",
    "polarity",
    "direction",
    "neighbor",
    "edge_type",
    "weight",
];

/// One line per incident edge; a polarity with no edges gets one line with
/// the edge columns empty.
pub fn write_report_csv<W: Write>(rows: &[CompareRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(REPORT_HEADER)?;
    for row in rows {
        let rank = row.rank.to_string();
        for (polarity, edges) in [(Polarity::Positive, &row.positive), (Polarity::Negative, &row.negative)] {
            if edges.is_empty() {
                out.write_record([
                    rank.as_str(),
                    &row.node,
                    &row.representative_text,
                    polarity.as_str(),
                    "",
                    "",
                    "",
                    "",
                ])?;
            }
            for e in edges {
                let direction = match e.direction {
                    Direction::Out => "out",
                    Direction::In => "in",
                };
                out.write_record([
                    rank.as_str(),
                    &row.node,
                    &row.representative_text,
                    polarity.as_str(),
                    direction,
                    &e.neighbor_text,
                    e.edge_type.as_str(),
                    &e.weight.to_string(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
