//! GEXF, node-link JSON and DOT writers. Output is ordered by node id and
//! edge key, so equal inputs give byte-identical files.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{CommunityPartition, EdgeType, GraphError, NarrativeGraph, Node, Positions};
use crate::sentiment::Polarity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Gexf,
    Json,
    Dot,
}

impl ExportFormat {
    pub const ALL: [ExportFormat; 3] = [ExportFormat::Gexf, ExportFormat::Json, ExportFormat::Dot];

    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Gexf => "gexf",
            ExportFormat::Json => "json",
            ExportFormat::Dot => "dot",
        }
    }
}

const PALETTE: [(u8, u8, u8); 12] = [
    (31, 119, 180),
    (255, 127, 14),
    (44, 160, 44),
    (214, 39, 40),
    (148, 103, 189),
    (140, 86, 75),
    (227, 119, 194),
    (127, 127, 127),
    (188, 189, 34),
    (23, 190, 207),
    (174, 199, 232),
    (255, 187, 120),
];

pub fn community_color(community: usize) -> (u8, u8, u8) {
    PALETTE[community % PALETTE.len()]
}

fn lookup_position(positions: Option<&Positions>, id: &str) -> Result<Option<(f64, f64)>, GraphError> {
    match positions {
        None => Ok(None),
        Some(p) => p
            .get(id)
            .copied()
            .map(Some)
            .ok_or_else(|| GraphError::Integrity(format!("no position for node {id}"))),
    }
}

fn lookup_community(
    communities: Option<&CommunityPartition>,
    id: &str,
) -> Result<Option<usize>, GraphError> {
    match communities {
        None => Ok(None),
        Some(c) => c
            .assignment
            .get(id)
            .copied()
            .map(Some)
            .ok_or_else(|| GraphError::Integrity(format!("no community for node {id}"))),
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\t' | '\n' | '\r' => out.push(c),
            c if (c as u32) < 0x20 => {}
            c => out.push(c),
        }
    }
    out
}

fn fields_label(node: &Node) -> String {
    node.fields.iter().collect()
}

/// GEXF 1.3 with viz position, size and color.
pub fn to_gexf(
    g: &NarrativeGraph,
    positions: Option<&Positions>,
    communities: Option<&CommunityPartition>,
) -> Result<String, GraphError> {
    let mut s = String::new();
    let w = &mut s;
    // writing into a String cannot fail
    let _ = writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        w,
        r#"<gexf xmlns="http://gexf.net/1.3" xmlns:viz="http://gexf.net/1.3/viz" version="1.3">"#
    );
    let desc = g.polarity.map_or("union", Polarity::as_str);
    let _ = writeln!(
        w,
        "  <meta>\n    <creator>narrative-forge</creator>\n    <description>{desc}</description>\n  </meta>"
    );
    let _ = writeln!(w, r#"  <graph defaultedgetype="directed" mode="static">"#);
    let _ = writeln!(w, r#"    <attributes class="node">"#);
    let _ = writeln!(w, r#"      <attribute id="community" title="community" type="integer"/>"#);
    let _ = writeln!(w, r#"      <attribute id="fields" title="fields" type="string"/>"#);
    let _ = writeln!(w, "    </attributes>");
    let _ = writeln!(w, r#"    <attributes class="edge">"#);
    let _ = writeln!(w, r#"      <attribute id="edge_type" title="edge_type" type="string"/>"#);
    let _ = writeln!(w, "    </attributes>");
    let _ = writeln!(w, "    <nodes>");
    for node in g.nodes() {
        let community = lookup_community(communities, &node.id)?;
        let position = lookup_position(positions, &node.id)?;
        let _ = writeln!(
            w,
            r#"      <node id="{}" label="{}">"#,
            node.id,
            xml_escape(&node.text)
        );
        let _ = writeln!(w, "        <attvalues>");
        if let Some(c) = community {
            let _ = writeln!(w, r#"          <attvalue for="community" value="{c}"/>"#);
        }
        let _ = writeln!(
            w,
            r#"          <attvalue for="fields" value="{}"/>"#,
            fields_label(node)
        );
        let _ = writeln!(w, "        </attvalues>");
        let size = g.weighted_degree(&node.id).max(1);
        let _ = writeln!(w, r#"        <viz:size value="{size}"/>"#);
        if let Some((x, y)) = position {
            let _ = writeln!(w, r#"        <viz:position x="{x}" y="{y}" z="0"/>"#);
        }
        if let Some(c) = community {
            let (r, gr, b) = community_color(c);
            let _ = writeln!(w, r#"        <viz:color r="{r}" g="{gr}" b="{b}"/>"#);
        }
        let _ = writeln!(w, "      </node>");
    }
    let _ = writeln!(w, "    </nodes>");
    let _ = writeln!(w, "    <edges>");
    for (i, e) in g.edges().enumerate() {
        let ty = e.edge_type.as_str();
        let _ = writeln!(
            w,
            r#"      <edge id="{i}" source="{}" target="{}" kind="{ty}" weight="{}">"#,
            e.source, e.target, e.weight
        );
        let _ = writeln!(
            w,
            r#"        <attvalues>
          <attvalue for="edge_type" value="{ty}"/>
        </attvalues>
      </edge>"#
        );
    }
    let _ = writeln!(w, "    </edges>");
    let _ = writeln!(w, "  </graph>");
    let _ = writeln!(w, "</gexf>");
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonNode {
    pub id: String,
    pub label: String,
    pub fields: Vec<char>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub community: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonLink {
    pub source: String,
    pub target: String,
    pub edge_type: EdgeType,
    pub weight: u64,
}

/// Node-link document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLinkGraph {
    pub directed: bool,
    pub polarity: Option<Polarity>,
    pub nodes: Vec<JsonNode>,
    pub links: Vec<JsonLink>,
}

pub fn to_node_link(
    g: &NarrativeGraph,
    positions: Option<&Positions>,
    communities: Option<&CommunityPartition>,
) -> Result<NodeLinkGraph, GraphError> {
    let mut nodes = Vec::with_capacity(g.node_count());
    for node in g.nodes() {
        let position = lookup_position(positions, &node.id)?;
        nodes.push(JsonNode {
            id: node.id.clone(),
            label: node.text.clone(),
            fields: node.fields.iter().copied().collect(),
            community: lookup_community(communities, &node.id)?,
            x: position.map(|p| p.0),
            y: position.map(|p| p.1),
        });
    }
    let links = g
        .edges()
        .map(|e| JsonLink {
            source: e.source,
            target: e.target,
            edge_type: e.edge_type,
            weight: e.weight,
        })
        .collect();
    Ok(NodeLinkGraph {
        directed: true,
        polarity: g.polarity,
        nodes,
        links,
    })
}

pub fn to_json(
    g: &NarrativeGraph,
    positions: Option<&Positions>,
    communities: Option<&CommunityPartition>,
) -> Result<String, GraphError> {
    let doc = to_node_link(g, positions, communities)?;
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| GraphError::Integrity(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Rebuild a graph (and any positions) from a node-link document.
pub fn from_json(text: &str) -> Result<(NarrativeGraph, Positions), GraphError> {
    let doc: NodeLinkGraph =
        serde_json::from_str(text).map_err(|e| GraphError::Integrity(e.to_string()))?;
    let mut g = NarrativeGraph::new(doc.polarity);
    let mut positions = Positions::new();
    for n in doc.nodes {
        if let (Some(x), Some(y)) = (n.x, n.y) {
            positions.insert(n.id.clone(), (x, y));
        }
        g.insert_node(Node {
            id: n.id,
            text: n.label,
            fields: n.fields.into_iter().collect(),
        });
    }
    for l in doc.links {
        g.add_edge(&l.source, &l.target, l.edge_type, l.weight)?;
    }
    Ok((g, positions))
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}

/// Graphviz digraph without positions.
pub fn to_dot(g: &NarrativeGraph, communities: Option<&CommunityPartition>) -> Result<String, GraphError> {
    let mut s = String::new();
    let name = g.polarity.map_or("union", Polarity::as_str);
    let _ = writeln!(s, "digraph {name} {{");
    for node in g.nodes() {
        let _ = write!(s, "  \"{}\" [label=\"{}\"", node.id, dot_escape(&node.text));
        if let Some(c) = lookup_community(communities, &node.id)? {
            let (r, gr, b) = community_color(c);
            let _ = write!(s, ", community={c}, color=\"#{r:02x}{gr:02x}{b:02x}\"");
        }
        let _ = writeln!(s, "];");
    }
    for e in g.edges() {
        let _ = writeln!(
            s,
            "  \"{}\" -> \"{}\" [label=\"{}\", weight={}];",
            e.source,
            e.target,
            e.edge_type.as_str(),
            e.weight
        );
    }
    let _ = writeln!(s, "}}");
    Ok(s)
}

pub fn export_graph(
    g: &NarrativeGraph,
    positions: Option<&Positions>,
    communities: Option<&CommunityPartition>,
    format: ExportFormat,
) -> Result<String, GraphError> {
    match format {
        ExportFormat::Gexf => to_gexf(g, positions, communities),
        ExportFormat::Json => to_json(g, positions, communities),
        ExportFormat::Dot => to_dot(g, communities),
    }
}
