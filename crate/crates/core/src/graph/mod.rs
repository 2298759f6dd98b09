//! Polarity-split narrative graphs, communities, layout and export.

mod community;
mod export;
mod layout;
mod model;
mod report;

use thiserror::Error;

pub use community::{detect_communities, modularity, CommunityPartition, Projection};
pub use export::{
    community_color, export_graph, from_json, to_dot, to_gexf, to_json, to_node_link,
    ExportFormat, JsonLink, JsonNode, NodeLinkGraph,
};
pub use layout::{
    circle_positions, layout_forceatlas2, shared_layout, ForceAtlas2, LayoutParams, Positions,
};
pub use model::{
    build_polarity_graph, filter_by_weight, node_id, union_graph, Edge, EdgeType, NarrativeGraph,
    Node,
};
pub use report::{
    compare_report, write_report_csv, CompareRow, Direction, IncidentEdge, REPORT_HEADER,
};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph integrity: {0}")]
    Integrity(String),
    #[error("modularity is undefined for a graph without edge weight")]
    UndefinedModularity,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
