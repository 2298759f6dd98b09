//! Stages 1–3: narrative edges from opinion text and their A–F summaries.

pub mod edge;
pub mod parser;
pub mod stages;
pub mod summary;
pub mod validate;

pub use edge::{
    Antecedent, Causal, Claim, ClaimKind, Influence, Normative, Pattern, PatternEdge,
    PerceivedObject, Perception, Request,
};
pub use parser::{
    parse_edge_list, parse_replacement_list, split_reply, EdgeListParse, LineError,
    ReplacementList,
};
pub use stages::{
    chunk_opinion, stage1_extract, stage2_extract, stage3_summarize, ExtractError,
    ExtractSettings, StageOutput, SummaryOutcome,
};
pub use summary::{length_check, parse_summary_reply, SummaryRow, SummaryType, NA};
pub use validate::{
    apply_replacements, normalize, validate_verbatim, RejectReason, Rejection, ValidationReport,
};
