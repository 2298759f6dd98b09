//! The three model-driven extraction stages for a single opinion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::edge::{ClaimKind, Pattern, PatternEdge};
use super::parser::{parse_edge_list, parse_replacement_list, split_reply, ReplacementList};
use super::summary::{length_check, parse_summary_reply, SummaryRow, DEFAULT_LENGTH_LIMIT};
use super::validate::{
    apply_replacements, normalize, retain_verbatim_referents, validate_verbatim, RejectReason,
    Rejection, ValidationReport,
};
use crate::corpus::{split_sentences, Opinion};
use crate::gateway::{Gateway, GatewayError};
use crate::prompts::{PromptSet, TemplateError, TemplateKind};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("opinion {0} has empty text")]
    EmptyInput(String),
    #[error("chunk size must be at least 1")]
    InvalidChunkSize,
    #[error("opinion {opinion_id}: every stage-{stage} reply was unparseable after retries")]
    StageFailure { opinion_id: String, stage: u8 },
    #[error("edge is not a Pattern 5 edge")]
    NotInfluence,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractSettings {
    pub chunk_size: usize,
    /// Re-queries after the first attempt.
    pub retries: u32,
    pub length_limit: usize,
}

impl Default for ExtractSettings {
    fn default() -> Self {
        ExtractSettings {
            chunk_size: 5,
            retries: 2,
            length_limit: DEFAULT_LENGTH_LIMIT,
        }
    }
}

/// Group consecutive sentences, `chunk_size` per chunk (the last may be short).
pub fn chunk_opinion(sentences: &[String], chunk_size: usize) -> Result<Vec<Vec<String>>, ExtractError> {
    if chunk_size == 0 {
        return Err(ExtractError::InvalidChunkSize);
    }
    if sentences.is_empty() {
        return Err(ExtractError::EmptyInput(String::new()));
    }
    Ok(sentences.chunks(chunk_size).map(<[String]>::to_vec).collect())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageOutput {
    pub replacements: ReplacementList,
    pub edges: Vec<PatternEdge>,
    pub report: ValidationReport,
}

struct Query<'a> {
    opinion: &'a Opinion,
    stage: u8,
    template_id: &'a str,
    base_prompt: String,
}

struct QueryResult {
    replacements: ReplacementList,
    report: ValidationReport,
}

impl QueryResult {
    fn unparseable(&self) -> bool {
        self.report.accepted.is_empty()
            && !self.report.rejected.is_empty()
            && self
                .report
                .rejected
                .iter()
                .all(|r| r.reason == RejectReason::Unparseable)
    }
}

fn problem_lines(rejected: &[Rejection]) -> Vec<String> {
    rejected
        .iter()
        .map(|r| format!("{} ({}): {}", r.reason, r.detail, r.raw))
        .collect()
}

/// Query, parse, substitute, validate; re-query with feedback while
/// anything was rejected. Accepted edges accumulate across attempts.
fn run_query(
    q: Query<'_>,
    gateway: &Gateway,
    prompts: &PromptSet,
    retries: u32,
    gate: &dyn Fn(Vec<Pattern>) -> (Vec<Pattern>, Vec<Rejection>),
) -> Result<QueryResult, ExtractError> {
    let mut out = QueryResult {
        replacements: ReplacementList::default(),
        report: ValidationReport::default(),
    };
    let mut prompt = q.base_prompt.clone();
    for attempt in 0..=retries {
        let request = gateway.request(q.template_id, prompt)?;
        let reply = gateway.complete(&request)?;
        let (repl_section, edge_section) = split_reply(&reply);

        let (parsed_repl, mut line_errors) = parse_replacement_list(repl_section);
        let (kept, dropped) = retain_verbatim_referents(&parsed_repl, &q.opinion.text);
        line_errors.extend(dropped);
        out.replacements.extend_unique(&kept);

        let parsed = parse_edge_list(edge_section, q.stage);
        let (edges, mut rejected) = gate(parsed.edges);
        rejected.extend(parsed.rejected);
        let edges = edges
            .into_iter()
            .map(|e| apply_replacements(e, &out.replacements))
            .collect();
        let mut report = validate_verbatim(edges, &q.opinion.text, &out.replacements);
        report.accepted.retain(|e| !out.report.accepted.contains(e));
        report.rejected.extend(rejected);
        report.line_errors.extend(line_errors);

        let problems = problem_lines(&report.rejected);
        out.report.merge(report);
        if problems.is_empty() {
            break;
        }
        log::debug!(
            "opinion {} stage {}: {} rejection(s) on attempt {}",
            q.opinion.id,
            q.stage,
            problems.len(),
            attempt + 1
        );
        prompt = prompts.with_retry_note(&q.base_prompt, attempt + 1, &problems)?;
    }
    Ok(out)
}

fn provenance(edges: Vec<Pattern>, opinion: &Opinion, stage: u8) -> Vec<PatternEdge> {
    edges
        .into_iter()
        .map(|pattern| PatternEdge {
            pattern,
            source_opinion_id: opinion.id.clone(),
            source_stage: stage,
        })
        .collect()
}

/// Stage 1: Patterns 1–4 per chunk of sentences, each chunk queried
/// independently.
pub fn stage1_extract(
    opinion: &Opinion,
    gateway: &Gateway,
    prompts: &PromptSet,
    settings: &ExtractSettings,
) -> Result<StageOutput, ExtractError> {
    if opinion.text.trim().is_empty() {
        return Err(ExtractError::EmptyInput(opinion.id.clone()));
    }
    let sentences = split_sentences(&opinion.text)
        .map_err(|_| ExtractError::EmptyInput(opinion.id.clone()))?;
    let chunks = chunk_opinion(&sentences, settings.chunk_size)?;
    let template = prompts.get(TemplateKind::Stage1);
    let mut out = StageOutput::default();
    let mut unparseable = 0;
    let n_chunks = chunks.len();
    for chunk in chunks {
        let text = chunk.concat();
        let q = Query {
            opinion,
            stage: 1,
            template_id: template.id(),
            base_prompt: template.render(&[("text", text.trim())])?,
        };
        let res = run_query(q, gateway, prompts, settings.retries, &|e| (e, Vec::new()))?;
        if res.unparseable() {
            unparseable += 1;
        }
        out.replacements.extend_unique(&res.replacements);
        let fresh: Vec<Pattern> = res
            .report
            .accepted
            .iter()
            .filter(|e| !out.report.accepted.contains(e))
            .cloned()
            .collect();
        out.report.accepted.extend(fresh);
        out.report.rejected.extend(res.report.rejected);
        out.report.line_errors.extend(res.report.line_errors);
    }
    if unparseable == n_chunks {
        return Err(ExtractError::StageFailure {
            opinion_id: opinion.id.clone(),
            stage: 1,
        });
    }
    out.edges = provenance(out.report.accepted.clone(), opinion, 1);
    Ok(out)
}

/// Serialize Stage-1 edges for the Stage-2 prompt, one per line.
pub fn render_edges(edges: &[PatternEdge]) -> String {
    if edges.is_empty() {
        return "(none)".into();
    }
    edges
        .iter()
        .map(|e| e.pattern.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Label an unlabeled consequent by matching it against the opinion's
/// Stage-1 claims.
pub fn resolve_consequent(edge: &mut Pattern, stage1: &[PatternEdge]) {
    let Pattern::P5(inf) = edge else { return };
    if inf.consequent.kind != ClaimKind::Unresolved {
        return;
    }
    let (t, s) = (normalize(&inf.consequent.target), normalize(&inf.consequent.state));
    let kind = stage1.iter().find_map(|e| match &e.pattern {
        Pattern::P1(n) if normalize(&n.about) == t && normalize(&n.state) == s => {
            Some(ClaimKind::Normative)
        }
        Pattern::P2(r) if normalize(&r.whom) == t && normalize(&r.action) == s => {
            Some(ClaimKind::Request)
        }
        _ => None,
    });
    if let Some(kind) = kind {
        inf.consequent.kind = kind;
    }
}

/// Stage 2: Pattern 5 for the whole opinion, given its Stage-1 edges.
pub fn stage2_extract(
    opinion: &Opinion,
    stage1_edges: &[PatternEdge],
    gateway: &Gateway,
    prompts: &PromptSet,
    settings: &ExtractSettings,
) -> Result<StageOutput, ExtractError> {
    if opinion.text.trim().is_empty() {
        return Err(ExtractError::EmptyInput(opinion.id.clone()));
    }
    let anchored = stage1_edges
        .iter()
        .any(|e| matches!(e.pattern, Pattern::P1(_) | Pattern::P2(_)));
    let template = prompts.get(TemplateKind::Stage2);
    let edges_text = render_edges(stage1_edges);
    let q = Query {
        opinion,
        stage: 2,
        template_id: template.id(),
        base_prompt: template.render(&[("text", &opinion.text), ("edges", &edges_text)])?,
    };
    let gate = |edges: Vec<Pattern>| {
        if anchored {
            let resolved = edges
                .into_iter()
                .map(|mut e| {
                    resolve_consequent(&mut e, stage1_edges);
                    e
                })
                .collect();
            (resolved, Vec::new())
        } else {
            let rejected = edges
                .into_iter()
                .map(|e| Rejection {
                    reason: RejectReason::UnanchoredConsequent,
                    detail: "the opinion has no normative claim or request, so the edge list must be empty".into(),
                    raw: e.to_string(),
                })
                .collect();
            (Vec::new(), rejected)
        }
    };
    let res = run_query(q, gateway, prompts, settings.retries, &gate)?;
    if res.unparseable() {
        return Err(ExtractError::StageFailure {
            opinion_id: opinion.id.clone(),
            stage: 2,
        });
    }
    let edges = provenance(res.report.accepted.clone(), opinion, 2);
    Ok(StageOutput {
        replacements: res.replacements,
        edges,
        report: res.report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum SummaryOutcome {
    Accepted { row: SummaryRow, warnings: Vec<String> },
    Dropped { reason: String, attempts: u32 },
}

/// Stage 3: summarize one Pattern-5 edge into a row, re-asking on an
/// unreadable reply or an NA-rule violation.
pub fn stage3_summarize(
    edge: &PatternEdge,
    edge_index: usize,
    gateway: &Gateway,
    prompts: &PromptSet,
    settings: &ExtractSettings,
) -> Result<SummaryOutcome, ExtractError> {
    let Pattern::P5(inf) = &edge.pattern else {
        return Err(ExtractError::NotInfluence);
    };
    let template = prompts.get(TemplateKind::Stage3);
    let statement1 = inf.antecedent.to_string();
    let statement2 = inf.consequent.to_string();
    let base = template.render(&[("statement1", &statement1), ("statement2", &statement2)])?;
    let mut prompt = base.clone();
    let mut reason = String::new();
    for attempt in 0..=settings.retries {
        let request = gateway.request(template.id(), prompt)?;
        let reply = gateway.complete(&request)?;
        match parse_summary_reply(&reply, &edge.source_opinion_id, edge_index) {
            Ok(row) => {
                let warnings = length_check(&row, settings.length_limit);
                return Ok(SummaryOutcome::Accepted { row, warnings });
            }
            Err(e) => {
                reason = e.to_string();
                prompt = prompts.with_retry_note(&base, attempt + 1, std::slice::from_ref(&reason))?;
            }
        }
    }
    Ok(SummaryOutcome::Dropped {
        reason,
        attempts: settings.retries + 1,
    })
}
