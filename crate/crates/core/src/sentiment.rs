//! Stance scoring on [0, 1] and the threshold split into positive/negative.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Opinion;
use crate::gateway::{Gateway, GatewayError};
use crate::prompts::{PromptSet, TemplateError, TemplateKind};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("opinion {0} has empty text")]
    EmptyInput(String),
    #[error("could not read a score for opinion {opinion_id} after {attempts} attempts; last reply: {raw:?}")]
    ExtractionFailure {
        opinion_id: String,
        attempts: u32,
        raw: String,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        }
    }
}

impl std::fmt::Display for Polarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Strictly above the threshold is positive; a tie is negative.
pub fn label_for(score: f64, threshold: f64) -> Polarity {
    if score > threshold {
        Polarity::Positive
    } else {
        Polarity::Negative
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarityScore {
    pub opinion_id: String,
    pub score: f64,
    pub label: Polarity,
}

impl PolarityScore {
    pub fn new(opinion_id: impl Into<String>, score: f64, threshold: f64) -> Self {
        let score = score.clamp(0.0, 1.0);
        PolarityScore {
            opinion_id: opinion_id.into(),
            score,
            label: label_for(score, threshold),
        }
    }
}

static DECIMAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)").expect("valid regex"));

/// First decimal literal in a model reply, clamped to [0, 1].
pub fn parse_score_reply(reply: &str) -> Option<f64> {
    let raw: f64 = DECIMAL.find(reply)?.as_str().parse().ok()?;
    if !raw.is_finite() {
        return None;
    }
    let clamped = raw.clamp(0.0, 1.0);
    if clamped != raw {
        log::info!("clamped out-of-range score {raw} to {clamped}");
    }
    Some(clamped)
}

/// Ask the model for a stance score, re-asking up to `retries` times when
/// the reply has no number in it.
pub fn score_polarity(
    opinion: &Opinion,
    gateway: &Gateway,
    prompts: &PromptSet,
    retries: u32,
    threshold: f64,
) -> Result<PolarityScore, SentimentError> {
    if opinion.text.is_empty() {
        return Err(SentimentError::EmptyInput(opinion.id.clone()));
    }
    let template = prompts.get(TemplateKind::Polarity);
    let base = template.render(&[("text", &opinion.text)])?;
    let mut prompt = base.clone();
    let mut last = String::new();
    for attempt in 0..=retries {
        let request = gateway.request(template.id(), prompt.clone())?;
        let reply = gateway.complete(&request)?;
        if let Some(score) = parse_score_reply(&reply) {
            return Ok(PolarityScore::new(&opinion.id, score, threshold));
        }
        log::warn!("opinion {}: unparseable score reply on attempt {}", opinion.id, attempt + 1);
        prompt = prompts.with_retry_note(
            &base,
            attempt + 1,
            &[format!("the reply {reply:?} did not contain a number between 0 and 1")],
        )?;
        last = reply;
    }
    Err(SentimentError::ExtractionFailure {
        opinion_id: opinion.id.clone(),
        attempts: retries + 1,
        raw: last,
    })
}

/// Partition opinion ids by label, preserving input order.
pub fn split_by_polarity(scores: &[PolarityScore], threshold: f64) -> (Vec<String>, Vec<String>) {
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for s in scores {
        match label_for(s.score, threshold) {
            Polarity::Positive => positive.push(s.opinion_id.clone()),
            Polarity::Negative => negative.push(s.opinion_id.clone()),
        }
    }
    (positive, negative)
}

/// Equal-width histogram over [0, 1].
///
/// The first bin is `[0, 1/bins]`, every later bin `(i/bins, (i+1)/bins]`.
/// Upper-closed bins put a score exactly on a boundary in the lower bin,
/// matching the tie rule of [`label_for`]: with two bins the counts are
/// `[negative, positive]` at the default threshold.
pub fn polarity_histogram(scores: &[f64], bins: usize) -> Result<Vec<usize>, SentimentError> {
    if bins == 0 {
        return Err(SentimentError::InvalidParameter("bins must be >= 1".into()));
    }
    let mut counts = vec![0usize; bins];
    let b = bins as f64;
    for &s in scores {
        if !(0.0..=1.0).contains(&s) {
            return Err(SentimentError::InvalidParameter(format!(
                "score {s} outside [0, 1]"
            )));
        }
        let mut idx = ((s * b).ceil() as isize - 1).clamp(0, bins as isize - 1) as usize;
        // correct rounding at bin boundaries
        while idx > 0 && s <= idx as f64 / b {
            idx -= 1;
        }
        while idx + 1 < bins && s > (idx + 1) as f64 / b {
            idx += 1;
        }
        counts[idx] += 1;
    }
    Ok(counts)
}

/// Histogram rows `(bin_start, bin_end, count)` for CSV export.
pub fn histogram_rows(counts: &[usize]) -> Vec<(f64, f64, usize)> {
    let b = counts.len() as f64;
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (i as f64 / b, (i + 1) as f64 / b, c))
        .collect()
}
