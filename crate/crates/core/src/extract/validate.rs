//! Pronoun substitution and the verbatim-phrase check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::edge::Pattern;
use super::parser::{LineError, ReplacementList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    NonVerbatimPhrase,
    BadArity,
    BadNesting,
    Unparseable,
    /// Stage-2 reply for an opinion with no normative claim or request.
    UnanchoredConsequent,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::NonVerbatimPhrase => "non-verbatim-phrase",
            RejectReason::BadArity => "bad-arity",
            RejectReason::BadNesting => "bad-nesting",
            RejectReason::Unparseable => "unparseable",
            RejectReason::UnanchoredConsequent => "unanchored-consequent",
        }
    }
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub reason: RejectReason,
    pub detail: String,
    /// The edge as it appeared in the reply (or as re-serialized after typing).
    pub raw: String,
}

/// Outcome of parsing and validating one or more replies.
///
/// Every parsed edge ends up either accepted or rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub accepted: Vec<Pattern>,
    pub rejected: Vec<Rejection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub line_errors: Vec<LineError>,
}

impl ValidationReport {
    pub fn parsed(&self) -> usize {
        self.accepted.len() + self.rejected.len()
    }

    pub fn counts(&self) -> BTreeMap<RejectReason, usize> {
        let mut out = BTreeMap::new();
        for r in &self.rejected {
            *out.entry(r.reason).or_insert(0) += 1;
        }
        out
    }

    pub fn count(&self, reason: RejectReason) -> usize {
        self.rejected.iter().filter(|r| r.reason == reason).count()
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.accepted.extend(other.accepted);
        self.rejected.extend(other.rejected);
        self.line_errors.extend(other.line_errors);
    }
}

/// Collapse whitespace runs (ideographic space included) to one ASCII space
/// and trim.
pub fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split(char::is_whitespace).filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Tokens the prompts tell the model to introduce.
pub fn is_exempt(leaf: &str) -> bool {
    let t = leaf.trim();
    t.eq_ignore_ascii_case("author") || t == "筆者" || t == "NA"
}

/// Whole-leaf substitution, first matching entry wins.
pub fn apply_replacements(mut edge: Pattern, replacements: &ReplacementList) -> Pattern {
    for leaf in edge.leaves_mut() {
        let key = leaf.trim();
        if let Some((_, referent)) = replacements.entries.iter().find(|(p, _)| p.trim() == key) {
            *leaf = referent.clone();
        }
    }
    edge
}

/// Drop entries whose referent is not verbatim in `opinion_text`.
pub fn retain_verbatim_referents(
    list: &ReplacementList,
    opinion_text: &str,
) -> (ReplacementList, Vec<LineError>) {
    let text = normalize(opinion_text);
    let mut kept = ReplacementList::default();
    let mut dropped = Vec::new();
    for (i, (pronoun, referent)) in list.entries.iter().enumerate() {
        if text.contains(&normalize(referent)) {
            kept.entries.push((pronoun.clone(), referent.clone()));
        } else {
            dropped.push(LineError {
                line: i,
                text: format!("{pronoun} = {referent}"),
                message: "referent does not occur in the opinion text".into(),
            });
        }
    }
    (kept, dropped)
}

/// Split `edges` into those whose every leaf is exempt, verbatim in the
/// opinion, or a listed referent, and those rejected as non-verbatim.
pub fn validate_verbatim(
    edges: Vec<Pattern>,
    opinion_text: &str,
    replacements: &ReplacementList,
) -> ValidationReport {
    let text = normalize(opinion_text);
    let referents: Vec<String> = replacements.referents().map(normalize).collect();
    let mut report = ValidationReport::default();
    for edge in edges {
        let failing: Vec<&str> = edge
            .leaves()
            .into_iter()
            .filter(|leaf| {
                let n = normalize(leaf);
                !(is_exempt(leaf) || (!n.is_empty() && text.contains(&n)) || referents.contains(&n))
            })
            .collect();
        if failing.is_empty() {
            report.accepted.push(edge);
        } else {
            report.rejected.push(Rejection {
                reason: RejectReason::NonVerbatimPhrase,
                detail: format!("not found in the opinion text: {failing:?}"),
                raw: edge.to_string(),
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::edge::Causal;

    fn p3(a: &str, b: &str, c: &str) -> Pattern {
        Pattern::P3(Causal {
            cause: a.into(),
            target: b.into(),
            situation: c.into(),
        })
    }

    fn list(entries: &[(&str, &str)]) -> ReplacementList {
        ReplacementList {
            entries: entries
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        }
    }

    #[test]
    fn normalize_whitespace() {
        assert_eq!(normalize("  a\u{3000}\u{3000}b \n\tc "), "a b c");
        assert_eq!(normalize(""), "");
    }

    #[test]
    fn replacement_substitutes_whole_leaf() {
        let l = list(&[("ここでは", "画像系の懸念点"), ("ここでは", "other")]);
        let e = apply_replacements(p3("ここでは", "ここではない", "x"), &l);
        assert_eq!(e, p3("画像系の懸念点", "ここではない", "x"));
        assert_eq!(apply_replacements(p3("a", "b", "c"), &l), p3("a", "b", "c"));
    }

    #[test]
    fn exemptions_and_substrings() {
        let text = "生成AIは便利だ。 But   it worries me.";
        let r = validate_verbatim(
            vec![
                p3("Author", "筆者", "生成AI"),
                p3("NA", "author", "But it worries"),
                p3("生成AIX", "a", "b"),
            ],
            text,
            &ReplacementList::default(),
        );
        assert_eq!(r.accepted.len(), 2);
        assert_eq!(r.count(RejectReason::NonVerbatimPhrase), 1);
        assert_eq!(r.parsed(), 3);
    }

    #[test]
    fn referent_leaf_passes() {
        let l = list(&[("it", "the new rule")]);
        let r = validate_verbatim(vec![p3("the new rule", "Author", "NA")], "xyz", &l);
        assert_eq!(r.accepted.len(), 1);
    }

    #[test]
    fn non_verbatim_referents_dropped() {
        let l = list(&[("it", "the rule"), ("this", "invented")]);
        let (kept, dropped) = retain_verbatim_referents(&l, "I like the  rule.");
        assert_eq!(kept.entries.len(), 1);
        assert_eq!(dropped.len(), 1);
    }
}
