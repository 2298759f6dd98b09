//! Typed edges produced by the extraction stages.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Pattern 1: who, regarding what, should be in what state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Normative {
    pub who: String,
    pub about: String,
    pub state: String,
}

/// Pattern 2: who wants whom to do what.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Request {
    pub who: String,
    pub whom: String,
    pub action: String,
}

/// Pattern 3: what/who is causing what situation for whom.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Causal {
    pub cause: String,
    pub target: String,
    pub situation: String,
}

/// What a perception is about: a bare phrase or a wrapped causal relation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum PerceivedObject {
    #[serde(rename = "phrase")]
    Phrase { text: String },
    #[serde(rename = "P3")]
    Causal(Causal),
}

/// Pattern 4: who perceives what in what way.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Perception {
    pub who: String,
    pub object: PerceivedObject,
    pub perception: String,
}

/// Left side of an influence relation; this is the primary perception.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum Antecedent {
    #[serde(rename = "P3")]
    Causal(Causal),
    #[serde(rename = "P4")]
    Perception(Perception),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClaimKind {
    #[serde(rename = "P1")]
    Normative,
    #[serde(rename = "P2")]
    Request,
    /// Unlabeled tuple that matched no Stage-1 claim.
    #[serde(rename = "claim")]
    Unresolved,
}

/// Right side of an influence relation: a normative claim or a request.
///
/// Models routinely write the consequent as a pair with the subject left
/// implicit (it is the influence relation's `who`); `who` is `None` then.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Claim {
    #[serde(rename = "tag")]
    pub kind: ClaimKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub who: Option<String>,
    pub target: String,
    pub state: String,
}

/// Pattern 5: a causal relation or perception supporting a claim.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Influence {
    pub who: String,
    pub antecedent: Antecedent,
    pub consequent: Claim,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum Pattern {
    P1(Normative),
    P2(Request),
    P3(Causal),
    P4(Perception),
    P5(Influence),
}

impl Pattern {
    pub fn number(&self) -> u8 {
        match self {
            Pattern::P1(_) => 1,
            Pattern::P2(_) => 2,
            Pattern::P3(_) => 3,
            Pattern::P4(_) => 4,
            Pattern::P5(_) => 5,
        }
    }

    /// Every leaf phrase, depth first, left to right.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        match self {
            Pattern::P1(n) => out.extend([&n.who, &n.about, &n.state]),
            Pattern::P2(r) => out.extend([&r.who, &r.whom, &r.action]),
            Pattern::P3(c) => out.extend(causal_leaves(c)),
            Pattern::P4(p) => out.extend(perception_leaves(p)),
            Pattern::P5(i) => {
                out.push(&i.who);
                match &i.antecedent {
                    Antecedent::Causal(c) => out.extend(causal_leaves(c)),
                    Antecedent::Perception(p) => out.extend(perception_leaves(p)),
                }
                out.extend(i.consequent.who.iter());
                out.extend([&i.consequent.target, &i.consequent.state]);
            }
        }
        out.into_iter().map(String::as_str).collect()
    }

    /// Mutable access to every leaf, in the same order as [`Pattern::leaves`].
    pub fn leaves_mut(&mut self) -> Vec<&mut String> {
        let mut out = Vec::new();
        match self {
            Pattern::P1(n) => out.extend([&mut n.who, &mut n.about, &mut n.state]),
            Pattern::P2(r) => out.extend([&mut r.who, &mut r.whom, &mut r.action]),
            Pattern::P3(c) => out.extend(causal_leaves_mut(c)),
            Pattern::P4(p) => out.extend(perception_leaves_mut(p)),
            Pattern::P5(i) => {
                out.push(&mut i.who);
                match &mut i.antecedent {
                    Antecedent::Causal(c) => out.extend(causal_leaves_mut(c)),
                    Antecedent::Perception(p) => out.extend(perception_leaves_mut(p)),
                }
                out.extend(i.consequent.who.iter_mut());
                out.extend([&mut i.consequent.target, &mut i.consequent.state]);
            }
        }
        out
    }
}

fn causal_leaves(c: &Causal) -> [&String; 3] {
    [&c.cause, &c.target, &c.situation]
}

fn causal_leaves_mut(c: &mut Causal) -> [&mut String; 3] {
    [&mut c.cause, &mut c.target, &mut c.situation]
}

fn perception_leaves(p: &Perception) -> Vec<&String> {
    let mut out = vec![&p.who];
    match &p.object {
        PerceivedObject::Phrase { text } => out.push(text),
        PerceivedObject::Causal(c) => out.extend(causal_leaves(c)),
    }
    out.push(&p.perception);
    out
}

fn perception_leaves_mut(p: &mut Perception) -> Vec<&mut String> {
    let mut out = vec![&mut p.who];
    match &mut p.object {
        PerceivedObject::Phrase { text } => out.push(text),
        PerceivedObject::Causal(c) => out.extend(causal_leaves_mut(c)),
    }
    out.push(&mut p.perception);
    out
}

/// An accepted edge with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatternEdge {
    #[serde(flatten)]
    pub pattern: Pattern,
    pub source_opinion_id: String,
    pub source_stage: u8,
}

// Edge-list notation, the same surface syntax the parser reads.

const NEEDS_QUOTES: &[char] = &[',', '，', '、', '(', ')', '（', '）', '"', '“', '「', '\'', '‘', '『'];

fn write_leaf(f: &mut fmt::Formatter<'_>, leaf: &str) -> fmt::Result {
    let risky = leaf.contains(NEEDS_QUOTES)
        || leaf != leaf.trim()
        || leaf.is_empty()
        || super::parser::starts_with_keyword(leaf);
    if !risky {
        f.write_str(leaf)
    } else if !leaf.contains('”') {
        write!(f, "“{leaf}”")
    } else {
        write!(f, "「{leaf}」")
    }
}

fn write_causal(f: &mut fmt::Formatter<'_>, c: &Causal) -> fmt::Result {
    f.write_str("(")?;
    write_leaf(f, &c.cause)?;
    f.write_str(", ")?;
    write_leaf(f, &c.target)?;
    f.write_str(", ")?;
    write_leaf(f, &c.situation)?;
    f.write_str(")")
}

fn write_perception(f: &mut fmt::Formatter<'_>, p: &Perception) -> fmt::Result {
    f.write_str("(")?;
    write_leaf(f, &p.who)?;
    f.write_str(", ")?;
    match &p.object {
        PerceivedObject::Phrase { text } => write_leaf(f, text)?,
        PerceivedObject::Causal(c) => write_causal(f, c)?,
    }
    f.write_str(", ")?;
    write_leaf(f, &p.perception)?;
    f.write_str(")")
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ClaimKind::Normative => f.write_str("Pattern1 ")?,
            ClaimKind::Request => f.write_str("Pattern2 ")?,
            ClaimKind::Unresolved => {}
        }
        f.write_str("(")?;
        if let Some(who) = &self.who {
            write_leaf(f, who)?;
            f.write_str(", ")?;
        }
        write_leaf(f, &self.target)?;
        f.write_str(", ")?;
        write_leaf(f, &self.state)?;
        f.write_str(")")
    }
}

impl fmt::Display for Antecedent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Antecedent::Causal(c) => write_causal(f, c),
            Antecedent::Perception(p) => {
                f.write_str("Pattern4 ")?;
                write_perception(f, p)
            }
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pattern{} ", self.number())?;
        match self {
            Pattern::P1(n) => {
                f.write_str("(")?;
                write_leaf(f, &n.who)?;
                f.write_str(", ")?;
                write_leaf(f, &n.about)?;
                f.write_str(", ")?;
                write_leaf(f, &n.state)?;
                f.write_str(")")
            }
            Pattern::P2(r) => {
                f.write_str("(")?;
                write_leaf(f, &r.who)?;
                f.write_str(", ")?;
                write_leaf(f, &r.whom)?;
                f.write_str(", ")?;
                write_leaf(f, &r.action)?;
                f.write_str(")")
            }
            Pattern::P3(c) => write_causal(f, c),
            Pattern::P4(p) => write_perception(f, p),
            Pattern::P5(i) => {
                f.write_str("(")?;
                write_leaf(f, &i.who)?;
                write!(f, ", {}, {})", i.antecedent, i.consequent)
            }
        }
    }
}
