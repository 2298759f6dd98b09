//! Edge-list and replacement-list parsing for model replies.
//!
//! Grammar (whitespace insignificant between tokens):
//!
//! ```text
//! edge   := KEYWORD tuple
//! tuple  := OPEN item (SEP item)* CLOSE
//! item   := KEYWORD tuple | tuple | PHRASE
//! ```
//!
//! `KEYWORD` is `Pattern<n>` with an optional colon, `OPEN`/`CLOSE` are
//! ASCII or full-width parentheses and `SEP` is `,`, `，` or `、`. A phrase is
//! either quoted (`“…”`, `「…」`, `"…"`, `'…'`, `‘…’`, `『…』`) and may then
//! contain separators, or runs unquoted to the next separator, parenthesis
//! or line break. Edges that fail the grammar are skipped and recorded; the
//! scanner resumes on the next line.

use std::sync::LazyLock;

use regex::Regex;

use super::edge::{
    Antecedent, Causal, Claim, ClaimKind, Influence, Normative, Pattern, PerceivedObject,
    Perception, Request,
};
use super::validate::{RejectReason, Rejection};

const MAX_DEPTH: usize = 6;

static EDGE_START: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)pattern[ \t]*[0-9０-９]+[ \t]*[:：]?[ \t]*[(（]").expect("valid regex")
});

static KEYWORD_AT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?i)pattern[ \t]*([0-9０-９]+)[ \t]*[:：]?[ \t]*[(（]").expect("valid regex")
});

pub(crate) fn starts_with_keyword(s: &str) -> bool {
    KEYWORD_AT.is_match(s)
}

fn closing_quote(open: char) -> Option<char> {
    match open {
        '"' => Some('"'),
        '“' => Some('”'),
        '「' => Some('」'),
        '『' => Some('』'),
        '\'' => Some('\''),
        '‘' => Some('’'),
        _ => None,
    }
}

fn is_sep(c: char) -> bool {
    matches!(c, ',' | '，' | '、')
}

fn is_open(c: char) -> bool {
    matches!(c, '(' | '（')
}

fn is_close(c: char) -> bool {
    matches!(c, ')' | '）')
}

fn parse_digits(s: &str) -> Option<u32> {
    let mut n: u32 = 0;
    for c in s.chars() {
        let d = match c {
            '0'..='9' => c as u32 - '0' as u32,
            '０'..='９' => c as u32 - '０' as u32,
            _ => return None,
        };
        n = n.checked_mul(10)?.checked_add(d)?;
    }
    Some(n)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Keyword(u32),
    Open,
    Close,
    Sep,
    Phrase(String),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    peeked: Option<(Tok, usize)>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, pos: usize) -> Self {
        Lexer {
            src,
            pos,
            peeked: None,
        }
    }

    fn peek(&mut self) -> Result<&Tok, String> {
        if self.peeked.is_none() {
            let tok = self.lex()?;
            self.peeked = Some((tok, self.pos));
        }
        Ok(&self.peeked.as_ref().expect("peeked").0)
    }

    fn next(&mut self) -> Result<Tok, String> {
        match self.peeked.take() {
            Some((tok, _)) => Ok(tok),
            None => self.lex(),
        }
    }

    fn lex(&mut self) -> Result<Tok, String> {
        let rest = &self.src[self.pos..];
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
        let Some(c) = trimmed.chars().next() else {
            return Ok(Tok::End);
        };
        if is_open(c) {
            self.pos += c.len_utf8();
            return Ok(Tok::Open);
        }
        if is_close(c) {
            self.pos += c.len_utf8();
            return Ok(Tok::Close);
        }
        if is_sep(c) {
            self.pos += c.len_utf8();
            return Ok(Tok::Sep);
        }
        if let Some(caps) = KEYWORD_AT.captures(trimmed) {
            let whole = caps.get(0).expect("match");
            // leave the opening parenthesis for the tuple rule
            let paren_len = whole.as_str().chars().last().map_or(0, char::len_utf8);
            let n = parse_digits(&caps[1]).ok_or("pattern number too large")?;
            self.pos += whole.end() - paren_len;
            return Ok(Tok::Keyword(n));
        }
        if let Some(close) = closing_quote(c) {
            let body_start = self.pos + c.len_utf8();
            let body = &self.src[body_start..];
            let end = body
                .find(close)
                .ok_or_else(|| format!("unterminated quote {c}"))?;
            self.pos = body_start + end + close.len_utf8();
            return Ok(Tok::Phrase(body[..end].trim().to_string()));
        }
        let end = trimmed
            .find(|ch: char| is_sep(ch) || is_open(ch) || is_close(ch) || ch == '\n')
            .unwrap_or(trimmed.len());
        self.pos += end;
        Ok(Tok::Phrase(trimmed[..end].trim().to_string()))
    }
}

/// Untyped parse tree of one edge.
#[derive(Debug, Clone, PartialEq)]
enum Item {
    Phrase(String),
    Tuple { label: Option<u32>, items: Vec<Item> },
}

fn parse_tuple(lx: &mut Lexer<'_>, label: Option<u32>, depth: usize) -> Result<Item, String> {
    if depth > MAX_DEPTH {
        return Err("tuples nested too deeply".into());
    }
    match lx.next()? {
        Tok::Open => {}
        other => return Err(format!("expected `(`, found {other:?}")),
    }
    let mut items = vec![parse_item(lx, depth)?];
    loop {
        match lx.next()? {
            Tok::Sep => items.push(parse_item(lx, depth)?),
            Tok::Close => return Ok(Item::Tuple { label, items }),
            Tok::End => return Err("missing `)`".into()),
            other => return Err(format!("expected `,` or `)`, found {other:?}")),
        }
    }
}

fn parse_item(lx: &mut Lexer<'_>, depth: usize) -> Result<Item, String> {
    match lx.peek()?.clone() {
        Tok::Keyword(n) => {
            lx.next()?;
            parse_tuple(lx, Some(n), depth + 1)
        }
        Tok::Open => parse_tuple(lx, None, depth + 1),
        Tok::Phrase(s) => {
            lx.next()?;
            if s.is_empty() {
                return Err("empty phrase".into());
            }
            Ok(Item::Phrase(s))
        }
        Tok::Sep | Tok::Close => Err("empty item".into()),
        Tok::End => Err("unexpected end of input".into()),
    }
}

fn parse_edge(lx: &mut Lexer<'_>) -> Result<Item, String> {
    match lx.next()? {
        Tok::Keyword(n) => parse_tuple(lx, Some(n), 0),
        other => Err(format!("expected `PatternN`, found {other:?}")),
    }
}

type Typed<T> = Result<T, (RejectReason, String)>;

fn nesting(msg: impl Into<String>) -> (RejectReason, String) {
    (RejectReason::BadNesting, msg.into())
}

fn arity(what: &str, found: usize, expected: &str) -> (RejectReason, String) {
    (
        RejectReason::BadArity,
        format!("{what} has {found} items, expected {expected}"),
    )
}

fn phrase(item: &Item, slot: &str) -> Typed<String> {
    match item {
        Item::Phrase(s) => Ok(s.clone()),
        Item::Tuple { .. } => Err(nesting(format!("{slot} must be a phrase, found a tuple"))),
    }
}

fn triple<'i>(items: &'i [Item], what: &str) -> Typed<[&'i Item; 3]> {
    match items {
        [a, b, c] => Ok([a, b, c]),
        _ => Err(arity(what, items.len(), "3")),
    }
}

fn causal(items: &[Item], what: &str) -> Typed<Causal> {
    let [a, b, c] = triple(items, what)?;
    Ok(Causal {
        cause: phrase(a, "cause")?,
        target: phrase(b, "target")?,
        situation: phrase(c, "situation")?,
    })
}

fn perception(items: &[Item], what: &str) -> Typed<Perception> {
    let [a, b, c] = triple(items, what)?;
    let object = match b {
        Item::Phrase(s) => PerceivedObject::Phrase { text: s.clone() },
        Item::Tuple {
            label: None | Some(3),
            items,
        } => PerceivedObject::Causal(causal(items, "perceived Pattern3")?),
        Item::Tuple { label: Some(n), .. } => {
            return Err(nesting(format!("Pattern4 may only wrap Pattern3, found Pattern{n}")))
        }
    };
    Ok(Perception {
        who: phrase(a, "who")?,
        object,
        perception: phrase(c, "perception")?,
    })
}

fn antecedent(item: &Item) -> Typed<Antecedent> {
    match item {
        Item::Phrase(_) => Err(nesting("Pattern5 antecedent must be a Pattern3 or Pattern4 tuple")),
        Item::Tuple { label: Some(3), items } => Ok(Antecedent::Causal(causal(items, "antecedent")?)),
        Item::Tuple { label: Some(4), items } => {
            Ok(Antecedent::Perception(perception(items, "antecedent")?))
        }
        Item::Tuple { label: Some(n), .. } => Err(nesting(format!(
            "Pattern5 antecedent must be Pattern3 or Pattern4, found Pattern{n}"
        ))),
        Item::Tuple { label: None, items } => {
            let wraps = matches!(items.get(1), Some(Item::Tuple { .. })) && items.len() == 3;
            if wraps {
                Ok(Antecedent::Perception(perception(items, "antecedent")?))
            } else {
                Ok(Antecedent::Causal(causal(items, "antecedent")?))
            }
        }
    }
}

fn consequent(item: &Item) -> Typed<Claim> {
    let (kind, items) = match item {
        Item::Phrase(_) => {
            return Err(nesting("Pattern5 consequent must be a Pattern1 or Pattern2 tuple"))
        }
        Item::Tuple { label: Some(1), items } => (ClaimKind::Normative, items),
        Item::Tuple { label: Some(2), items } => (ClaimKind::Request, items),
        Item::Tuple { label: Some(n), .. } => {
            return Err(nesting(format!(
                "Pattern5 consequent must be Pattern1 or Pattern2, found Pattern{n}"
            )))
        }
        Item::Tuple { label: None, items } => (ClaimKind::Unresolved, items),
    };
    match items.as_slice() {
        [target, state] => Ok(Claim {
            kind,
            who: None,
            target: phrase(target, "consequent target")?,
            state: phrase(state, "consequent state")?,
        }),
        [who, target, state] => Ok(Claim {
            kind,
            who: Some(phrase(who, "consequent who")?),
            target: phrase(target, "consequent target")?,
            state: phrase(state, "consequent state")?,
        }),
        _ => Err(arity("consequent", items.len(), "2 or 3")),
    }
}

fn type_edge(tree: &Item, stage: u8) -> Typed<Pattern> {
    let Item::Tuple {
        label: Some(n),
        items,
    } = tree
    else {
        return Err((RejectReason::Unparseable, "missing pattern label".into()));
    };
    let allowed = match stage {
        1 => (1..=4).contains(n),
        _ => *n == 5,
    };
    if !(1..=5).contains(n) {
        return Err((RejectReason::Unparseable, format!("unknown Pattern{n}")));
    }
    if !allowed {
        return Err((
            RejectReason::Unparseable,
            format!("Pattern{n} is not extracted in stage {stage}"),
        ));
    }
    let what = format!("Pattern{n}");
    match n {
        1 => {
            let [a, b, c] = triple(items, &what)?;
            Ok(Pattern::P1(Normative {
                who: phrase(a, "who")?,
                about: phrase(b, "about")?,
                state: phrase(c, "state")?,
            }))
        }
        2 => {
            let [a, b, c] = triple(items, &what)?;
            Ok(Pattern::P2(Request {
                who: phrase(a, "who")?,
                whom: phrase(b, "whom")?,
                action: phrase(c, "action")?,
            }))
        }
        3 => Ok(Pattern::P3(causal(items, &what)?)),
        4 => Ok(Pattern::P4(perception(items, &what)?)),
        _ => {
            let [a, b, c] = triple(items, &what)?;
            Ok(Pattern::P5(Influence {
                who: phrase(a, "who")?,
                antecedent: antecedent(b)?,
                consequent: consequent(c)?,
            }))
        }
    }
}

/// Result of parsing an edge-list section.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeListParse {
    pub edges: Vec<Pattern>,
    pub rejected: Vec<Rejection>,
}

fn line_end(s: &str, from: usize) -> usize {
    s[from..].find('\n').map_or(s.len(), |i| from + i)
}

/// Parse every `PatternN (…)` edge in `raw`.
///
/// Stage 1 accepts Patterns 1–4, stage 2 only Pattern 5. Text between edges
/// (list brackets, quotes, commentary) is ignored.
pub fn parse_edge_list(raw: &str, stage: u8) -> EdgeListParse {
    let mut out = EdgeListParse::default();
    let mut pos = 0;
    while let Some(m) = EDGE_START.find_at(raw, pos) {
        let start = m.start();
        let mut lx = Lexer::new(raw, start);
        match parse_edge(&mut lx) {
            Ok(tree) => {
                let end = lx.pos;
                match type_edge(&tree, stage) {
                    Ok(p) => out.edges.push(p),
                    Err((reason, detail)) => out.rejected.push(Rejection {
                        reason,
                        detail,
                        raw: raw[start..end].to_string(),
                    }),
                }
                pos = end;
            }
            Err(detail) => {
                let eol = line_end(raw, start);
                out.rejected.push(Rejection {
                    reason: RejectReason::Unparseable,
                    detail,
                    raw: raw[start..eol].trim_end().to_string(),
                });
                pos = eol.max(m.end());
            }
        }
    }
    out
}

static REPLACEMENT_HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)replacement\s+of\s+demonstrative\s+pronouns|指示語の置き換え(?:リスト)?")
        .expect("valid regex")
});

static EDGE_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)edge\s*list|エッジリスト").expect("valid regex"));

const HEADER_TRAILER: &[char] = &['"', '”', '」', ':', '：', '[', ' ', '\t'];

/// Split a stage reply into its replacement section and edge-list section.
/// Without an edge-list header everything after the replacement section is
/// treated as edge list.
pub fn split_reply(raw: &str) -> (&str, &str) {
    let repl = REPLACEMENT_HEADER.find(raw);
    let edge = EDGE_HEADER.find_at(raw, repl.map_or(0, |m| m.end()));
    let after = |end: usize| {
        let tail = &raw[end..];
        &tail[tail.len() - tail.trim_start_matches(HEADER_TRAILER).len()..]
    };
    match (repl, edge) {
        (Some(r), Some(e)) => (&raw[r.end()..e.start()], after(e.end())),
        (Some(r), None) => ("", after(r.end())),
        (None, Some(e)) => ("", after(e.end())),
        (None, None) => ("", raw),
    }
}

/// Ordered pronoun → referent pairs from one reply.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ReplacementList {
    pub entries: Vec<(String, String)>,
}

impl ReplacementList {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn referents(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(_, r)| r.as_str())
    }

    /// Append entries not already present.
    pub fn extend_unique(&mut self, other: &ReplacementList) {
        for e in &other.entries {
            if !self.entries.contains(e) {
                self.entries.push(e.clone());
            }
        }
    }
}

/// A replacement line that could not be read. Non-fatal.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LineError {
    pub line: usize,
    pub text: String,
    pub message: String,
}

const QUOTES: &[char] = &['「', '」', '“', '”', '"', '\'', '‘', '’', '『', '』'];

fn strip_quotes(s: &str) -> &str {
    let mut cur = s.trim();
    loop {
        let next = cur.trim_matches(QUOTES).trim();
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// Parse `pronoun = referent` lines. Lines consisting only of punctuation
/// (list brackets, stray quotes) are skipped.
pub fn parse_replacement_list(raw: &str) -> (ReplacementList, Vec<LineError>) {
    let mut list = ReplacementList::default();
    let mut errors = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        let text = line.trim().trim_end_matches([',', '，']).trim();
        let text = text.trim_start_matches(['-', '*', '・']).trim();
        if text.chars().all(|c| QUOTES.contains(&c) || "[]{}:：,".contains(c) || c.is_whitespace()) {
            continue;
        }
        let err = |message: &str| LineError {
            line: i,
            text: line.to_string(),
            message: message.to_string(),
        };
        let Some((lhs, rhs)) = text.split_once(['=', '＝']) else {
            errors.push(err("expected `pronoun = referent`"));
            continue;
        };
        let (pronoun, referent) = (strip_quotes(lhs), strip_quotes(rhs));
        if pronoun.is_empty() || referent.is_empty() {
            errors.push(err("empty pronoun or referent"));
            continue;
        }
        list.entries.push((pronoun.to_string(), referent.to_string()));
    }
    (list, errors)
}
