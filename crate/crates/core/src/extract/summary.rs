//! Stage-3 rows: "Since A is B, C should be D" / "Since A is B, please do F to E".

use std::io::Write;

use serde::{Deserialize, Serialize};

pub const NA: &str = "NA";
pub const DEFAULT_LENGTH_LIMIT: usize = 10;
pub const FIELDS: [char; 6] = ['A', 'B', 'C', 'D', 'E', 'F'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryType {
    Normative,
    Request,
}

impl SummaryType {
    pub fn as_str(self) -> &'static str {
        match self {
            SummaryType::Normative => "normative",
            SummaryType::Request => "request",
        }
    }

    /// Read the type label a model wrote, in English or Japanese.
    pub fn from_label(label: &str) -> Option<Self> {
        let l = label.trim().to_lowercase();
        if l.contains("normative") || l.contains("規範") {
            Some(SummaryType::Normative)
        } else if l.contains("request") || l.contains("demand") || l.contains("要望") {
            Some(SummaryType::Request)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(rename = "type")]
    pub kind: SummaryType,
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
    pub e: String,
    pub f: String,
    pub source_opinion_id: String,
    /// Index of the summarized edge in the opinion's Pattern-5 list.
    pub source_edge: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SummaryError {
    #[error("reply has no {0} field")]
    MissingField(&'static str),
    #[error("unknown summary type {0:?}")]
    UnknownType(String),
    #[error("NA rule violated: {0}")]
    NaRule(String),
}

fn is_na(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || matches!(t.to_lowercase().as_str(), "na" | "n/a" | "nan" | "none")
}

fn canon(s: &str) -> String {
    if is_na(s) {
        NA.to_string()
    } else {
        s.trim()
            .trim_matches(['"', '“', '”', '「', '」', '\''])
            .trim()
            .to_string()
    }
}

impl SummaryRow {
    pub fn fields(&self) -> [(char, &str); 6] {
        [
            ('A', &self.a),
            ('B', &self.b),
            ('C', &self.c),
            ('D', &self.d),
            ('E', &self.e),
            ('F', &self.f),
        ]
    }

    pub fn field(&self, name: char) -> Option<&str> {
        self.fields()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v)
    }

    /// Check the NA invariants for the row's type.
    pub fn check_na(&self) -> Result<(), SummaryError> {
        let na = |s: &str| s == NA;
        let mut problems = Vec::new();
        if na(&self.a) || na(&self.b) {
            problems.push("A and B must not be NA".to_string());
        }
        match self.kind {
            SummaryType::Normative => {
                if !(na(&self.e) && na(&self.f)) {
                    problems.push("a normative row must have E = F = NA".into());
                }
                if na(&self.c) || na(&self.d) {
                    problems.push("a normative row needs C and D".into());
                }
            }
            SummaryType::Request => {
                if !(na(&self.c) && na(&self.d)) {
                    problems.push("a request row must have C = D = NA".into());
                }
                if na(&self.e) || na(&self.f) {
                    problems.push("a request row needs E and F".into());
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SummaryError::NaRule(problems.join("; ")))
        }
    }
}

/// Parse a reply of `key: value` lines or a JSON object with keys
/// `type`, `A` … `F`. NA spellings are unified to `NA`.
pub fn parse_summary_reply(
    raw: &str,
    source_opinion_id: &str,
    source_edge: usize,
) -> Result<SummaryRow, SummaryError> {
    let mut kind: Option<String> = None;
    let mut values: [Option<String>; 6] = Default::default();

    let json = raw
        .find('{')
        .zip(raw.rfind('}'))
        .and_then(|(s, e)| serde_json::from_str::<serde_json::Value>(&raw[s..=e]).ok())
        .and_then(|v| v.as_object().cloned());
    if let Some(obj) = json {
        for (k, v) in obj {
            let text = match v {
                serde_json::Value::String(s) => s,
                serde_json::Value::Null => NA.to_string(),
                other => other.to_string(),
            };
            assign(&k, text, &mut kind, &mut values);
        }
    } else {
        for line in raw.lines() {
            let line = line.trim().trim_start_matches(['-', '*', '・']).trim();
            if let Some((k, v)) = line.split_once([':', '：']) {
                assign(k, v.to_string(), &mut kind, &mut values);
            }
        }
    }

    let label = kind.ok_or(SummaryError::MissingField("type"))?;
    let kind = SummaryType::from_label(&label).ok_or(SummaryError::UnknownType(label))?;
    let mut out = Vec::with_capacity(6);
    for (i, v) in values.into_iter().enumerate() {
        let name = ["A", "B", "C", "D", "E", "F"][i];
        out.push(canon(&v.ok_or(SummaryError::MissingField(name))?));
    }
    let [a, b, c, d, e, f]: [String; 6] = out.try_into().expect("six fields");
    let row = SummaryRow {
        kind,
        a,
        b,
        c,
        d,
        e,
        f,
        source_opinion_id: source_opinion_id.to_string(),
        source_edge,
    };
    row.check_na()?;
    Ok(row)
}

fn assign(key: &str, value: String, kind: &mut Option<String>, values: &mut [Option<String>; 6]) {
    let k = key.trim().trim_matches(['"', '“', '”', '「', '」']).trim();
    if k.eq_ignore_ascii_case("type") || k == "タイプ" || k == "種類" {
        kind.get_or_insert(value);
        return;
    }
    let mut chars = k.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        let c = c.to_ascii_uppercase();
        if let Some(i) = FIELDS.iter().position(|&f| f == c) {
            values[i].get_or_insert(value);
        }
    }
}

/// Advisory: fields longer than `limit` characters. Never rejects a row.
pub fn length_check(row: &SummaryRow, limit: usize) -> Vec<String> {
    row.fields()
        .into_iter()
        .filter(|(_, v)| *v != NA && v.chars().count() > limit)
        .map(|(n, v)| format!("field {n} has {} characters (limit {limit})", v.chars().count()))
        .collect()
}

pub const CSV_HEADER: [&str; 8] = ["type", "A", "B", "C", "D", "E", "F", "source_opinion_id"];

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        out.write_record([
            r.kind.as_str(),
            &r.a,
            &r.b,
            &r.c,
            &r.d,
            &r.e,
            &r.f,
            &r.source_opinion_id,
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const NORMATIVE: &str = "type: Normative Claim\nA: The State of Image Generation AI Without Requiring Permission\nB: It significantly undermines the equality of benefits and opportunities for creators, copyright holders, and authors.\nC: A State Where Image-Generating AI Does Not Require Permission\nD: Non-Acceptance\nE: NA\nF: NA";

    #[test]
    fn table_normative_row() {
        let r = parse_summary_reply(NORMATIVE, "o1", 0).unwrap();
        assert_eq!(r.kind, SummaryType::Normative);
        assert_eq!(r.d, "Non-Acceptance");
        assert_eq!((r.e.as_str(), r.f.as_str()), (NA, NA));
    }

    #[test]
    fn table_request_row_json() {
        let raw = r#"Here you go: {"type": "Request or Demand", "A": "Generative AI", "B": "Economic Decline in Japan", "C": "NA", "D": null, "E": "Japanese Government", "F": "Help Japan"}"#;
        let r = parse_summary_reply(raw, "o2", 1).unwrap();
        assert_eq!(r.kind, SummaryType::Request);
        assert_eq!(r.e, "Japanese Government");
        assert_eq!(r.f, "Help Japan");
        assert_eq!(r.d, NA);
        assert!(length_check(&r, DEFAULT_LENGTH_LIMIT)
            .iter()
            .all(|w| !w.starts_with("field F")));
    }

    #[test]
    fn na_spellings() {
        let raw = "type: 要望\nA: 生成AI\nB: 経済\nC: nan\nD: N/A\nE: 政府\nF: 助けて";
        let r = parse_summary_reply(raw, "o", 0).unwrap();
        assert_eq!((r.c.as_str(), r.d.as_str()), (NA, NA));
    }

    #[test]
    fn both_sides_filled_is_rejected() {
        let raw = "type: normative\nA: a\nB: b\nC: c\nD: d\nE: e\nF: f";
        assert!(matches!(parse_summary_reply(raw, "o", 0), Err(SummaryError::NaRule(_))));
    }

    #[test]
    fn missing_field_and_type() {
        assert_eq!(
            parse_summary_reply("A: a", "o", 0),
            Err(SummaryError::MissingField("type"))
        );
        assert!(matches!(
            parse_summary_reply("type: opinion\nA: a", "o", 0),
            Err(SummaryError::UnknownType(_))
        ));
    }

    #[test]
    fn length_advisory() {
        let mut r = parse_summary_reply(NORMATIVE, "o", 0).unwrap();
        r.a = "x".repeat(25);
        r.b = "short".into();
        r.c = "c".into();
        r.d = "d".into();
        assert_eq!(length_check(&r, 10).len(), 1);
        r.a = "a".into();
        assert!(length_check(&r, 10).is_empty());
    }

    #[test]
    fn csv_header() {
        let r = parse_summary_reply(NORMATIVE, "o1", 0).unwrap();
        let mut buf = Vec::new();
        write_summary_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("type,A,B,C,D,E,F,source_opinion_id\nnormative,"));
    }
}
