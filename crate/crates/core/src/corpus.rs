//! Opinion corpora: loading, sentence splitting and descriptive statistics.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error reading corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("record {row}: missing required field `{field}`")]
    Schema { row: usize, field: String },
    #[error("record {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("record {row}: duplicate opinion id `{id}`")]
    DuplicateId { row: usize, id: String },
    #[error("empty input")]
    EmptyInput,
}

/// One public-comment text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opinion {
    pub id: String,
    pub text: String,
    pub char_count: usize,
}

impl Opinion {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Opinion {
            id: id.into(),
            char_count: text.chars().count(),
            text,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    /// Guess the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(CorpusFormat::Csv),
            "jsonl" | "ndjson" => Some(CorpusFormat::Jsonl),
            _ => None,
        }
    }
}

impl std::str::FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(CorpusFormat::Csv),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(format!("unknown corpus format `{other}` (expected csv or jsonl)")),
        }
    }
}

/// Load a corpus file. Rows are returned in file order; ids must be unique.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Opinion>, CorpusError> {
    let file = File::open(path)?;
    let opinions = match format {
        CorpusFormat::Jsonl => read_jsonl(BufReader::new(file))?,
        CorpusFormat::Csv => read_csv(file)?,
    };
    check_unique(&opinions)?;
    Ok(opinions)
}

fn read_jsonl(reader: impl BufRead) -> Result<Vec<Opinion>, CorpusError> {
    let mut out = Vec::new();
    let mut row = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                row,
                message: e.to_string(),
            })?;
        let id = json_field(&value, "id", row)?;
        let text = json_field(&value, "text", row)?;
        out.push(Opinion::new(id, text));
        row += 1;
    }
    Ok(out)
}

fn json_field(value: &serde_json::Value, field: &str, row: usize) -> Result<String, CorpusError> {
    match value.get(field) {
        Some(serde_json::Value::String(s)) => Ok(s.clone()),
        // numeric ids are common in exported spreadsheets
        Some(serde_json::Value::Number(n)) if field == "id" => Ok(n.to_string()),
        Some(_) => Err(CorpusError::Malformed {
            row,
            message: format!("field `{field}` must be a string"),
        }),
        None => Err(CorpusError::Schema {
            row,
            field: field.to_string(),
        }),
    }
}

fn read_csv(file: File) -> Result<Vec<Opinion>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| CorpusError::Malformed {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = column("id").ok_or_else(|| CorpusError::Schema {
        row: 0,
        field: "id".into(),
    })?;
    let text_col = column("text").ok_or_else(|| CorpusError::Schema {
        row: 0,
        field: "text".into(),
    })?;

    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CorpusError::Malformed {
            row,
            message: e.to_string(),
        })?;
        let get = |col: usize, name: &str| {
            record.get(col).map(str::to_string).ok_or_else(|| CorpusError::Schema {
                row,
                field: name.to_string(),
            })
        };
        out.push(Opinion::new(get(id_col, "id")?, get(text_col, "text")?));
    }
    Ok(out)
}

fn check_unique(opinions: &[Opinion]) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for (row, op) in opinions.iter().enumerate() {
        if !seen.insert(op.id.as_str()) {
            return Err(CorpusError::DuplicateId {
                row,
                id: op.id.clone(),
            });
        }
    }
    Ok(())
}

/// Write opinions as JSONL (`{"id", "text"}` per line).
pub fn write_jsonl(opinions: &[Opinion], mut w: impl Write) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Record<'a> {
        id: &'a str,
        text: &'a str,
    }
    for op in opinions {
        let line = serde_json::to_string(&Record {
            id: &op.id,
            text: &op.text,
        })?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

const FULL_STOPS: [char; 3] = ['。', '！', '？'];
const ASCII_STOPS: [char; 3] = ['.', '!', '?'];

/// Split text into sentences on terminal punctuation.
///
/// CJK stops end a sentence unconditionally; ASCII stops only when followed
/// by whitespace or end of text. Trailing whitespace belongs to the sentence
/// it follows, so concatenating the output reproduces `text` exactly.
pub fn split_sentences(text: &str) -> Result<Vec<String>, CorpusError> {
    if text.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (_, c) = chars[i];
        let boundary = if FULL_STOPS.contains(&c) {
            true
        } else if ASCII_STOPS.contains(&c) {
            chars.get(i + 1).is_none_or(|&(_, next)| next.is_whitespace())
        } else {
            false
        };
        if boundary {
            // absorb runs of closing punctuation and following whitespace
            let mut j = i + 1;
            while j < chars.len() && (FULL_STOPS.contains(&chars[j].1) || chars[j].1 == '」' || chars[j].1 == '）') {
                j += 1;
            }
            while j < chars.len() && chars[j].1.is_whitespace() {
                j += 1;
            }
            let end = chars.get(j).map_or(text.len(), |&(b, _)| b);
            out.push(text[start..end].to_string());
            start = end;
            i = j;
        } else {
            i += 1;
        }
    }
    if start < text.len() {
        out.push(text[start..].to_string());
    }
    Ok(out)
}

/// Summary statistics over opinion character counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// Descriptive statistics of `char_count`.
///
/// `std` is the population standard deviation. For even `n` the median is
/// the lower middle element, so every reported order statistic is attained.
pub fn descriptive_stats(opinions: &[Opinion]) -> Result<CorpusStats, CorpusError> {
    if opinions.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let mut counts: Vec<usize> = opinions.iter().map(|o| o.char_count).collect();
    counts.sort_unstable();
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let var = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(CorpusStats {
        mean,
        std: var.sqrt(),
        min: counts[0] as f64,
        median: counts[(counts.len() - 1) / 2] as f64,
        max: counts[counts.len() - 1] as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn jsonl_in_file_order() {
        let f = tmp("{\"id\":\"b\",\"text\":\"two\"}\n{\"id\":\"a\",\"text\":\"生成AI\"}\n", ".jsonl");
        let ops = load_corpus(f.path(), CorpusFormat::Jsonl).unwrap();
        assert_eq!(ops.len(), 2);
        assert_eq!(ops[0].id, "b");
        assert_eq!(ops[1].char_count, 4);
    }

    #[test]
    fn empty_text_loads_with_zero_count() {
        let f = tmp("{\"id\":\"x\",\"text\":\"\"}\n", ".jsonl");
        let ops = load_corpus(f.path(), CorpusFormat::Jsonl).unwrap();
        assert_eq!(ops[0].char_count, 0);
    }

    #[test]
    fn csv_missing_text_column() {
        let f = tmp("id,body\n1,hello\n", ".csv");
        match load_corpus(f.path(), CorpusFormat::Csv) {
            Err(CorpusError::Schema { field, .. }) => assert_eq!(field, "text"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn jsonl_missing_key_names_row() {
        let f = tmp("{\"id\":\"a\",\"text\":\"t\"}\n{\"id\":\"b\"}\n", ".jsonl");
        match load_corpus(f.path(), CorpusFormat::Jsonl) {
            Err(CorpusError::Schema { row, field }) => {
                assert_eq!(row, 1);
                assert_eq!(field, "text");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let f = tmp("id,text\n1,a\n1,b\n", ".csv");
        assert!(matches!(
            load_corpus(f.path(), CorpusFormat::Csv),
            Err(CorpusError::DuplicateId { row: 1, .. })
        ));
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_sentences("A。B。C。").unwrap(), ["A。", "B。", "C。"]);
        assert_eq!(split_sentences("abc").unwrap(), ["abc"]);
        let s = split_sentences("Hello. World.").unwrap();
        assert_eq!(s, ["Hello. ", "World."]);
        assert_eq!(
            s.iter().map(|x| x.trim()).collect::<Vec<_>>(),
            ["Hello.", "World."]
        );
    }

    #[test]
    fn split_keeps_decimal_numbers() {
        let s = split_sentences("Version 2.5 is out. Fine!").unwrap();
        assert_eq!(s, ["Version 2.5 is out. ", "Fine!"]);
    }

    #[test]
    fn split_empty_is_error() {
        assert!(matches!(split_sentences(""), Err(CorpusError::EmptyInput)));
    }

    #[test]
    fn stats_table_columns() {
        let ops: Vec<Opinion> = [6usize, 308, 2015]
            .iter()
            .enumerate()
            .map(|(i, &n)| Opinion::new(i.to_string(), "x".repeat(n)))
            .collect();
        let s = descriptive_stats(&ops).unwrap();
        assert_eq!((s.min, s.median, s.max), (6.0, 308.0, 2015.0));
    }

    #[test]
    fn stats_singleton() {
        let s = descriptive_stats(&[Opinion::new("a", "0123456789")]).unwrap();
        assert_eq!((s.mean, s.median, s.min, s.max, s.std), (10.0, 10.0, 10.0, 10.0, 0.0));
    }

    #[test]
    fn stats_one_to_hundred() {
        let ops: Vec<Opinion> = (1..=100)
            .map(|n| Opinion::new(n.to_string(), "a".repeat(n)))
            .collect();
        let s = descriptive_stats(&ops).unwrap();
        // oracle: plain summation
        let mut total = 0u64;
        for n in 1..=100u64 {
            total += n;
        }
        assert_eq!(s.mean, total as f64 / 100.0);
        assert_eq!(s.mean, 50.5);
        assert_eq!(s.median, 50.0);
    }

    #[test]
    fn stats_empty_is_error() {
        assert!(matches!(descriptive_stats(&[]), Err(CorpusError::EmptyInput)));
    }
}
