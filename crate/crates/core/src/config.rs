//! Pipeline configuration: a TOML file with one table per concern.
//!
//! ```toml
//! [corpus]
//! path = "opinions.csv"          # required; relative to this file
//! format = "csv"                 # csv | jsonl, guessed from the extension
//!
//! [provider]
//! mode = "replay"                # record | replay | live
//! endpoint = "https://api.openai.com/v1/chat/completions"
//! model_id = "gpt-4-turbo-2024-04-09"
//! temperature = 0.0
//! max_output = 2048
//! retries = 2                    # re-queries after a rejected reply
//! transport_retries = 3          # re-sends after a network failure
//! backoff_ms = 500
//! auth_env = "OPENAI_API_KEY"
//!
//! [cache]
//! path = "cache/completions.jsonl"
//!
//! [prompts]
//! language = "en"                # en | ja
//! dir = "prompts"                # optional overrides
//!
//! [extract]
//! chunk_size = 5
//! length_limit = 10
//!
//! [sentiment]
//! threshold = 0.5
//! bins = 10
//!
//! [cluster]
//! eps = 0.25
//! min_pts = 2
//! embedder = "hashing"           # hashing | http
//! dimensions = 512
//!
//! [graph]
//! min_weight_positive = 1
//! min_weight_negative = 2
//! top_k = 10
//!
//! [layout]
//! iterations = 1000
//! k_repulsion = 10.0
//! gravity = 1.0
//! scaling = 2.0
//! use_weights = true
//! jitter_tolerance = 1.0
//!
//! [output]
//! dir = "out"
//! workers = 4
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use toml::{Table, Value};

use crate::cluster::{ClusterParams, HttpEmbedderConfig, DEFAULT_DIMENSIONS};
use crate::corpus::CorpusFormat;
use crate::extract::ExtractSettings;
use crate::gateway::{HttpProviderConfig, ModelParams, ProviderMode, RetryPolicy};
use crate::graph::LayoutParams;
use crate::prompts::Language;
use crate::sentiment::DEFAULT_THRESHOLD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Hashing,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProviderConfig {
    pub mode: ProviderMode,
    pub model: ModelParams,
    pub retries: u32,
    pub transport_retries: u32,
    pub backoff_ms: u64,
    pub http: HttpProviderConfig,
}

impl ProviderConfig {
    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.transport_retries,
            base_delay: Duration::from_millis(self.backoff_ms),
            max_delay: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterConfig {
    pub params: ClusterParams,
    pub embedder: EmbedderKind,
    pub dimensions: usize,
    pub http: HttpEmbedderConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphConfig {
    pub min_weight_positive: u64,
    pub min_weight_negative: u64,
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub corpus_path: PathBuf,
    pub corpus_format: CorpusFormat,
    pub provider: ProviderConfig,
    pub cache_path: PathBuf,
    pub language: Language,
    pub prompts_dir: Option<PathBuf>,
    pub extract: ExtractSettings,
    pub threshold: f64,
    pub bins: usize,
    pub cluster: ClusterConfig,
    pub graph: GraphConfig,
    pub layout: LayoutParams,
    pub output_dir: PathBuf,
    pub workers: usize,
}

/// Every problem found in a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration:")?;
        for e in &self.0 {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const SECTIONS: &[(&str, &[&str])] = &[
    ("corpus", &["path", "format"]),
    (
        "provider",
        &[
            "mode",
            "endpoint",
            "model_id",
            "temperature",
            "max_output",
            "retries",
            "transport_retries",
            "backoff_ms",
            "auth_env",
            "model_field",
            "messages_field",
            "temperature_field",
            "max_output_field",
            "response_pointer",
            "timeout_secs",
        ],
    ),
    ("cache", &["path"]),
    ("prompts", &["language", "dir"]),
    ("extract", &["chunk_size", "length_limit"]),
    ("sentiment", &["threshold", "bins"]),
    (
        "cluster",
        &[
            "eps",
            "min_pts",
            "embedder",
            "dimensions",
            "endpoint",
            "model",
            "auth_env",
        ],
    ),
    ("graph", &["min_weight_positive", "min_weight_negative", "top_k"]),
    (
        "layout",
        &[
            "iterations",
            "k_repulsion",
            "gravity",
            "scaling",
            "use_weights",
            "jitter_tolerance",
        ],
    ),
    ("output", &["dir", "workers"]),
];

/// Typed lookups that record problems instead of stopping at the first.
struct Reader<'a> {
    root: &'a Table,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn value(&self, section: &str, key: &str) -> Option<&'a Value> {
        self.root.get(section)?.as_table()?.get(key)
    }

    fn type_error(&mut self, section: &str, key: &str, expected: &str) {
        self.errors.push(format!("{section}.{key}: expected {expected}"));
    }

    fn string(&mut self, section: &str, key: &str) -> Option<String> {
        match self.value(section, key)? {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.type_error(section, key, "a string");
                None
            }
        }
    }

    fn float(&mut self, section: &str, key: &str, default: f64) -> f64 {
        match self.value(section, key) {
            None => default,
            Some(Value::Float(f)) => *f,
            Some(Value::Integer(i)) => *i as f64,
            Some(_) => {
                self.type_error(section, key, "a number");
                default
            }
        }
    }

    fn int(&mut self, section: &str, key: &str, default: i64) -> i64 {
        match self.value(section, key) {
            None => default,
            Some(Value::Integer(i)) => *i,
            Some(_) => {
                self.type_error(section, key, "an integer");
                default
            }
        }
    }

    fn boolean(&mut self, section: &str, key: &str, default: bool) -> bool {
        match self.value(section, key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(_) => {
                self.type_error(section, key, "true or false");
                default
            }
        }
    }

    fn check(&mut self, ok: bool, section: &str, key: &str, bound: &str) {
        if !ok {
            self.errors.push(format!("{section}.{key}: out of range, requires {bound}"));
        }
    }

    /// Integer with an inclusive lower bound, reported as `key >= min`.
    fn at_least(&mut self, section: &str, key: &str, default: i64, min: i64) -> i64 {
        let v = self.int(section, key, default);
        self.check(v >= min, section, key, &format!("{key} >= {min}"));
        v.max(min)
    }

    fn parsed<T: std::str::FromStr<Err = String>>(&mut self, section: &str, key: &str) -> Option<T> {
        let s = self.string(section, key)?;
        match s.parse() {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(format!("{section}.{key}: {e}"));
                None
            }
        }
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = PathBuf::from(p);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

/// Parse and validate config text. Relative paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<PipelineConfig, ConfigErrors> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigErrors(vec![format!("syntax: {e}")]))?;
    let mut r = Reader {
        root: &root,
        errors: Vec::new(),
    };

    for (name, value) in &root {
        match SECTIONS.iter().find(|(s, _)| s == name) {
            None => r.errors.push(format!("{name}: unknown section")),
            Some((_, keys)) => match value.as_table() {
                None => r.errors.push(format!("{name}: expected a table")),
                Some(t) => {
                    for k in t.keys().filter(|k| !keys.contains(&k.as_str())) {
                        r.errors.push(format!("{name}.{k}: unknown key"));
                    }
                }
            },
        }
    }

    let corpus_path = r.string("corpus", "path").map(|p| resolve(base, &p));
    if corpus_path.is_none() && r.value("corpus", "path").is_none() {
        r.errors.push("corpus.path: required".into());
    }
    let explicit_format = r.parsed::<CorpusFormat>("corpus", "format");
    let corpus_format = explicit_format
        .or_else(|| corpus_path.as_deref().and_then(CorpusFormat::from_path))
        .unwrap_or(CorpusFormat::Csv);

    let mode = r.parsed::<ProviderMode>("provider", "mode").unwrap_or_default();
    let defaults = ModelParams::default();
    let temperature = r.float("provider", "temperature", defaults.temperature);
    r.check((0.0..=2.0).contains(&temperature), "provider", "temperature", "0 <= temperature <= 2");
    let max_output = r.at_least("provider", "max_output", defaults.max_output.into(), 1);
    let retries = r.int("provider", "retries", 2);
    r.check((0..=10).contains(&retries), "provider", "retries", "0 <= retries <= 10");
    let transport_retries = r.int("provider", "transport_retries", 3);
    r.check(
        (0..=10).contains(&transport_retries),
        "provider",
        "transport_retries",
        "0 <= transport_retries <= 10",
    );
    let backoff_ms = r.at_least("provider", "backoff_ms", 500, 0);
    let mut http = HttpProviderConfig::default();
    for (key, slot) in [
        ("endpoint", &mut http.endpoint),
        ("auth_env", &mut http.auth_env),
        ("model_field", &mut http.model_field),
        ("messages_field", &mut http.messages_field),
        ("temperature_field", &mut http.temperature_field),
        ("max_output_field", &mut http.max_output_field),
        ("response_pointer", &mut http.response_pointer),
    ] {
        if let Some(v) = r.string("provider", key) {
            *slot = v;
        }
    }
    http.timeout_secs = r.at_least("provider", "timeout_secs", http.timeout_secs as i64, 1) as u64;
    let model = ModelParams {
        temperature,
        max_output: max_output.min(u32::MAX.into()) as u32,
        model_id: r.string("provider", "model_id").unwrap_or(defaults.model_id),
    };

    let cache_path = resolve(
        base,
        &r.string("cache", "path")
            .unwrap_or_else(|| "cache/completions.jsonl".into()),
    );
    let language = r.parsed::<Language>("prompts", "language").unwrap_or_default();
    let prompts_dir = r.string("prompts", "dir").map(|p| resolve(base, &p));

    let extract = ExtractSettings {
        chunk_size: r.at_least("extract", "chunk_size", 5, 1) as usize,
        retries: retries.clamp(0, 10) as u32,
        length_limit: r.at_least("extract", "length_limit", 10, 1) as usize,
    };

    let threshold = r.float("sentiment", "threshold", DEFAULT_THRESHOLD);
    r.check((0.0..=1.0).contains(&threshold), "sentiment", "threshold", "0 <= threshold <= 1");
    let bins = r.at_least("sentiment", "bins", 10, 1) as usize;

    let eps = r.float("cluster", "eps", ClusterParams::default().eps);
    r.check(eps > 0.0 && eps <= 2.0, "cluster", "eps", "eps > 0 and eps <= 2");
    let min_pts = r.at_least("cluster", "min_pts", 2, 1) as usize;
    let embedder = match r.string("cluster", "embedder").as_deref() {
        None | Some("hashing") => EmbedderKind::Hashing,
        Some("http") => EmbedderKind::Http,
        Some(other) => {
            r.errors.push(format!("cluster.embedder: unknown embedder {other:?} (expected hashing or http)"));
            EmbedderKind::Hashing
        }
    };
    let dimensions = r.at_least("cluster", "dimensions", DEFAULT_DIMENSIONS as i64, 1) as usize;
    let mut embed_http = HttpEmbedderConfig::default();
    for (key, slot) in [
        ("endpoint", &mut embed_http.endpoint),
        ("model", &mut embed_http.model),
        ("auth_env", &mut embed_http.auth_env),
    ] {
        if let Some(v) = r.string("cluster", key) {
            *slot = v;
        }
    }
    if embedder == EmbedderKind::Http && mode == ProviderMode::Replay {
        r.errors.push(
            "cluster.embedder: the http embedder needs network access, which provider.mode = \"replay\" forbids".into(),
        );
    }

    let graph = GraphConfig {
        min_weight_positive: r.at_least("graph", "min_weight_positive", 1, 1) as u64,
        min_weight_negative: r.at_least("graph", "min_weight_negative", 2, 1) as u64,
        top_k: r.at_least("graph", "top_k", 10, 1) as usize,
    };

    let d = LayoutParams::default();
    let layout = LayoutParams {
        iterations: r.at_least("layout", "iterations", d.iterations as i64, 0) as usize,
        k_repulsion: r.float("layout", "k_repulsion", d.k_repulsion),
        gravity: r.float("layout", "gravity", d.gravity),
        scaling: r.float("layout", "scaling", d.scaling),
        use_weights: r.boolean("layout", "use_weights", d.use_weights),
        jitter_tolerance: r.float("layout", "jitter_tolerance", d.jitter_tolerance),
    };
    r.check(layout.k_repulsion > 0.0, "layout", "k_repulsion", "k_repulsion > 0");
    r.check(layout.gravity >= 0.0, "layout", "gravity", "gravity >= 0");
    r.check(layout.scaling > 0.0, "layout", "scaling", "scaling > 0");
    r.check(layout.jitter_tolerance > 0.0, "layout", "jitter_tolerance", "jitter_tolerance > 0");

    let output_dir = resolve(base, &r.string("output", "dir").unwrap_or_else(|| "out".into()));
    let workers = r.int("output", "workers", 4);
    r.check((1..=256).contains(&workers), "output", "workers", "1 <= workers <= 256");

    if !r.errors.is_empty() {
        return Err(ConfigErrors(r.errors));
    }
    Ok(PipelineConfig {
        corpus_path: corpus_path.expect("checked above"),
        corpus_format,
        provider: ProviderConfig {
            mode,
            model,
            retries: extract.retries,
            transport_retries: transport_retries as u32,
            backoff_ms: backoff_ms as u64,
            http,
        },
        cache_path,
        language,
        prompts_dir,
        extract,
        threshold,
        bins,
        cluster: ClusterConfig {
            params: ClusterParams { eps, min_pts },
            embedder,
            dimensions,
            http: embed_http,
        },
        graph,
        layout,
        output_dir,
        workers: workers as usize,
    })
}

/// Read, parse and validate a config file.
pub fn validate_config(path: &Path) -> Result<PipelineConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigErrors(vec![format!("{}: {e}", path.display())]))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base)
}
