//! Stage orchestration over a directory of plain-file artifacts.
//!
//! Each stage writes into `<out>/<stage>/` and finishes by writing a
//! `manifest.json` holding the content hashes of its inputs and outputs,
//! its parameters and its tallies. The manifest's stamp is a hash of the
//! inputs and parameters; a stage whose stamp matches and whose outputs are
//! intact is skipped.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cluster::{
    cluster_fields, read_assignments, write_assignments, ClusterError, Embedder, HashingEmbedder,
    HttpEmbedder,
};
use crate::config::{ConfigErrors, EmbedderKind, PipelineConfig};
use crate::corpus::{descriptive_stats, load_corpus, write_jsonl, CorpusError, CorpusFormat, Opinion};
use crate::extract::summary::write_summary_csv;
use crate::extract::{
    stage1_extract, stage2_extract, stage3_summarize, ExtractError, PatternEdge, RejectReason,
    StageOutput, SummaryOutcome, SummaryRow,
};
use crate::gateway::{
    CompletionCache, CompletionProvider, Gateway, GatewayError, HttpProvider, ProviderMode,
};
use crate::graph::{
    build_polarity_graph, compare_report, detect_communities, export_graph, filter_by_weight,
    from_json, shared_layout, to_json, union_graph, write_report_csv, CommunityPartition,
    ExportFormat, GraphError, NarrativeGraph, Positions,
};
use crate::prompts::{PromptSet, TemplateError, TemplateKind};
use crate::sentiment::{
    histogram_rows, polarity_histogram, score_polarity, Polarity, PolarityScore, SentimentError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Stats,
    Score,
    Extract1,
    Extract2,
    Summarize,
    Cluster,
    Graph,
    Export,
    Compare,
    All,
}

impl Stage {
    /// Every concrete stage in dependency order.
    pub const ORDER: [Stage; 9] = [
        Stage::Stats,
        Stage::Score,
        Stage::Extract1,
        Stage::Extract2,
        Stage::Summarize,
        Stage::Cluster,
        Stage::Graph,
        Stage::Export,
        Stage::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Stats => "stats",
            Stage::Score => "score",
            Stage::Extract1 => "extract1",
            Stage::Extract2 => "extract2",
            Stage::Summarize => "summarize",
            Stage::Cluster => "cluster",
            Stage::Graph => "graph",
            Stage::Export => "export",
            Stage::Compare => "compare",
            Stage::All => "all",
        }
    }

    /// Stages whose artifacts this one reads.
    pub fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Stats | Stage::All => &[],
            Stage::Score | Stage::Extract1 => &[Stage::Stats],
            Stage::Extract2 => &[Stage::Stats, Stage::Extract1],
            Stage::Summarize => &[Stage::Extract2],
            Stage::Cluster => &[Stage::Score, Stage::Summarize],
            Stage::Graph => &[Stage::Cluster],
            Stage::Export | Stage::Compare => &[Stage::Graph],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ORDER
            .iter()
            .chain([Stage::All].iter())
            .find(|st| st.name() == s)
            .copied()
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),
    #[error("{0}")]
    Usage(String),
    #[error("stage `{stage}` needs the artifacts of `{requires}`; run `{requires}` first")]
    Dependency { stage: Stage, requires: Stage },
    #[error(transparent)]
    Provider(#[from] GatewayError),
    #[error("integrity: {0}")]
    Integrity(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl PipelineError {
    /// 0 success, 1 usage/config, 2 dependency, 3 provider, 4 integrity.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Usage(_) => 1,
            PipelineError::Dependency { .. } => 2,
            PipelineError::Provider(e) => match e {
                GatewayError::Integrity(_) | GatewayError::Io(_) => 4,
                GatewayError::Config(_) | GatewayError::InvalidRequest(_) => 1,
                _ => 3,
            },
            PipelineError::Integrity(_) | PipelineError::Io { .. } => 4,
        }
    }
}

impl From<CorpusError> for PipelineError {
    fn from(e: CorpusError) -> Self {
        PipelineError::Usage(format!("corpus: {e}"))
    }
}

impl From<TemplateError> for PipelineError {
    fn from(e: TemplateError) -> Self {
        PipelineError::Usage(format!("prompts: {e}"))
    }
}

impl From<GraphError> for PipelineError {
    fn from(e: GraphError) -> Self {
        PipelineError::Integrity(e.to_string())
    }
}

impl From<ClusterError> for PipelineError {
    fn from(e: ClusterError) -> Self {
        match e {
            ClusterError::Provider(m) => PipelineError::Provider(GatewayError::Transport(m)),
            ClusterError::InvalidParameter(m) => PipelineError::Usage(m),
            other => PipelineError::Integrity(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Tallies a stage reports, keyed by name.
pub type Counts = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub stamp: String,
    pub inputs: BTreeMap<String, String>,
    pub params: Value,
    pub counts: Counts,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSummary {
    pub stage: Stage,
    /// Stamp matched; nothing was recomputed.
    pub skipped: bool,
    pub counts: Counts,
}

impl fmt::Display for StageSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.stage)?;
        if self.skipped {
            write!(f, " (up to date)")?;
        }
        let parts: Vec<String> = self.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
        if !parts.is_empty() {
            write!(f, ": {}", parts.join(", "))?;
        }
        Ok(())
    }
}

/// Per-opinion outcome of a model-driven stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub opinion_id: String,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Polarity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractRecord {
    pub opinion_id: String,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<StageOutput>,
}

impl ExtractRecord {
    fn edges(&self) -> &[PatternEdge] {
        self.output.as_ref().map_or(&[], |o| &o.edges)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub opinion_id: String,
    pub edge_index: usize,
    #[serde(flatten)]
    pub outcome: SummaryOutcome,
}

/// A summary row with the polarity of the opinion it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub label: Polarity,
    #[serde(flatten)]
    pub row: SummaryRow,
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                PipelineError::Integrity(format!("{}:{}: {e}", path.display(), i + 1))
            })
        })
        .collect()
}

fn to_jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("artifact records serialize");
        out.push(b'\n');
    }
    out
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("artifact records serialize");
    out.push(b'\n');
    out
}

/// Apply `f` to every item on up to `workers` threads. Results come back in
/// input order. After the first `Err` no new items are started and the
/// earliest error in input order is returned.
pub fn map_ordered<T, R, E, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync,
{
    let slots: Vec<Mutex<Option<Result<R, E>>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = workers.clamp(1, items.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                if r.is_err() {
                    abort.store(true, Ordering::Relaxed);
                }
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    let mut out = Vec::with_capacity(items.len());
    for slot in slots {
        match slot.into_inner().expect("slot lock") {
            Some(Ok(r)) => out.push(r),
            Some(Err(e)) => return Err(e),
            // items are claimed in index order, so unstarted slots all
            // follow the failed one
            None => break,
        }
    }
    Ok(out)
}

struct StageRun {
    outputs: Vec<(String, Vec<u8>)>,
    counts: Counts,
}

pub struct Pipeline {
    config: PipelineConfig,
    provider: Option<Box<dyn CompletionProvider>>,
    gateway: Option<Gateway>,
    prompts: PromptSet,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        if config.cluster.embedder == EmbedderKind::Http && config.provider.mode == ProviderMode::Replay {
            return Err(PipelineError::Usage(
                "cluster.embedder: the http embedder needs network access, which replay mode forbids".into(),
            ));
        }
        let prompts = PromptSet::load(config.language, config.prompts_dir.as_deref())?;
        Ok(Pipeline {
            config,
            provider: None,
            gateway: None,
            prompts,
        })
    }

    /// Use this provider instead of the configured HTTP endpoint in record
    /// and live modes. Replay mode never calls it.
    pub fn with_provider(mut self, provider: Box<dyn CompletionProvider>) -> Self {
        self.provider = Some(provider);
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.config.output_dir.join(stage.name())
    }

    fn artifact(&self, stage: Stage, name: &str) -> PathBuf {
        self.stage_dir(stage).join(name)
    }

    pub fn manifest(&self, stage: Stage) -> Option<Manifest> {
        let text = std::fs::read_to_string(self.artifact(stage, "manifest.json")).ok()?;
        serde_json::from_str(&text).ok()
    }

    fn gateway(&mut self) -> Result<&Gateway, PipelineError> {
        if self.gateway.is_none() {
            let p = &self.config.provider;
            let cache = CompletionCache::open(&self.config.cache_path)?;
            let gw = match p.mode {
                ProviderMode::Replay => Gateway::replay(cache, p.model.clone()),
                mode => {
                    let provider = match self.provider.take() {
                        Some(provider) => provider,
                        None => Box::new(HttpProvider::new(p.http.clone())?),
                    };
                    Gateway::new(mode, provider, cache, p.retry_policy(), p.model.clone())
                }
            };
            self.gateway = Some(gw);
        }
        Ok(self.gateway.as_ref().expect("set above"))
    }

    /// Run one stage, or every stage in order for [`Stage::All`].
    pub fn run(&mut self, stage: Stage) -> Result<Vec<StageSummary>, PipelineError> {
        if stage == Stage::All {
            let mut out = Vec::new();
            for s in Stage::ORDER {
                out.push(self.run_one(s)?);
            }
            return Ok(out);
        }
        Ok(vec![self.run_one(stage)?])
    }

    fn inputs(&self, stage: Stage) -> Vec<(String, PathBuf)> {
        let a = |s: Stage, name: &str| (format!("{s}/{name}"), self.artifact(s, name));
        match stage {
            Stage::Stats => vec![("corpus".into(), self.config.corpus_path.clone())],
            Stage::Score | Stage::Extract1 => vec![a(Stage::Stats, "opinions.jsonl")],
            Stage::Extract2 => vec![
                a(Stage::Stats, "opinions.jsonl"),
                a(Stage::Extract1, "edges.jsonl"),
            ],
            Stage::Summarize => vec![a(Stage::Extract2, "edges.jsonl")],
            Stage::Cluster => vec![a(Stage::Score, "scores.jsonl"), a(Stage::Summarize, "rows.jsonl")],
            Stage::Graph => vec![a(Stage::Cluster, "rows.jsonl"), a(Stage::Cluster, "assignments.jsonl")],
            Stage::Export | Stage::Compare => vec![
                a(Stage::Graph, "positive.json"),
                a(Stage::Graph, "negative.json"),
                a(Stage::Graph, "communities.json"),
                a(Stage::Graph, "positions.json"),
            ],
            Stage::All => Vec::new(),
        }
    }

    fn prompt_fingerprint(&self, kinds: &[TemplateKind]) -> String {
        let mut h = Sha256::new();
        for &k in kinds.iter().chain([TemplateKind::Retry].iter()) {
            let t = self.prompts.get(k);
            h.update(t.id().as_bytes());
            h.update([0]);
            h.update(t.source().as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }

    fn params(&self, stage: Stage) -> Value {
        let c = &self.config;
        let model = json!({
            "model": c.provider.model,
            "retries": c.provider.retries,
        });
        match stage {
            Stage::Stats => json!({ "format": c.corpus_format }),
            Stage::Score => json!({
                "model": model,
                "prompts": self.prompt_fingerprint(&[TemplateKind::Polarity]),
                "threshold": c.threshold,
                "bins": c.bins,
            }),
            Stage::Extract1 => json!({
                "model": model,
                "prompts": self.prompt_fingerprint(&[TemplateKind::Stage1]),
                "extract": c.extract,
            }),
            Stage::Extract2 => json!({
                "model": model,
                "prompts": self.prompt_fingerprint(&[TemplateKind::Stage2]),
                "extract": c.extract,
            }),
            Stage::Summarize => json!({
                "model": model,
                "prompts": self.prompt_fingerprint(&[TemplateKind::Stage3]),
                "extract": c.extract,
            }),
            Stage::Cluster => json!({
                "cluster": c.cluster.params,
                "embedder": self.embedder_id(),
            }),
            Stage::Graph => json!({ "graph": c.graph, "layout": c.layout }),
            Stage::Export => json!({ "formats": ExportFormat::ALL }),
            Stage::Compare => json!({ "top_k": c.graph.top_k }),
            Stage::All => Value::Null,
        }
    }

    fn embedder_id(&self) -> String {
        let c = &self.config.cluster;
        match c.embedder {
            EmbedderKind::Hashing => HashingEmbedder::new(c.dimensions).id(),
            EmbedderKind::Http => format!("http:{}:{}", c.http.endpoint, c.http.model),
        }
    }

    fn run_one(&mut self, stage: Stage) -> Result<StageSummary, PipelineError> {
        for &dep in stage.requires() {
            if self.manifest(dep).is_none() {
                return Err(PipelineError::Dependency {
                    stage,
                    requires: dep,
                });
            }
        }
        let mut inputs = BTreeMap::new();
        for (key, path) in self.inputs(stage) {
            let bytes = match std::fs::read(&path) {
                Ok(b) => b,
                Err(e) if stage == Stage::Stats => return Err(PipelineError::Usage(format!(
                    "corpus.path: cannot read {}: {e}",
                    path.display()
                ))),
                Err(e) => return Err(io_err(&path)(e)),
            };
            inputs.insert(key, sha256_hex(&bytes));
        }
        let params = self.params(stage);
        let stamp = sha256_hex(
            serde_json::to_string(&json!({
                "version": env!("CARGO_PKG_VERSION"),
                "stage": stage.name(),
                "inputs": inputs,
                "params": params,
            }))
            .expect("stamp serializes")
            .as_bytes(),
        );

        let dir = self.stage_dir(stage);
        if let Some(m) = self.manifest(stage) {
            if m.stamp == stamp && self.outputs_intact(&dir, &m) {
                log::info!("{stage}: up to date");
                return Ok(StageSummary {
                    stage,
                    skipped: true,
                    counts: m.counts,
                });
            }
        }

        let manifest_path = dir.join("manifest.json");
        if manifest_path.exists() {
            std::fs::remove_file(&manifest_path).map_err(io_err(&manifest_path))?;
        }
        log::info!("{stage}: running");
        let run = match stage {
            Stage::Stats => self.stats()?,
            Stage::Score => self.score()?,
            Stage::Extract1 => self.extract1()?,
            Stage::Extract2 => self.extract2()?,
            Stage::Summarize => self.summarize()?,
            Stage::Cluster => self.cluster()?,
            Stage::Graph => self.graph()?,
            Stage::Export => self.export()?,
            Stage::Compare => self.compare()?,
            Stage::All => unreachable!("expanded by run"),
        };

        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut outputs = BTreeMap::new();
        for (name, bytes) in &run.outputs {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(io_err(&path))?;
            outputs.insert(name.clone(), sha256_hex(bytes));
        }
        let manifest = Manifest {
            stage: stage.name().into(),
            stamp,
            inputs,
            params,
            counts: run.counts.clone(),
            outputs,
        };
        std::fs::write(&manifest_path, pretty(&manifest)).map_err(io_err(&manifest_path))?;
        Ok(StageSummary {
            stage,
            skipped: false,
            counts: run.counts,
        })
    }

    fn outputs_intact(&self, dir: &Path, m: &Manifest) -> bool {
        m.outputs.iter().all(|(name, hash)| {
            std::fs::read(dir.join(name)).is_ok_and(|b| &sha256_hex(&b) == hash)
        })
    }

    fn opinions(&self) -> Result<Vec<Opinion>, PipelineError> {
        Ok(load_corpus(
            &self.artifact(Stage::Stats, "opinions.jsonl"),
            CorpusFormat::Jsonl,
        )?)
    }

    fn stats(&mut self) -> Result<StageRun, PipelineError> {
        let opinions = load_corpus(&self.config.corpus_path, self.config.corpus_format)?;
        let stats = descriptive_stats(&opinions)?;
        let mut normalized = Vec::new();
        write_jsonl(&opinions, &mut normalized).map_err(io_err(&self.config.corpus_path))?;
        let mut counts = Counts::new();
        counts.insert("opinions".into(), json!(opinions.len()));
        counts.insert("chars_mean".into(), json!(stats.mean));
        counts.insert("chars_std".into(), json!(stats.std));
        counts.insert("chars_min".into(), json!(stats.min));
        counts.insert("chars_median".into(), json!(stats.median));
        counts.insert("chars_max".into(), json!(stats.max));
        Ok(StageRun {
            outputs: vec![
                ("opinions.jsonl".into(), normalized),
                ("stats.json".into(), pretty(&json!({ "opinions": opinions.len(), "char_count": stats }))),
            ],
            counts,
        })
    }

    fn score(&mut self) -> Result<StageRun, PipelineError> {
        let opinions = self.opinions()?;
        let (threshold, bins, retries, workers) = (
            self.config.threshold,
            self.config.bins,
            self.config.provider.retries,
            self.config.workers,
        );
        let prompts = self.prompts.clone();
        let gw = self.gateway()?;
        let records = map_ordered(&opinions, workers, |op| {
            match score_polarity(op, gw, &prompts, retries, threshold) {
                Ok(PolarityScore { opinion_id, score, label }) => Ok(ScoreRecord {
                    opinion_id,
                    status: RecordStatus::Ok,
                    score: Some(score),
                    label: Some(label),
                    error: None,
                }),
                Err(e @ (SentimentError::ExtractionFailure { .. } | SentimentError::EmptyInput(_))) => {
                    log::warn!("{e}");
                    Ok(ScoreRecord {
                        opinion_id: op.id.clone(),
                        status: RecordStatus::Failed,
                        score: None,
                        label: None,
                        error: Some(e.to_string()),
                    })
                }
                Err(SentimentError::Gateway(e)) => Err(e.into()),
                Err(SentimentError::Template(e)) => Err(e.into()),
                Err(SentimentError::InvalidParameter(m)) => Err(PipelineError::Usage(m)),
            }
        })?;

        let scores: Vec<f64> = records.iter().filter_map(|r| r.score).collect();
        let histogram = polarity_histogram(&scores, bins).map_err(|e| PipelineError::Usage(e.to_string()))?;
        let mut hist_csv = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| PipelineError::Integrity(e.to_string());
        hist_csv.write_record(["bin_start", "bin_end", "count"]).map_err(csv_err)?;
        for (lo, hi, c) in histogram_rows(&histogram) {
            hist_csv
                .write_record([lo.to_string(), hi.to_string(), c.to_string()])
                .map_err(csv_err)?;
        }
        let hist_bytes = hist_csv.into_inner().map_err(|e| PipelineError::Integrity(e.to_string()))?;

        let ids = |p: Polarity| -> Vec<&str> {
            records
                .iter()
                .filter(|r| r.label == Some(p))
                .map(|r| r.opinion_id.as_str())
                .collect()
        };
        let (positive, negative) = (ids(Polarity::Positive), ids(Polarity::Negative));
        let failed = records.iter().filter(|r| r.status == RecordStatus::Failed).count();
        let mut counts = Counts::new();
        counts.insert("opinions".into(), json!(records.len()));
        counts.insert("positive".into(), json!(positive.len()));
        counts.insert("negative".into(), json!(negative.len()));
        counts.insert("failed".into(), json!(failed));
        let split = pretty(&json!({
            "threshold": threshold,
            "positive": positive,
            "negative": negative,
        }));
        Ok(StageRun {
            outputs: vec![
                ("scores.jsonl".into(), to_jsonl(&records)),
                ("histogram.csv".into(), hist_bytes),
                ("split.json".into(), split),
            ],
            counts,
        })
    }

    fn extract_record(
        opinion: &Opinion,
        result: Result<StageOutput, ExtractError>,
    ) -> Result<ExtractRecord, PipelineError> {
        match result {
            Ok(output) => Ok(ExtractRecord {
                opinion_id: opinion.id.clone(),
                status: RecordStatus::Ok,
                error: None,
                output: Some(output),
            }),
            Err(e @ (ExtractError::StageFailure { .. } | ExtractError::EmptyInput(_))) => {
                log::warn!("{e}");
                Ok(ExtractRecord {
                    opinion_id: opinion.id.clone(),
                    status: RecordStatus::Failed,
                    error: Some(e.to_string()),
                    output: None,
                })
            }
            Err(ExtractError::Gateway(e)) => Err(e.into()),
            Err(ExtractError::Template(e)) => Err(e.into()),
            Err(e) => Err(PipelineError::Usage(e.to_string())),
        }
    }

    fn extract_counts(records: &[ExtractRecord], patterns: &[u8]) -> Counts {
        let mut counts = Counts::new();
        let status = |s: RecordStatus| records.iter().filter(|r| r.status == s).count();
        counts.insert("opinions".into(), json!(records.len()));
        counts.insert("ok".into(), json!(status(RecordStatus::Ok)));
        counts.insert("failed".into(), json!(status(RecordStatus::Failed)));
        if status(RecordStatus::Skipped) > 0 {
            counts.insert("skipped".into(), json!(status(RecordStatus::Skipped)));
        }
        for &p in patterns {
            let n = records
                .iter()
                .flat_map(|r| r.edges())
                .filter(|e| e.pattern.number() == p)
                .count();
            counts.insert(format!("pattern{p}"), json!(n));
        }
        let mut rejects: BTreeMap<RejectReason, usize> = BTreeMap::new();
        let mut line_errors = 0;
        for o in records.iter().filter_map(|r| r.output.as_ref()) {
            for (reason, n) in o.report.counts() {
                *rejects.entry(reason).or_default() += n;
            }
            line_errors += o.report.line_errors.len();
        }
        for (reason, n) in rejects {
            counts.insert(format!("rejected_{reason}"), json!(n));
        }
        counts.insert("replacement_line_errors".into(), json!(line_errors));
        counts
    }

    fn extract1(&mut self) -> Result<StageRun, PipelineError> {
        let opinions = self.opinions()?;
        let (settings, workers) = (self.config.extract, self.config.workers);
        let prompts = self.prompts.clone();
        let gw = self.gateway()?;
        let records = map_ordered(&opinions, workers, |op| {
            Self::extract_record(op, stage1_extract(op, gw, &prompts, &settings))
        })?;
        Ok(StageRun {
            counts: Self::extract_counts(&records, &[1, 2, 3, 4]),
            outputs: vec![("edges.jsonl".into(), to_jsonl(&records))],
        })
    }

    fn extract2(&mut self) -> Result<StageRun, PipelineError> {
        let opinions = self.opinions()?;
        let stage1: BTreeMap<String, ExtractRecord> =
            read_jsonl::<ExtractRecord>(&self.artifact(Stage::Extract1, "edges.jsonl"))?
                .into_iter()
                .map(|r| (r.opinion_id.clone(), r))
                .collect();
        let (settings, workers) = (self.config.extract, self.config.workers);
        let prompts = self.prompts.clone();
        let gw = self.gateway()?;
        let records = map_ordered(&opinions, workers, |op| {
            let prior = stage1.get(&op.id).ok_or_else(|| {
                PipelineError::Integrity(format!("opinion {} missing from extract1 output", op.id))
            })?;
            if prior.status != RecordStatus::Ok {
                return Ok(ExtractRecord {
                    opinion_id: op.id.clone(),
                    status: RecordStatus::Skipped,
                    error: Some("stage 1 failed".into()),
                    output: None,
                });
            }
            Self::extract_record(op, stage2_extract(op, prior.edges(), gw, &prompts, &settings))
        })?;
        Ok(StageRun {
            counts: Self::extract_counts(&records, &[5]),
            outputs: vec![("edges.jsonl".into(), to_jsonl(&records))],
        })
    }

    fn summarize(&mut self) -> Result<StageRun, PipelineError> {
        let stage2: Vec<ExtractRecord> = read_jsonl(&self.artifact(Stage::Extract2, "edges.jsonl"))?;
        let (settings, workers) = (self.config.extract, self.config.workers);
        let prompts = self.prompts.clone();
        let gw = self.gateway()?;
        let per_opinion = map_ordered(&stage2, workers, |rec| {
            rec.edges()
                .iter()
                .enumerate()
                .map(|(i, edge)| {
                    let outcome = stage3_summarize(edge, i, gw, &prompts, &settings).map_err(|e| match e {
                        ExtractError::Gateway(e) => PipelineError::from(e),
                        ExtractError::Template(e) => e.into(),
                        other => PipelineError::Integrity(other.to_string()),
                    })?;
                    Ok(SummaryRecord {
                        opinion_id: rec.opinion_id.clone(),
                        edge_index: i,
                        outcome,
                    })
                })
                .collect::<Result<Vec<_>, PipelineError>>()
        })?;
        let records: Vec<SummaryRecord> = per_opinion.into_iter().flatten().collect();
        let rows: Vec<SummaryRow> = records
            .iter()
            .filter_map(|r| match &r.outcome {
                SummaryOutcome::Accepted { row, .. } => Some(row.clone()),
                SummaryOutcome::Dropped { .. } => None,
            })
            .collect();
        let warnings: usize = records
            .iter()
            .map(|r| match &r.outcome {
                SummaryOutcome::Accepted { warnings, .. } => warnings.len(),
                SummaryOutcome::Dropped { .. } => 0,
            })
            .sum();
        let mut csv_bytes = Vec::new();
        write_summary_csv(&rows, &mut csv_bytes).map_err(|e| PipelineError::Integrity(e.to_string()))?;
        let mut counts = Counts::new();
        counts.insert("edges".into(), json!(records.len()));
        counts.insert("accepted".into(), json!(rows.len()));
        counts.insert("dropped".into(), json!(records.len() - rows.len()));
        for kind in [crate::extract::SummaryType::Normative, crate::extract::SummaryType::Request] {
            let n = rows.iter().filter(|r| r.kind == kind).count();
            counts.insert(kind.as_str().into(), json!(n));
        }
        counts.insert("length_warnings".into(), json!(warnings));
        Ok(StageRun {
            outputs: vec![
                ("outcomes.jsonl".into(), to_jsonl(&records)),
                ("rows.jsonl".into(), to_jsonl(&rows)),
                ("summary.csv".into(), csv_bytes),
            ],
            counts,
        })
    }

    fn cluster(&mut self) -> Result<StageRun, PipelineError> {
        let scores: Vec<ScoreRecord> = read_jsonl(&self.artifact(Stage::Score, "scores.jsonl"))?;
        let labels: BTreeMap<&str, Polarity> = scores
            .iter()
            .filter_map(|s| Some((s.opinion_id.as_str(), s.label?)))
            .collect();
        let rows: Vec<SummaryRow> = read_jsonl(&self.artifact(Stage::Summarize, "rows.jsonl"))?;
        let total = rows.len();
        let labeled: Vec<LabeledRow> = rows
            .into_iter()
            .filter_map(|row| {
                let label = *labels.get(row.source_opinion_id.as_str())?;
                Some(LabeledRow { label, row })
            })
            .collect();
        let c = &self.config.cluster;
        let embedder: Box<dyn Embedder> = match c.embedder {
            EmbedderKind::Hashing => Box::new(HashingEmbedder::new(c.dimensions)),
            EmbedderKind::Http => Box::new(HttpEmbedder::new(
                c.http.clone(),
                self.config.provider.retry_policy(),
            )?),
        };
        let plain: Vec<SummaryRow> = labeled.iter().map(|l| l.row.clone()).collect();
        let fields = cluster_fields(&plain, embedder.as_ref(), c.params)?;
        let mut assignments = Vec::new();
        write_assignments(&fields, &mut assignments).map_err(io_err(&self.stage_dir(Stage::Cluster)))?;
        let mut counts = Counts::new();
        counts.insert("rows".into(), json!(labeled.len()));
        counts.insert("unscored_rows".into(), json!(total - labeled.len()));
        for (field, fc) in &fields {
            let noise = fc.clusters.iter().filter(|c| c.noise).count();
            counts.insert(format!("field_{field}_clusters"), json!(fc.native_clusters));
            counts.insert(format!("field_{field}_noise"), json!(noise));
        }
        Ok(StageRun {
            outputs: vec![
                ("rows.jsonl".into(), to_jsonl(&labeled)),
                ("assignments.jsonl".into(), assignments),
            ],
            counts,
        })
    }

    fn graph(&mut self) -> Result<StageRun, PipelineError> {
        let labeled: Vec<LabeledRow> = read_jsonl(&self.artifact(Stage::Cluster, "rows.jsonl"))?;
        let path = self.artifact(Stage::Cluster, "assignments.jsonl");
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let clusters = read_assignments(&text).map_err(|e| PipelineError::Integrity(format!("{}: {e}", path.display())))?;
        let rows: Vec<SummaryRow> = labeled.iter().map(|l| l.row.clone()).collect();
        let labels: Vec<Polarity> = labeled.iter().map(|l| l.label).collect();
        let g = &self.config.graph;

        let mut counts = Counts::new();
        let mut outputs = Vec::new();
        let mut filtered = Vec::new();
        for (polarity, min_weight) in [
            (Polarity::Positive, g.min_weight_positive),
            (Polarity::Negative, g.min_weight_negative),
        ] {
            let raw = build_polarity_graph(&rows, &labels, &clusters, polarity)?;
            let kept = filter_by_weight(&raw, min_weight)?;
            let p = polarity.as_str();
            counts.insert(format!("{p}_rows"), json!(labels.iter().filter(|&&l| l == polarity).count()));
            counts.insert(format!("{p}_weight"), json!(raw.total_weight()));
            counts.insert(format!("{p}_nodes"), json!(raw.node_count()));
            counts.insert(format!("{p}_edges"), json!(raw.edge_count()));
            counts.insert(format!("{p}_nodes_kept"), json!(kept.node_count()));
            counts.insert(format!("{p}_edges_kept"), json!(kept.edge_count()));
            outputs.push((format!("{p}_unfiltered.json"), to_json(&raw, None, None)?.into_bytes()));
            outputs.push((format!("{p}.json"), to_json(&kept, None, None)?.into_bytes()));
            filtered.push(kept);
        }
        let union = union_graph(&filtered[0], &filtered[1]);
        let communities = if union.edge_count() == 0 {
            CommunityPartition {
                assignment: union.node_ids().enumerate().map(|(i, id)| (id.to_string(), i)).collect(),
                modularity: 0.0,
            }
        } else {
            detect_communities(&union)?
        };
        let positions = shared_layout(&filtered[0], &filtered[1], self.config.layout);
        counts.insert("union_nodes".into(), json!(union.node_count()));
        counts.insert("communities".into(), json!(communities.community_count()));
        counts.insert("modularity".into(), json!(communities.modularity));
        outputs.push(("communities.json".into(), pretty(&communities)));
        outputs.push(("positions.json".into(), pretty(&positions)));
        Ok(StageRun { outputs, counts })
    }

    fn load_graphs(&self) -> Result<(NarrativeGraph, NarrativeGraph, CommunityPartition, Positions), PipelineError> {
        let read = |name: &str| -> Result<String, PipelineError> {
            let path = self.artifact(Stage::Graph, name);
            std::fs::read_to_string(&path).map_err(io_err(&path))
        };
        let (pos, _) = from_json(&read("positive.json")?)?;
        let (neg, _) = from_json(&read("negative.json")?)?;
        let communities = serde_json::from_str(&read("communities.json")?)
            .map_err(|e| PipelineError::Integrity(format!("graph/communities.json: {e}")))?;
        let positions = serde_json::from_str(&read("positions.json")?)
            .map_err(|e| PipelineError::Integrity(format!("graph/positions.json: {e}")))?;
        Ok((pos, neg, communities, positions))
    }

    fn export(&mut self) -> Result<StageRun, PipelineError> {
        let (pos, neg, communities, positions) = self.load_graphs()?;
        let mut outputs = Vec::new();
        for g in [&pos, &neg] {
            let p = g.polarity.map_or("union", Polarity::as_str);
            for format in ExportFormat::ALL {
                let text = export_graph(g, Some(&positions), Some(&communities), format)?;
                outputs.push((format!("{p}.{}", format.extension()), text.into_bytes()));
            }
        }
        let mut counts = Counts::new();
        counts.insert("files".into(), json!(outputs.len()));
        Ok(StageRun { outputs, counts })
    }

    fn compare(&mut self) -> Result<StageRun, PipelineError> {
        let (pos, neg, communities, _) = self.load_graphs()?;
        let rows = compare_report(&pos, &neg, Some(&communities), self.config.graph.top_k);
        let mut csv_bytes = Vec::new();
        write_report_csv(&rows, &mut csv_bytes).map_err(|e| PipelineError::Integrity(e.to_string()))?;
        let mut counts = Counts::new();
        counts.insert("rows".into(), json!(rows.len()));
        Ok(StageRun {
            outputs: vec![
                ("report.csv".into(), csv_bytes),
                ("report.json".into(), pretty(&rows)),
            ],
            counts,
        })
    }
}
