//! Sentence embeddings: a deterministic hashing embedder and an HTTP client.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::ClusterError;
use crate::gateway::RetryPolicy;

pub const DEFAULT_DIMENSIONS: usize = 512;

pub trait Embedder: Send + Sync {
    /// One unit-norm vector per text, in order.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ClusterError>;

    /// Stable identifier recorded in stage manifests.
    fn id(&self) -> String;
}

/// Scale to unit L2 norm. Fails on a zero or non-finite vector.
pub fn l2_normalize(mut v: Vec<f64>) -> Result<Vec<f64>, ClusterError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(ClusterError::Integrity("embedding has non-finite values".into()));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(ClusterError::UndefinedMetric);
    }
    for x in &mut v {
        *x /= norm;
    }
    Ok(v)
}

/// Character 3-gram counts hashed into a fixed number of buckets.
///
/// Text is lowercased and whitespace-collapsed, then padded with one space
/// on each side so word boundaries contribute their own grams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    pub dimensions: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder {
            dimensions: DEFAULT_DIMENSIONS,
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl HashingEmbedder {
    pub fn new(dimensions: usize) -> Self {
        HashingEmbedder { dimensions }
    }

    /// Un-normalized bucket counts.
    pub fn features(&self, text: &str) -> Vec<f64> {
        let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
        let padded: Vec<char> = format!(" {} ", words.join(" ")).chars().collect();
        let mut v = vec![0.0; self.dimensions];
        let mut buf = [0u8; 12];
        for gram in padded.windows(3) {
            let mut len = 0;
            for c in gram {
                len += c.encode_utf8(&mut buf[len..]).len();
            }
            v[(fnv1a(&buf[..len]) % self.dimensions as u64) as usize] += 1.0;
        }
        v
    }

    pub fn embed_one(&self, text: &str) -> Result<Vec<f64>, ClusterError> {
        if text.trim().is_empty() {
            return Err(ClusterError::EmptyText);
        }
        l2_normalize(self.features(text))
    }
}

impl Embedder for HashingEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ClusterError> {
        if self.dimensions == 0 {
            return Err(ClusterError::InvalidParameter("dimensions must be >= 1".into()));
        }
        texts.iter().map(|t| self.embed_one(t)).collect()
    }

    fn id(&self) -> String {
        format!("hashing-3gram-{}", self.dimensions)
    }
}

/// OpenAI-style `/embeddings` endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpEmbedderConfig {
    pub endpoint: String,
    pub model: String,
    pub auth_env: String,
    /// JSON pointer to the array of result objects.
    pub data_pointer: String,
    /// Key of the vector inside each result object.
    pub vector_field: String,
    pub timeout_secs: u64,
}

impl Default for HttpEmbedderConfig {
    fn default() -> Self {
        HttpEmbedderConfig {
            endpoint: "https://api.openai.com/v1/embeddings".into(),
            model: "text-embedding-3-small".into(),
            auth_env: "OPENAI_API_KEY".into(),
            data_pointer: "/data".into(),
            vector_field: "embedding".into(),
            timeout_secs: 120,
        }
    }
}

impl HttpEmbedderConfig {
    /// Pull and normalize the vectors out of a response body.
    pub fn parse_response(&self, body: &Value, expected: usize) -> Result<Vec<Vec<f64>>, ClusterError> {
        let items = body
            .pointer(&self.data_pointer)
            .and_then(Value::as_array)
            .ok_or_else(|| ClusterError::Integrity(format!("no array at `{}`", self.data_pointer)))?;
        if items.len() != expected {
            return Err(ClusterError::Integrity(format!(
                "asked for {expected} embeddings, got {}",
                items.len()
            )));
        }
        let mut out = Vec::with_capacity(expected);
        for item in items {
            let raw = item
                .get(&self.vector_field)
                .and_then(Value::as_array)
                .ok_or_else(|| ClusterError::Integrity("result without a vector".into()))?;
            let v: Vec<f64> = raw
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| ClusterError::Integrity("non-numeric value".into())))
                .collect::<Result<_, _>>()?;
            out.push(l2_normalize(v)?);
        }
        if let Some(first) = out.first() {
            if out.iter().any(|v| v.len() != first.len()) {
                return Err(ClusterError::Integrity("dimension mismatch within batch".into()));
            }
        }
        Ok(out)
    }
}

pub struct HttpEmbedder {
    config: HttpEmbedderConfig,
    token: String,
    policy: RetryPolicy,
    client: reqwest::blocking::Client,
}

impl HttpEmbedder {
    pub fn new(config: HttpEmbedderConfig, policy: RetryPolicy) -> Result<Self, ClusterError> {
        let token = std::env::var(&config.auth_env).map_err(|_| {
            ClusterError::Provider(format!("environment variable {} is not set", config.auth_env))
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ClusterError::Provider(e.to_string()))?;
        Ok(HttpEmbedder {
            config,
            token,
            policy,
            client,
        })
    }

    fn call(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ClusterError> {
        let response = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(&self.token)
            .json(&json!({ "model": self.config.model, "input": texts }))
            .send()
            .map_err(|e| ClusterError::Provider(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| ClusterError::Provider(e.to_string()))?;
        if !status.is_success() {
            return Err(ClusterError::Provider(format!("status {status}: {text}")));
        }
        let body: Value =
            serde_json::from_str(&text).map_err(|e| ClusterError::Integrity(e.to_string()))?;
        self.config.parse_response(&body, texts.len())
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ClusterError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(ClusterError::EmptyText);
        }
        let mut attempt = 0;
        loop {
            match self.call(texts) {
                Err(ClusterError::Provider(msg)) if attempt < self.policy.max_retries => {
                    log::warn!("embedding request failed: {msg}; retrying");
                    thread::sleep(self.policy.delay(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn id(&self) -> String {
        format!("http:{}", self.config.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::cosine_distance;

    #[test]
    fn deterministic_unit_vectors() {
        let e = HashingEmbedder::default();
        let v = e.embed(&["same text".into(), "same text".into()]).unwrap();
        assert_eq!(v[0], v[1]);
        let norm: f64 = v[0].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert_eq!(v[0].len(), 512);
    }

    #[test]
    fn different_grams_differ() {
        let e = HashingEmbedder::default();
        let (a, b) = (e.features("abc"), e.features("xyz"));
        // " ab", "abc", "bc " vs " xy", "xyz", "yz "
        assert_eq!(a.iter().sum::<f64>(), 3.0);
        assert_ne!(a, b);
        let v = e.embed(&["abc".into(), "xyz".into()]).unwrap();
        assert!(cosine_distance(&v[0], &v[1]).unwrap() > 0.0);
    }

    #[test]
    fn empty_text_is_an_error() {
        assert!(HashingEmbedder::default().embed(&["  ".into()]).is_err());
    }

    #[test]
    fn http_response_parsing() {
        let cfg = HttpEmbedderConfig::default();
        let body = json!({"data": [{"embedding": [3.0, 4.0]}, {"embedding": [0.0, 2.0]}]});
        let v = cfg.parse_response(&body, 2).unwrap();
        assert_eq!(v[0], [0.6, 0.8]);
        assert_eq!(v[1], [0.0, 1.0]);
        let bad = json!({"data": [{"embedding": [1.0]}, {"embedding": [0.0, 2.0]}]});
        assert!(matches!(cfg.parse_response(&bad, 2), Err(ClusterError::Integrity(_))));
        assert!(cfg.parse_response(&body, 3).is_err());
    }
}
