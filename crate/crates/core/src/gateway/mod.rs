//! Completion providers with content-addressed record/replay caching.
//!
//! Every model call in the pipeline goes through [`Gateway::complete`]. In
//! replay mode the gateway answers only from the cache file and never touches
//! the network, which makes the whole pipeline a pure function of
//! `(corpus, config, cache)`.

mod cache;
mod http;
mod scripted;

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CacheEntry, CompletionCache};
pub use http::{HttpProvider, HttpProviderConfig};
pub use scripted::{ScriptRule, ScriptedProvider};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider rejected request (status {status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("provider returned an empty response")]
    EmptyResponse,
    #[error("replay miss: no cached response for digest {digest}")]
    ReplayMiss { digest: String },
    #[error("cache integrity error: {0}")]
    Integrity(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cache i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("provider configuration error: {0}")]
    Config(String),
}

impl GatewayError {
    /// Only transport failures are worth retrying.
    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::Transport(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub temperature: f64,
    pub max_output: u32,
    pub model_id: String,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            temperature: 0.0,
            max_output: 2048,
            model_id: "gpt-4-turbo-2024-04-09".to_string(),
        }
    }
}

/// A fully rendered prompt plus the sampling parameters it is sent with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt_template_id: String,
    pub rendered_prompt: String,
    pub params: ModelParams,
}

impl CompletionRequest {
    pub fn new(
        prompt_template_id: impl Into<String>,
        rendered_prompt: impl Into<String>,
        params: ModelParams,
    ) -> Result<Self, GatewayError> {
        let req = CompletionRequest {
            prompt_template_id: prompt_template_id.into(),
            rendered_prompt: rendered_prompt.into(),
            params,
        };
        req.check()?;
        Ok(req)
    }

    fn check(&self) -> Result<(), GatewayError> {
        if self.rendered_prompt.is_empty() {
            return Err(GatewayError::InvalidRequest("rendered prompt is empty".into()));
        }
        if !(self.params.temperature >= 0.0 && self.params.temperature.is_finite()) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature must be finite and >= 0, got {}",
                self.params.temperature
            )));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON encoding of the request, hex encoded.
    ///
    /// Field order is fixed by the struct definitions and floats are written
    /// with the shortest round-trip representation, so the digest is stable
    /// across runs and platforms.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

/// Anything that can turn a request into text.
pub trait CompletionProvider: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError>;
}

impl<P: CompletionProvider + ?Sized> CompletionProvider for &P {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

impl<P: CompletionProvider + ?Sized> CompletionProvider for Box<P> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

/// Single provider call. Empty replies are an error.
pub fn complete(
    request: &CompletionRequest,
    provider: &dyn CompletionProvider,
) -> Result<String, GatewayError> {
    request.check()?;
    let text = provider.complete(request)?;
    if text.trim().is_empty() {
        return Err(GatewayError::EmptyResponse);
    }
    Ok(text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 2,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_retries: u32) -> Self {
        RetryPolicy {
            max_retries,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// [`complete`] with exponential backoff on retryable failures.
/// Makes at most `max_retries + 1` provider calls.
pub fn complete_with_retry(
    request: &CompletionRequest,
    provider: &dyn CompletionProvider,
    policy: &RetryPolicy,
) -> Result<String, GatewayError> {
    let mut attempt = 0;
    loop {
        match complete(request, provider) {
            Err(e) if e.is_retryable() && attempt < policy.max_retries => {
                log::warn!("attempt {} failed: {e}; retrying", attempt + 1);
                thread::sleep(policy.delay(attempt));
                attempt += 1;
            }
            other => return other,
        }
    }
}

/// Memoized completion: a hit returns the stored text without calling the
/// provider; a miss calls it and persists the new entry.
pub fn cached_complete(
    request: &CompletionRequest,
    provider: &dyn CompletionProvider,
    cache: &CompletionCache,
    policy: &RetryPolicy,
) -> Result<String, GatewayError> {
    let digest = request.digest();
    if let Some(text) = cache.get(&digest) {
        return Ok(text);
    }
    let text = complete_with_retry(request, provider, policy)?;
    cache.insert(request, &text)?;
    Ok(text)
}

/// Strict replay: answers only from the cache.
pub struct ReplayProvider<'a> {
    cache: &'a CompletionCache,
}

impl<'a> ReplayProvider<'a> {
    pub fn new(cache: &'a CompletionCache) -> Self {
        ReplayProvider { cache }
    }
}

impl CompletionProvider for ReplayProvider<'_> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let digest = request.digest();
        self.cache
            .get(&digest)
            .ok_or(GatewayError::ReplayMiss { digest })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    /// Call the provider on cache misses and persist the responses.
    Record,
    /// Answer from the cache only; a miss is an error.
    #[default]
    Replay,
    /// Call the provider for every request, bypassing the cache.
    Live,
}

impl std::str::FromStr for ProviderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "record" => Ok(ProviderMode::Record),
            "replay" => Ok(ProviderMode::Replay),
            "live" => Ok(ProviderMode::Live),
            other => Err(format!("unknown mode `{other}` (expected record, replay or live)")),
        }
    }
}

/// The pipeline's single entry point for model calls.
pub struct Gateway {
    mode: ProviderMode,
    provider: Option<Box<dyn CompletionProvider>>,
    cache: CompletionCache,
    policy: RetryPolicy,
    params: ModelParams,
}

impl Gateway {
    /// Replay-only gateway. It holds no provider, so it cannot reach the network.
    pub fn replay(cache: CompletionCache, params: ModelParams) -> Self {
        Gateway {
            mode: ProviderMode::Replay,
            provider: None,
            cache,
            policy: RetryPolicy::immediate(0),
            params,
        }
    }

    pub fn new(
        mode: ProviderMode,
        provider: Box<dyn CompletionProvider>,
        cache: CompletionCache,
        policy: RetryPolicy,
        params: ModelParams,
    ) -> Self {
        Gateway {
            mode,
            provider: Some(provider),
            cache,
            policy,
            params,
        }
    }

    pub fn mode(&self) -> ProviderMode {
        self.mode
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn cache(&self) -> &CompletionCache {
        &self.cache
    }

    /// Build a request with this gateway's model parameters.
    pub fn request(
        &self,
        template_id: &str,
        prompt: String,
    ) -> Result<CompletionRequest, GatewayError> {
        CompletionRequest::new(template_id, prompt, self.params.clone())
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        match (self.mode, &self.provider) {
            (ProviderMode::Replay, _) => complete(request, &ReplayProvider::new(&self.cache)),
            (ProviderMode::Record, Some(p)) => {
                cached_complete(request, p.as_ref(), &self.cache, &self.policy)
            }
            (ProviderMode::Live, Some(p)) => complete_with_retry(request, p.as_ref(), &self.policy),
            (_, None) => Err(GatewayError::Config(
                "no provider configured for a non-replay mode".into(),
            )),
        }
    }
}
