use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CompletionRequest, GatewayError};

/// One recorded completion, stored as a JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request_digest: String,
    pub response_text: String,
    pub recorded_at: String,
    /// SHA-256 of `response_text`; detects hand edits of the stored reply.
    pub response_sha256: String,
    /// The request the response answers. Kept for auditing and to re-derive
    /// `request_digest` on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request: Option<CompletionRequest>,
}

impl CacheEntry {
    pub fn new(request: &CompletionRequest, response_text: &str) -> Self {
        CacheEntry {
            request_digest: request.digest(),
            response_text: response_text.to_string(),
            recorded_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            response_sha256: sha256_hex(response_text),
            request: Some(request.clone()),
        }
    }

    pub fn verify(&self) -> Result<(), GatewayError> {
        if sha256_hex(&self.response_text) != self.response_sha256 {
            return Err(GatewayError::Integrity(format!(
                "entry {} response does not match its stored checksum",
                self.request_digest
            )));
        }
        if let Some(req) = &self.request {
            let digest = req.digest();
            if digest != self.request_digest {
                return Err(GatewayError::Integrity(format!(
                    "entry {} stores a request whose digest is {digest}",
                    self.request_digest
                )));
            }
        }
        Ok(())
    }
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Content-addressed store of completions.
///
/// Many readers, one writer: lookups take a read lock, and new entries are
/// appended to the backing file under a mutex.
pub struct CompletionCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, CacheEntry>>,
    writer: Mutex<Option<File>>,
}

impl CompletionCache {
    pub fn in_memory() -> Self {
        CompletionCache {
            path: None,
            entries: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
        }
    }

    /// Load a cache file, verifying every entry. A missing file is an empty
    /// cache. The file is only created once something is inserted.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (lineno, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheEntry = serde_json::from_str(&line).map_err(|e| {
                    GatewayError::Integrity(format!("{}:{}: {e}", path.display(), lineno + 1))
                })?;
                entry.verify()?;
                entries.entry(entry.request_digest.clone()).or_insert(entry);
            }
        }
        Ok(CompletionCache {
            path: Some(path),
            entries: RwLock::new(entries),
            writer: Mutex::new(None),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, digest: &str) -> Option<String> {
        self.entries
            .read()
            .expect("cache lock")
            .get(digest)
            .map(|e| e.response_text.clone())
    }

    pub fn insert(&self, request: &CompletionRequest, response: &str) -> Result<(), GatewayError> {
        let entry = CacheEntry::new(request, response);
        let mut writer = self.writer.lock().expect("cache writer lock");
        {
            let entries = self.entries.read().expect("cache lock");
            if entries.contains_key(&entry.request_digest) {
                return Ok(());
            }
        }
        if let Some(path) = &self.path {
            if writer.is_none() {
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                *writer = Some(OpenOptions::new().create(true).append(true).open(path)?);
            }
            let file = writer.as_mut().expect("writer opened");
            let line = serde_json::to_string(&entry).map_err(std::io::Error::other)?;
            writeln!(file, "{line}")?;
            file.flush()?;
        }
        self.entries
            .write()
            .expect("cache lock")
            .insert(entry.request_digest.clone(), entry);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ModelParams;

    fn req(p: &str) -> CompletionRequest {
        CompletionRequest::new("t", p, ModelParams::default()).unwrap()
    }

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let cache = CompletionCache::open(&path).unwrap();
        cache.insert(&req("a"), "alpha").unwrap();
        cache.insert(&req("b"), "beta").unwrap();
        cache.insert(&req("a"), "ignored duplicate").unwrap();
        drop(cache);
        let lines = std::fs::read_to_string(&path).unwrap().lines().count();
        assert_eq!(lines, 2);
        let cache = CompletionCache::open(&path).unwrap();
        assert_eq!(cache.get(&req("a").digest()).unwrap(), "alpha");
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn edited_response_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let cache = CompletionCache::open(&path).unwrap();
        cache.insert(&req("a"), "original").unwrap();
        drop(cache);
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace("original", "tampered")).unwrap();
        assert!(matches!(
            CompletionCache::open(&path),
            Err(GatewayError::Integrity(_))
        ));
    }

    #[test]
    fn stale_digest_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let mut entry = CacheEntry::new(&req("a"), "x");
        entry.request_digest = "0".repeat(64);
        std::fs::write(&path, serde_json::to_string(&entry).unwrap() + "\n").unwrap();
        assert!(matches!(
            CompletionCache::open(&path),
            Err(GatewayError::Integrity(_))
        ));
    }
}
