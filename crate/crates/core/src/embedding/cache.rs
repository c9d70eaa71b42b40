//! Content-addressed embedding cache: a directory of PHDE files named by the
//! hex digest of `(model_id, max_tokens, text)`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::cloud::TokenEmbeddingMatrix;

use super::format::{read_embedding_file, read_header, write_embedding_file};
use super::{EmbeddingError, EmbeddingProvider};

/// File extension of cached and precomputed embedding files.
pub const EXTENSION: &str = "phde";

const DOMAIN_TAG: &[u8] = b"shortphd-cache-key-v1\0";

/// SHA-256 digest identifying one embedding request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey([u8; 32]);

impl CacheKey {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn file_name(&self) -> String {
        format!("{}.{EXTENSION}", self.to_hex())
    }
}

impl std::fmt::Display for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// SHA-256 over an unambiguous encoding of the request:
///
/// ```text
/// "shortphd-cache-key-v1\0"
/// u64 LE len(model_id) ‖ model_id
/// 0x00                      (max_tokens absent)
///   | 0x01 ‖ u64 LE max_tokens
/// u64 LE len(text) ‖ text (UTF-8)
/// ```
pub fn cache_key(model_id: &str, max_tokens: Option<usize>, text: &str) -> CacheKey {
    let mut h = Sha256::new();
    h.update(DOMAIN_TAG);
    h.update((model_id.len() as u64).to_le_bytes());
    h.update(model_id.as_bytes());
    match max_tokens {
        None => h.update([0u8]),
        Some(m) => {
            h.update([1u8]);
            h.update((m as u64).to_le_bytes());
        }
    }
    h.update((text.len() as u64).to_le_bytes());
    h.update(text.as_bytes());
    CacheKey(h.finalize().into())
}

/// One cached file, as listed by [`EmbeddingCache::entries`].
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct CacheEntry {
    pub digest: String,
    pub n: u32,
    pub d: u32,
    pub bytes: u64,
}

#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    dir: PathBuf,
}

impl EmbeddingCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<TokenEmbeddingMatrix>, EmbeddingError> {
        match fs::read(self.path_for(key)) {
            Ok(bytes) => read_embedding_file(&bytes).map(Some),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(EmbeddingError::Io(e.to_string())),
        }
    }

    /// Writes to a temporary file in the cache directory, then renames it
    /// into place, so readers never observe a partial file.
    pub fn put(&self, key: &CacheKey, matrix: &TokenEmbeddingMatrix) -> Result<(), EmbeddingError> {
        let bytes = write_embedding_file(matrix)?;
        write_atomic(&self.path_for(key), &bytes)
    }

    pub fn entries(&self) -> Result<Vec<CacheEntry>, EmbeddingError> {
        let mut out = Vec::new();
        let read_dir = match fs::read_dir(&self.dir) {
            Ok(r) => r,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(EmbeddingError::Io(e.to_string())),
        };
        for entry in read_dir {
            let path = entry.map_err(|e| EmbeddingError::Io(e.to_string()))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some(EXTENSION) {
                continue;
            }
            let bytes = fs::read(&path).map_err(|e| EmbeddingError::Io(e.to_string()))?;
            let header = read_header(&bytes)?;
            let digest = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
            out.push(CacheEntry { digest, n: header.n, d: header.d, bytes: bytes.len() as u64 });
        }
        out.sort_by(|a, b| a.digest.cmp(&b.digest));
        Ok(out)
    }

    /// Removes every cached file; returns how many were deleted.
    pub fn clear(&self) -> Result<usize, EmbeddingError> {
        let entries = self.entries()?;
        for e in &entries {
            let path = self.dir.join(format!("{}.{EXTENSION}", e.digest));
            fs::remove_file(path).map_err(|e| EmbeddingError::Io(e.to_string()))?;
        }
        Ok(entries.len())
    }
}

/// Writes `bytes` to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), EmbeddingError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| EmbeddingError::Io(e.to_string()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| EmbeddingError::Io(e.to_string()))?;
    tmp.write_all(bytes).map_err(|e| EmbeddingError::Io(e.to_string()))?;
    tmp.persist(path).map_err(|e| EmbeddingError::Io(e.error.to_string()))?;
    Ok(())
}

/// Serves repeated requests from an [`EmbeddingCache`] before asking the
/// wrapped provider.
pub struct CachedProvider<P> {
    inner: P,
    cache: EmbeddingCache,
}

impl<P: EmbeddingProvider> CachedProvider<P> {
    pub fn new(inner: P, cache: EmbeddingCache) -> Self {
        Self { inner, cache }
    }

    pub fn cache(&self) -> &EmbeddingCache {
        &self.cache
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedProvider<P> {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn max_tokens(&self) -> Option<usize> {
        self.inner.max_tokens()
    }

    fn embed(&self, text: &str) -> Result<TokenEmbeddingMatrix, EmbeddingError> {
        let key = cache_key(self.model_id(), self.max_tokens(), text);
        if let Some(hit) = self.cache.get(&key)? {
            return Ok(hit);
        }
        let fresh = self.inner.embed(text)?;
        self.cache.put(&key, &fresh)?;
        Ok(fresh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_depends_on_every_field() {
        let base = cache_key("m", Some(50), "hello");
        assert_eq!(base, cache_key("m", Some(50), "hello"));
        assert_ne!(base, cache_key("m", Some(100), "hello"));
        assert_ne!(base, cache_key("m", None, "hello"));
        assert_ne!(base, cache_key("m2", Some(50), "hello"));
        assert_ne!(base, cache_key("m", Some(50), "hellp"));
        // Field boundaries are length-prefixed.
        assert_ne!(cache_key("ab", None, "c"), cache_key("a", None, "bc"));
    }

    #[test]
    fn key_is_stable() {
        // Reference value from Python hashlib over the documented encoding.
        assert_eq!(
            cache_key("test-model", None, "hello").to_hex(),
            "a0a949caa73d7896e3ff08654c1e307f53f4dacd1f8356436bc8a11ef060802c"
        );
    }

    #[test]
    fn put_get_list_clear() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::new(dir.path().join("nested"));
        let key = cache_key("m", None, "t");
        assert_eq!(cache.get(&key).unwrap(), None);
        assert!(cache.entries().unwrap().is_empty());

        let m = TokenEmbeddingMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.5]).unwrap();
        cache.put(&key, &m).unwrap();
        assert_eq!(cache.get(&key).unwrap(), Some(m));
        let entries = cache.entries().unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!((entries[0].digest.as_str(), entries[0].n, entries[0].d), (key.to_hex().as_str(), 2, 2));
        assert_eq!(entries[0].bytes, 32);

        assert_eq!(cache.clear().unwrap(), 1);
        assert_eq!(cache.get(&key).unwrap(), None);
    }
}
