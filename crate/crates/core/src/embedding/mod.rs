//! Turning text into token embedding clouds.
//!
//! Three kinds of provider sit behind [`EmbeddingProvider`]: a directory of
//! precomputed PHDE files, a remote embedding service, and a synthetic double
//! for tests. Any of them may be wrapped in a [`CachedProvider`].

pub mod cache;
pub mod format;
pub mod remote;
pub mod synthetic;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::TokenEmbeddingMatrix;

pub use cache::{cache_key, write_atomic, CacheKey, CachedProvider, EmbeddingCache};
pub use format::{read_embedding_file, write_embedding_file};
pub use remote::RemoteProvider;
pub use synthetic::SyntheticDouble;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("not a PHDE file (bad magic)")]
    BadMagic,
    #[error("unsupported PHDE version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported PHDE flags {0:#06x}")]
    UnsupportedFlags(u16),
    #[error("truncated PHDE data: expected {expected} bytes, got {got}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("PHDE data has trailing bytes: expected {expected} bytes, got {got}")]
    TrailingBytes { expected: usize, got: usize },
    #[error("payload holds {got} bytes but n*d*4 = {expected}")]
    PayloadSize { expected: usize, got: usize },
    #[error("embedding matrix must be non-empty (n={n}, d={d})")]
    EmptyMatrix { n: usize, d: usize },
    #[error("non-finite value at flat index {index}")]
    NonFiniteValue { index: usize },
    #[error("no precomputed embedding at {0}")]
    NotFound(PathBuf),
    #[error("embedding service unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("embedding service returned a malformed response: {0}")]
    RemoteMalformed(String),
    #[error("text embeds to {got} tokens, need at least {needed}")]
    TooFewTokens { got: usize, needed: usize },
    #[error("invalid provider: {0}")]
    InvalidProvider(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Maps text to its per-token embedding cloud.
///
/// Implementations must be safe to call from several threads at once.
pub trait EmbeddingProvider: Send + Sync {
    /// Identifies the model and export options; part of every cache key.
    fn model_id(&self) -> &str;

    /// Token truncation requested from the model, if any.
    fn max_tokens(&self) -> Option<usize>;

    fn embed(&self, text: &str) -> Result<TokenEmbeddingMatrix, EmbeddingError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Arc<P> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn max_tokens(&self) -> Option<usize> {
        (**self).max_tokens()
    }

    fn embed(&self, text: &str) -> Result<TokenEmbeddingMatrix, EmbeddingError> {
        (**self).embed(text)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn max_tokens(&self) -> Option<usize> {
        (**self).max_tokens()
    }

    fn embed(&self, text: &str) -> Result<TokenEmbeddingMatrix, EmbeddingError> {
        (**self).embed(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    FileDirectory,
    RemoteEndpoint,
    SyntheticDouble,
}

impl std::str::FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "file" | "file-directory" => Ok(Self::FileDirectory),
            "remote" | "remote-endpoint" => Ok(Self::RemoteEndpoint),
            "synthetic" | "synthetic-double" => Ok(Self::SyntheticDouble),
            other => Err(format!("unknown provider kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingProviderSpec {
    pub kind: ProviderKind,
    /// Directory, base URL, or synthetic descriptor depending on `kind`.
    pub location: String,
    pub model_id: String,
    pub max_tokens: Option<usize>,
}

impl EmbeddingProviderSpec {
    pub fn validate(&self, min_subsample: usize) -> Result<(), EmbeddingError> {
        if self.location.trim().is_empty() {
            return Err(EmbeddingError::InvalidProvider("location must be non-empty".into()));
        }
        if let Some(m) = self.max_tokens {
            if m < min_subsample {
                return Err(EmbeddingError::InvalidProvider(format!(
                    "max_tokens {m} is below min_subsample {min_subsample}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ProviderOptions {
    /// Cache directory; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
    pub max_in_flight: usize,
    pub timeout: Duration,
}

impl Default for ProviderOptions {
    fn default() -> Self {
        Self { cache_dir: None, max_in_flight: remote::DEFAULT_MAX_IN_FLIGHT, timeout: remote::DEFAULT_TIMEOUT }
    }
}

/// Reads `<dir>/<cache key hex>.phde`, as written by an offline exporter.
#[derive(Debug, Clone)]
pub struct FileDirectoryProvider {
    dir: PathBuf,
    model_id: String,
    max_tokens: Option<usize>,
}

impl FileDirectoryProvider {
    pub fn new(dir: impl Into<PathBuf>, model_id: &str, max_tokens: Option<usize>) -> Self {
        Self { dir: dir.into(), model_id: model_id.to_owned(), max_tokens }
    }
}

impl EmbeddingProvider for FileDirectoryProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn max_tokens(&self) -> Option<usize> {
        self.max_tokens
    }

    fn embed(&self, text: &str) -> Result<TokenEmbeddingMatrix, EmbeddingError> {
        let path = self.dir.join(cache_key(&self.model_id, self.max_tokens, text).file_name());
        match std::fs::read(&path) {
            Ok(bytes) => read_embedding_file(&bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(EmbeddingError::NotFound(path)),
            Err(e) => Err(EmbeddingError::Io(format!("{}: {e}", path.display()))),
        }
    }
}

/// Builds the provider described by `spec`. Remote and synthetic providers are
/// wrapped in the directory cache when `options.cache_dir` is set; the file
/// provider already is such a directory.
pub fn open_provider(
    spec: &EmbeddingProviderSpec,
    options: &ProviderOptions,
) -> Result<Arc<dyn EmbeddingProvider>, EmbeddingError> {
    if spec.location.trim().is_empty() {
        return Err(EmbeddingError::InvalidProvider("location must be non-empty".into()));
    }
    fn maybe_cached<P: EmbeddingProvider + 'static>(p: P, dir: &Option<PathBuf>) -> Arc<dyn EmbeddingProvider> {
        match dir {
            Some(d) => Arc::new(CachedProvider::new(p, EmbeddingCache::new(d))),
            None => Arc::new(p),
        }
    }
    Ok(match spec.kind {
        ProviderKind::FileDirectory => {
            Arc::new(FileDirectoryProvider::new(&spec.location, &spec.model_id, spec.max_tokens))
        }
        ProviderKind::RemoteEndpoint => maybe_cached(
            RemoteProvider::new(
                &spec.location,
                &spec.model_id,
                spec.max_tokens,
                options.max_in_flight,
                options.timeout,
            ),
            &options.cache_dir,
        ),
        ProviderKind::SyntheticDouble => maybe_cached(
            SyntheticDouble::parse(&spec.location, &spec.model_id, spec.max_tokens)?,
            &options.cache_dir,
        ),
    })
}

/// One-shot fetch through a freshly opened provider.
pub fn fetch_embedding(
    spec: &EmbeddingProviderSpec,
    options: &ProviderOptions,
    text: &str,
) -> Result<TokenEmbeddingMatrix, EmbeddingError> {
    open_provider(spec, options)?.embed(text)
}
