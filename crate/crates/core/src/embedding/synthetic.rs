//! Deterministic stand-in for a real embedding model.
//!
//! Each whitespace-separated word is one token. The token cloud is sampled
//! from a cube or sphere manifold (see [`crate::eval::synthetic`]) with a seed
//! hashed from the request, so the same text always yields the same matrix.
//! Coordinates are rounded to single precision.
//!
//! The location string has the form `<cube|sphere>:<d|auto>:<ambient>`. With
//! `auto` the intrinsic dimension follows the lexical diversity of the text,
//! `d = 1 + round(5 · distinct/total)` over lower-cased words, which gives
//! repetitive texts flatter clouds than varied ones.

use crate::cloud::TokenEmbeddingMatrix;
use crate::eval::synthetic::{sample_manifold, Manifold};
use crate::rng;

use super::{cache::cache_key, EmbeddingError, EmbeddingProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoubleDimension {
    Fixed(usize),
    Auto,
}

/// Largest intrinsic dimension `auto` can produce.
pub const AUTO_MAX_DIMENSION: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticDouble {
    manifold: Manifold,
    dimension: DoubleDimension,
    ambient: usize,
    model_id: String,
    max_tokens: Option<usize>,
    location: String,
}

impl SyntheticDouble {
    pub fn parse(location: &str, model_id: &str, max_tokens: Option<usize>) -> Result<Self, EmbeddingError> {
        let bad = |why: &str| EmbeddingError::InvalidProvider(format!("synthetic location {location:?}: {why}"));
        let parts: Vec<&str> = location.split(':').collect();
        let [manifold, dim, ambient] = parts.as_slice() else {
            return Err(bad("expected <cube|sphere>:<d|auto>:<ambient>"));
        };
        let manifold: Manifold = manifold.parse().map_err(|e: String| bad(&e))?;
        let dimension = match *dim {
            "auto" => DoubleDimension::Auto,
            d => DoubleDimension::Fixed(
                d.parse().ok().filter(|&d: &usize| d >= 1).ok_or_else(|| bad("bad intrinsic dimension"))?,
            ),
        };
        let ambient: usize = ambient.parse().ok().filter(|&a| a >= 1).ok_or_else(|| bad("bad ambient dimension"))?;
        let widest = match dimension {
            DoubleDimension::Fixed(d) => d,
            DoubleDimension::Auto => AUTO_MAX_DIMENSION,
        };
        if ambient < manifold.min_ambient(widest) {
            return Err(bad("ambient dimension too small for the manifold"));
        }
        Ok(Self {
            manifold,
            dimension,
            ambient,
            model_id: model_id.to_owned(),
            max_tokens,
            location: location.to_owned(),
        })
    }

    pub fn intrinsic_dimension_for(&self, words: &[&str]) -> usize {
        match self.dimension {
            DoubleDimension::Fixed(d) => d,
            DoubleDimension::Auto => {
                let mut distinct: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
                distinct.sort();
                distinct.dedup();
                let ratio = distinct.len() as f64 / words.len().max(1) as f64;
                1 + (5.0 * ratio).round() as usize
            }
        }
    }
}

impl EmbeddingProvider for SyntheticDouble {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn max_tokens(&self) -> Option<usize> {
        self.max_tokens
    }

    fn embed(&self, text: &str) -> Result<TokenEmbeddingMatrix, EmbeddingError> {
        let mut words: Vec<&str> = text.split_whitespace().collect();
        if let Some(m) = self.max_tokens {
            words.truncate(m);
        }
        if words.is_empty() {
            return Err(EmbeddingError::TooFewTokens { got: 0, needed: 1 });
        }
        let d = self.intrinsic_dimension_for(&words);
        let key = cache_key(&self.model_id, self.max_tokens, text);
        let mut tagged = self.location.as_bytes().to_vec();
        tagged.extend_from_slice(key.as_bytes());
        let seed = rng::derive_seed_from_bytes(0, &tagged);
        // Real models hand out f32 activations; match them so the PHDE cache
        // stores these clouds losslessly.
        let cloud = sample_manifold(self.manifold, d, self.ambient, words.len(), seed);
        Ok(cloud.map(|v| v as f32 as f64).expect("narrowed values stay finite"))
    }
}
