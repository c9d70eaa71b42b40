//! Point clouds with known intrinsic dimension, for validating the estimator.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::TokenEmbeddingMatrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Manifold {
    /// Unit cube `[0,1]^d`.
    Cube,
    /// Unit sphere `S^d ⊂ R^(d+1)`.
    Sphere,
}

impl Manifold {
    /// Ambient dimensions needed to hold a `d`-dimensional instance.
    pub fn min_ambient(self, intrinsic_dim: usize) -> usize {
        match self {
            Manifold::Cube => intrinsic_dim,
            Manifold::Sphere => intrinsic_dim + 1,
        }
    }
}

impl std::fmt::Display for Manifold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Manifold::Cube => "cube",
            Manifold::Sphere => "sphere",
        })
    }
}

impl std::str::FromStr for Manifold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cube" => Ok(Manifold::Cube),
            "sphere" => Ok(Manifold::Sphere),
            other => Err(format!("unknown manifold {other:?} (expected cube or sphere)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticCloudSpec {
    pub manifold: Manifold,
    pub intrinsic_dim: usize,
    pub ambient_dim: usize,
    pub n: usize,
    pub seed: u64,
}

pub const MIN_SYNTHETIC_POINTS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyntheticSpecError {
    #[error("intrinsic dimension must be >= 1")]
    ZeroDimension,
    #[error("{manifold} of dimension {intrinsic} needs at least {needed} ambient dimensions, got {ambient}")]
    AmbientTooSmall { manifold: Manifold, intrinsic: usize, ambient: usize, needed: usize },
    #[error("synthetic clouds need at least {MIN_SYNTHETIC_POINTS} points, got {0}")]
    TooFewPoints(usize),
}

impl SyntheticCloudSpec {
    pub fn validate(&self) -> Result<(), SyntheticSpecError> {
        if self.intrinsic_dim == 0 {
            return Err(SyntheticSpecError::ZeroDimension);
        }
        let needed = self.manifold.min_ambient(self.intrinsic_dim);
        if self.ambient_dim < needed {
            return Err(SyntheticSpecError::AmbientTooSmall {
                manifold: self.manifold,
                intrinsic: self.intrinsic_dim,
                ambient: self.ambient_dim,
                needed,
            });
        }
        if self.n < MIN_SYNTHETIC_POINTS {
            return Err(SyntheticSpecError::TooFewPoints(self.n));
        }
        Ok(())
    }
}

/// Samples `spec.n` points from the manifold, zero-pads them to the ambient
/// dimension and applies a seeded random rotation of the ambient space.
pub fn make_synthetic_cloud(spec: &SyntheticCloudSpec) -> Result<TokenEmbeddingMatrix, SyntheticSpecError> {
    spec.validate()?;
    Ok(sample_manifold(spec.manifold, spec.intrinsic_dim, spec.ambient_dim, spec.n, spec.seed))
}

/// Same as [`make_synthetic_cloud`] without the size floor; `ambient_dim`
/// must already be large enough for the manifold.
pub(crate) fn sample_manifold(
    manifold: Manifold,
    intrinsic_dim: usize,
    ambient_dim: usize,
    n: usize,
    seed: u64,
) -> TokenEmbeddingMatrix {
    debug_assert!(ambient_dim >= manifold.min_ambient(intrinsic_dim));
    let mut points = rng::stream(seed, 0);
    let mut raw = vec![0.0; n * ambient_dim];
    for row in raw.chunks_exact_mut(ambient_dim) {
        match manifold {
            Manifold::Cube => {
                for v in &mut row[..intrinsic_dim] {
                    *v = points.random::<f64>();
                }
            }
            Manifold::Sphere => {
                let k = intrinsic_dim + 1;
                loop {
                    for v in &mut row[..k] {
                        *v = points.sample::<f64, _>(StandardNormal);
                    }
                    let norm = row[..k].iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 1e-12 {
                        row[..k].iter_mut().for_each(|v| *v /= norm);
                        break;
                    }
                }
            }
        }
    }

    let rotation = random_rotation(ambient_dim, &mut rng::stream(seed, 1));
    let mut data = vec![0.0; n * ambient_dim];
    for (src, dst) in raw.chunks_exact(ambient_dim).zip(data.chunks_exact_mut(ambient_dim)) {
        for (r, out) in dst.iter_mut().enumerate() {
            let q = &rotation[r * ambient_dim..(r + 1) * ambient_dim];
            *out = q.iter().zip(src).map(|(a, b)| a * b).sum();
        }
    }
    TokenEmbeddingMatrix::new(n, ambient_dim, data).expect("finite synthetic coordinates")
}

/// Haar-distributed orthogonal matrix (row-major) with determinant +1.
///
/// Gram–Schmidt on Gaussian columns; the sign of the determinant is that of
/// the Gaussian matrix, since the triangular factor has a positive diagonal.
pub(crate) fn random_rotation(dim: usize, stream: &mut rng::Stream) -> Vec<f64> {
    loop {
        let gauss: Vec<f64> = (0..dim * dim).map(|_| stream.sample(StandardNormal)).collect();
        // Columns of `gauss` are vectors `gauss[r*dim + c]` over r.
        let mut cols: Vec<Vec<f64>> =
            (0..dim).map(|c| (0..dim).map(|r| gauss[r * dim + c]).collect()).collect();
        let mut ok = true;
        for c in 0..dim {
            for prev in 0..c {
                let dot: f64 = cols[c].iter().zip(&cols[prev]).map(|(a, b)| a * b).sum();
                let (head, tail) = cols.split_at_mut(c);
                tail[0].iter_mut().zip(&head[prev]).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = cols[c].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-10 {
                ok = false;
                break;
            }
            cols[c].iter_mut().for_each(|v| *v /= norm);
        }
        if !ok {
            continue;
        }
        if determinant_sign(gauss, dim) < 0.0 {
            cols[0].iter_mut().for_each(|v| *v = -*v);
        }
        let mut q = vec![0.0; dim * dim];
        for (c, col) in cols.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                q[r * dim + c] = *v;
            }
        }
        return q;
    }
}

fn determinant_sign(mut a: Vec<f64>, dim: usize) -> f64 {
    let mut sign = 1.0;
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&x, &y| a[x * dim + col].abs().total_cmp(&a[y * dim + col].abs()))
            .expect("non-empty range");
        if a[pivot * dim + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..dim {
                a.swap(pivot * dim + k, col * dim + k);
            }
            sign = -sign;
        }
        if a[col * dim + col] < 0.0 {
            sign = -sign;
        }
        for row in col + 1..dim {
            let factor = a[row * dim + col] / a[col * dim + col];
            for k in col..dim {
                a[row * dim + k] -= factor * a[col * dim + k];
            }
        }
    }
    sign
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(manifold: Manifold, d: usize, big_d: usize) -> SyntheticCloudSpec {
        SyntheticCloudSpec { manifold, intrinsic_dim: d, ambient_dim: big_d, n: 200, seed: 11 }
    }

    #[test]
    fn unit_interval_stays_in_range() {
        let cloud = make_synthetic_cloud(&spec(Manifold::Cube, 1, 1)).unwrap();
        assert!(cloud.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn sphere_points_have_unit_norm() {
        let cloud = make_synthetic_cloud(&spec(Manifold::Sphere, 2, 8)).unwrap();
        for row in cloud.rows() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn rotation_is_orthonormal_and_proper() {
        for dim in [1, 2, 3, 7] {
            let q = random_rotation(dim, &mut rng::stream(5, dim as u64));
            for a in 0..dim {
                for b in 0..dim {
                    let dot: f64 = (0..dim).map(|r| q[r * dim + a] * q[r * dim + b]).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-12);
                }
            }
            assert_eq!(determinant_sign(q, dim), 1.0);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(
            spec(Manifold::Sphere, 3, 3).validate(),
            Err(SyntheticSpecError::AmbientTooSmall { needed: 4, .. })
        ));
        assert!(spec(Manifold::Cube, 3, 3).validate().is_ok());
        let small = SyntheticCloudSpec { n: 99, ..spec(Manifold::Cube, 1, 1) };
        assert_eq!(small.validate(), Err(SyntheticSpecError::TooFewPoints(99)));
    }

    #[test]
    fn same_seed_same_cloud() {
        let a = make_synthetic_cloud(&spec(Manifold::Cube, 3, 6)).unwrap();
        let b = make_synthetic_cloud(&spec(Manifold::Cube, 3, 6)).unwrap();
        assert_eq!(a, b);
    }
}
