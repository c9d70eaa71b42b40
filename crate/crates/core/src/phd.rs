//! Persistent homology dimension by increased sampling.
//!
//! For i.i.d. samples of size `m` from a `d`-dimensional set the MST lifetime
//! sum grows like `C·m^((d-α)/d)`. Drawing random subsets of increasing size,
//! regressing `ln E` on `ln m` and inverting the slope recovers `d`.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::TokenEmbeddingMatrix;
use crate::mst::{compute_mst, lifetime_sum};
use crate::rng::{self, Stream};

/// Slopes this close to 1 are treated as "dimension at infinity".
pub const SLOPE_EPSILON: f64 = 1e-6;
/// Largest dimension the slope inversion will report.
pub const MAX_DIMENSION: f64 = 1e6;
/// α values usually used for PH₀ dimension estimation. Informational only.
pub const RECOMMENDED_ALPHA_RANGE: (f64, f64) = (0.5, 2.5);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),
    #[error("cloud has {n} points but at least {min} are required")]
    CloudTooSmall { n: usize, min: usize },
    #[error("sample schedule for n={n} has only {distinct} distinct sizes (need at least 3)")]
    ScheduleTooShort { n: usize, distinct: usize },
    #[error("subset size {size} outside 2..={n}")]
    SizeOutOfRange { size: usize, n: usize },
    #[error("regression needs at least 3 points, got {0}")]
    TooFewRegressionPoints(usize),
    #[error("regression is degenerate: all x values coincide")]
    DegenerateRegression,
    #[error("slope {slope} is too close to (or above) 1; the dimension is unbounded")]
    SlopeAtUnity { slope: f64 },
    #[error("a sampled subset of size {size} has zero lifetime sum (all points identical)")]
    DegenerateCloud { size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub alpha: f64,
    pub min_subsample: usize,
    pub schedule_points: usize,
    pub inner_restarts: usize,
    pub outer_restarts: usize,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            min_subsample: 40,
            schedule_points: 8,
            inner_restarts: 3,
            outer_restarts: 5,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        let bad = |msg: String| Err(EstimatorError::InvalidConfig(msg));
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return bad(format!("alpha must be a positive finite number, got {}", self.alpha));
        }
        if self.schedule_points < 3 {
            return bad(format!("schedule_points must be >= 3, got {}", self.schedule_points));
        }
        if self.inner_restarts < 1 {
            return bad("inner_restarts must be >= 1".into());
        }
        if self.outer_restarts < 1 {
            return bad("outer_restarts must be >= 1".into());
        }
        if self.min_subsample < 2 {
            return bad(format!("min_subsample must be >= 2, got {}", self.min_subsample));
        }
        Ok(())
    }
}

/// Strictly increasing subset sizes, the last one being the full cloud.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSchedule {
    sizes: Vec<usize>,
}

impl SampleSchedule {
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }
}

/// Geometrically spaced sizes from `max(min_subsample, ⌈n/8⌉)` to `n`.
pub fn build_schedule(n: usize, config: &EstimatorConfig) -> Result<SampleSchedule, EstimatorError> {
    config.validate()?;
    if n < config.min_subsample {
        return Err(EstimatorError::CloudTooSmall { n, min: config.min_subsample });
    }
    let start = config.min_subsample.max(n.div_ceil(8)).max(2);
    let k = config.schedule_points;
    let ratio = n as f64 / start as f64;
    let mut sizes: Vec<usize> = Vec::with_capacity(k);
    for step in 0..k {
        let size = if step + 1 == k {
            n
        } else {
            let t = step as f64 / (k - 1) as f64;
            ((start as f64) * ratio.powf(t)).round() as usize
        };
        let size = size.clamp(start, n);
        if sizes.last().is_none_or(|&last| size > last) {
            sizes.push(size);
        }
    }
    if sizes.len() < 3 {
        return Err(EstimatorError::ScheduleTooShort { n, distinct: sizes.len() });
    }
    Ok(SampleSchedule { sizes })
}

/// Uniform sample of `size` rows without replacement, in draw order.
pub fn sample_subset(
    cloud: &TokenEmbeddingMatrix,
    size: usize,
    stream: &mut Stream,
) -> Result<TokenEmbeddingMatrix, EstimatorError> {
    let n = cloud.n();
    if size < 2 || size > n {
        return Err(EstimatorError::SizeOutOfRange { size, n });
    }
    let picked = index::sample(stream, n, size).into_vec();
    Ok(cloud.select_rows(&picked))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    /// `(ln n_i, ln E_i)` pairs the line was fitted to.
    pub points: Vec<(f64, f64)>,
    pub residual_sum_squares: f64,
}

/// Unweighted ordinary least squares.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<RegressionFit, EstimatorError> {
    if points.len() < 3 {
        return Err(EstimatorError::TooFewRegressionPoints(points.len()));
    }
    let m = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / m;
    let (sxx, sxy) = points.iter().fold((0.0, 0.0), |(sxx, sxy), &(x, y)| {
        let dx = x - mean_x;
        (sxx + dx * dx, sxy + dx * (y - mean_y))
    });
    if !(sxx > 0.0) {
        return Err(EstimatorError::DegenerateRegression);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residual_sum_squares = points
        .iter()
        .map(|&(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(RegressionFit { slope, intercept, points: points.to_vec(), residual_sum_squares })
}

/// Inverts `slope = 1 - alpha/d`.
pub fn slope_to_dimension(slope: f64, alpha: f64) -> Result<f64, EstimatorError> {
    if !(slope < 1.0 - SLOPE_EPSILON) {
        return Err(EstimatorError::SlopeAtUnity { slope });
    }
    let d = alpha / (1.0 - slope);
    if d > MAX_DIMENSION {
        return Err(EstimatorError::SlopeAtUnity { slope });
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhdEstimate {
    /// Median of `per_outer_dimensions`.
    pub dimension: f64,
    pub per_outer_dimensions: Vec<f64>,
    /// One fit per outer restart, same order as `per_outer_dimensions`.
    pub restart_fits: Vec<RegressionFit>,
    /// Fit of the restart whose dimension is closest to the median.
    pub fit: RegressionFit,
    pub schedule: SampleSchedule,
    pub config_echo: EstimatorConfig,
}

fn log_lifetime(cloud: &TokenEmbeddingMatrix, alpha: f64) -> Result<f64, EstimatorError> {
    let e = lifetime_sum(&compute_mst(cloud), alpha);
    if e > 0.0 {
        Ok(e.ln())
    } else {
        Err(EstimatorError::DegenerateCloud { size: cloud.n() })
    }
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

fn run_restart(
    cloud: &TokenEmbeddingMatrix,
    schedule: &SampleSchedule,
    config: &EstimatorConfig,
    restart: usize,
    full_log_e: f64,
) -> Result<RegressionFit, EstimatorError> {
    let mut stream = rng::stream(config.seed, restart as u64);
    let mut points = Vec::with_capacity(schedule.sizes.len());
    for &size in &schedule.sizes {
        // Every draw of the full size is the whole cloud.
        let mean_log_e = if size == cloud.n() {
            full_log_e
        } else {
            let mut acc = 0.0;
            for _ in 0..config.inner_restarts {
                let subset = sample_subset(cloud, size, &mut stream)?;
                acc += log_lifetime(&subset, config.alpha)?;
            }
            acc / config.inner_restarts as f64
        };
        points.push(((size as f64).ln(), mean_log_e));
    }
    fit_loglog(&points)
}

/// Estimates the PH₀ dimension of `cloud`.
///
/// Outer restarts run in parallel, each on its own `(seed, restart)` stream;
/// the result is bit-identical for any thread count.
pub fn estimate_phd(
    cloud: &TokenEmbeddingMatrix,
    config: &EstimatorConfig,
) -> Result<PhdEstimate, EstimatorError> {
    let schedule = build_schedule(cloud.n(), config)?;
    let full_log_e = log_lifetime(cloud, config.alpha)?;

    let restart_fits = (0..config.outer_restarts)
        .into_par_iter()
        .map(|r| run_restart(cloud, &schedule, config, r, full_log_e))
        .collect::<Result<Vec<_>, _>>()?;
    let per_outer_dimensions = restart_fits
        .iter()
        .map(|f| slope_to_dimension(f.slope, config.alpha))
        .collect::<Result<Vec<_>, _>>()?;

    let dimension = median(&per_outer_dimensions);
    let representative = per_outer_dimensions
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - dimension).abs().total_cmp(&(b.1 - dimension).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);

    Ok(PhdEstimate {
        dimension,
        fit: restart_fits[representative].clone(),
        per_outer_dimensions,
        restart_fits,
        schedule,
        config_echo: *config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_for_320() {
        let s = build_schedule(320, &EstimatorConfig::default()).unwrap();
        let sizes = s.sizes();
        assert_eq!(sizes[0], 40);
        assert_eq!(*sizes.last().unwrap(), 320);
        assert!(sizes.len() <= 8);
        assert!(sizes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn schedule_boundaries() {
        let cfg = EstimatorConfig::default();
        assert_eq!(build_schedule(39, &cfg), Err(EstimatorError::CloudTooSmall { n: 39, min: 40 }));
        assert_eq!(
            build_schedule(40, &cfg),
            Err(EstimatorError::ScheduleTooShort { n: 40, distinct: 1 })
        );
        assert_eq!(build_schedule(42, &cfg).unwrap().sizes(), &[40, 41, 42]);
    }

    #[test]
    fn schedule_is_geometric_for_1000() {
        let s = build_schedule(1000, &EstimatorConfig::default()).unwrap();
        let sizes = s.sizes();
        assert_eq!(sizes.len(), 8);
        assert_eq!(sizes[0], 125);
        assert!(sizes.iter().all(|&v| (40..=1000).contains(&v)));
        let expected = (1000f64 / 125.0).powf(1.0 / 7.0);
        for w in sizes.windows(2) {
            // Rounding to integers moves each ratio by at most ~1/125 either way.
            assert!((w[1] as f64 / w[0] as f64 - expected).abs() < 0.02, "{sizes:?}");
        }
    }

    #[test]
    fn subset_sizes_checked() {
        let cloud = TokenEmbeddingMatrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let mut s = rng::stream(1, 0);
        assert!(matches!(
            sample_subset(&cloud, 1, &mut s),
            Err(EstimatorError::SizeOutOfRange { .. })
        ));
        assert!(matches!(
            sample_subset(&cloud, 4, &mut s),
            Err(EstimatorError::SizeOutOfRange { .. })
        ));
        let pair = sample_subset(&cloud, 2, &mut s).unwrap();
        assert_eq!(pair.n(), 2);
        assert_ne!(pair.row(0), pair.row(1));
    }

    #[test]
    fn full_size_subset_is_a_permutation() {
        let rows: Vec<[f64; 1]> = (0..10).map(|i| [i as f64]).collect();
        let cloud = TokenEmbeddingMatrix::from_rows(&rows).unwrap();
        let sub = sample_subset(&cloud, 10, &mut rng::stream(3, 0)).unwrap();
        let mut got: Vec<f64> = sub.data().to_vec();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, cloud.data());
    }

    #[test]
    fn fit_examples() {
        let f = fit_loglog(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-15 && (f.intercept - 1.0).abs() < 1e-15);
        assert!(f.residual_sum_squares < 1e-28);
        let f = fit_loglog(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]).unwrap();
        assert_eq!((f.slope, f.intercept), (0.0, 0.0));
        assert_eq!(
            fit_loglog(&[(1.0, 0.0), (1.0, 2.0), (1.0, 3.0)]),
            Err(EstimatorError::DegenerateRegression)
        );
        assert_eq!(
            fit_loglog(&[(0.0, 0.0), (1.0, 1.0)]),
            Err(EstimatorError::TooFewRegressionPoints(2))
        );
    }

    #[test]
    fn slope_inversion() {
        assert_eq!(slope_to_dimension(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(slope_to_dimension(0.5, 1.0).unwrap(), 2.0);
        assert_eq!(slope_to_dimension(0.875, 1.0).unwrap(), 8.0);
        assert!(matches!(slope_to_dimension(1.0, 1.0), Err(EstimatorError::SlopeAtUnity { .. })));
        assert!(matches!(slope_to_dimension(1.2, 1.0), Err(EstimatorError::SlopeAtUnity { .. })));
        assert!(matches!(
            slope_to_dimension(1.0 - 2e-6, 3.0),
            Err(EstimatorError::SlopeAtUnity { .. })
        ));
        assert!(matches!(
            slope_to_dimension(f64::NAN, 1.0),
            Err(EstimatorError::SlopeAtUnity { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let ok = EstimatorConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            EstimatorConfig { alpha: 0.0, ..ok },
            EstimatorConfig { alpha: f64::NAN, ..ok },
            EstimatorConfig { schedule_points: 2, ..ok },
            EstimatorConfig { inner_restarts: 0, ..ok },
            EstimatorConfig { outer_restarts: 0, ..ok },
            EstimatorConfig { min_subsample: 1, ..ok },
        ] {
            assert!(matches!(bad.validate(), Err(EstimatorError::InvalidConfig(_))), "{bad:?}");
        }
    }

    #[test]
    fn identical_points_are_degenerate() {
        let cloud = TokenEmbeddingMatrix::new(60, 3, vec![0.25; 180]).unwrap();
        assert!(matches!(
            estimate_phd(&cloud, &EstimatorConfig::default()),
            Err(EstimatorError::DegenerateCloud { .. })
        ));
    }

    #[test]
    fn median_handles_even_counts() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
