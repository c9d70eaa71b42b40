use serde::{Deserialize, Serialize};

use super::DetectorError;

/// Mean, standard deviation and size of one class's score distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub mu: f64,
    pub sigma: f64,
    pub n: usize,
}

impl ClassStats {
    pub fn new(mu: f64, sigma: f64, n: usize) -> Self {
        Self { mu, sigma, n }
    }

    /// Sample mean and sample (n−1) standard deviation; `sigma = 0` for a
    /// single score. `None` for an empty slice.
    pub fn from_scores(scores: &[f64]) -> Option<Self> {
        let n = scores.len();
        if n == 0 {
            return None;
        }
        let mu = scores.iter().sum::<f64>() / n as f64;
        let sigma = if n > 1 {
            (scores.iter().map(|s| (s - mu) * (s - mu)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mu, sigma, n })
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(d_h > d_m)` for independent normal human and machine scores:
/// `Φ((μ_h − μ_m) / √(σ_h² + σ_m²))`.
pub fn detection_probability(human: &ClassStats, machine: &ClassStats) -> Result<f64, DetectorError> {
    let var = human.sigma * human.sigma + machine.sigma * machine.sigma;
    if !(var > 0.0) {
        return Err(DetectorError::ZeroVariance);
    }
    Ok(normal_cdf((human.mu - machine.mu) / var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_points() {
        assert_eq!(normal_cdf(0.0), 0.5);
        // Reference values from tables of the standard normal distribution.
        assert!((normal_cdf(1.0) - 0.841_344_746_068_543).abs() < 1e-12);
        assert!((normal_cdf(-1.959_963_984_540_054) - 0.025).abs() < 1e-12);
        assert!((normal_cdf(3.0) - 0.998_650_101_968_37).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_rejected() {
        let a = ClassStats::new(1.0, 0.0, 3);
        assert_eq!(detection_probability(&a, &a), Err(DetectorError::ZeroVariance));
    }

    #[test]
    fn equal_means_give_half() {
        let h = ClassStats::new(9.0, 1.3, 10);
        let m = ClassStats::new(9.0, 0.2, 10);
        assert_eq!(detection_probability(&h, &m).unwrap(), 0.5);
    }

    #[test]
    fn stats_from_scores() {
        let s = ClassStats::from_scores(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mu, 2.5);
        assert!((s.sigma - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(ClassStats::from_scores(&[7.0]).unwrap().sigma, 0.0);
        assert!(ClassStats::from_scores(&[]).is_none());
    }
}
