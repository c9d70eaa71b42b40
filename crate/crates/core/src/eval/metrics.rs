//! Detection metrics. Scores are oriented so that human texts score high;
//! the machine class is the positive class and a record is flagged as machine
//! when `score <= threshold`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("the {0} class has no scores")]
    EmptyClass(&'static str),
    #[error("score lists must be finite")]
    NonFiniteScore,
    #[error("false-positive budget must lie in (0, 1), got {0}")]
    InvalidBudget(f64),
}

fn check(human: &[f64], machine: &[f64]) -> Result<(), MetricsError> {
    if human.is_empty() {
        return Err(MetricsError::EmptyClass("human"));
    }
    if machine.is_empty() {
        return Err(MetricsError::EmptyClass("machine"));
    }
    if human.iter().chain(machine).any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFiniteScore);
    }
    Ok(())
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Number of entries of the ascending slice that are `< x` and `== x`.
fn below_and_equal(sorted: &[f64], x: f64) -> (usize, usize) {
    let lo = sorted.partition_point(|&v| v < x);
    let hi = sorted.partition_point(|&v| v <= x);
    (lo, hi - lo)
}

/// `P(h > m) + ½·P(h = m)` over all human/machine pairs, computed from exact
/// integer pair counts.
pub fn compute_auc(human: &[f64], machine: &[f64]) -> Result<f64, MetricsError> {
    check(human, machine)?;
    let machine = sorted(machine);
    // Twice the numerator, so ties stay integral.
    let mut twice_wins: u128 = 0;
    for &h in human {
        let (below, equal) = below_and_equal(&machine, h);
        twice_wins += 2 * below as u128 + equal as u128;
    }
    let twice_pairs = 2 * human.len() as u128 * machine.len() as u128;
    Ok(twice_wins as f64 / twice_pairs as f64)
}

fn check_budget(fpr_budget: f64) -> Result<(), MetricsError> {
    if fpr_budget > 0.0 && fpr_budget < 1.0 {
        Ok(())
    } else {
        Err(MetricsError::InvalidBudget(fpr_budget))
    }
}

/// Largest number of human scores that may fall at or below the threshold.
fn allowed_false_positives(n_human: usize, fpr_budget: f64) -> usize {
    let n = n_human as f64;
    let mut c = (fpr_budget * n).floor() as usize;
    while c < n_human && (c + 1) as f64 / n <= fpr_budget {
        c += 1;
    }
    while c > 0 && c as f64 / n > fpr_budget {
        c -= 1;
    }
    c
}

/// The largest threshold `t` whose false-positive rate `#(h <= t)/|H|` stays
/// within `fpr_budget`. It is the float just below the
/// `(allowed + 1)`-th smallest human score.
pub fn fpr_budget_threshold(human: &[f64], fpr_budget: f64) -> Result<f64, MetricsError> {
    if human.is_empty() {
        return Err(MetricsError::EmptyClass("human"));
    }
    if human.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFiniteScore);
    }
    check_budget(fpr_budget)?;
    let human = sorted(human);
    let allowed = allowed_false_positives(human.len(), fpr_budget);
    // fpr_budget < 1 keeps `allowed` below |H|.
    Ok(human[allowed].next_down())
}

/// Fraction of machine scores flagged at [`fpr_budget_threshold`].
pub fn tpr_at_fpr(human: &[f64], machine: &[f64], fpr_budget: f64) -> Result<f64, MetricsError> {
    check(human, machine)?;
    let t = fpr_budget_threshold(human, fpr_budget)?;
    let flagged = machine.iter().filter(|&&m| m <= t).count();
    Ok(flagged as f64 / machine.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CalibrationPolicy {
    /// Maximize TPR − FPR over midpoints between adjacent distinct scores.
    MaxYouden,
    /// Largest threshold within the false-positive budget.
    FprBudget { budget: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub policy: CalibrationPolicy,
    pub threshold: f64,
    /// Machine records flagged at the threshold.
    pub tpr: f64,
    /// Human records flagged at the threshold.
    pub fpr: f64,
}

fn rates(human: &[f64], machine: &[f64], t: f64) -> (f64, f64) {
    let tp = machine.iter().filter(|&&m| m <= t).count() as f64 / machine.len() as f64;
    let fp = human.iter().filter(|&&h| h <= t).count() as f64 / human.len() as f64;
    (tp, fp)
}

pub fn calibrate_threshold(
    human: &[f64],
    machine: &[f64],
    policy: CalibrationPolicy,
) -> Result<Calibration, MetricsError> {
    check(human, machine)?;
    let threshold = match policy {
        CalibrationPolicy::FprBudget { budget } => fpr_budget_threshold(human, budget)?,
        CalibrationPolicy::MaxYouden => max_youden_threshold(human, machine),
    };
    let (tpr, fpr) = rates(human, machine, threshold);
    Ok(Calibration { policy, threshold, tpr, fpr })
}

/// Sweeps pooled distinct scores in ascending order; the first midpoint with
/// the largest Youden index wins. A single shared value is returned as is.
fn max_youden_threshold(human: &[f64], machine: &[f64]) -> f64 {
    let h = sorted(human);
    let m = sorted(machine);
    let mut pooled: Vec<f64> = h.iter().chain(&m).copied().collect();
    pooled.sort_by(f64::total_cmp);
    pooled.dedup();
    if pooled.len() == 1 {
        return pooled[0];
    }
    let (nh, nm) = (h.len() as f64, m.len() as f64);
    let (mut hi, mut mi) = (0usize, 0usize);
    let mut best: Option<(f64, f64)> = None;
    for pair in pooled.windows(2) {
        // Advance past everything <= the lower value of the pair.
        while hi < h.len() && h[hi] <= pair[0] {
            hi += 1;
        }
        while mi < m.len() && m[mi] <= pair[0] {
            mi += 1;
        }
        let j = mi as f64 / nm - hi as f64 / nh;
        let mid = pair[0] + (pair[1] - pair[0]) / 2.0;
        if best.is_none_or(|(bj, _)| j > bj) {
            best = Some((j, mid));
        }
    }
    best.expect("at least one adjacent pair").1
}
