//! Wilcoxon signed-rank test for paired samples.
//!
//! The p-value uses a normal approximation of the signed-rank sum with tie
//! correction, a continuity correction, and a fourth-cumulant (Edgeworth)
//! term. The statistic's cumulants are taken from the actual ranks, so ties
//! are handled exactly: with ranks `r_i`, `W+ = Σ r_i·B_i` for fair coins
//! `B_i`, giving mean `Σr/2`, variance `Σr²/4` and fourth cumulant `−Σr⁴/8`.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::EvalError;

/// Smallest number of non-zero differences the test accepts.
pub const MIN_PAIRS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    /// `min(W+, W−)`.
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Non-zero differences used.
    pub n: usize,
    /// Continuity-corrected standardized deviation of `W+`.
    pub z: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

/// Average ranks (1-based) of `values`, ties sharing the mean rank.
pub(crate) fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided paired test of `a` against `b`. Zero differences are dropped.
///
/// For tie-free samples the p-value stays within about 0.011 of the exact
/// permutation p-value down to 6 pairs. Heavily tied small samples make the
/// null distribution lumpy and the error can exceed 0.1.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(EvalError::Degenerate);
    }
    if diffs.len() < MIN_PAIRS {
        return Err(EvalError::TooFewPairs(diffs.len()));
    }

    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total: f64 = ranks.iter().sum();
    let w_minus = total - w_plus;

    let mean = total / 2.0;
    let var: f64 = ranks.iter().map(|r| r * r).sum::<f64>() / 4.0;
    let kappa4: f64 = -ranks.iter().map(|r| r.powi(4)).sum::<f64>() / 8.0;
    let sd = var.sqrt();

    let deviation = ((w_plus - mean).abs() - 0.5).max(0.0);
    let z = deviation / sd;
    let std_normal = Normal::standard();
    let excess_kurtosis = kappa4 / (var * var);
    let tail = std_normal.sf(z) + std_normal.pdf(z) * excess_kurtosis / 24.0 * (z.powi(3) - 3.0 * z);
    let p_value = (2.0 * tail).clamp(0.0, 1.0);

    Ok(WilcoxonResult {
        statistic: w_plus.min(w_minus),
        w_plus,
        w_minus,
        n: diffs.len(),
        z,
        p_value,
    })
}
