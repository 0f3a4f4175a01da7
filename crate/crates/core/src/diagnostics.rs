//! Chain and convergence-rate diagnostics.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::hmc::Chain;
use crate::oracles::OracleResult;

/// Effective sample size with a flag for constant input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ess {
    pub value: f64,
    pub degenerate: bool,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with divisor `n − 1`.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Geyer initial monotone sequence estimator, clamped to `[1, n]`.
pub fn ess(series: &[f64]) -> Result<Ess> {
    let n = series.len();
    if n < 10 {
        return Err(invalid("ess needs at least 10 values"));
    }
    let m = mean(series);
    let c: Vec<f64> = series.iter().map(|x| x - m).collect();
    let autocov = |lag: usize| -> f64 { c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64 };
    let g0 = autocov(0);
    if !(g0 > 0.0) || g0 <= 1e-28 * (m * m).max(f64::MIN_POSITIVE) {
        return Ok(Ess { value: n as f64, degenerate: true });
    }
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (autocov(2 * k) + autocov(2 * k + 1)) / g0;
        if pair <= 0.0 {
            break;
        }
        let p = pair.min(prev);
        tau += 2.0 * p;
        prev = p;
        k += 1;
    }
    let value = (n as f64 / tau).clamp(1.0, n as f64);
    Ok(Ess { value, degenerate: false })
}

/// Type-7 (linear interpolation) empirical quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean with 2.5% and 97.5% quantiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

pub fn summarize(values: &[f64]) -> Result<Interval> {
    if values.is_empty() {
        return Err(invalid("summary needs a nonempty series"));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(Interval { mean: mean(values), q025: quantile_sorted(&s, 0.025), q975: quantile_sorted(&s, 0.975) })
}

/// Summary of per-draw constraint distances.
pub fn violation_summary(chain: &Chain) -> Result<Interval> {
    summarize(&chain.violations)
}

/// `|mean of g over the chain − oracle|`.
pub fn expectation_diff(chain: &Chain, g: &dyn Fn(&[f64]) -> f64, oracle: &OracleResult) -> Result<f64> {
    if !oracle.value.is_finite() {
        return Err(invalid("oracle value must be finite"));
    }
    if chain.n_kept() == 0 {
        return Err(invalid("chain is empty"));
    }
    Ok(libm::fabs(mean(&chain.map(g)) - oracle.value))
}

/// Monte Carlo standard error `sd / sqrt(ESS)`.
pub fn mcse(series: &[f64]) -> Result<f64> {
    let e = ess(series)?;
    Ok(libm::sqrt(variance(series) / e.value))
}

/// Least-squares fit of `log error` on `log λ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateFit {
    pub lambdas: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `error / (λ / |log λ|^s)` per retained pair.
    pub bound_ratios: Vec<f64>,
    /// Pairs dropped for nonpositive error.
    pub dropped: usize,
}

/// Fits the convergence rate over a strictly decreasing `λ` grid; `codim` is
/// the `s` in the `λ / |log λ|^s` bound.
pub fn fit_rate(lambdas: &[f64], errors: &[f64], codim: u32) -> Result<RateFit> {
    if lambdas.len() != errors.len() {
        return Err(Error::DimensionMismatch { expected: lambdas.len(), got: errors.len() });
    }
    if lambdas.iter().any(|l| !(*l > 0.0)) || lambdas.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(invalid("lambdas must be positive and strictly decreasing"));
    }
    let (ls, es): (Vec<f64>, Vec<f64>) =
        lambdas.iter().zip(errors).filter(|(_, e)| **e > 0.0 && e.is_finite()).map(|(l, e)| (*l, *e)).unzip();
    let dropped = lambdas.len() - ls.len();
    if ls.len() < 3 {
        return Err(Error::InsufficientData(ls.len()));
    }
    let x: Vec<f64> = ls.iter().map(|l| libm::log(*l)).collect();
    let y: Vec<f64> = es.iter().map(|e| libm::log(*e)).collect();
    let (mx, my) = (mean(&x), mean(&y));
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    let bound_ratios = ls
        .iter()
        .zip(&es)
        .map(|(l, e)| e / (l / libm::pow(libm::fabs(libm::log(*l)), codim as f64)))
        .collect();
    Ok(RateFit { lambdas: ls, errors: es, slope, intercept, r_squared, bound_ratios, dropped })
}

/// Area under the ROC curve by the Mann–Whitney statistic with midranks.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), got: labels.len() });
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(invalid("auc needs both classes"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|a, b| scores[*a].total_cmp(&scores[*b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = 0.5 * ((i + 1) + (j + 1)) as f64;
        for &k in &idx[i..=j] {
            if labels[k] {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let np = n_pos as f64;
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}
