//! Small statistics used by the experiment summaries.

use anyhow::{ensure, Result};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::summary::ChiSquare;

/// Angle in radians between `x` and `f`.
pub fn angle_from(x: &[f64], f: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(f).map(|(a, b)| a * b).sum();
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nf = f.iter().map(|a| a * a).sum::<f64>().sqrt();
    (dot / (nx * nf)).clamp(-1.0, 1.0).acos()
}

/// Pearson chi-square test of uniformity on `[lo, hi)` with equal bins.
pub fn chi_square_uniform(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<ChiSquare> {
    ensure!(bins >= 2 && hi > lo, "chi-square needs at least 2 bins on a proper interval");
    ensure!(values.len() >= 5 * bins, "chi-square needs at least 5 expected counts per bin");
    let mut counts = vec![0usize; bins];
    for v in values {
        let k = (((v - lo) / (hi - lo)) * bins as f64).floor();
        counts[(k.max(0.0) as usize).min(bins - 1)] += 1;
    }
    let expected = values.len() as f64 / bins as f64;
    let statistic = counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum();
    let dof = bins - 1;
    let p_value = ChiSquared::new(dof as f64)?.sf(statistic);
    Ok(ChiSquare { statistic, dof, p_value, n: values.len() })
}

/// `‖U'U − I‖₁` (entrywise) for a column-major `r × d` block.
pub fn frame_error(u: &[f64], r: usize, d: usize) -> f64 {
    let mut total = 0.0;
    for s in 0..d {
        for t in 0..d {
            let g: f64 = (0..r).map(|i| u[s * r + i] * u[t * r + i]).sum();
            total += (g - if s == t { 1.0 } else { 0.0 }).abs();
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_counts_pass() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let c = chi_square_uniform(&v, 0.0, 1.0, 10).unwrap();
        assert_eq!(c.statistic, 0.0);
        assert!((c.p_value - 1.0).abs() < 1e-12);
        let skew: Vec<f64> = v.iter().map(|x| x * x).collect();
        assert!(chi_square_uniform(&skew, 0.0, 1.0, 10).unwrap().p_value < 1e-6);
    }

    #[test]
    fn frame_error_of_orthonormal_block() {
        let u = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        assert_eq!(frame_error(&u, 3, 2), 0.0);
        let v = [2.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        assert_eq!(frame_error(&v, 3, 2), 3.0);
    }

    #[test]
    fn angles() {
        assert!((angle_from(&[0.0, 2.0], &[1.0, 0.0]) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(angle_from(&[3.0, 3.0, 3.0], &[1.0, 1.0, 1.0]), 0.0);
    }
}
