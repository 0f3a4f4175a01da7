//! `summary.json` layout. Every key is present for every experiment; values
//! that do not apply are `null`.

use relaxhmc_core::diagnostics::{summarize, RateFit};
use relaxhmc_core::OracleResult;
use serde::{Deserialize, Serialize};

use crate::config::Experiment;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

impl Band {
    pub fn of(values: &[f64]) -> Option<Band> {
        summarize(values).ok().map(|s| Band { mean: s.mean, q025: s.q025, q975: s.q975 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub n: usize,
}

/// Experiment-specific statistics for one `λ`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Extras {
    /// Fraction of draws with distance above 0.05.
    pub frac_distance_gt_0_05: Option<f64>,
    /// Fraction of draws more than 1 radian from `F`.
    pub frac_angle_gt_1: Option<f64>,
    /// Uniformity of the torus angle `α₂`.
    pub chi_square_alpha2: Option<ChiSquare>,
    /// Mean `‖U'U − I‖₁` over kept draws.
    pub frame_error: Option<f64>,
    /// In-sample AUC of posterior-mean edge probabilities.
    pub auc: Option<f64>,
    /// Violations from the exact-vs-exact baseline.
    pub exact_baseline_diff: Option<Band>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub lambda: f64,
    pub kept_draws: Option<usize>,
    pub acceptance_rate: Option<f64>,
    pub warmup_acceptance_rate: Option<f64>,
    pub step_size: Option<f64>,
    pub n_leapfrog: Option<usize>,
    pub divergences: Option<usize>,
    /// Per-component ESS averaged over replicates.
    pub ess: Option<Vec<f64>>,
    /// Smallest component ESS per 1000 kept iterations, averaged over replicates.
    pub ess_per_1000: Option<f64>,
    /// Pooled per-draw distances.
    pub violation: Option<Band>,
    /// Chain mean of `g`, across replicates.
    pub estimate: Option<Band>,
    /// `|chain mean of g − sharp oracle|`, across replicates.
    pub expectation_diff: Option<Band>,
    pub expectation_diffs: Option<Vec<f64>>,
    /// Quadrature value of `E_Π̃[g]`.
    pub relaxed_oracle: Option<OracleResult>,
    /// `|relaxed oracle − sharp oracle|`.
    pub oracle_gap: Option<f64>,
    pub extras: Extras,
}

impl RunSummary {
    pub fn empty(lambda: f64) -> Self {
        Self {
            lambda,
            kept_draws: None,
            acceptance_rate: None,
            warmup_acceptance_rate: None,
            step_size: None,
            n_leapfrog: None,
            divergences: None,
            ess: None,
            ess_per_1000: None,
            violation: None,
            estimate: None,
            expectation_diff: None,
            expectation_diffs: None,
            relaxed_oracle: None,
            oracle_gap: None,
            extras: Extras::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: Experiment,
    pub seed: u64,
    pub replicates: usize,
    pub lambda_grid: Vec<f64>,
    /// Description of the test function `g`.
    pub g: Option<String>,
    /// `E_Π[g]` under the sharply constrained posterior.
    pub sharp_oracle: Option<OracleResult>,
    pub runs: Vec<RunSummary>,
    pub rate_fit: Option<RateFit>,
    /// The `s` used in the `λ / |log λ|^s` bound ratios.
    pub codim: Option<u32>,
    pub warnings: Vec<String>,
}
