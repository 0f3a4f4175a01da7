//! Named experiments: defaults, model assembly, chains and summaries.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use relaxhmc_core::diagnostics::{auc, ess, fit_rate, mean};
use relaxhmc_core::network::{generate, FactorNetworkLikelihood, NetworkData};
use relaxhmc_core::oracles::{
    relaxed_expectation_1d, relaxed_expectation_polar, sharp_expectation_quadrature, truncated_normal_moments,
    vmf_circle_sample,
};
use relaxhmc_core::targets::ModelSpec;
use relaxhmc_core::{make_model, sample, Chain, Error as CoreError, HmcConfig, OracleResult, RelaxedTarget};

use crate::config::{Experiment, ExperimentConfig, HmcOverrides, ModelParams, ResolvedConfig};
use crate::stats::{angle_from, chi_square_uniform, frame_error};
use crate::summary::{Band, RunSummary, Summary};

/// Distance cutoff for the "outside the torus" fraction.
pub const OUTSIDE_CUTOFF: f64 = 0.05;

/// One chain of the experiment.
#[derive(Debug, Clone)]
pub struct Block {
    pub lambda: f64,
    pub replicate: usize,
    pub chain: Chain,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub config: ResolvedConfig,
    pub summary: Summary,
    pub blocks: Vec<Block>,
    /// Synthetic network data generated for this run.
    pub network: Option<NetworkData>,
}

pub fn default_lambdas(e: Experiment) -> Vec<f64> {
    match e {
        Experiment::GaussianInequality => vec![1e-2],
        Experiment::CircleBenchmark => vec![1e-3, 1e-4, 1e-5],
        Experiment::RateZeroMeasure => vec![1e-2, 3e-3, 1e-3, 3e-4, 1e-4],
        Experiment::RatePositiveMeasure => vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
        _ => vec![1e-3],
    }
}

pub fn default_hmc(e: Experiment) -> HmcConfig {
    // The |ν|/λ kink caps the stable step near λ, so trajectories are set by
    // integration time with a generous leapfrog cap.
    let base = HmcConfig { n_iterations: 6000, n_burnin: 1000, jitter: 0.1, max_leapfrog: 50_000, ..HmcConfig::default() };
    match e {
        Experiment::GaussianInequality => HmcConfig { integration_time: Some(0.5), ..base },
        Experiment::CircleBenchmark => HmcConfig { n_leapfrog: 10_000, ..base },
        Experiment::SphereGaussian | Experiment::SphereT | Experiment::Simplex => {
            HmcConfig { n_iterations: 4000, integration_time: Some(2.0), ..base }
        }
        Experiment::Torus => HmcConfig { n_iterations: 11_000, integration_time: Some(2.0), ..base },
        Experiment::FactorNetwork => {
            HmcConfig {
            n_iterations: 1500,
            n_burnin: 500,
            integration_time: Some(0.5),
            max_leapfrog: 20_000,
            adapt_mass: true,
            ..base
        }
        }
        Experiment::RateZeroMeasure | Experiment::RatePositiveMeasure => base,
    }
}

fn default_model(e: Experiment) -> ModelParams {
    let circle = Some(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2]);
    let sphere = Some(vec![1.0 / 3f64.sqrt(); 3]);
    let gauss = ModelParams { ybar: Some(1.2), n: Some(100.0), prior_var: Some(1000.0), upper: Some(1.0), grid: Some(2048), ..Default::default() };
    match e {
        Experiment::GaussianInequality | Experiment::RatePositiveMeasure => gauss,
        Experiment::CircleBenchmark | Experiment::RateZeroMeasure => {
            ModelParams { f: circle, sigma2: Some(0.1), grid: Some(512), ..Default::default() }
        }
        Experiment::SphereGaussian => {
            ModelParams { f: sphere, sigma2: Some(0.1), box_half_width: Some(1.5), grid: Some(128), ..Default::default() }
        }
        Experiment::SphereT => ModelParams {
            f: sphere,
            sigma2: Some(0.1),
            df: Some(3.0),
            box_half_width: Some(1.5),
            grid: Some(128),
            ..Default::default()
        },
        Experiment::Torus => ModelParams { box_half_width: Some(2.0), grid: Some(128), ..Default::default() },
        Experiment::Simplex => ModelParams { alpha: Some(vec![2.0, 3.0, 4.0]), grid: Some(128), ..Default::default() },
        Experiment::FactorNetwork => ModelParams {
            subjects: Some(5),
            nodes: Some(10),
            factors: Some(3),
            box_half_width: Some(1.5),
            ..Default::default()
        },
    }
}

fn merge_model(base: ModelParams, o: &ModelParams) -> ModelParams {
    macro_rules! pick {
        ($($f:ident),*) => { ModelParams { $( $f: o.$f.clone().or(base.$f), )* } };
    }
    let mut m = pick!(ybar, n, prior_var, upper, f, sigma2, df, box_half_width, alpha, network, subjects, nodes, factors, grid);
    if m.network.is_some() {
        m.subjects = None;
        m.nodes = None;
    }
    m
}

/// Fills every applicable value from the experiment's defaults.
pub fn resolve(cfg: &ExperimentConfig, default_seed: u64) -> Result<ResolvedConfig> {
    let issues = crate::config::check(cfg);
    if !issues.is_empty() {
        bail!("{}", issues.into_iter().map(|(_, m)| m).collect::<Vec<_>>().join("; "));
    }
    let e = cfg.experiment;
    let hmc = cfg.hmc.apply(default_hmc(e));
    hmc.validate().map_err(|err| anyhow::anyhow!("hmc: {err}"))?;
    Ok(ResolvedConfig {
        experiment: e,
        lambda_grid: cfg.lambda_grid.clone().unwrap_or_else(|| default_lambdas(e)),
        hmc: if e.samples() { HmcOverrides::from_config(&hmc) } else { HmcOverrides::default() },
        replicates: cfg.replicates.unwrap_or(if e == Experiment::CircleBenchmark { 10 } else { 1 }),
        output_dir: cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from(format!("out/{e}"))),
        seed: cfg.seed.unwrap_or(default_seed),
        model: merge_model(default_model(e), &cfg.model),
    })
}

type TestFn = fn(&[f64]) -> f64;

fn sum_theta(x: &[f64]) -> f64 {
    x.iter().sum()
}

fn first(x: &[f64]) -> f64 {
    x[0]
}

/// `2(√(θ₁² + θ₂²) − 1)`, which is `cos α₁` on the torus.
fn torus_cos_a1(x: &[f64]) -> f64 {
    2.0 * ((x[0] * x[0] + x[1] * x[1]).sqrt() - 1.0)
}

fn test_function(e: Experiment) -> Option<(&'static str, TestFn)> {
    match e {
        Experiment::GaussianInequality | Experiment::RatePositiveMeasure | Experiment::Simplex => Some(("theta_1", first)),
        Experiment::CircleBenchmark
        | Experiment::RateZeroMeasure
        | Experiment::SphereGaussian
        | Experiment::SphereT => Some(("sum_j theta_j", sum_theta)),
        Experiment::Torus => Some(("2*(sqrt(theta_1^2 + theta_2^2) - 1), cos(alpha_1) on the torus", torus_cos_a1)),
        Experiment::FactorNetwork => None,
    }
}

fn req<T: Clone>(v: &Option<T>, what: &str) -> Result<T> {
    v.clone().with_context(|| format!("missing model parameter {what}"))
}

struct Model {
    spec: ModelSpec,
    network: Option<(Arc<NetworkData>, bool)>,
}

fn build_spec(c: &ResolvedConfig) -> Result<Model> {
    let m = &c.model;
    let spec = match c.experiment {
        Experiment::GaussianInequality | Experiment::RatePositiveMeasure => ModelSpec::GaussianInequality {
            ybar: req(&m.ybar, "ybar")?,
            n: req(&m.n, "n")?,
            prior_var: req(&m.prior_var, "prior_var")?,
            upper: req(&m.upper, "upper")?,
        },
        Experiment::CircleBenchmark | Experiment::RateZeroMeasure => {
            ModelSpec::sphere_gaussian(req(&m.f, "f")?, req(&m.sigma2, "sigma2")?)
        }
        Experiment::SphereGaussian => ModelSpec::SphereGaussian {
            f: req(&m.f, "f")?,
            sigma2: req(&m.sigma2, "sigma2")?,
            box_half_width: req(&m.box_half_width, "box_half_width")?,
        },
        Experiment::SphereT => ModelSpec::SphereT {
            f: req(&m.f, "f")?,
            sigma2: req(&m.sigma2, "sigma2")?,
            df: req(&m.df, "df")?,
            box_half_width: req(&m.box_half_width, "box_half_width")?,
        },
        Experiment::Torus => ModelSpec::TorusUniform { box_half_width: req(&m.box_half_width, "box_half_width")? },
        Experiment::Simplex => ModelSpec::SimplexToy { alpha: req(&m.alpha, "alpha")? },
        Experiment::FactorNetwork => {
            let d = req(&m.factors, "factors")?;
            let (data, generated) = match &m.network {
                Some(path) => (crate::output::read_network(path)?, false),
                None => (generate(req(&m.subjects, "subjects")?, req(&m.nodes, "nodes")?, d, 1.0, 1.0, c.seed)?.0, true),
            };
            let data = Arc::new(data);
            let ModelSpec::FactorNetwork { sigma2_mu, sigma2_s, u_prior, .. } = ModelSpec::factor_network(data.clone(), d) else {
                unreachable!()
            };
            let spec = ModelSpec::FactorNetwork {
                data: data.clone(),
                d,
                sigma2_mu,
                sigma2_s,
                u_prior,
                box_half_width: req(&m.box_half_width, "box_half_width")?,
            };
            return Ok(Model { spec, network: Some((data, generated)) });
        }
    };
    Ok(Model { spec, network: None })
}

fn sharp_oracle(c: &ResolvedConfig, spec: &ModelSpec, g: TestFn, warnings: &mut Vec<String>) -> Result<Option<OracleResult>> {
    if let ModelSpec::GaussianInequality { ybar, n, prior_var, upper } = spec {
        let (mu, s2) = ModelSpec::gaussian_posterior(*ybar, *n, *prior_var);
        return Ok(Some(OracleResult::analytic(truncated_normal_moments(mu, s2, *upper)?.0)));
    }
    match sharp_expectation_quadrature(spec, &g, c.model.grid.unwrap_or(128)) {
        Ok(o) => Ok(Some(o)),
        Err(CoreError::UnsupportedOracle(msg)) => {
            warnings.push(format!("sharp oracle unavailable: {msg}"));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn relaxed_oracle(c: &ResolvedConfig, spec: &ModelSpec, target: &RelaxedTarget, g: TestFn) -> Result<Option<OracleResult>> {
    let lam = target.lambdas()[0];
    match spec {
        ModelSpec::GaussianInequality { ybar, n, prior_var, upper } => {
            let (mu, s2) = ModelSpec::gaussian_posterior(*ybar, *n, *prior_var);
            let lo = mu.min(*upper) - 12.0 * s2.sqrt();
            let hi = upper + 60.0 * lam;
            Ok(Some(relaxed_expectation_1d(target, &g, &[lo, *upper, hi], c.model.grid.unwrap_or(2048))?))
        }
        ModelSpec::SphereGaussian { f, .. } if f.len() == 2 => {
            let grid = c.model.grid.unwrap_or(512);
            Ok(Some(relaxed_expectation_polar(target, &g, grid, grid, 1.5)?))
        }
        _ => Ok(None),
    }
}

/// Runs an experiment; nothing is written to disk.
pub fn run(config: &ResolvedConfig) -> Result<Outcome> {
    let model = build_spec(config)?;
    let mut warnings = Vec::new();
    let g = test_function(config.experiment);
    let sharp = match g {
        Some((_, g)) => sharp_oracle(config, &model.spec, g, &mut warnings)?,
        None => None,
    };
    let lambdas = &config.lambda_grid;
    let targets: Vec<RelaxedTarget> = lambdas.iter().map(|l| make_model(&model.spec, &[*l])).collect::<Result<_, _>>()?;

    let mut runs: Vec<RunSummary> = Vec::with_capacity(lambdas.len());
    for t in &targets {
        let mut r = RunSummary::empty(t.lambdas()[0]);
        if let Some((_, g)) = g {
            r.relaxed_oracle = relaxed_oracle(config, &model.spec, t, g)?;
            if let (Some(a), Some(b)) = (r.relaxed_oracle, sharp) {
                r.oracle_gap = Some((a.value - b.value).abs());
            }
        }
        runs.push(r);
    }

    let mut blocks = Vec::new();
    if config.experiment.samples() {
        let jobs: Vec<(usize, usize)> =
            (0..lambdas.len()).flat_map(|i| (0..config.replicates).map(move |k| (i, k))).collect();
        let chains: Vec<Chain> = jobs
            .par_iter()
            .map(|&(i, k)| {
                let mut hmc = config.hmc_config(k);
                if hmc.initial.is_none() {
                    hmc.initial = Some(targets[i].initial().to_vec());
                }
                sample(&targets[i], &hmc).with_context(|| format!("chain for lambda={} replicate={k}", lambdas[i]))
            })
            .collect::<Result<_>>()?;
        blocks = jobs
            .iter()
            .zip(chains)
            .map(|(&(i, k), chain)| Block { lambda: lambdas[i], replicate: k, chain })
            .collect();
        let lik = match &model.network {
            Some((data, _)) => Some((FactorNetworkLikelihood::new(data.clone(), req(&config.model.factors, "factors")?)?, data.edges())),
            None => None,
        };
        for (i, run) in runs.iter_mut().enumerate() {
            let mine: Vec<&Block> = blocks.iter().filter(|b| b.lambda == lambdas[i]).collect();
            summarize_chains(config, run, &mine, g.map(|x| x.1), sharp, lik.as_ref())?;
        }
    }

    let (rate_fit, codim) = match config.experiment {
        Experiment::RateZeroMeasure | Experiment::RatePositiveMeasure => {
            let errors: Vec<f64> = runs.iter().map(|r| r.oracle_gap.unwrap_or(f64::NAN)).collect();
            let s = if config.experiment == Experiment::RateZeroMeasure { 1 } else { 0 };
            match fit_rate(lambdas, &errors, s) {
                Ok(f) => {
                    if f.dropped > 0 {
                        warnings.push(format!("rate fit dropped {} nonpositive errors", f.dropped));
                    }
                    (Some(f), Some(s))
                }
                Err(e) => {
                    warnings.push(format!("rate fit unavailable: {e}"));
                    (None, Some(s))
                }
            }
        }
        _ => (None, None),
    };

    let summary = Summary {
        experiment: config.experiment,
        seed: config.seed,
        replicates: config.replicates,
        lambda_grid: lambdas.clone(),
        g: g.map(|x| x.0.to_string()),
        sharp_oracle: sharp,
        runs,
        rate_fit,
        codim,
        warnings,
    };
    let network = model.network.and_then(|(d, generated)| generated.then(|| (*d).clone()));
    Ok(Outcome { config: config.clone(), summary, blocks, network })
}

fn summarize_chains(
    config: &ResolvedConfig,
    run: &mut RunSummary,
    blocks: &[&Block],
    g: Option<TestFn>,
    sharp: Option<OracleResult>,
    lik: Option<&(FactorNetworkLikelihood, Vec<u8>)>,
) -> Result<()> {
    let nb = blocks.len() as f64;
    let first = &blocks[0].chain;
    let dim = first.dim;
    run.kept_draws = Some(first.n_kept());
    run.acceptance_rate = Some(blocks.iter().map(|b| b.chain.accept_rate).sum::<f64>() / nb);
    run.warmup_acceptance_rate = first.warmup_accept_rate.map(|_| {
        blocks.iter().map(|b| b.chain.warmup_accept_rate.unwrap_or(0.0)).sum::<f64>() / nb
    });
    run.step_size = Some(blocks.iter().map(|b| b.chain.step_size).sum::<f64>() / nb);
    run.n_leapfrog = Some(first.n_leapfrog);
    run.divergences = Some(blocks.iter().map(|b| b.chain.divergences).sum());

    let mut ess_sum = vec![0.0; dim];
    let mut per_1000 = 0.0;
    for b in blocks {
        let mut min_ess = f64::INFINITY;
        for (k, acc) in ess_sum.iter_mut().enumerate() {
            let e = ess(&b.chain.column(k))?.value;
            *acc += e / nb;
            min_ess = min_ess.min(e);
        }
        per_1000 += 1000.0 * min_ess / b.chain.n_kept() as f64 / nb;
    }
    run.ess = Some(ess_sum);
    run.ess_per_1000 = Some(per_1000);

    let pooled: Vec<f64> = blocks.iter().flat_map(|b| b.chain.violations.iter().copied()).collect();
    run.violation = Band::of(&pooled);
    let n_draws = pooled.len() as f64;

    if let Some(g) = g {
        let estimates: Vec<f64> = blocks.iter().map(|b| mean(&b.chain.map(g))).collect();
        run.estimate = Band::of(&estimates);
        if let Some(o) = sharp {
            let diffs: Vec<f64> = estimates.iter().map(|e| (e - o.value).abs()).collect();
            run.expectation_diff = Band::of(&diffs);
            run.expectation_diffs = Some(diffs);
        }
    }

    let ex = &mut run.extras;
    match config.experiment {
        Experiment::Torus => {
            ex.frac_distance_gt_0_05 = Some(pooled.iter().filter(|d| **d > OUTSIDE_CUTOFF).count() as f64 / n_draws);
            let alpha2: Vec<f64> = blocks.iter().flat_map(|b| b.chain.rows().map(|x| x[1].atan2(x[0]))).collect();
            ex.chi_square_alpha2 = Some(chi_square_uniform(&alpha2, -std::f64::consts::PI, std::f64::consts::PI, 20)?);
        }
        Experiment::SphereGaussian | Experiment::SphereT => {
            let f = req(&config.model.f, "f")?;
            let far = blocks.iter().flat_map(|b| b.chain.rows().map(|x| angle_from(x, &f))).filter(|a| *a > 1.0).count();
            ex.frac_angle_gt_1 = Some(far as f64 / n_draws);
            ex.frac_distance_gt_0_05 = Some(pooled.iter().filter(|d| **d > OUTSIDE_CUTOFF).count() as f64 / n_draws);
        }
        Experiment::CircleBenchmark => {
            let f = req(&config.model.f, "f")?;
            let s2 = req(&config.model.sigma2, "sigma2")?;
            let n = first.n_kept();
            let diffs: Vec<f64> = (0..blocks.len())
                .map(|k| {
                    let seed = config.seed.wrapping_add(1_000_003 * (k as u64 + 1));
                    let a = vmf_circle_sample([f[0], f[1]], s2, n, seed)?;
                    let b = vmf_circle_sample([f[0], f[1]], s2, n, seed.wrapping_add(1))?;
                    let m = |d: &[f64]| d.chunks_exact(2).map(sum_theta).sum::<f64>() / n as f64;
                    Ok((m(&a) - m(&b)).abs())
                })
                .collect::<Result<_, CoreError>>()?;
            ex.exact_baseline_diff = Band::of(&diffs);
        }
        Experiment::FactorNetwork => {
            let (lik, edges) = lik.expect("network likelihood");
            let layout = lik.layout();
            let mut frame = 0.0;
            let mut probs = vec![0.0; layout.n * layout.n_pairs()];
            let mut count = 0.0;
            for b in blocks {
                for x in b.chain.rows() {
                    frame += frame_error(&x[layout.u_offset()..], layout.r, layout.d);
                    for (p, q) in probs.iter_mut().zip(lik.edge_probabilities(x)) {
                        *p += q;
                    }
                    count += 1.0;
                }
            }
            ex.frame_error = Some(frame / count);
            let labels: Vec<bool> = edges.iter().map(|e| *e == 1).collect();
            let scores: Vec<f64> = probs.iter().map(|p| p / count).collect();
            ex.auc = auc(&scores, &labels).ok();
        }
        _ => {}
    }
    Ok(())
}
