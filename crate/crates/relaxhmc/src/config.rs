//! Experiment configuration: JSON documents, CLI overrides, validation.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use relaxhmc_core::HmcConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GaussianInequality,
    CircleBenchmark,
    SphereGaussian,
    SphereT,
    Torus,
    Simplex,
    FactorNetwork,
    RateZeroMeasure,
    RatePositiveMeasure,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::GaussianInequality,
        Experiment::CircleBenchmark,
        Experiment::SphereGaussian,
        Experiment::SphereT,
        Experiment::Torus,
        Experiment::Simplex,
        Experiment::FactorNetwork,
        Experiment::RateZeroMeasure,
        Experiment::RatePositiveMeasure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GaussianInequality => "gaussian-inequality",
            Experiment::CircleBenchmark => "circle-benchmark",
            Experiment::SphereGaussian => "sphere-gaussian",
            Experiment::SphereT => "sphere-t",
            Experiment::Torus => "torus",
            Experiment::Simplex => "simplex",
            Experiment::FactorNetwork => "factor-network",
            Experiment::RateZeroMeasure => "rate-zero-measure",
            Experiment::RatePositiveMeasure => "rate-positive-measure",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::GaussianInequality => "Gaussian mean under theta < 1, HMC vs truncated-normal oracle",
            Experiment::CircleBenchmark => "von Mises-Fisher on the unit circle: violation, expectation diff, ESS per lambda",
            Experiment::SphereGaussian => "Gaussian parent relaxed to the unit sphere (2-sphere point cloud)",
            Experiment::SphereT => "t parent relaxed to the unit sphere (2-sphere point cloud)",
            Experiment::Torus => "uniform on a curved torus with the Jacobian factor, alpha2 uniformity test",
            Experiment::Simplex => "Dirichlet kernel relaxed to the probability simplex",
            Experiment::FactorNetwork => "synthetic latent factor network with Stiefel-relaxed loadings",
            Experiment::RateZeroMeasure => "circle: relaxed vs sharp quadrature error over the lambda grid",
            Experiment::RatePositiveMeasure => "Gaussian mean under theta < 1: quadrature vs analytic error over lambda",
        }
    }

    pub fn parse(name: &str) -> Option<Experiment> {
        Experiment::ALL.into_iter().find(|e| e.name() == name)
    }

    /// Experiments that draw HMC chains (the rate experiments are quadrature only).
    pub fn samples(self) -> bool {
        !matches!(self, Experiment::RateZeroMeasure | Experiment::RatePositiveMeasure)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Partial sampler settings; unset fields take the experiment's defaults. The
/// chain seed comes from the top-level `seed`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmcOverrides {
    pub step_size: Option<f64>,
    pub n_leapfrog: Option<usize>,
    pub integration_time: Option<f64>,
    pub mass_diag: Option<Vec<f64>>,
    pub n_iterations: Option<usize>,
    pub n_burnin: Option<usize>,
    pub adapt_step_size: Option<bool>,
    pub adapt_mass: Option<bool>,
    pub target_accept: Option<f64>,
    pub jitter: Option<f64>,
    pub max_leapfrog: Option<usize>,
    pub initial: Option<Vec<f64>>,
}

impl HmcOverrides {
    pub fn apply(&self, mut c: HmcConfig) -> HmcConfig {
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = &self.$f { c.$f = v.clone(); } )*};
        }
        set!(step_size, n_leapfrog, n_iterations, n_burnin, adapt_step_size, adapt_mass, target_accept, jitter, max_leapfrog);
        if self.integration_time.is_some() {
            c.integration_time = self.integration_time;
        }
        if self.initial.is_some() {
            c.initial = self.initial.clone();
        }
        if self.mass_diag.is_some() {
            c.mass_diag = self.mass_diag.clone();
        }
        c
    }

    pub fn from_config(c: &HmcConfig) -> Self {
        Self {
            step_size: Some(c.step_size),
            n_leapfrog: Some(c.n_leapfrog),
            integration_time: c.integration_time,
            mass_diag: c.mass_diag.clone(),
            n_iterations: Some(c.n_iterations),
            n_burnin: Some(c.n_burnin),
            adapt_step_size: Some(c.adapt_step_size),
            adapt_mass: Some(c.adapt_mass),
            target_accept: Some(c.target_accept),
            jitter: Some(c.jitter),
            max_leapfrog: Some(c.max_leapfrog),
            initial: c.initial.clone(),
        }
    }
}

/// Model parameters; which ones apply depends on the experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Sample mean (Gaussian mean experiments).
    pub ybar: Option<f64>,
    /// Sample size (Gaussian mean experiments); 0 leaves prior × relaxation.
    pub n: Option<f64>,
    pub prior_var: Option<f64>,
    pub upper: Option<f64>,
    /// Location `F` of the parent density (circle and sphere).
    pub f: Option<Vec<f64>>,
    pub sigma2: Option<f64>,
    pub df: Option<f64>,
    pub box_half_width: Option<f64>,
    pub alpha: Option<Vec<f64>>,
    /// Network JSON to load instead of generating synthetic data.
    pub network: Option<PathBuf>,
    pub subjects: Option<usize>,
    pub nodes: Option<usize>,
    pub factors: Option<usize>,
    /// Quadrature nodes per axis.
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub hmc: HmcOverrides,
    #[serde(default)]
    pub replicates: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: ModelParams,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            lambda_grid: None,
            hmc: HmcOverrides::default(),
            replicates: None,
            output_dir: None,
            seed: None,
            model: ModelParams::default(),
        }
    }
}

/// A configuration with every applicable value filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub experiment: Experiment,
    pub lambda_grid: Vec<f64>,
    pub hmc: HmcOverrides,
    pub replicates: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub model: ModelParams,
}

impl ResolvedConfig {
    /// Sampler settings for one replicate.
    pub fn hmc_config(&self, replicate: usize) -> HmcConfig {
        let mut c = self.hmc.apply(HmcConfig::default());
        c.seed = self.seed.wrapping_add(replicate as u64);
        c
    }
}

/// One configuration problem with its source line when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl ConfigErrors {
    /// True when the only problem is an unrecognized experiment name.
    pub fn unknown_experiment(&self) -> bool {
        self.0.iter().any(|e| e.message.starts_with("unknown experiment"))
    }
}

fn line_of(src: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    src.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

/// Parses and validates a JSON document.
pub fn parse_config(src: &str) -> Result<ExperimentConfig, ConfigErrors> {
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(src) {
        if let Some(name) = v.get("experiment").and_then(|e| e.as_str()) {
            if Experiment::parse(name).is_none() {
                return Err(ConfigErrors(vec![ConfigIssue {
                    line: line_of(src, "experiment"),
                    message: format!("unknown experiment '{name}'"),
                }]));
            }
        }
    }
    let cfg: ExperimentConfig = serde_json::from_str(src).map_err(|e| {
        ConfigErrors(vec![ConfigIssue { line: (e.line() > 0).then_some(e.line()), message: e.to_string() }])
    })?;
    let issues: Vec<ConfigIssue> = check(&cfg)
        .into_iter()
        .map(|(key, message)| ConfigIssue { line: line_of(src, key), message })
        .collect();
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(issues))
    }
}

pub fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let src = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    parse_config(&src).map_err(|e| anyhow::Error::new(e).context(format!("invalid config {}", path.display())))
}

/// Invariant checks as `(json key, message)`.
pub fn check(cfg: &ExperimentConfig) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    if let Some(g) = &cfg.lambda_grid {
        if g.is_empty() {
            out.push(("lambda_grid", "lambda_grid must be nonempty".to_string()));
        }
        if g.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            out.push(("lambda_grid", "lambda_grid entries must be positive".to_string()));
        }
        if g.windows(2).any(|w| !(w[0] > w[1])) {
            out.push(("lambda_grid", "lambda_grid must be strictly decreasing".to_string()));
        }
        if matches!(cfg.experiment, Experiment::RateZeroMeasure | Experiment::RatePositiveMeasure) && g.len() < 3 {
            out.push(("lambda_grid", "rate experiments need at least 3 lambda values".to_string()));
        }
    }
    if cfg.replicates == Some(0) {
        out.push(("replicates", "replicates must be >= 1".to_string()));
    }
    if let Err(e) = cfg.hmc.apply(HmcConfig::default()).validate() {
        out.push(("hmc", format!("hmc: {e}")));
    }
    let m = &cfg.model;
    for (key, v) in [("sigma2", m.sigma2), ("df", m.df), ("prior_var", m.prior_var)] {
        if v.is_some_and(|x| !(x > 0.0) || !x.is_finite()) {
            out.push((key, format!("{key} must be positive")));
        }
    }
    if m.n.is_some_and(|x| !(x >= 0.0) || !x.is_finite()) {
        out.push(("n", "n must be nonnegative".to_string()));
    }
    if m.grid.is_some_and(|g| g < 64) {
        out.push(("grid", "grid must be >= 64".to_string()));
    }
    if let Some(f) = &m.f {
        let want = match cfg.experiment {
            Experiment::CircleBenchmark | Experiment::RateZeroMeasure => Some(2),
            Experiment::SphereGaussian | Experiment::SphereT => Some(3),
            _ => None,
        };
        if want.is_some_and(|w| w != f.len()) {
            out.push(("f", format!("f must have {} components for {}", want.unwrap(), cfg.experiment)));
        }
        if f.iter().all(|x| *x == 0.0) {
            out.push(("f", "f must be nonzero".to_string()));
        }
    }
    if let Some(a) = &m.alpha {
        if !(2..=3).contains(&a.len()) || a.iter().any(|x| !(*x >= 1.0) || !x.is_finite()) {
            out.push(("alpha", "alpha must have 2 or 3 entries, each >= 1".to_string()));
        }
    }
    out
}
