//! Fixed-length Hamiltonian Monte Carlo with a diagonal mass matrix.
//!
//! Warmup adapts the step size by dual averaging toward a target acceptance
//! rate and, optionally, the diagonal mass from windowed draw variances. The
//! step size is frozen after warmup. Proposals that leave the support box are
//! rejected outright.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::power_iteration;
use crate::targets::RelaxedTarget;

/// Energy error beyond which a trajectory is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// Sampler settings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct HmcConfig {
    pub step_size: f64,
    pub n_leapfrog: usize,
    /// When set, `L = floor(τ / ε)` each iteration instead of `n_leapfrog`.
    pub integration_time: Option<f64>,
    /// Diagonal of `M`; identity when `None`.
    pub mass_diag: Option<Vec<f64>>,
    pub n_iterations: usize,
    pub n_burnin: usize,
    pub seed: u64,
    pub adapt_step_size: bool,
    pub adapt_mass: bool,
    pub target_accept: f64,
    /// Each iteration uses `ε · U(1 − jitter, 1 + jitter)`.
    pub jitter: f64,
    pub max_leapfrog: usize,
    pub initial: Option<Vec<f64>>,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            n_leapfrog: 50,
            integration_time: None,
            mass_diag: None,
            n_iterations: 2000,
            n_burnin: 1000,
            seed: 0,
            adapt_step_size: true,
            adapt_mass: false,
            target_accept: 0.8,
            jitter: 0.0,
            max_leapfrog: 100_000,
            initial: None,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(invalid("step_size must be positive"));
        }
        if self.n_leapfrog == 0 {
            return Err(invalid("n_leapfrog must be >= 1"));
        }
        if let Some(t) = self.integration_time {
            if !(t > 0.0) || !t.is_finite() {
                return Err(invalid("integration_time must be positive"));
            }
        }
        if let Some(m) = &self.mass_diag {
            if m.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                return Err(invalid("mass_diag entries must be positive"));
            }
        }
        if self.n_burnin >= self.n_iterations {
            return Err(invalid("n_burnin must be < n_iterations"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(invalid("target_accept must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(invalid("jitter must lie in [0, 1)"));
        }
        if self.max_leapfrog == 0 {
            return Err(invalid("max_leapfrog must be >= 1"));
        }
        Ok(())
    }

    fn leapfrog_count(&self, eps: f64) -> usize {
        match self.integration_time {
            Some(t) => ((t / eps) as usize).clamp(1, self.max_leapfrog),
            None => self.n_leapfrog,
        }
    }
}

/// Kept draws and per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub dim: usize,
    /// Row-major `n_kept × dim`.
    pub samples: Vec<f64>,
    /// Acceptance rate over kept iterations.
    pub accept_rate: f64,
    pub warmup_accept_rate: Option<f64>,
    /// `distance(θ)` per kept draw.
    pub violations: Vec<f64>,
    /// `|ΔH|` per proposal over all iterations (infinite for aborted ones).
    pub hamiltonian_errors: Vec<f64>,
    /// Whether each kept iteration accepted its proposal.
    pub accepted: Vec<bool>,
    pub divergences: usize,
    pub step_size: f64,
    pub n_leapfrog: usize,
    pub mass_diag: Vec<f64>,
    pub seed_used: u64,
}

impl Chain {
    pub fn n_kept(&self) -> usize {
        self.violations.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    pub fn map<G: Fn(&[f64]) -> f64>(&self, g: G) -> Vec<f64> {
        self.rows().map(g).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            m.iter_mut().zip(r).for_each(|(a, b)| *a += b);
        }
        let n = self.n_kept() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}

/// State carried through a trajectory.
struct Phase<'a> {
    theta: &'a mut [f64],
    p: &'a mut [f64],
    grad: &'a mut [f64],
}

enum Outcome {
    Done(f64),
    Diverged,
    Failed,
}

fn kinetic(p: &[f64], inv_mass: &[f64]) -> f64 {
    0.5 * p.iter().zip(inv_mass).map(|(x, m)| x * x * m).sum::<f64>()
}

/// Runs `l` leapfrog steps in place, stopping early on divergence when `h0`
/// is given. `grad` must hold `∇ log π̃(θ)` on entry.
fn integrate(
    target: &RelaxedTarget,
    st: Phase<'_>,
    eps: f64,
    l: usize,
    inv_mass: &[f64],
    h0: Option<f64>,
) -> Outcome {
    let Phase { theta, p, grad } = st;
    let half = 0.5 * eps;
    let mut logp = f64::NAN;
    for _ in 0..l {
        p.iter_mut().zip(grad.iter()).for_each(|(pi, g)| *pi += half * g);
        theta.iter_mut().zip(p.iter().zip(inv_mass)).for_each(|(t, (pi, m))| *t += eps * m * pi);
        logp = match target.value_and_grad(theta, grad) {
            Ok(v) => v,
            Err(_) => return Outcome::Failed,
        };
        p.iter_mut().zip(grad.iter()).for_each(|(pi, g)| *pi += half * g);
        if let Some(h0) = h0 {
            let h = -logp + kinetic(p, inv_mass);
            if !(libm::fabs(h - h0) <= DIVERGENCE_THRESHOLD) {
                return Outcome::Diverged;
            }
        }
    }
    Outcome::Done(logp)
}

/// `L` leapfrog steps from `(θ, p)` with step `ε` and diagonal mass.
pub fn leapfrog(
    target: &RelaxedTarget,
    theta: &[f64],
    p: &[f64],
    eps: f64,
    l: usize,
    mass_diag: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = target.dim();
    check_dim(r, theta.len())?;
    check_dim(r, p.len())?;
    check_dim(r, mass_diag.len())?;
    let inv_mass: Vec<f64> = mass_diag.iter().map(|m| 1.0 / m).collect();
    let mut th = theta.to_vec();
    let mut pp = p.to_vec();
    let mut g = vec![0.0; r];
    target.value_and_grad(&th, &mut g)?;
    match integrate(target, Phase { theta: &mut th, p: &mut pp, grad: &mut g }, eps, l, &inv_mass, None) {
        Outcome::Done(_) => Ok((th, pp)),
        _ => Err(Error::Numeric("leapfrog left the support or produced non-finite values".into())),
    }
}

/// Dual averaging of `log ε`.
#[derive(Debug, Clone)]
struct DualAveraging {
    mu: f64,
    hbar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    t: f64,
    delta: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps: f64, delta: f64) -> Self {
        Self { mu: libm::log(10.0 * eps), hbar: 0.0, log_eps: libm::log(eps), log_eps_bar: 0.0, t: 0.0, delta }
    }

    fn update(&mut self, accept_prob: f64) -> f64 {
        self.t += 1.0;
        let eta = 1.0 / (self.t + Self::T0);
        self.hbar = (1.0 - eta) * self.hbar + eta * (self.delta - accept_prob);
        self.log_eps = self.mu - libm::sqrt(self.t) / Self::GAMMA * self.hbar;
        let w = libm::pow(self.t, -Self::KAPPA);
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar;
        libm::exp(self.log_eps)
    }

    fn final_step(&self) -> f64 {
        libm::exp(self.log_eps_bar)
    }
}

/// Streaming mean/variance.
#[derive(Debug, Clone)]
struct Welford {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Self { n: 0.0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        for k in 0..x.len() {
            let d = x[k] - self.mean[k];
            self.mean[k] += d / self.n;
            self.m2[k] += d * (x[k] - self.mean[k]);
        }
    }

    /// Regularized inverse variances.
    fn mass(&self) -> Vec<f64> {
        let n = self.n;
        self.m2
            .iter()
            .map(|m2| {
                let var = if n > 1.0 { m2 / (n - 1.0) } else { 1.0 };
                let reg = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
                1.0 / reg
            })
            .collect()
    }
}

/// Draws `n_iterations − n_burnin` kept samples from `target`.
pub fn sample(target: &RelaxedTarget, config: &HmcConfig) -> Result<Chain> {
    config.validate()?;
    let r = target.dim();
    let mut mass = match &config.mass_diag {
        Some(m) => {
            check_dim(r, m.len())?;
            m.clone()
        }
        None => vec![1.0; r],
    };
    let mut inv_mass: Vec<f64> = mass.iter().map(|m| 1.0 / m).collect();
    let mut theta = match &config.initial {
        Some(x) => {
            check_dim(r, x.len())?;
            x.clone()
        }
        None => target.initial().to_vec(),
    };
    let mut grad = vec![0.0; r];
    let mut logp = target.value_and_grad(&theta, &mut grad).map_err(|_| Error::InvalidStart)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_keep = config.n_iterations - config.n_burnin;
    let mut samples = Vec::with_capacity(n_keep * r);
    let mut violations = Vec::with_capacity(n_keep);
    let mut accepted = Vec::with_capacity(n_keep);
    let mut hamiltonian_errors = Vec::with_capacity(config.n_iterations);
    let mut divergences = 0usize;
    let mut warm_acc = 0usize;
    let mut kept_acc = 0usize;

    let mut eps = config.step_size;
    let mut da = DualAveraging::new(eps, config.target_accept);
    let (win_lo, win_hi) = (config.n_burnin / 4, 3 * config.n_burnin / 4);
    let mut welford = Welford::new(r);

    let mut th_new = vec![0.0; r];
    let mut p = vec![0.0; r];
    let mut g_new = vec![0.0; r];

    for it in 0..config.n_iterations {
        let warm = it < config.n_burnin;
        let eps_it = if config.jitter > 0.0 {
            eps * (1.0 + config.jitter * (2.0 * rng.random::<f64>() - 1.0))
        } else {
            eps
        };
        let l = config.leapfrog_count(eps_it);
        for k in 0..r {
            let z: f64 = StandardNormal.sample(&mut rng);
            p[k] = libm::sqrt(mass[k]) * z;
        }
        let h0 = -logp + kinetic(&p, &inv_mass);
        th_new.copy_from_slice(&theta);
        g_new.copy_from_slice(&grad);
        let outcome = integrate(
            target,
            Phase { theta: &mut th_new, p: &mut p, grad: &mut g_new },
            eps_it,
            l,
            &inv_mass,
            Some(h0),
        );
        let (accept_prob, logp_new) = match outcome {
            Outcome::Done(lp) => {
                let h1 = -lp + kinetic(&p, &inv_mass);
                let dh = h1 - h0;
                hamiltonian_errors.push(libm::fabs(dh));
                if libm::fabs(dh) > DIVERGENCE_THRESHOLD {
                    divergences += 1;
                    (0.0, lp)
                } else {
                    (libm::fmin(1.0, libm::exp(-dh)), lp)
                }
            }
            Outcome::Diverged => {
                divergences += 1;
                hamiltonian_errors.push(f64::INFINITY);
                (0.0, f64::NAN)
            }
            Outcome::Failed => {
                hamiltonian_errors.push(f64::INFINITY);
                (0.0, f64::NAN)
            }
        };
        let u: f64 = rng.random();
        let acc = accept_prob > 0.0 && u < accept_prob;
        if acc {
            core::mem::swap(&mut theta, &mut th_new);
            core::mem::swap(&mut grad, &mut g_new);
            logp = logp_new;
        }

        if warm {
            warm_acc += usize::from(acc);
            if config.adapt_step_size {
                eps = da.update(accept_prob);
            }
            if config.adapt_mass {
                if it >= win_lo && it < win_hi {
                    welford.push(&theta);
                }
                if it + 1 == win_hi && welford.n >= 2.0 {
                    mass = welford.mass();
                    inv_mass = mass.iter().map(|m| 1.0 / m).collect();
                    if config.adapt_step_size {
                        da = DualAveraging::new(eps, config.target_accept);
                    }
                }
            }
            if it + 1 == config.n_burnin && config.adapt_step_size {
                eps = da.final_step();
            }
        } else {
            kept_acc += usize::from(acc);
            samples.extend_from_slice(&theta);
            violations.push(target.distance(&theta));
            accepted.push(acc);
        }
    }

    let warmup_accept_rate = (config.n_burnin > 0).then(|| warm_acc as f64 / config.n_burnin as f64);
    if let Some(a) = warmup_accept_rate {
        if a < 0.001 {
            return Err(Error::AdaptationFailure(a));
        }
    }
    Ok(Chain {
        dim: r,
        samples,
        accept_rate: kept_acc as f64 / n_keep as f64,
        warmup_accept_rate,
        violations,
        hamiltonian_errors,
        accepted,
        divergences,
        step_size: eps,
        n_leapfrog: config.leapfrog_count(eps),
        mass_diag: mass,
        seed_used: config.seed,
    })
}

/// `2 / sqrt(ξ₁)` with `ξ₁` the largest Hessian eigenvalue (in magnitude) of
/// `U = −log π̃` at `θ`, from central differences of the analytic gradient.
pub fn stability_stepsize_hint(target: &RelaxedTarget, theta: &[f64]) -> Result<f64> {
    let r = target.dim();
    check_dim(r, theta.len())?;
    target.log_relaxed_density(theta)?;
    let mut hess = vec![0.0; r * r];
    let mut tp = theta.to_vec();
    let mut gp = vec![0.0; r];
    let mut gm = vec![0.0; r];
    for k in 0..r {
        let h = 1e-6 * libm::fmax(1.0, libm::fabs(theta[k]));
        tp[k] = theta[k] + h;
        target.value_and_grad(&tp, &mut gp)?;
        tp[k] = theta[k] - h;
        target.value_and_grad(&tp, &mut gm)?;
        tp[k] = theta[k];
        for i in 0..r {
            hess[i * r + k] = -(gp[i] - gm[i]) / (2.0 * h);
        }
    }
    if hess.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite Hessian entry".into()));
    }
    for i in 0..r {
        for j in 0..i {
            let s = 0.5 * (hess[i * r + j] + hess[j * r + i]);
            hess[i * r + j] = s;
            hess[j * r + i] = s;
        }
    }
    let xi = power_iteration(
        r,
        |x, y| {
            for i in 0..r {
                y[i] = (0..r).map(|j| hess[i * r + j] * x[j]).sum();
            }
        },
        10_000,
        1e-12,
    );
    if !xi.is_finite() {
        return Err(Error::Numeric("power iteration did not converge".into()));
    }
    Ok(2.0 / libm::sqrt(libm::fabs(xi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{Flat, Gaussian, SupportBox};
    use alloc::sync::Arc;
    use approx::assert_abs_diff_eq;

    fn std_normal(dim: usize) -> RelaxedTarget {
        RelaxedTarget::unconstrained(Arc::new(Gaussian::isotropic(vec![0.0; dim], 1.0).unwrap())).unwrap()
    }

    #[test]
    fn one_step_gaussian() {
        let (th, p) = leapfrog(&std_normal(1), &[1.0], &[0.0], 0.1, 1, &[1.0]).unwrap();
        assert_abs_diff_eq!(th[0], 0.995, epsilon = 1e-15);
        assert_abs_diff_eq!(p[0], -0.09975, epsilon = 1e-15);
    }

    #[test]
    fn free_flight() {
        let t = RelaxedTarget::unconstrained(Arc::new(Flat { dim: 2 })).unwrap();
        let (th, p) = leapfrog(&t, &[0.1, 0.2], &[1.0, -2.0], 0.05, 10, &[2.0, 4.0]).unwrap();
        assert_abs_diff_eq!(th[0], 0.1 + 0.5 * 1.0 / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(th[1], 0.2 + 0.5 * -2.0 / 4.0, epsilon = 1e-14);
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn hint_standard_gaussian() {
        let h = stability_stepsize_hint(&std_normal(3), &[0.2, -0.1, 0.5]).unwrap();
        assert_abs_diff_eq!(h, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn config_validation() {
        let mut c = HmcConfig::default();
        c.n_burnin = c.n_iterations;
        assert!(c.validate().is_err());
        let c = HmcConfig { step_size: 0.0, ..HmcConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn invalid_start() {
        let t = RelaxedTarget::unconstrained(Arc::new(Flat { dim: 1 }))
            .unwrap()
            .with_support(SupportBox::cube(1, 0.0, 1.0))
            .unwrap();
        let c = HmcConfig { initial: Some(vec![2.0]), ..HmcConfig::default() };
        assert_eq!(sample(&t, &c), Err(Error::InvalidStart));
    }

    #[test]
    fn adaptation_failure_when_all_rejected() {
        let t = std_normal(1);
        let c = HmcConfig {
            step_size: 1e4,
            n_leapfrog: 5,
            adapt_step_size: false,
            n_iterations: 200,
            n_burnin: 100,
            ..HmcConfig::default()
        };
        assert!(matches!(sample(&t, &c), Err(Error::AdaptationFailure(_))));
    }
}
