//! Ground truth: analytic moments, exact samplers for sharply constrained
//! laws, and trapezoid quadrature of sharp (surface) and relaxed (ambient)
//! expectations.
//!
//! Every quadrature runs at `n` and `2n` nodes per axis. Sums are carried in
//! the log domain so tiny `λ` cannot underflow the normalizer.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::{ConstraintKind, SetKind};
use crate::error::{invalid, Error, Result};
use crate::special::{inverse_mills_lower, LogAccumulator};
use crate::targets::{make_model, ModelSpec, RelaxedTarget};

/// How an oracle value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Method {
    Analytic,
    Quadrature,
    RejectionMC,
}

/// An expectation with an error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleResult {
    pub value: f64,
    pub error_bound: f64,
    pub method: Method,
}

impl OracleResult {
    pub fn analytic(value: f64) -> Self {
        Self { value, error_bound: 0.0, method: Method::Analytic }
    }
}

/// Mean and variance of `N(μ, σ²)` truncated to `θ < upper`.
pub fn truncated_normal_moments(mu: f64, sigma2: f64, upper: f64) -> Result<(f64, f64)> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(invalid("sigma2 must be positive"));
    }
    if upper == f64::INFINITY {
        return Ok((mu, sigma2));
    }
    let s = libm::sqrt(sigma2);
    let z = (upper - mu) / s;
    let lam = inverse_mills_lower(z);
    Ok((mu - s * lam, sigma2 * (1.0 - z * lam - lam * lam)))
}

/// Exact von Mises draws on the unit circle with natural parameter `F/σ²`,
/// returned row-major `n × 2`. Best–Fisher wrapped-Cauchy rejection; for
/// `κ < 1e-3` a uniform proposal accepted with probability `e^{κ(cos φ − 1)}`.
pub fn vmf_circle_sample(f: [f64; 2], sigma2: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let norm = libm::hypot(f[0], f[1]);
    if !(norm > 0.0) || !(sigma2 > 0.0) || n == 0 {
        return Err(invalid("vmf sampler needs nonzero F, sigma2 > 0, n >= 1"));
    }
    let kappa = norm / sigma2;
    let mean_angle = libm::atan2(f[1], f[0]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * n);
    let tau = 1.0 + libm::sqrt(1.0 + 4.0 * kappa * kappa);
    let rho = (tau - libm::sqrt(2.0 * tau)) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    for _ in 0..n {
        let phi = if kappa < 1e-3 {
            loop {
                let a = TAU * rng.random::<f64>();
                if rng.random::<f64>() < libm::exp(kappa * (libm::cos(a) - 1.0)) {
                    break a;
                }
            }
        } else {
            loop {
                let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
                let z = libm::cos(PI * u1);
                let fw = (1.0 + r * z) / (r + z);
                let c = kappa * (r - fw);
                if c * (2.0 - c) - u2 > 0.0 || libm::log(c / u2) + 1.0 - c >= 0.0 {
                    let a = libm::acos(fw.clamp(-1.0, 1.0));
                    break if u3 > 0.5 { mean_angle + a } else { mean_angle - a };
                }
            }
        };
        out.push(libm::cos(phi));
        out.push(libm::sin(phi));
    }
    Ok(out)
}

/// Point on the torus `((1 + ½cos α₁)cos α₂, (1 + ½cos α₁)sin α₂, ½sin α₁)`.
#[inline]
pub fn torus_point(a1: f64, a2: f64) -> [f64; 3] {
    let w = 1.0 + 0.5 * libm::cos(a1);
    [w * libm::cos(a2), w * libm::sin(a2), 0.5 * libm::sin(a1)]
}

/// Exact uniform (Hausdorff) draws on the torus, row-major `n × 3`.
pub fn torus_uniform_sample(n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("n must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let a1 = loop {
            let a = TAU * rng.random::<f64>();
            if rng.random::<f64>() < (1.0 + 0.5 * libm::cos(a)) / 1.5 {
                break a;
            }
        };
        let a2 = TAU * rng.random::<f64>();
        out.extend_from_slice(&torus_point(a1, a2));
    }
    Ok(out)
}

/// Monte Carlo mean of `g` over row-major draws, with its standard error
/// (assuming independent draws).
pub fn mc_expectation(draws: &[f64], dim: usize, g: &dyn Fn(&[f64]) -> f64) -> OracleResult {
    let vals: Vec<f64> = draws.chunks_exact(dim).map(g).collect();
    let n = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / n;
    let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    OracleResult { value: m, error_bound: libm::sqrt(v / n), method: Method::RejectionMC }
}

/// One quadrature axis: `[lo, hi]`, periodic or not.
#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    periodic: bool,
}

impl Axis {
    fn nodes(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let h = (self.hi - self.lo) / n as f64;
        if self.periodic {
            ((0..n).map(|i| self.lo + i as f64 * h).collect(), vec![libm::log(h); n])
        } else {
            let xs = (0..=n).map(|i| if i == n { self.hi } else { self.lo + i as f64 * h }).collect();
            let lw = (0..=n).map(|i| libm::log(if i == 0 || i == n { 0.5 * h } else { h })).collect();
            (xs, lw)
        }
    }
}

/// Tensor-product trapezoid of `exp(log_w(u)) · g(u)` over the axes.
/// `point(u)` returns `None` where the weight vanishes.
fn tensor_sum<F>(axes: &[Axis], n: usize, mut point: F) -> Result<LogAccumulator>
where
    F: FnMut(&[f64]) -> Result<Option<(f64, f64)>>,
{
    let grids: Vec<(Vec<f64>, Vec<f64>)> = axes.iter().map(|a| a.nodes(n)).collect();
    let mut idx = vec![0usize; axes.len()];
    let mut u = vec![0.0; axes.len()];
    let mut acc = LogAccumulator::new();
    'outer: loop {
        let mut lw = 0.0;
        for (k, (xs, ws)) in grids.iter().enumerate() {
            u[k] = xs[idx[k]];
            lw += ws[idx[k]];
        }
        if let Some((lf, gv)) = point(&u)? {
            acc.add(lf + lw, gv);
        }
        for k in (0..axes.len()).rev() {
            idx[k] += 1;
            if idx[k] < grids[k].0.len() {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    Ok(acc)
}

fn finish(coarse: &LogAccumulator, fine: &LogAccumulator, richardson: bool) -> Result<OracleResult> {
    if coarse.is_empty() || fine.is_empty() {
        return Err(Error::Numeric("normalizing constant underflowed".into()));
    }
    let (a, b) = (coarse.mean(), fine.mean());
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Numeric("non-finite quadrature value".into()));
    }
    let (value, err) = if richardson { ((4.0 * b - a) / 3.0, libm::fabs(b - a) / 3.0) } else { (b, libm::fabs(b - a)) };
    let floor = 64.0 * f64::EPSILON * libm::fmax(1.0, libm::fabs(value));
    Ok(OracleResult { value, error_bound: libm::fmax(err, floor), method: Method::Quadrature })
}

/// Parameterizations of the supported sharp constraint sets.
#[derive(Debug, Clone, PartialEq)]
pub enum Chart {
    /// Unit circle by angle.
    Circle,
    /// Unit 2-sphere by `(t = cos α, β)`, which has a uniform area element.
    Sphere2,
    /// Torus by `(α₁, α₂)` with area element `½(1 + ½cos α₁)`.
    Torus,
    /// Probability simplex in `R^2` or `R^3` (Duffy map for the triangle).
    Simplex { r: usize },
    /// Segment `point + t·direction`, `t ∈ [t_lo, t_hi]`.
    Line { point: Vec<f64>, direction: Vec<f64>, t_lo: f64, t_hi: f64 },
    /// The interval `[lo, hi]` of a one-dimensional positive-measure set.
    Interval { lo: f64, hi: f64 },
}

impl Chart {
    fn axes(&self) -> Vec<Axis> {
        let per = |lo, hi| Axis { lo, hi, periodic: true };
        let closed = |lo, hi| Axis { lo, hi, periodic: false };
        match self {
            Chart::Circle => vec![per(0.0, TAU)],
            Chart::Sphere2 => vec![closed(-1.0, 1.0), per(0.0, TAU)],
            Chart::Torus => vec![per(0.0, TAU), per(0.0, TAU)],
            Chart::Simplex { r: 2 } => vec![closed(0.0, 1.0)],
            Chart::Simplex { .. } => vec![closed(0.0, 1.0), closed(0.0, 1.0)],
            Chart::Line { t_lo, t_hi, .. } => vec![closed(*t_lo, *t_hi)],
            Chart::Interval { lo, hi } => vec![closed(*lo, *hi)],
        }
    }

    fn dim(&self) -> usize {
        match self {
            Chart::Circle => 2,
            Chart::Sphere2 | Chart::Torus => 3,
            Chart::Simplex { r } => *r,
            Chart::Line { point, .. } => point.len(),
            Chart::Interval { .. } => 1,
        }
    }

    /// Writes the point for chart coordinates `u` and returns the log of the
    /// surface element (up to a constant).
    fn point(&self, u: &[f64], th: &mut [f64]) -> f64 {
        match self {
            Chart::Circle => {
                th[0] = libm::cos(u[0]);
                th[1] = libm::sin(u[0]);
                0.0
            }
            Chart::Sphere2 => {
                let s = libm::sqrt(libm::fmax(0.0, 1.0 - u[0] * u[0]));
                th[0] = s * libm::cos(u[1]);
                th[1] = s * libm::sin(u[1]);
                th[2] = u[0];
                0.0
            }
            Chart::Torus => {
                th.copy_from_slice(&torus_point(u[0], u[1]));
                libm::log(0.5 * (1.0 + 0.5 * libm::cos(u[0])))
            }
            Chart::Simplex { r: 2 } => {
                th[0] = u[0];
                th[1] = 1.0 - u[0];
                0.0
            }
            Chart::Simplex { .. } => {
                th[0] = u[0];
                th[1] = (1.0 - u[0]) * u[1];
                th[2] = (1.0 - u[0]) * (1.0 - u[1]);
                libm::log(1.0 - u[0])
            }
            Chart::Line { point, direction, .. } => {
                for k in 0..th.len() {
                    th[k] = point[k] + u[0] * direction[k];
                }
                0.0
            }
            Chart::Interval { .. } => {
                th[0] = u[0];
                0.0
            }
        }
    }

    fn periodic_only(&self) -> bool {
        matches!(self, Chart::Circle | Chart::Torus)
    }
}

/// Default chart for a model's constraint set.
pub fn chart_for(spec: &ModelSpec) -> Result<Chart> {
    match spec {
        ModelSpec::SphereGaussian { f, .. } | ModelSpec::SphereT { f, .. } => match f.len() {
            2 => Ok(Chart::Circle),
            3 => Ok(Chart::Sphere2),
            _ => Err(Error::UnsupportedOracle("sphere oracle needs r = 2 or 3".into())),
        },
        ModelSpec::TorusUniform { .. } => Ok(Chart::Torus),
        ModelSpec::SimplexToy { alpha } if alpha.len() == 2 || alpha.len() == 3 => Ok(Chart::Simplex { r: alpha.len() }),
        ModelSpec::SimplexToy { .. } => Err(Error::UnsupportedOracle("simplex oracle needs r <= 3".into())),
        ModelSpec::GaussianInequality { ybar, n, prior_var, upper } => {
            let (mu, s2) = ModelSpec::gaussian_posterior(*ybar, *n, *prior_var);
            let s = libm::sqrt(s2);
            let lo = libm::fmin(mu, *upper) - 12.0 * s;
            Ok(Chart::Interval { lo, hi: *upper })
        }
        ModelSpec::FactorNetwork { .. } => Err(Error::UnsupportedOracle("no chart for the Stiefel network model".into())),
    }
}

/// `E[g(θ) | θ ∈ D]` for a catalog model, integrating `L π_R / J` against the
/// surface measure of `D`. With a Jacobian factor the weight is `L π_R J / J`.
pub fn sharp_expectation_quadrature(spec: &ModelSpec, g: &dyn Fn(&[f64]) -> f64, grid: usize) -> Result<OracleResult> {
    let target = make_model(spec, &[1.0])?;
    sharp_expectation_chart(&target, &chart_for(spec)?, g, grid)
}

/// Sharp expectation of `g` over an explicit chart of `D`, using the base
/// density of `target`.
pub fn sharp_expectation_chart(
    target: &RelaxedTarget,
    chart: &Chart,
    g: &dyn Fn(&[f64]) -> f64,
    grid: usize,
) -> Result<OracleResult> {
    if grid < 64 {
        return Err(invalid("grid must be >= 64"));
    }
    if chart.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), got: chart.dim() });
    }
    if let Chart::Simplex { r } = chart {
        if !(2..=3).contains(r) {
            return Err(Error::UnsupportedOracle("simplex oracle needs r <= 3".into()));
        }
    }
    let use_j = target.constraints().is_some_and(|c| c.kind() == SetKind::MeasureZero) && !target.jacobian_factor();
    let r = target.dim();
    let run = |n: usize| -> Result<LogAccumulator> {
        let mut th = vec![0.0; r];
        let mut scratch = vec![0.0; r];
        tensor_sum(&chart.axes(), n, |u| {
            let le = chart.point(u, &mut th);
            if le == f64::NEG_INFINITY {
                return Ok(None);
            }
            scratch.iter_mut().for_each(|x| *x = 0.0);
            let mut lf = target.likelihood().log_density_and_grad(&th, &mut scratch)
                + target.prior().log_density_and_grad(&th, &mut scratch);
            if use_j {
                lf -= target.constraints().map_or(Ok(0.0), |c| c.log_jacobian(&th))?;
            }
            if lf.is_nan() || lf == f64::INFINITY {
                return Err(Error::Numeric("non-finite base density on the chart".into()));
            }
            Ok(Some((lf + le, g(&th))))
        })
    };
    let (coarse, fine) = (run(grid)?, run(2 * grid)?);
    finish(&coarse, &fine, !chart.periodic_only())
}

/// `E_Π̃[g]` by tensor-grid trapezoid over the target's (bounded) support box.
pub fn relaxed_expectation_quadrature(target: &RelaxedTarget, g: &dyn Fn(&[f64]) -> f64, grid: usize) -> Result<OracleResult> {
    let b = target.support().ok_or_else(|| invalid("relaxed quadrature needs a bounded box"))?;
    relaxed_expectation_box(target, g, grid, &b.lo.clone(), &b.hi.clone())
}

/// Relaxed expectation over an explicit box `[lo, hi]`.
pub fn relaxed_expectation_box(
    target: &RelaxedTarget,
    g: &dyn Fn(&[f64]) -> f64,
    grid: usize,
    lo: &[f64],
    hi: &[f64],
) -> Result<OracleResult> {
    let r = target.dim();
    if r > 3 {
        return Err(Error::UnsupportedOracle("relaxed quadrature needs r <= 3".into()));
    }
    if lo.len() != r || hi.len() != r || lo.iter().zip(hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
        return Err(invalid("relaxed quadrature needs a finite box of the target dimension"));
    }
    if grid < 2 {
        return Err(invalid("grid must be >= 2"));
    }
    let axes: Vec<Axis> = lo.iter().zip(hi).map(|(l, h)| Axis { lo: *l, hi: *h, periodic: false }).collect();
    let run = |n| ambient_sum(target, &axes, n, g);
    let (coarse, fine) = (run(grid)?, run(2 * grid)?);
    finish(&coarse, &fine, true)
}

fn ambient_sum(target: &RelaxedTarget, axes: &[Axis], n: usize, g: &dyn Fn(&[f64]) -> f64) -> Result<LogAccumulator> {
    let mut grad = vec![0.0; target.dim()];
    tensor_sum(axes, n, |u| match target.value_and_grad(u, &mut grad) {
        Ok(lf) => Ok(Some((lf, g(u)))),
        Err(Error::OutOfSupport) => Ok(None),
        Err(Error::Numeric(_)) => Ok(None),
        Err(e) => Err(e),
    })
}

/// One-dimensional relaxed expectation with panel breakpoints (for example at
/// the kink of a half-line distance), each panel integrated separately.
pub fn relaxed_expectation_1d(
    target: &RelaxedTarget,
    g: &dyn Fn(&[f64]) -> f64,
    breakpoints: &[f64],
    grid: usize,
) -> Result<OracleResult> {
    if target.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: target.dim() });
    }
    if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("breakpoints must be strictly increasing, at least two"));
    }
    let run = |n: usize| -> Result<LogAccumulator> {
        let mut acc = LogAccumulator::new();
        for w in breakpoints.windows(2) {
            acc.merge(&ambient_sum(target, &[Axis { lo: w[0], hi: w[1], periodic: false }], n, g)?);
        }
        Ok(acc)
    };
    let (coarse, fine) = (run(grid)?, run(2 * grid)?);
    finish(&coarse, &fine, true)
}

/// Relaxed expectation for a two-dimensional target relaxed toward the unit
/// circle, in polar coordinates. Radial nodes are graded geometrically toward
/// the kink at `ρ = 1` through `ρ = 1 ± λ(e^u − 1)`, so the `λ`-wide relaxation
/// band is resolved at any `λ`.
pub fn relaxed_expectation_polar(
    target: &RelaxedTarget,
    g: &dyn Fn(&[f64]) -> f64,
    radial_grid: usize,
    angular_grid: usize,
    rho_max: f64,
) -> Result<OracleResult> {
    let circle = target.dim() == 2
        && target
            .constraints()
            .is_some_and(|c| c.len() == 1 && matches!(c.constraints().first().map(|f| f.kind()), Some(ConstraintKind::SquaredNorm)));
    if !circle {
        return Err(Error::UnsupportedOracle("polar quadrature needs a 2-D unit-circle constraint".into()));
    }
    if !(rho_max > 1.0) || radial_grid < 2 || angular_grid < 8 {
        return Err(invalid("polar quadrature needs rho_max > 1 and enough nodes"));
    }
    let lam = target.lambdas()[0] / target.constraints().map_or(1.0, |c| c.weights()[0]);
    let panels = [(1.0, -1.0, 1.0), (1.0, 1.0, rho_max - 1.0)];
    let run = |n: usize, m: usize| -> Result<LogAccumulator> {
        let mut acc = LogAccumulator::new();
        let mut grad = [0.0; 2];
        for &(center, sign, span) in &panels {
            let umax = libm::log1p(span / lam);
            let axes = [Axis { lo: 0.0, hi: umax, periodic: false }, Axis { lo: 0.0, hi: TAU, periodic: true }];
            let part = tensor_sum_mixed(&axes, [n, m], |u| {
                let s = lam * libm::expm1(u[0]);
                let rho = center + sign * s;
                if rho <= 0.0 {
                    return Ok(None);
                }
                let th = [rho * libm::cos(u[1]), rho * libm::sin(u[1])];
                match target.value_and_grad(&th, &mut grad) {
                    Ok(lf) => Ok(Some((lf + libm::log(rho) + libm::log(lam) + u[0], g(&th)))),
                    Err(Error::OutOfSupport) | Err(Error::Numeric(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            })?;
            acc.merge(&part);
        }
        Ok(acc)
    };
    let (coarse, fine) = (run(radial_grid, angular_grid)?, run(2 * radial_grid, 2 * angular_grid)?);
    finish(&coarse, &fine, true)
}

fn tensor_sum_mixed<F>(axes: &[Axis; 2], n: [usize; 2], mut point: F) -> Result<LogAccumulator>
where
    F: FnMut(&[f64]) -> Result<Option<(f64, f64)>>,
{
    let (x0, w0) = axes[0].nodes(n[0]);
    let (x1, w1) = axes[1].nodes(n[1]);
    let mut acc = LogAccumulator::new();
    for i in 0..x0.len() {
        for j in 0..x1.len() {
            if let Some((lf, gv)) = point(&[x0[i], x1[j]])? {
                acc.add(lf + w0[i] + w1[j], gv);
            }
        }
    }
    Ok(acc)
}
