//! Unnormalized relaxed posteriors
//! `log L + log π_R − Σ_j w_j |ν_j| / λ_j (+ log J)` and the paper's models.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::constraints::{catalog, stiefel_block, Catalog, ConstraintSet, Norm, SetKind};
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{cholesky, cholesky_inverse, gram_schmidt};
use crate::network::{FactorNetworkLikelihood, FactorNetworkPrior, NetworkData, UPrior};

/// A differentiable unnormalized log density.
pub trait LogDensity: Send + Sync {
    fn dim(&self) -> usize;

    /// Returns `log f(θ)` and adds `∇ log f(θ)` into `grad`.
    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64;
}

/// The zero log density.
#[derive(Debug, Clone)]
pub struct Flat {
    pub dim: usize,
}

impl LogDensity for Flat {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density_and_grad(&self, _: &[f64], _: &mut [f64]) -> f64 {
        0.0
    }
}

/// Gaussian log kernel with a diagonal or dense precision.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: Vec<f64>,
    precision: Precision,
}

#[derive(Debug, Clone)]
enum Precision {
    Diag(Vec<f64>),
    Dense(Vec<f64>),
}

impl Gaussian {
    pub fn isotropic(mean: Vec<f64>, var: f64) -> Result<Self> {
        let n = mean.len();
        Self::diag(mean, vec![var; n])
    }

    pub fn diag(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), got: var.len() });
        }
        if var.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(invalid("variances must be positive"));
        }
        Ok(Self { mean, precision: Precision::Diag(var.iter().map(|v| 1.0 / v).collect()) })
    }

    /// Dense covariance, row-major.
    pub fn dense(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let n = mean.len();
        check_dim(n * n, cov.len())?;
        let mut l = cov;
        let (_, ok) = cholesky(&mut l, n);
        if !ok {
            return Err(invalid("covariance must be positive definite"));
        }
        Ok(Self { mean, precision: Precision::Dense(cholesky_inverse(&l, n)) })
    }
}

impl LogDensity for Gaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.mean.len();
        match &self.precision {
            Precision::Diag(p) => {
                let mut acc = 0.0;
                for k in 0..n {
                    let d = theta[k] - self.mean[k];
                    acc += p[k] * d * d;
                    grad[k] -= p[k] * d;
                }
                -0.5 * acc
            }
            Precision::Dense(p) => {
                let mut acc = 0.0;
                for i in 0..n {
                    let mut pd = 0.0;
                    for j in 0..n {
                        pd += p[i * n + j] * (theta[j] - self.mean[j]);
                    }
                    acc += (theta[i] - self.mean[i]) * pd;
                    grad[i] -= pd;
                }
                -0.5 * acc
            }
        }
    }
}

/// Multivariate t kernel `(1 + ‖θ − F‖² / (mσ²))^{−(m+p)/2}` with `p = dim`.
#[derive(Debug, Clone)]
pub struct StudentT {
    pub loc: Vec<f64>,
    pub sigma2: f64,
    pub df: f64,
}

impl LogDensity for StudentT {
    fn dim(&self) -> usize {
        self.loc.len()
    }

    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let p = self.loc.len() as f64;
        let ms = self.df * self.sigma2;
        let q: f64 = theta.iter().zip(&self.loc).map(|(t, f)| (t - f) * (t - f)).sum();
        let base = 1.0 + q / ms;
        let c = -(self.df + p) / (ms * base);
        for k in 0..theta.len() {
            grad[k] += c * (theta[k] - self.loc[k]);
        }
        -0.5 * (self.df + p) * libm::log(base)
    }
}

/// `n` i.i.d. `N(θ, 1)` observations summarized by their mean `ȳ`.
#[derive(Debug, Clone)]
pub struct GaussianMeanLikelihood {
    pub ybar: f64,
    pub n: f64,
}

impl LogDensity for GaussianMeanLikelihood {
    fn dim(&self) -> usize {
        1
    }

    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let d = theta[0] - self.ybar;
        grad[0] -= self.n * d;
        -0.5 * self.n * d * d
    }
}

/// Dirichlet kernel `Σ (α_i − 1) log θ_i`.
#[derive(Debug, Clone)]
pub struct DirichletKernel {
    pub alpha: Vec<f64>,
}

impl LogDensity for DirichletKernel {
    fn dim(&self) -> usize {
        self.alpha.len()
    }

    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let mut acc = 0.0;
        for (k, a) in self.alpha.iter().enumerate() {
            let c = a - 1.0;
            if c != 0.0 {
                acc += c * libm::log(theta[k]);
                grad[k] += c / theta[k];
            }
        }
        acc
    }
}

/// Per-constraint `λ_j`, or one shared `λ`.
fn check_lambdas(lambdas: &[f64], s: usize) -> Result<()> {
    if lambdas.is_empty() || (lambdas.len() != 1 && lambdas.len() != s) {
        return Err(invalid("lambdas must have length 1 or s"));
    }
    if lambdas.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(invalid("lambdas must be positive and finite"));
    }
    Ok(())
}

/// Axis-aligned support `[lo, hi]`; infinite bounds allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SupportBox {
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self { lo: vec![lo; dim], hi: vec![hi; dim] }
    }

    #[inline]
    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.iter().zip(self.lo.iter().zip(&self.hi)).all(|(t, (l, h))| *t >= *l && *t <= *h)
    }
}

/// An unnormalized relaxed posterior.
#[derive(Clone)]
pub struct RelaxedTarget {
    dim: usize,
    likelihood: Arc<dyn LogDensity>,
    prior: Arc<dyn LogDensity>,
    constraints: Option<ConstraintSet>,
    lambdas: Vec<f64>,
    inv_lambdas: Vec<f64>,
    jacobian_factor: bool,
    support: Option<SupportBox>,
    initial: Vec<f64>,
}

impl fmt::Debug for RelaxedTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RelaxedTarget")
            .field("dim", &self.dim)
            .field("constraints", &self.constraints)
            .field("lambdas", &self.lambdas)
            .field("jacobian_factor", &self.jacobian_factor)
            .field("support", &self.support)
            .finish()
    }
}

impl RelaxedTarget {
    pub fn new(
        likelihood: Arc<dyn LogDensity>,
        prior: Arc<dyn LogDensity>,
        constraints: Option<ConstraintSet>,
        lambdas: Vec<f64>,
    ) -> Result<Self> {
        let dim = prior.dim();
        check_dim(dim, likelihood.dim())?;
        if dim == 0 {
            return Err(invalid("target dimension must be positive"));
        }
        if let Some(c) = &constraints {
            check_dim(dim, c.dim())?;
            check_lambdas(&lambdas, c.len())?;
        }
        let inv_lambdas = lambdas.iter().map(|l| 1.0 / l).collect();
        Ok(Self {
            dim,
            likelihood,
            prior,
            constraints,
            lambdas,
            inv_lambdas,
            jacobian_factor: false,
            support: None,
            initial: vec![0.0; dim],
        })
    }

    /// Base density only, no constraints.
    pub fn unconstrained(prior: Arc<dyn LogDensity>) -> Result<Self> {
        let dim = prior.dim();
        Self::new(Arc::new(Flat { dim }), prior, None, vec![1.0])
    }

    pub fn with_jacobian_factor(mut self, on: bool) -> Result<Self> {
        if on && self.constraints.as_ref().map(|c| c.kind()) != Some(SetKind::MeasureZero) {
            return Err(invalid("jacobian factor requires a measure-zero constraint set"));
        }
        self.jacobian_factor = on;
        Ok(self)
    }

    pub fn with_support(mut self, support: SupportBox) -> Result<Self> {
        check_dim(self.dim, support.lo.len())?;
        check_dim(self.dim, support.hi.len())?;
        if support.lo.iter().zip(&support.hi).any(|(l, h)| !(l < h)) {
            return Err(invalid("support box needs lo < hi"));
        }
        self.support = Some(support);
        Ok(self)
    }

    pub fn with_initial(mut self, initial: Vec<f64>) -> Result<Self> {
        check_dim(self.dim, initial.len())?;
        self.initial = initial;
        Ok(self)
    }

    pub fn with_lambdas(mut self, lambdas: Vec<f64>) -> Result<Self> {
        let s = self.constraints.as_ref().map_or(1, |c| c.len());
        check_lambdas(&lambdas, s)?;
        self.inv_lambdas = lambdas.iter().map(|l| 1.0 / l).collect();
        self.lambdas = lambdas;
        Ok(self)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        let c = self.constraints.take().ok_or_else(|| invalid("target has no constraints"))?;
        self.constraints = Some(c.with_weights(weights)?);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraints(&self) -> Option<&ConstraintSet> {
        self.constraints.as_ref()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn jacobian_factor(&self) -> bool {
        self.jacobian_factor
    }

    pub fn support(&self) -> Option<&SupportBox> {
        self.support.as_ref()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn likelihood(&self) -> &dyn LogDensity {
        &*self.likelihood
    }

    pub fn prior(&self) -> &dyn LogDensity {
        &*self.prior
    }

    #[inline]
    pub fn in_support(&self, theta: &[f64]) -> bool {
        self.support.as_ref().is_none_or(|b| b.contains(theta))
    }

    /// Constraint distance `‖ν_D(θ)‖` (0 without constraints).
    pub fn distance(&self, theta: &[f64]) -> f64 {
        self.constraints.as_ref().map_or(0.0, |c| c.distance_unchecked(theta))
    }

    /// Log of the relaxation factor, `−Σ_j w_j |ν_j(θ)| / λ_j`.
    pub fn log_relaxation(&self, theta: &[f64]) -> f64 {
        let mut scratch = vec![0.0; self.dim];
        match &self.constraints {
            Some(c) => -c.penalty_and_grad(theta, &self.inv_lambdas, 0.0, &mut scratch),
            None => 0.0,
        }
    }

    pub fn log_relaxed_density(&self, theta: &[f64]) -> Result<f64> {
        let mut g = vec![0.0; self.dim];
        self.value_and_grad(theta, &mut g)
    }

    pub fn grad_log_relaxed_density(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.dim];
        self.value_and_grad(theta, &mut g)?;
        Ok(g)
    }

    /// Log density; overwrites `grad` with its gradient.
    pub fn value_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_dim(self.dim, theta.len())?;
        check_dim(self.dim, grad.len())?;
        if !self.in_support(theta) {
            return Err(Error::OutOfSupport);
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut lp = self.likelihood.log_density_and_grad(theta, grad);
        lp += self.prior.log_density_and_grad(theta, grad);
        if let Some(c) = &self.constraints {
            lp -= c.penalty_and_grad(theta, &self.inv_lambdas, -1.0, grad);
            if self.jacobian_factor {
                lp += c.log_jacobian_and_grad(theta, 1.0, grad)?;
            }
        }
        if !lp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite log density or gradient".into()));
        }
        Ok(lp)
    }
}

/// Parent model families with their parameters.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    /// Posterior for a Gaussian mean from `n` unit-variance observations with
    /// mean `ybar`, prior `N(0, prior_var)`, relaxed toward `θ < upper`.
    GaussianInequality { ybar: f64, n: f64, prior_var: f64, upper: f64 },
    /// `N(F, σ²I)` relaxed toward the unit sphere.
    SphereGaussian { f: Vec<f64>, sigma2: f64, box_half_width: f64 },
    /// `t_m(F, σ²I)` relaxed toward the unit sphere.
    SphereT { f: Vec<f64>, sigma2: f64, df: f64, box_half_width: f64 },
    /// Uniform on the torus via `J · exp(−|ν|/λ)`.
    TorusUniform { box_half_width: f64 },
    /// Dirichlet kernel on `[0,1]^r` relaxed toward the simplex.
    SimplexToy { alpha: Vec<f64> },
    /// Latent factor network with a Stiefel-relaxed loading matrix.
    FactorNetwork {
        data: Arc<NetworkData>,
        d: usize,
        sigma2_mu: f64,
        sigma2_s: f64,
        u_prior: UPrior,
        box_half_width: f64,
    },
}

impl ModelSpec {
    pub fn gaussian_inequality(ybar: f64, n: f64) -> Self {
        ModelSpec::GaussianInequality { ybar, n, prior_var: 1000.0, upper: 1.0 }
    }

    pub fn sphere_gaussian(f: Vec<f64>, sigma2: f64) -> Self {
        ModelSpec::SphereGaussian { f, sigma2, box_half_width: DEFAULT_SPHERE_BOX }
    }

    pub fn sphere_t(f: Vec<f64>, sigma2: f64, df: f64) -> Self {
        ModelSpec::SphereT { f, sigma2, df, box_half_width: DEFAULT_SPHERE_BOX }
    }

    pub fn torus() -> Self {
        ModelSpec::TorusUniform { box_half_width: DEFAULT_TORUS_BOX }
    }

    pub fn factor_network(data: Arc<NetworkData>, d: usize) -> Self {
        ModelSpec::FactorNetwork {
            data,
            d,
            sigma2_mu: 1.0,
            sigma2_s: 1.0,
            u_prior: UPrior::Laplace { scale: 1.0 },
            box_half_width: DEFAULT_SPHERE_BOX,
        }
    }

    /// Posterior moments `(μ, σ²)` of the unconstrained Gaussian-mean model.
    pub fn gaussian_posterior(ybar: f64, n: f64, prior_var: f64) -> (f64, f64) {
        let prec = 1.0 / prior_var + n;
        (ybar * n / prec, 1.0 / prec)
    }
}

/// Half-width of the ambient box for sphere and Stiefel models.
pub const DEFAULT_SPHERE_BOX: f64 = 1.5;
/// Half-width of the ambient box for the torus.
pub const DEFAULT_TORUS_BOX: f64 = 2.0;

fn positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(what))
    }
}

fn unit_direction(f: &[f64]) -> Result<Vec<f64>> {
    let n = crate::linalg::norm2(f);
    if f.is_empty() || !(n > 0.0) || !n.is_finite() {
        return Err(invalid("F must be a nonzero finite vector"));
    }
    Ok(f.iter().map(|x| x / n).collect())
}

/// Assembles the relaxed target for `spec` at relaxation scale(s) `lambdas`.
pub fn make_model(spec: &ModelSpec, lambdas: &[f64]) -> Result<RelaxedTarget> {
    match spec {
        ModelSpec::GaussianInequality { ybar, n, prior_var, upper } => {
            positive(*prior_var, "prior variance must be positive")?;
            if !(*n >= 0.0) || !ybar.is_finite() || !upper.is_finite() {
                return Err(invalid("gaussian-inequality needs n >= 0 and finite ybar, upper"));
            }
            let set = catalog(&Catalog::HalfSpace { normal: vec![1.0], offset: *upper, norm: Norm::L2 })?;
            let (mu, _) = ModelSpec::gaussian_posterior(*ybar, *n, *prior_var);
            let start = if mu < *upper { mu } else { upper - 0.01 };
            RelaxedTarget::new(
                Arc::new(GaussianMeanLikelihood { ybar: *ybar, n: *n }),
                Arc::new(Gaussian::isotropic(vec![0.0], *prior_var)?),
                Some(set),
                lambdas.to_vec(),
            )?
            .with_initial(vec![start])
        }
        ModelSpec::SphereGaussian { f, sigma2, box_half_width } => {
            positive(*sigma2, "sigma2 must be positive")?;
            positive(*box_half_width - 1.0, "sphere box half-width must exceed 1")?;
            let r = f.len();
            let u = unit_direction(f)?;
            RelaxedTarget::new(
                Arc::new(Flat { dim: r }),
                Arc::new(Gaussian::isotropic(f.clone(), *sigma2)?),
                Some(catalog(&Catalog::Sphere { r })?),
                lambdas.to_vec(),
            )?
            .with_support(SupportBox::cube(r, -box_half_width, *box_half_width))?
            .with_initial(u)
        }
        ModelSpec::SphereT { f, sigma2, df, box_half_width } => {
            positive(*sigma2, "sigma2 must be positive")?;
            positive(*df, "degrees of freedom must be positive")?;
            positive(*box_half_width - 1.0, "sphere box half-width must exceed 1")?;
            let r = f.len();
            let u = unit_direction(f)?;
            RelaxedTarget::new(
                Arc::new(Flat { dim: r }),
                Arc::new(StudentT { loc: f.clone(), sigma2: *sigma2, df: *df }),
                Some(catalog(&Catalog::Sphere { r })?),
                lambdas.to_vec(),
            )?
            .with_support(SupportBox::cube(r, -box_half_width, *box_half_width))?
            .with_initial(u)
        }
        ModelSpec::TorusUniform { box_half_width } => {
            positive(*box_half_width - 1.5, "torus box half-width must exceed 1.5")?;
            RelaxedTarget::new(
                Arc::new(Flat { dim: 3 }),
                Arc::new(Flat { dim: 3 }),
                Some(catalog(&Catalog::Torus)?),
                lambdas.to_vec(),
            )?
            .with_jacobian_factor(true)?
            .with_support(SupportBox::cube(3, -box_half_width, *box_half_width))?
            .with_initial(vec![1.5, 0.0, 0.0])
        }
        ModelSpec::SimplexToy { alpha } => {
            if alpha.len() < 2 || alpha.iter().any(|a| !(*a >= 1.0) || !a.is_finite()) {
                return Err(invalid("simplex needs r >= 2 and alpha_i >= 1"));
            }
            let r = alpha.len();
            let total: f64 = alpha.iter().sum();
            RelaxedTarget::new(
                Arc::new(Flat { dim: r }),
                Arc::new(DirichletKernel { alpha: alpha.clone() }),
                Some(catalog(&Catalog::Simplex { r })?),
                lambdas.to_vec(),
            )?
            .with_support(SupportBox::cube(r, 0.0, 1.0))?
            .with_initial(alpha.iter().map(|a| a / total).collect())
        }
        ModelSpec::FactorNetwork { data, d, sigma2_mu, sigma2_s, u_prior, box_half_width } => {
            positive(*sigma2_mu, "sigma2_mu must be positive")?;
            positive(*sigma2_s, "sigma2_s must be positive")?;
            positive(*box_half_width - 1.0, "Stiefel box half-width must exceed 1")?;
            if let UPrior::Laplace { scale } = u_prior {
                positive(*scale, "Laplace scale must be positive")?;
            }
            data.validate()?;
            let lik = FactorNetworkLikelihood::new(data.clone(), *d)?;
            let layout = lik.layout();
            let prior = FactorNetworkPrior { layout, sigma2_mu: *sigma2_mu, sigma2_s: *sigma2_s, u_prior: *u_prior };
            let dim = layout.dim();
            let set = stiefel_block(dim, layout.u_offset(), layout.r, layout.d)?;
            let mut lo = vec![f64::NEG_INFINITY; dim];
            let mut hi = vec![f64::INFINITY; dim];
            for k in layout.u_offset()..dim {
                lo[k] = -box_half_width;
                hi[k] = *box_half_width;
            }
            let mut init = vec![0.0; dim];
            init[layout.u_offset()..].copy_from_slice(&initial_stiefel(layout.r, layout.d));
            RelaxedTarget::new(Arc::new(lik), Arc::new(prior), Some(set), lambdas.to_vec())?
                .with_support(SupportBox { lo, hi })?
                .with_initial(init)
        }
    }
}

/// Deterministic orthonormal `n × k` start (column-major), Gram–Schmidt of a
/// fixed dense matrix.
pub fn initial_stiefel(n: usize, k: usize) -> Vec<f64> {
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|j| (0..n).map(|i| libm::cos((1 + i) as f64 * (0.7 + j as f64)) + if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    gram_schmidt(&cols, 1e-12).expect("fixed start matrix has full rank").concat()
}
