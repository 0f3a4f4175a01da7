//! Constraint functions `ν_j`, the weighted L1 distance, direct distances for
//! positive-measure sets, Jacobians and the built-in catalog.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{cholesky, cholesky_inverse, dot, gram_schmidt, norm2};

/// Smallest admissible Cholesky pivot of the constraint Gram matrix.
pub const JACOBIAN_PIVOT_TOL: f64 = 1e-12;

type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Concrete form of one constraint function.
#[derive(Clone)]
pub enum ConstraintKind {
    /// `coef·θ + offset`.
    Affine { coef: Vec<f64>, offset: f64 },
    /// `‖θ‖² − 1`.
    SquaredNorm,
    /// `θ_i'θ_j − δ_ij` for columns `i, j` of an `n × k` block stored
    /// column-major at `offset`.
    StiefelEntry { offset: usize, n: usize, i: usize, j: usize },
    /// `(1 − (θ1² + θ2²)^{1/2})² + θ3² − 1/4`.
    Torus,
    /// User-supplied function and gradient. The gradient closure overwrites
    /// its output buffer.
    Custom { eval: EvalFn, grad: GradFn },
}

/// One constraint `ν_j : R^r → R`.
#[derive(Clone)]
pub struct ConstraintFn {
    dim_in: usize,
    kind: ConstraintKind,
    label: String,
}

impl fmt::Debug for ConstraintFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintFn")
            .field("dim_in", &self.dim_in)
            .field("label", &self.label)
            .finish()
    }
}

impl ConstraintFn {
    pub fn affine(coef: Vec<f64>, offset: f64, label: &str) -> Self {
        Self { dim_in: coef.len(), kind: ConstraintKind::Affine { coef, offset }, label: label.into() }
    }

    pub fn squared_norm(dim: usize) -> Self {
        Self { dim_in: dim, kind: ConstraintKind::SquaredNorm, label: "sphere".into() }
    }

    pub fn torus() -> Self {
        Self { dim_in: 3, kind: ConstraintKind::Torus, label: "torus".into() }
    }

    pub fn stiefel_entry(dim: usize, offset: usize, n: usize, i: usize, j: usize) -> Self {
        Self {
            dim_in: dim,
            kind: ConstraintKind::StiefelEntry { offset, n, i, j },
            label: format!("stiefel[{},{}]", i + 1, j + 1),
        }
    }

    pub fn custom<E, G>(dim: usize, eval: E, grad: G, label: &str) -> Self
    where
        E: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dim_in: dim,
            kind: ConstraintKind::Custom { eval: Arc::new(eval), grad: Arc::new(grad) },
            label: label.into(),
        }
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> &ConstraintKind {
        &self.kind
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        match &self.kind {
            ConstraintKind::Affine { coef, offset } => dot(coef, theta) + offset,
            ConstraintKind::SquaredNorm => dot(theta, theta) - 1.0,
            ConstraintKind::StiefelEntry { offset, n, i, j } => {
                let a = &theta[offset + i * n..offset + (i + 1) * n];
                let b = &theta[offset + j * n..offset + (j + 1) * n];
                dot(a, b) - if i == j { 1.0 } else { 0.0 }
            }
            ConstraintKind::Torus => {
                let rho = libm::sqrt(theta[0] * theta[0] + theta[1] * theta[1]);
                (1.0 - rho) * (1.0 - rho) + theta[2] * theta[2] - 0.25
            }
            ConstraintKind::Custom { eval, .. } => eval(theta),
        }
    }

    /// Adds `scale · ∇ν(θ)` into `out`.
    pub fn add_grad(&self, theta: &[f64], scale: f64, out: &mut [f64]) {
        match &self.kind {
            ConstraintKind::Affine { coef, .. } => {
                out.iter_mut().zip(coef).for_each(|(o, c)| *o += scale * c);
            }
            ConstraintKind::SquaredNorm => {
                out.iter_mut().zip(theta).for_each(|(o, t)| *o += 2.0 * scale * t);
            }
            ConstraintKind::StiefelEntry { offset, n, i, j } => {
                let (n, i, j, off) = (*n, *i, *j, *offset);
                if i == j {
                    for t in 0..n {
                        out[off + i * n + t] += 2.0 * scale * theta[off + i * n + t];
                    }
                } else {
                    for t in 0..n {
                        out[off + i * n + t] += scale * theta[off + j * n + t];
                        out[off + j * n + t] += scale * theta[off + i * n + t];
                    }
                }
            }
            ConstraintKind::Torus => {
                let rho = libm::sqrt(theta[0] * theta[0] + theta[1] * theta[1]);
                let c = if rho > 0.0 { 2.0 * (1.0 - 1.0 / rho) } else { 0.0 };
                out[0] += scale * c * theta[0];
                out[1] += scale * c * theta[1];
                out[2] += scale * 2.0 * theta[2];
            }
            ConstraintKind::Custom { grad, .. } => {
                let mut g = vec![0.0; self.dim_in];
                grad(theta, &mut g);
                out.iter_mut().zip(&g).for_each(|(o, x)| *o += scale * x);
            }
        }
    }

    pub fn grad(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim_in];
        self.add_grad(theta, 1.0, &mut g);
        g
    }

    /// Adds `scale · ∇²ν(θ) v` into `out`.
    pub fn add_hess_vec(&self, theta: &[f64], v: &[f64], scale: f64, out: &mut [f64]) {
        match &self.kind {
            ConstraintKind::Affine { .. } => {}
            ConstraintKind::SquaredNorm => {
                out.iter_mut().zip(v).for_each(|(o, x)| *o += 2.0 * scale * x);
            }
            ConstraintKind::StiefelEntry { offset, n, i, j } => {
                let (n, i, j, off) = (*n, *i, *j, *offset);
                if i == j {
                    for t in 0..n {
                        out[off + i * n + t] += 2.0 * scale * v[off + i * n + t];
                    }
                } else {
                    for t in 0..n {
                        out[off + i * n + t] += scale * v[off + j * n + t];
                        out[off + j * n + t] += scale * v[off + i * n + t];
                    }
                }
            }
            ConstraintKind::Torus => {
                let (x, y) = (theta[0], theta[1]);
                let rho = libm::sqrt(x * x + y * y);
                if rho > 0.0 {
                    let r3 = rho * rho * rho;
                    let hxx = 2.0 - 2.0 * y * y / r3;
                    let hyy = 2.0 - 2.0 * x * x / r3;
                    let hxy = 2.0 * x * y / r3;
                    out[0] += scale * (hxx * v[0] + hxy * v[1]);
                    out[1] += scale * (hxy * v[0] + hyy * v[1]);
                }
                out[2] += scale * 2.0 * v[2];
            }
            ConstraintKind::Custom { grad, .. } => {
                let h = 1e-6;
                let mut tp: Vec<f64> = theta.iter().zip(v).map(|(t, x)| t + h * x).collect();
                let mut gp = vec![0.0; self.dim_in];
                let mut gm = vec![0.0; self.dim_in];
                grad(&tp, &mut gp);
                tp.iter_mut().zip(theta.iter().zip(v)).for_each(|(a, (t, x))| *a = t - h * x);
                grad(&tp, &mut gm);
                for k in 0..self.dim_in {
                    out[k] += scale * (gp[k] - gm[k]) / (2.0 * h);
                }
            }
        }
    }
}

/// Norm used by a direct distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Norm {
    L1,
    L2,
}

/// Positive-measure regions with a closed-form projection.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// `{θ : a·θ ≤ c}`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// Axis-aligned box `[lo, hi]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

/// `inf_{x∈D} ‖θ − x‖` for a region with a closed-form nearest point.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectDistance {
    pub region: Region,
    pub norm: Norm,
}

impl DirectDistance {
    pub fn dim(&self) -> usize {
        match &self.region {
            Region::HalfSpace { normal, .. } => normal.len(),
            Region::Box { lo, .. } => lo.len(),
        }
    }

    /// Nearest point of `D` under the configured norm.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        match &self.region {
            Region::HalfSpace { normal, offset } => {
                let excess = dot(normal, theta) - offset;
                if excess <= 0.0 {
                    return theta.to_vec();
                }
                match self.norm {
                    Norm::L2 => {
                        let nn = dot(normal, normal);
                        theta.iter().zip(normal).map(|(t, a)| t - excess * a / nn).collect()
                    }
                    Norm::L1 => {
                        let k = argmax_abs(normal);
                        let mut p = theta.to_vec();
                        p[k] -= excess / normal[k];
                        p
                    }
                }
            }
            Region::Box { lo, hi } => {
                theta.iter().zip(lo.iter().zip(hi)).map(|(t, (l, h))| t.clamp(*l, *h)).collect()
            }
        }
    }

    pub fn distance(&self, theta: &[f64]) -> f64 {
        match &self.region {
            Region::HalfSpace { normal, offset } => {
                let excess = dot(normal, theta) - offset;
                if excess <= 0.0 {
                    0.0
                } else {
                    excess / self.dual_norm(normal)
                }
            }
            Region::Box { lo, hi } => {
                let mut acc = 0.0;
                for (t, (l, h)) in theta.iter().zip(lo.iter().zip(hi)) {
                    let e = if t < l { l - t } else if t > h { t - h } else { 0.0 };
                    acc += match self.norm {
                        Norm::L1 => e,
                        Norm::L2 => e * e,
                    };
                }
                match self.norm {
                    Norm::L1 => acc,
                    Norm::L2 => libm::sqrt(acc),
                }
            }
        }
    }

    /// Adds `scale · ∇distance(θ)` into `out` (zero inside `D`).
    pub fn add_grad(&self, theta: &[f64], scale: f64, out: &mut [f64]) {
        match &self.region {
            Region::HalfSpace { normal, offset } => {
                if dot(normal, theta) - offset > 0.0 {
                    let d = self.dual_norm(normal);
                    out.iter_mut().zip(normal).for_each(|(o, a)| *o += scale * a / d);
                }
            }
            Region::Box { lo, hi } => match self.norm {
                Norm::L1 => {
                    for (k, t) in theta.iter().enumerate() {
                        if *t < lo[k] {
                            out[k] -= scale;
                        } else if *t > hi[k] {
                            out[k] += scale;
                        }
                    }
                }
                Norm::L2 => {
                    let d = self.distance(theta);
                    if d > 0.0 {
                        let p = self.project(theta);
                        for k in 0..theta.len() {
                            out[k] += scale * (theta[k] - p[k]) / d;
                        }
                    }
                }
            },
        }
    }

    fn dual_norm(&self, a: &[f64]) -> f64 {
        match self.norm {
            Norm::L2 => norm2(a),
            Norm::L1 => libm::fabs(a[argmax_abs(a)]),
        }
    }
}

fn argmax_abs(a: &[f64]) -> usize {
    let mut k = 0;
    for i in 1..a.len() {
        if libm::fabs(a[i]) > libm::fabs(a[k]) {
            k = i;
        }
    }
    k
}

/// Whether `D` has Lebesgue measure zero or positive measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    MeasureZero,
    PositiveMeasure,
}

/// The map `ν_D` with per-constraint weights, or a direct distance.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    dim: usize,
    constraints: Vec<ConstraintFn>,
    weights: Vec<f64>,
    direct: Option<DirectDistance>,
}

impl ConstraintSet {
    pub fn measure_zero(constraints: Vec<ConstraintFn>) -> Result<Self> {
        let first = constraints.first().ok_or_else(|| invalid("constraint set needs s >= 1"))?;
        let dim = first.dim_in();
        if constraints.iter().any(|c| c.dim_in() != dim) {
            return Err(invalid("all constraints must share dim_in"));
        }
        let weights = vec![1.0; constraints.len()];
        Ok(Self { dim, constraints, weights, direct: None })
    }

    pub fn positive_measure(direct: DirectDistance) -> Result<Self> {
        let dim = direct.dim();
        if dim == 0 {
            return Err(invalid("direct distance needs dim >= 1"));
        }
        if let Region::HalfSpace { normal, .. } = &direct.region {
            if normal.iter().all(|a| *a == 0.0) {
                return Err(invalid("half-space normal must be nonzero"));
            }
        }
        if let Region::Box { lo, hi } = &direct.region {
            if lo.len() != hi.len() || lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                return Err(invalid("box bounds must satisfy lo <= hi"));
            }
        }
        Ok(Self { dim, constraints: Vec::new(), weights: vec![1.0], direct: Some(direct) })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.weights.len() {
            return Err(Error::DimensionMismatch { expected: self.weights.len(), got: weights.len() });
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(invalid("weights must be positive and finite"));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of relaxation terms `s` (1 for a direct distance).
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn kind(&self) -> SetKind {
        if self.direct.is_some() {
            SetKind::PositiveMeasure
        } else {
            SetKind::MeasureZero
        }
    }

    pub fn constraints(&self) -> &[ConstraintFn] {
        &self.constraints
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn direct(&self) -> Option<&DirectDistance> {
        self.direct.as_ref()
    }

    /// `[ν_1(θ), …, ν_s(θ)]`; for a direct distance, the single distance.
    pub fn eval_constraints(&self, theta: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, theta.len())?;
        Ok(match &self.direct {
            Some(d) => vec![d.distance(theta)],
            None => self.constraints.iter().map(|c| c.eval(theta)).collect(),
        })
    }

    pub fn distance(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.dim, theta.len())?;
        Ok(self.distance_unchecked(theta))
    }

    pub(crate) fn distance_unchecked(&self, theta: &[f64]) -> f64 {
        match &self.direct {
            Some(d) => self.weights[0] * d.distance(theta),
            None => self
                .constraints
                .iter()
                .zip(&self.weights)
                .map(|(c, w)| w * libm::fabs(c.eval(theta)))
                .sum(),
        }
    }

    /// `Σ_j w_j |ν_j(θ)| · inv_lambda_j`, adding `scale` times its gradient
    /// into `grad` with the subgradient 0 at `ν_j = 0`.
    pub fn penalty_and_grad(&self, theta: &[f64], inv_lambda: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let il = |j: usize| if inv_lambda.len() == 1 { inv_lambda[0] } else { inv_lambda[j] };
        match &self.direct {
            Some(d) => {
                let c = self.weights[0] * il(0);
                d.add_grad(theta, scale * c, grad);
                c * d.distance(theta)
            }
            None => {
                let mut p = 0.0;
                for (j, (c, w)) in self.constraints.iter().zip(&self.weights).enumerate() {
                    let v = c.eval(theta);
                    let cw = w * il(j);
                    p += cw * libm::fabs(v);
                    let sgn = if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    if sgn != 0.0 {
                        c.add_grad(theta, scale * cw * sgn, grad);
                    }
                }
                p
            }
        }
    }

    /// `[(Dν)(Dν)ᵀ]^{1/2}` determinant via Cholesky of the Gram matrix.
    pub fn jacobian(&self, theta: &[f64]) -> Result<f64> {
        Ok(libm::exp(self.log_jacobian(theta)?))
    }

    pub fn log_jacobian(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.dim, theta.len())?;
        let (_, l) = self.gram_factor(theta)?;
        let s = self.constraints.len();
        Ok((0..s).map(|i| libm::log(l[i * s + i])).sum())
    }

    /// `log J(θ)` and adds `scale · ∇ log J(θ)` into `grad`.
    pub fn log_jacobian_and_grad(&self, theta: &[f64], scale: f64, grad: &mut [f64]) -> Result<f64> {
        let s = self.constraints.len();
        let r = self.dim;
        if s == 1 && self.direct.is_none() {
            // J = ‖∇ν‖, ∇ log J = ∇²ν ∇ν / ‖∇ν‖²
            let mut row = [0.0; 8];
            let mut heap = Vec::new();
            let row: &mut [f64] = if r <= 8 {
                &mut row[..r]
            } else {
                heap.resize(r, 0.0);
                &mut heap
            };
            let c = &self.constraints[0];
            c.add_grad(theta, 1.0, row);
            let g2 = dot(row, row);
            if !(g2 >= JACOBIAN_PIVOT_TOL) {
                return Err(Error::DegenerateJacobian { pivot: g2 });
            }
            c.add_hess_vec(theta, row, scale / g2, grad);
            return Ok(0.5 * libm::log(g2));
        }
        let (rows, l) = self.gram_factor(theta)?;
        let lj = (0..s).map(|i| libm::log(l[i * s + i])).sum();
        let ginv = cholesky_inverse(&l, s);
        // ∂ log J / ∂θ = Σ_ij (G⁻¹)_ij ∇²ν_i ∇ν_j
        for i in 0..s {
            for j in 0..s {
                let c = ginv[i * s + j];
                if c != 0.0 {
                    self.constraints[i].add_hess_vec(theta, &rows[j * r..(j + 1) * r], scale * c, grad);
                }
            }
        }
        Ok(lj)
    }

    fn gram_factor(&self, theta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.direct.is_some() {
            return Err(invalid("jacobian requires a measure-zero constraint set"));
        }
        let s = self.constraints.len();
        let r = self.dim;
        let mut rows = vec![0.0; s * r];
        for (j, c) in self.constraints.iter().enumerate() {
            c.add_grad(theta, 1.0, &mut rows[j * r..(j + 1) * r]);
        }
        let mut g = vec![0.0; s * s];
        for i in 0..s {
            for j in 0..=i {
                let v = dot(&rows[i * r..(i + 1) * r], &rows[j * r..(j + 1) * r]);
                g[i * s + j] = v;
                g[j * s + i] = v;
            }
        }
        let (pivot, ok) = cholesky(&mut g, s);
        if !ok || pivot < JACOBIAN_PIVOT_TOL {
            return Err(Error::DegenerateJacobian { pivot });
        }
        Ok((rows, g))
    }

    /// Whether `θ` lies in the d-expansion `{distance ≤ d}`.
    pub fn d_expansion_contains(&self, theta: &[f64], d: f64) -> Result<bool> {
        if !(d >= 0.0) {
            return Err(invalid("d must be nonnegative"));
        }
        Ok(self.distance(theta)? <= d)
    }
}

/// Built-in constrained spaces.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", rename_all = "kebab-case"))]
pub enum Catalog {
    Simplex { r: usize },
    /// The line `point + span{u}`. Supply a basis of `span{u}^⊥` (orthonormalized
    /// internally), a direction `u` (basis derived), or both (checked).
    Line { basis: Vec<Vec<f64>>, direction: Option<Vec<f64>>, point: Option<Vec<f64>> },
    Sphere { r: usize },
    Stiefel { n: usize, k: usize },
    Torus,
    HalfSpace { normal: Vec<f64>, offset: f64, norm: Norm },
}

/// Rank tolerance for the line basis.
pub const LINE_RANK_TOL: f64 = 1e-12;

pub fn catalog(name: &Catalog) -> Result<ConstraintSet> {
    match name {
        Catalog::Simplex { r } => {
            if *r == 0 {
                return Err(invalid("simplex needs r >= 1"));
            }
            ConstraintSet::measure_zero(vec![ConstraintFn::affine(vec![1.0; *r], -1.0, "simplex")])
        }
        Catalog::Line { basis, direction, point } => line(basis, direction.as_deref(), point.as_deref()),
        Catalog::Sphere { r } => {
            if *r == 0 {
                return Err(invalid("sphere needs r >= 1"));
            }
            ConstraintSet::measure_zero(vec![ConstraintFn::squared_norm(*r)])
        }
        Catalog::Stiefel { n, k } => stiefel_block(n * k, 0, *n, *k),
        Catalog::Torus => ConstraintSet::measure_zero(vec![ConstraintFn::torus()]),
        Catalog::HalfSpace { normal, offset, norm } => ConstraintSet::positive_measure(DirectDistance {
            region: Region::HalfSpace { normal: normal.clone(), offset: *offset },
            norm: *norm,
        }),
    }
}

/// Stiefel constraints on an `n × k` column-major block at `offset` inside a
/// parameter vector of length `dim`, ordered lexicographically over `i ≤ j`.
pub fn stiefel_block(dim: usize, offset: usize, n: usize, k: usize) -> Result<ConstraintSet> {
    if n == 0 || k == 0 || k > n {
        return Err(invalid("stiefel needs 1 <= k <= n"));
    }
    if offset + n * k > dim {
        return Err(invalid("stiefel block exceeds parameter dimension"));
    }
    let mut cs = Vec::with_capacity(k * (k + 1) / 2);
    for i in 0..k {
        for j in i..k {
            cs.push(ConstraintFn::stiefel_entry(dim, offset, n, i, j));
        }
    }
    ConstraintSet::measure_zero(cs)
}

fn line(basis: &[Vec<f64>], direction: Option<&[f64]>, point: Option<&[f64]>) -> Result<ConstraintSet> {
    let r = match (basis.first(), direction) {
        (Some(b), _) => b.len(),
        (None, Some(u)) => u.len(),
        (None, None) => return Err(invalid("line needs a basis or a direction")),
    };
    if r < 2 {
        return Err(invalid("line needs ambient dimension >= 2"));
    }
    if basis.iter().any(|b| b.len() != r) || direction.is_some_and(|u| u.len() != r) {
        return Err(invalid("line basis vectors must share the ambient dimension"));
    }
    if let Some(u) = direction {
        if !(norm2(u) > LINE_RANK_TOL) {
            return Err(invalid("line direction must be nonzero"));
        }
    }
    let ortho = if basis.is_empty() {
        let u = direction.unwrap_or_default();
        let mut cand: Vec<Vec<f64>> = vec![u.to_vec()];
        for e in 0..r {
            let mut v = vec![0.0; r];
            v[e] = 1.0;
            cand.push(v);
        }
        let mut acc: Vec<Vec<f64>> = Vec::new();
        for v in cand {
            let mut trial = acc.clone();
            trial.push(v);
            if let Some(q) = gram_schmidt(&trial, 1e-8) {
                acc = q;
            }
            if acc.len() == r {
                break;
            }
        }
        acc.split_off(1)
    } else {
        if basis.len() != r - 1 {
            return Err(invalid("line basis must have r - 1 vectors"));
        }
        let q = gram_schmidt(basis, LINE_RANK_TOL)
            .ok_or_else(|| invalid("line basis is rank deficient"))?;
        if let Some(u) = direction {
            let nu = norm2(u);
            if q.iter().any(|b| libm::fabs(dot(b, u)) > 1e-9 * nu) {
                return Err(invalid("line basis does not span the orthogonal complement of u"));
            }
        }
        q
    };
    let p = match point {
        Some(p) if p.len() != r => return Err(invalid("line point has wrong dimension")),
        Some(p) => p.to_vec(),
        None => vec![0.0; r],
    };
    let cs = ortho
        .into_iter()
        .enumerate()
        .map(|(j, b)| {
            let off = -dot(&b, &p);
            ConstraintFn::affine(b, off, &format!("line[{}]", j + 1))
        })
        .collect();
    ConstraintSet::measure_zero(cs)
}
