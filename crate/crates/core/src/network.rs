//! Latent factor model for a collection of brain networks:
//! `logit π_ikl = μ_kl + Σ_s v_is u_ks u_ls` over region pairs `k < l`.
//!
//! Parameters are packed as `θ = [μ (pairs), v (n × d, row-major),
//! U (R × d, column-major)]`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::linalg::gram_schmidt;
use crate::targets::LogDensity;

/// Observed adjacency tensor: `adjacency[i][k][l] ∈ {0,1}`, symmetric in `k, l`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkData {
    pub n: usize,
    #[cfg_attr(feature = "serde", serde(rename = "R"))]
    pub r: usize,
    pub d_true: usize,
    pub adjacency: Vec<Vec<Vec<u8>>>,
    pub seed: u64,
}

impl NetworkData {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.r < 2 {
            return Err(invalid("network needs n >= 1 and R >= 2"));
        }
        if self.adjacency.len() != self.n {
            return Err(invalid("adjacency must have n subjects"));
        }
        for a in &self.adjacency {
            if a.len() != self.r || a.iter().any(|row| row.len() != self.r) {
                return Err(invalid("adjacency matrices must be R x R"));
            }
            for k in 0..self.r {
                for l in 0..self.r {
                    if a[k][l] > 1 || a[k][l] != a[l][k] {
                        return Err(invalid("adjacency must be symmetric 0/1"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Edge indicators over `(i, k<l)` in pair order.
    pub fn edges(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.n * pairs(self.r));
        for a in &self.adjacency {
            for k in 0..self.r {
                for l in (k + 1)..self.r {
                    out.push(a[k][l]);
                }
            }
        }
        out
    }
}

#[inline]
pub fn pairs(r: usize) -> usize {
    r * (r - 1) / 2
}

/// Ground-truth parameters used to generate synthetic data.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTruth {
    pub mu: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
}

/// Draws `U` uniformly on the Stiefel manifold (Gram–Schmidt of a Gaussian
/// matrix), `v, μ` from their normal priors, then Bernoulli edges.
pub fn generate(n: usize, r: usize, d: usize, sigma2_mu: f64, sigma2_s: f64, seed: u64) -> Result<(NetworkData, NetworkTruth)> {
    if n == 0 || r < 2 || d == 0 || d > r {
        return Err(invalid("generator needs n >= 1, R >= 2, 1 <= d <= R"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let cols: Vec<Vec<f64>> = (0..d).map(|_| (0..r).map(|_| normal(&mut rng)).collect()).collect();
    let u = gram_schmidt(&cols, 1e-10).ok_or_else(|| invalid("degenerate Gaussian draw"))?.concat();
    let v: Vec<f64> = (0..n * d).map(|_| libm::sqrt(sigma2_s) * normal(&mut rng)).collect();
    let mu: Vec<f64> = (0..pairs(r)).map(|_| libm::sqrt(sigma2_mu) * normal(&mut rng)).collect();
    let mut adjacency = vec![vec![vec![0u8; r]; r]; n];
    for i in 0..n {
        let mut p = 0;
        for k in 0..r {
            for l in (k + 1)..r {
                let mut eta = mu[p];
                for s in 0..d {
                    eta += v[i * d + s] * u[s * r + k] * u[s * r + l];
                }
                let prob = 1.0 / (1.0 + libm::exp(-eta));
                let e = u8::from(rng.random::<f64>() < prob);
                adjacency[i][k][l] = e;
                adjacency[i][l][k] = e;
                p += 1;
            }
        }
    }
    Ok((NetworkData { n, r, d_true: d, adjacency, seed }, NetworkTruth { mu, v, u }))
}

/// Index layout of the packed parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub r: usize,
    pub d: usize,
}

impl Layout {
    pub fn n_pairs(&self) -> usize {
        pairs(self.r)
    }

    pub fn v_offset(&self) -> usize {
        self.n_pairs()
    }

    pub fn u_offset(&self) -> usize {
        self.n_pairs() + self.n * self.d
    }

    pub fn dim(&self) -> usize {
        self.u_offset() + self.r * self.d
    }
}

/// Bernoulli-logit likelihood over all subjects and pairs `k < l`.
#[derive(Debug, Clone)]
pub struct FactorNetworkLikelihood {
    layout: Layout,
    edges: Vec<u8>,
    pair_index: Vec<(usize, usize)>,
    _data: Arc<NetworkData>,
}

impl FactorNetworkLikelihood {
    pub fn new(data: Arc<NetworkData>, d: usize) -> Result<Self> {
        data.validate()?;
        if d == 0 || d > data.r {
            return Err(invalid("factor count d must satisfy 1 <= d <= R"));
        }
        let layout = Layout { n: data.n, r: data.r, d };
        let mut pair_index = Vec::with_capacity(layout.n_pairs());
        for k in 0..data.r {
            for l in (k + 1)..data.r {
                pair_index.push((k, l));
            }
        }
        Ok(Self { layout, edges: data.edges(), pair_index, _data: data })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// Linear predictor `η_ikl` for every subject and pair.
    pub fn linear_predictor(&self, theta: &[f64]) -> Vec<f64> {
        let Layout { n, r, d } = self.layout;
        let (vo, uo) = (self.layout.v_offset(), self.layout.u_offset());
        let mut out = Vec::with_capacity(n * self.pair_index.len());
        for i in 0..n {
            for (p, &(k, l)) in self.pair_index.iter().enumerate() {
                let mut eta = theta[p];
                for s in 0..d {
                    eta += theta[vo + i * d + s] * theta[uo + s * r + k] * theta[uo + s * r + l];
                }
                out.push(eta);
            }
        }
        out
    }

    /// Edge probabilities `π_ikl`, in the order of [`NetworkData::edges`].
    pub fn edge_probabilities(&self, theta: &[f64]) -> Vec<f64> {
        self.linear_predictor(theta).into_iter().map(|e| 1.0 / (1.0 + libm::exp(-e))).collect()
    }
}

impl LogDensity for FactorNetworkLikelihood {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let Layout { n, r, d } = self.layout;
        let (vo, uo) = (self.layout.v_offset(), self.layout.u_offset());
        let np = self.pair_index.len();
        let mut ll = 0.0;
        for i in 0..n {
            let vi = &theta[vo + i * d..vo + (i + 1) * d];
            for (p, &(k, l)) in self.pair_index.iter().enumerate() {
                let mut eta = theta[p];
                for s in 0..d {
                    eta += vi[s] * theta[uo + s * r + k] * theta[uo + s * r + l];
                }
                let a = f64::from(self.edges[i * np + p]);
                // softplus(η) and σ(η) from one exp(−|η|)
                let e = libm::exp(-libm::fabs(eta));
                let (sp, sig) = if eta >= 0.0 { (eta + libm::log1p(e), 1.0 / (1.0 + e)) } else { (libm::log1p(e), e / (1.0 + e)) };
                ll += a * eta - sp;
                let resid = a - sig;
                grad[p] += resid;
                for s in 0..d {
                    let (uk, ul) = (theta[uo + s * r + k], theta[uo + s * r + l]);
                    grad[vo + i * d + s] += resid * uk * ul;
                    grad[uo + s * r + k] += resid * vi[s] * ul;
                    grad[uo + s * r + l] += resid * vi[s] * uk;
                }
            }
        }
        ll
    }
}

/// Prior on the loading entries `u_ks`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum UPrior {
    /// Independent `N(0, 1)`.
    Normal,
    /// Independent `Laplace(0, scale)` shrinkage.
    Laplace { scale: f64 },
}

/// `μ_kl ~ N(0, σ²_μ)`, `v_is ~ N(0, σ²_s)`, and the loading prior.
#[derive(Debug, Clone)]
pub struct FactorNetworkPrior {
    pub layout: Layout,
    pub sigma2_mu: f64,
    pub sigma2_s: f64,
    pub u_prior: UPrior,
}

impl LogDensity for FactorNetworkPrior {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let (vo, uo) = (self.layout.v_offset(), self.layout.u_offset());
        let mut lp = 0.0;
        for k in 0..vo {
            lp -= 0.5 * theta[k] * theta[k] / self.sigma2_mu;
            grad[k] -= theta[k] / self.sigma2_mu;
        }
        for k in vo..uo {
            lp -= 0.5 * theta[k] * theta[k] / self.sigma2_s;
            grad[k] -= theta[k] / self.sigma2_s;
        }
        for k in uo..theta.len() {
            match self.u_prior {
                UPrior::Normal => {
                    lp -= 0.5 * theta[k] * theta[k];
                    grad[k] -= theta[k];
                }
                UPrior::Laplace { scale } => {
                    lp -= libm::fabs(theta[k]) / scale;
                    if theta[k] > 0.0 {
                        grad[k] -= 1.0 / scale;
                    } else if theta[k] < 0.0 {
                        grad[k] += 1.0 / scale;
                    }
                }
            }
        }
        lp
    }
}
