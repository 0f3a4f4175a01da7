//! Constraint-relaxed posterior sampling.
//!
//! Sharp constraints `θ ∈ D` are replaced by the kernel `exp(-‖ν_D(θ)‖/λ)`,
//! which yields a proper density on the ambient space that concentrates on `D`
//! as `λ → 0`. The crate provides the constraint catalog, relaxed targets,
//! a fixed-length HMC sampler, exact and quadrature reference oracles, and
//! chain diagnostics. It is `no_std` and only needs `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod constraints;
pub mod diagnostics;
pub mod error;
pub mod hmc;
pub mod linalg;
pub mod network;
pub mod oracles;
pub mod special;
pub mod targets;

pub use constraints::{Catalog, ConstraintFn, ConstraintSet, DirectDistance, Norm, Region};
pub use error::{Error, Result};
pub use hmc::{sample, Chain, HmcConfig};
pub use oracles::{Method, OracleResult};
pub use targets::{make_model, LogDensity, ModelSpec, RelaxedTarget};
