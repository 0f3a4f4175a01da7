//! Special functions and log-domain accumulation.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn std_normal_pdf(z: f64) -> f64 {
    libm::exp(-0.5 * z * z - LN_SQRT_2PI)
}

#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Mills ratio `(1 - Φ(x)) / φ(x)` for `x ≥ 0`.
pub fn mills_ratio(x: f64) -> f64 {
    if x < 5.0 {
        return (1.0 - std_normal_cdf(x)) / std_normal_pdf(x);
    }
    let mut r = x;
    for k in (1..=200).rev() {
        r = x + k as f64 / r;
    }
    1.0 / r
}

/// `φ(z) / Φ(z)`, stable for very negative `z`.
pub fn inverse_mills_lower(z: f64) -> f64 {
    if z > -5.0 {
        std_normal_pdf(z) / std_normal_cdf(z)
    } else {
        1.0 / mills_ratio(-z)
    }
}

/// `I_{ν+1}(x) / I_ν(x)` by power series, truncated once terms fall below
/// `1e-12` of the running sum. Both series are rescaled together to avoid
/// overflow at large `x`.
pub fn bessel_i_ratio(nu: u32, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let h = 0.5 * x;
    let h2 = h * h;
    let nu_f = nu as f64;
    // t_k = h^{2k} / (k! (k+ν)!) up to the common factor h^ν / ν!
    let mut t = 1.0;
    let mut u = h / (nu_f + 1.0);
    let mut st = t;
    let mut su = u;
    let mut k = 0.0_f64;
    loop {
        k += 1.0;
        t *= h2 / (k * (k + nu_f));
        u *= h2 / (k * (k + nu_f + 1.0));
        st += t;
        su += u;
        if st > 1e250 {
            st *= 1e-250;
            su *= 1e-250;
            t *= 1e-250;
            u *= 1e-250;
        }
        if k > h && t < 1e-12 * st && u < 1e-12 * su {
            break;
        }
        if k > 1e7 {
            break;
        }
    }
    su / st
}

/// Weighted sums accumulated in the log domain: tracks `Σ w_i` and
/// `Σ w_i g_i` given `log w_i`, rescaling whenever the running maximum moves.
#[derive(Debug, Clone, Copy)]
pub struct LogAccumulator {
    max: f64,
    sw: f64,
    swg: f64,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl LogAccumulator {
    pub fn new() -> Self {
        Self { max: f64::NEG_INFINITY, sw: 0.0, swg: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, log_w: f64, g: f64) {
        if log_w == f64::NEG_INFINITY {
            return;
        }
        if log_w > self.max {
            let scale = libm::exp(self.max - log_w);
            self.sw *= scale;
            self.swg *= scale;
            self.max = log_w;
        }
        let w = libm::exp(log_w - self.max);
        self.sw += w;
        self.swg += w * g;
    }

    pub fn merge(&mut self, other: &LogAccumulator) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max > self.max {
            let scale = libm::exp(self.max - other.max);
            self.sw = self.sw * scale + other.sw;
            self.swg = self.swg * scale + other.swg;
            self.max = other.max;
        } else {
            let scale = libm::exp(other.max - self.max);
            self.sw += other.sw * scale;
            self.swg += other.swg * scale;
        }
    }

    /// `log Σ w_i`.
    pub fn log_total(&self) -> f64 {
        self.max + libm::log(self.sw)
    }

    /// `Σ w_i g_i / Σ w_i`.
    pub fn mean(&self) -> f64 {
        self.swg / self.sw
    }

    pub fn is_empty(&self) -> bool {
        !(self.sw > 0.0)
    }
}

/// `log Γ(x)`.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let t = libm::fmod(a, 2.0 * PI);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}
