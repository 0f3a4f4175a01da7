mod common;

use common::*;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use relaxhmc_core::diagnostics::{ess, fit_rate};
use relaxhmc_core::oracles::relaxed_expectation_1d;
use relaxhmc_core::targets::{make_model, ModelSpec};

fn ar1(rho: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut r);
            x = rho * x + (1.0 - rho * rho).sqrt() * e;
            x
        })
        .collect()
}

#[test]
fn ess_of_iid_and_ar1() {
    let n = 10000;
    let iid = ess(&ar1(0.0, n, 1)).unwrap().value;
    assert!((iid / n as f64 - 1.0).abs() < 0.1, "{iid}");
    for rho in [0.5, 0.9] {
        let want = n as f64 * (1.0 - rho) / (1.0 + rho);
        let got = ess(&ar1(rho, n, 2)).unwrap().value;
        assert!((got / want - 1.0).abs() < 0.25, "ρ={rho}: {got} vs {want}");
    }
}

#[test]
fn violation_grows_with_lambda() {
    let mut prev = 0.0;
    for lam in [1e-3, 1e-2, 1e-1] {
        let t = make_model(&ModelSpec::gaussian_inequality(1.2, 100.0), &[lam]).unwrap();
        let v = relaxed_expectation_1d(&t, &|x| (x[0] - 1.0).max(0.0), &[0.0, 1.0, 3.0], 1024).unwrap();
        assert!(v.value > prev);
        prev = v.value;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn ess_affine_invariant(seed in 0u64..1000, a in 0.01f64..100.0, b in -50.0f64..50.0, neg in any::<bool>()) {
        let x = ar1(0.6, 500, seed);
        let s = if neg { -a } else { a };
        let y: Vec<f64> = x.iter().map(|v| s * v + b).collect();
        let (ex, ey) = (ess(&x).unwrap().value, ess(&y).unwrap().value);
        prop_assert!((ex - ey).abs() < 1e-6 * ex);
    }

    #[test]
    fn ess_within_bounds(seed in 0u64..1000, rho in -0.9f64..0.99) {
        let e = ess(&ar1(rho, 200, seed)).unwrap().value;
        prop_assert!((1.0..=200.0).contains(&e));
    }

    #[test]
    fn rate_recovers_power(c in 0.01f64..100.0, a in 0.2f64..3.0) {
        let l = [1e-1f64, 3e-2, 1e-2, 3e-3, 1e-3];
        let e: Vec<f64> = l.iter().map(|x| c * x.powf(a)).collect();
        let f = fit_rate(&l, &e, 1).unwrap();
        prop_assert!((f.slope - a).abs() < 1e-9);
        prop_assert!((f.intercept - c.ln()).abs() < 1e-8);
        prop_assert!(f.r_squared > 1.0 - 1e-12);
    }
}
