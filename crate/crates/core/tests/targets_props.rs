mod common;

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use relaxhmc_core::network::{generate, FactorNetworkLikelihood};
use relaxhmc_core::targets::{make_model, LogDensity, ModelSpec};

fn specs() -> Vec<(ModelSpec, f64, f64)> {
    let (data, _) = generate(3, 6, 2, 1.0, 1.0, 5).unwrap();
    vec![
        (ModelSpec::gaussian_inequality(1.2, 100.0), -1.0, 3.0),
        (ModelSpec::sphere_gaussian(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2], 0.1), -1.4, 1.4),
        (ModelSpec::sphere_gaussian(vec![1.0, 1.0, 1.0], 0.1), -1.4, 1.4),
        (ModelSpec::sphere_t(vec![1.0, 1.0, 1.0], 0.1, 3.0), -1.4, 1.4),
        (ModelSpec::torus(), -1.9, 1.9),
        (ModelSpec::SimplexToy { alpha: vec![2.0, 3.0, 4.0] }, 0.05, 0.95),
        (ModelSpec::factor_network(Arc::new(data), 2), -0.9, 0.9),
    ]
}

#[test]
fn model_gradients_match_finite_differences() {
    let mut rng = rng(21);
    for (spec, lo, hi) in specs() {
        for lam in [1e-1, 1e-3] {
            let t = make_model(&spec, &[lam]).unwrap();
            let set = t.constraints().unwrap().clone();
            let mut n = 0;
            while n < 100 {
                let x = uniform_vec(&mut rng, t.dim(), lo, hi);
                let nu = set.eval_constraints(&x).unwrap();
                if nu.iter().any(|v| v.abs() < 1e-4) || t.log_relaxed_density(&x).is_err() {
                    continue;
                }
                let e = target_fd_error(&t, &x);
                assert!(e < 1e-4, "{spec:?} λ={lam}: rel err {e:e}");
                n += 1;
            }
        }
    }
}

#[test]
fn lambda_limit_slope() {
    let t = make_model(&ModelSpec::sphere_gaussian(vec![1.0, 0.0, 0.0], 0.1), &[1.0]).unwrap();
    let x = [0.9, 0.3, -0.4];
    let nu = t.constraints().unwrap().distance(&x).unwrap();
    let at = |lam: f64| t.clone().with_lambdas(vec![lam]).unwrap().log_relaxed_density(&x).unwrap();
    let slope = (at(1e-4) - at(1e-3)) / (1e4 - 1e3);
    assert!((slope + nu).abs() < 1e-9 * nu.max(1.0));
}

#[test]
fn directional_lambda_partitions_penalty() {
    let spec = ModelSpec::factor_network(Arc::new(generate(2, 5, 2, 1.0, 1.0, 9).unwrap().0), 2);
    let t = make_model(&spec, &[1e-2]).unwrap();
    let mut rng = rng(22);
    let x = uniform_vec(&mut rng, t.dim(), -0.8, 0.8);
    let nu = t.constraints().unwrap().eval_constraints(&x).unwrap();
    let lams: Vec<f64> = (0..nu.len()).map(|j| 1e-2 * (j + 1) as f64).collect();
    let td = t.clone().with_lambdas(lams.clone()).unwrap();
    let want: f64 = nu.iter().zip(&lams).map(|(v, l)| v.abs() / l).sum();
    assert!((td.log_relaxation(&x) + want).abs() < 1e-9 * want);
}

#[test]
fn factor_network_half_probability() {
    let (data, _) = generate(5, 10, 3, 1.0, 1.0, 42).unwrap();
    let lik = FactorNetworkLikelihood::new(Arc::new(data), 3).unwrap();
    let theta = vec![0.0; lik.layout().dim()];
    let mut g = vec![0.0; theta.len()];
    let ll = lik.log_density_and_grad(&theta, &mut g);
    let want = (5 * 45) as f64 * 0.5f64.ln();
    assert!((ll - want).abs() < 1e-12 * want.abs());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn relaxation_monotone_in_lambda(
        x in prop::collection::vec(-1.4f64..1.4, 3),
        lam in 1e-4f64..1.0,
        shrink in 0.1f64..0.99,
    ) {
        let t = make_model(&ModelSpec::sphere_t(vec![0.0, 0.0, 1.0], 0.2, 3.0), &[lam]).unwrap();
        prop_assume!(t.distance(&x) > 1e-9);
        let a = t.log_relaxed_density(&x).unwrap();
        let b = t.clone().with_lambdas(vec![lam * shrink]).unwrap().log_relaxed_density(&x).unwrap();
        prop_assert!(b < a);
        let f = t.log_relaxation(&x);
        prop_assert!(f < 0.0 && f.exp() < 1.0);
    }
}
