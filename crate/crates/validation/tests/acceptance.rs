//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- 2 3`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use relaxhmc::config::Experiment;
use relaxhmc::summary::{RunSummary, Summary};
use relaxhmc::{resolve, run, ExperimentConfig};
use relaxhmc_core::diagnostics::{mcse, mean};
use relaxhmc_core::hmc::{leapfrog, sample, HmcConfig};
use relaxhmc_core::network::generate;
use relaxhmc_core::targets::{make_model, Gaussian, ModelSpec};
use relaxhmc_core::RelaxedTarget;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(checks: &[(bool, String)]) -> Verdict {
    Verdict {
        pass: checks.iter().all(|c| c.0),
        detail: checks.iter().map(|(ok, s)| format!("{}{s}", if *ok { "" } else { "!" })).collect::<Vec<_>>().join("; "),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s <= limit_s, format!("runtime {s:.1}s <= {limit_s}s"))
}

fn run_default(e: Experiment, edit: impl FnOnce(&mut ExperimentConfig)) -> Result<Summary> {
    let mut cfg = ExperimentConfig::new(e);
    edit(&mut cfg);
    Ok(run(&resolve(&cfg, 0)?)?.summary)
}

fn band_mean(r: &RunSummary, f: impl Fn(&RunSummary) -> Option<f64>) -> Result<f64> {
    f(r).with_context(|| format!("missing statistic at λ={}", r.lambda))
}

fn sci(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", "))
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] > w[1])
}

fn circle_benchmark() -> Result<Verdict> {
    let t0 = Instant::now();
    let s = run_default(Experiment::CircleBenchmark, |c| {
        c.lambda_grid = Some(vec![1e-3, 1e-4, 1e-5]);
        c.replicates = Some(10);
    })?;
    let took = t0.elapsed();
    let mut checks = Vec::new();
    let kept = s.runs.iter().filter_map(|r| r.kept_draws).min().unwrap_or(0);
    checks.push((kept >= 5000 && s.replicates == 10, format!("{} replicates x {kept} kept", s.replicates)));
    for r in &s.runs {
        let v = band_mean(r, |r| r.violation.map(|b| b.mean))?;
        let paper = 0.9 * r.lambda;
        checks.push((v >= paper / 3.0 && v <= paper * 3.0, format!("violation {v:.2e} vs {paper:.0e}")));
    }
    let diffs = s.runs.iter().map(|r| band_mean(r, |r| r.expectation_diff.map(|b| b.mean))).collect::<Result<Vec<_>>>()?;
    checks.push((strictly_decreasing(&diffs), format!("diff decreasing with λ {}", sci(&diffs))));
    checks.push((diffs[2] <= 1.5e-2, format!("diff at 1e-5 {:.2e} <= 1.5e-2", diffs[2])));
    let ess = s.runs.iter().map(|r| band_mean(r, |r| r.ess_per_1000)).collect::<Result<Vec<_>>>()?;
    checks.push((strictly_decreasing(&ess), format!("ESS/1000 {ess:.1?}")));
    checks.push(within(took, 300.0));
    Ok(verdict(&checks))
}

fn rate_positive() -> Result<Verdict> {
    let t0 = Instant::now();
    let s = run_default(Experiment::RatePositiveMeasure, |c| {
        c.lambda_grid = Some(vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3]);
        c.model.n = Some(100.0);
        c.model.ybar = Some(1.2);
    })?;
    let took = t0.elapsed();
    let fit = s.rate_fit.context("no rate fit")?;
    Ok(verdict(&[
        (fit.dropped == 0 && fit.slope >= 0.5, format!("slope {:.3} >= 0.5", fit.slope)),
        (strictly_decreasing(&fit.errors), format!("errors {}", sci(&fit.errors))),
        within(took, 10.0),
    ]))
}

fn rate_zero() -> Result<Verdict> {
    let t0 = Instant::now();
    let s = run_default(Experiment::RateZeroMeasure, |c| c.lambda_grid = Some(vec![1e-2, 3e-3, 1e-3, 3e-4, 1e-4]))?;
    let took = t0.elapsed();
    let fit = s.rate_fit.context("no rate fit")?;
    let max = fit.bound_ratios.iter().copied().fold(0.0, f64::max);
    Ok(verdict(&[
        (fit.dropped == 0 && fit.bound_ratios.len() == 5, format!("{} of 5 ratios", fit.bound_ratios.len())),
        (max <= 1.0, format!("error/(λ/|log λ|) <= {max:.2e} <= 1 {}", sci(&fit.bound_ratios))),
        within(took, 30.0),
    ]))
}

fn torus() -> Result<Verdict> {
    let t0 = Instant::now();
    let s = run_default(Experiment::Torus, |c| c.lambda_grid = Some(vec![1e-3]))?;
    let wide = run_default(Experiment::Torus, |c| {
        c.lambda_grid = Some(vec![1e-1, 1e-2]);
        c.hmc.n_iterations = Some(3000);
    })?;
    let took = t0.elapsed();
    let chi = s.runs[0].extras.chi_square_alpha2.context("no chi-square")?;
    let frac = wide.runs.iter().map(|r| band_mean(r, |r| r.extras.frac_distance_gt_0_05)).collect::<Result<Vec<_>>>()?;
    Ok(verdict(&[
        (chi.n == 10_000 && chi.p_value > 0.01, format!("α₂ chi-square p={:.3} (n={})", chi.p_value, chi.n)),
        (frac[0] > frac[1], format!("outside fraction {:.3} (1e-1) > {:.3} (1e-2)", frac[0], frac[1])),
        within(took, 120.0),
    ]))
}

fn sphere_tails() -> Result<Verdict> {
    let edit = |c: &mut ExperimentConfig| {
        c.lambda_grid = Some(vec![1e-3]);
        c.model.f = Some(vec![1.0 / 3f64.sqrt(); 3]);
        c.model.sigma2 = Some(0.1);
    };
    let g = run_default(Experiment::SphereGaussian, edit)?;
    let t = run_default(Experiment::SphereT, edit)?;
    let fg = band_mean(&g.runs[0], |r| r.extras.frac_angle_gt_1)?;
    let ft = band_mean(&t.runs[0], |r| r.extras.frac_angle_gt_1)?;
    Ok(verdict(&[(ft > fg, format!("P(angle > 1): t {ft:.4} > Gaussian {fg:.4}"))]))
}

fn determinant(a: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|x, y| a[x * n + c].abs().total_cmp(&a[y * n + c].abs())).unwrap();
        if piv != c {
            for k in 0..n {
                a.swap(c * n + k, piv * n + k);
            }
            det = -det;
        }
        let d = a[c * n + c];
        det *= d;
        for r in c + 1..n {
            let f = a[r * n + c] / d;
            for k in c..n {
                a[r * n + k] -= f * a[c * n + k];
            }
        }
    }
    det
}

fn step_det(t: &RelaxedTarget, z: &[f64], eps: f64) -> Result<f64> {
    let r = t.dim();
    let mass = vec![1.0; r];
    let map = |z: &[f64]| -> Result<Vec<f64>> {
        let (a, b) = leapfrog(t, &z[..r], &z[r..], eps, 1, &mass)?;
        Ok([a, b].concat())
    };
    let n = 2 * r;
    let h = 1e-6;
    let mut jac = vec![0.0; n * n];
    let mut zp = z.to_vec();
    for k in 0..n {
        zp[k] = z[k] + h;
        let a = map(&zp)?;
        zp[k] = z[k] - h;
        let b = map(&zp)?;
        zp[k] = z[k];
        for i in 0..n {
            jac[i * n + k] = (a[i] - b[i]) / (2.0 * h);
        }
    }
    Ok(determinant(&mut jac, n))
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect()
}

fn hmc_suite() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checks = Vec::new();

    let sphere = make_model(&ModelSpec::sphere_gaussian(vec![0.6, 0.0, 0.8], 0.2), &[0.1])?;
    let mass = [1.0, 2.0, 0.5];
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let th: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = normals(&mut rng, 3);
        let (th1, p1) = leapfrog(&sphere, &th, &p, 0.01, 25, &mass)?;
        let back: Vec<f64> = p1.iter().map(|v| -v).collect();
        let (th2, p2) = leapfrog(&sphere, &th1, &back, 0.01, 25, &mass)?;
        for k in 0..3 {
            worst = worst.max((th2[k] - th[k]).abs()).max((p2[k] + p[k]).abs());
        }
    }
    checks.push((worst < 1e-8, format!("round trip {worst:.1e} < 1e-8")));

    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let a = normals(&mut rng, 4);
        let cov = vec![a[0] * a[0] + 0.5, a[0] * a[1], a[0] * a[1], a[1] * a[1] + a[2] * a[2] + 0.5];
        let g = RelaxedTarget::unconstrained(Arc::new(Gaussian::dense(normals(&mut rng, 2), cov)?))?;
        let z = normals(&mut rng, 4);
        worst = worst.max((step_det(&g, &z, 0.1)? - 1.0).abs());
    }
    checks.push((worst < 1e-6, format!("|det-1| {worst:.1e} < 1e-6")));

    let (m, cov) = ([1.0, -1.0], [1.0, 0.5, 0.5, 2.0]);
    let g = RelaxedTarget::unconstrained(Arc::new(Gaussian::dense(m.to_vec(), cov.to_vec())?))?;
    let cfg = HmcConfig { step_size: 0.3, n_leapfrog: 10, n_iterations: 6000, n_burnin: 1000, seed: 3, ..Default::default() };
    let chain = sample(&g, &cfg)?;
    let cols = [chain.column(0), chain.column(1)];
    let mut z_max: f64 = 0.0;
    for a in 0..2 {
        z_max = z_max.max((mean(&cols[a]) - m[a]).abs() / mcse(&cols[a])?);
        for b in a..2 {
            let prod: Vec<f64> = cols[a].iter().zip(&cols[b]).map(|(x, y)| (x - m[a]) * (y - m[b])).collect();
            z_max = z_max.max((mean(&prod) - cov[2 * a + b]).abs() / mcse(&prod)?);
        }
    }
    checks.push((z_max < 3.0, format!("moments within {z_max:.2} < 3 MCSE")));

    let cfg = HmcConfig { n_iterations: 400, n_burnin: 100, seed: 17, jitter: 0.2, ..Default::default() };
    let (a, b) = (sample(&sphere, &cfg)?, sample(&sphere, &cfg)?);
    let same = a.samples.iter().zip(&b.samples).all(|(x, y)| x.to_bits() == y.to_bits())
        && a.samples.len() == b.samples.len()
        && a.accepted == b.accepted;
    checks.push((same, "bit-exact replay".to_string()));
    Ok(verdict(&checks))
}

fn fd_rel_err(t: &RelaxedTarget, x: &[f64]) -> Result<f64> {
    let g = t.grad_log_relaxed_density(x)?;
    let h = 1e-6;
    let mut xp = x.to_vec();
    let mut num: f64 = 0.0;
    for k in 0..x.len() {
        xp[k] = x[k] + h;
        let a = t.log_relaxed_density(&xp)?;
        xp[k] = x[k] - h;
        let b = t.log_relaxed_density(&xp)?;
        xp[k] = x[k];
        num = num.max(((a - b) / (2.0 * h) - g[k]).abs());
    }
    Ok(num / g.iter().map(|v| v.abs()).fold(1.0, f64::max))
}

fn gradient_suite() -> Result<Verdict> {
    let (data, _) = generate(5, 10, 3, 1.0, 1.0, 0)?;
    let specs = [
        ("gaussian-inequality", ModelSpec::gaussian_inequality(1.2, 100.0), -1.0, 3.0),
        ("sphere-gaussian", ModelSpec::sphere_gaussian(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2], 0.1), -1.4, 1.4),
        ("sphere-t", ModelSpec::sphere_t(vec![1.0, 1.0, 1.0], 0.1, 3.0), -1.4, 1.4),
        ("torus", ModelSpec::torus(), -1.9, 1.9),
        ("simplex", ModelSpec::SimplexToy { alpha: vec![2.0, 3.0, 4.0] }, 0.05, 0.95),
        ("factor-network", ModelSpec::factor_network(Arc::new(data), 3), -0.9, 0.9),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checks = Vec::new();
    for (name, spec, lo, hi) in specs {
        let t = make_model(&spec, &[1e-3])?;
        let set = t.constraints().context("constrained model")?.clone();
        let (mut n, mut worst) = (0, 0.0f64);
        while n < 100 {
            let x: Vec<f64> = (0..t.dim()).map(|_| rng.random_range(lo..hi)).collect();
            if set.eval_constraints(&x)?.iter().any(|v| v.abs() < 1e-4) || t.log_relaxed_density(&x).is_err() {
                continue;
            }
            worst = worst.max(fd_rel_err(&t, &x)?);
            n += 1;
        }
        checks.push((worst < 1e-4, format!("{name} {worst:.1e}")));
    }
    Ok(verdict(&checks))
}

fn factor_network() -> Result<Verdict> {
    let t0 = Instant::now();
    let s = run_default(Experiment::FactorNetwork, |c| {
        c.lambda_grid = Some(vec![1e-3]);
        c.model.subjects = Some(5);
        c.model.nodes = Some(10);
        c.model.factors = Some(3);
    })?;
    let took = t0.elapsed();
    let r = &s.runs[0];
    let frame = band_mean(r, |r| r.extras.frame_error)?;
    let auc = band_mean(r, |r| r.extras.auc)?;
    ensure!(r.kept_draws.unwrap_or(0) > 0, "no kept draws");
    Ok(verdict(&[
        (frame < 0.05, format!("mean |U'U-I|_1 {frame:.4} < 0.05")),
        (auc > 0.8, format!("in-sample AUC {auc:.4} > 0.8")),
        within(took, 600.0),
    ]))
}

type Criterion = (u32, &'static str, fn() -> Result<Verdict>);

const CRITERIA: [Criterion; 8] = [
    (1, "circle benchmark", circle_benchmark),
    (2, "positive-measure rate", rate_positive),
    (3, "measure-zero rate", rate_zero),
    (4, "torus", torus),
    (5, "sphere t vs Gaussian tails", sphere_tails),
    (6, "HMC correctness", hmc_suite),
    (7, "gradients", gradient_suite),
    (8, "factor network", factor_network),
];

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, f) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let v = f().unwrap_or_else(|e| Verdict { pass: false, detail: format!("error: {e:#}") });
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {id} {name}: {} ({}) [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t0.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
