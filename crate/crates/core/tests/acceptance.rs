//! Acceptance criteria. Runs as a plain binary so every criterion prints
//! one PASS/FAIL line; exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use icm_bayes::cli::{execute, Cli};
use icm_bayes::experiment::{
    finite_m_tv, path_length, run_semi_supervised, run_supervised, run_trajectory, run_unsupervised,
    ExperimentConfig, LogLikRow, Mode,
};
use icm_bayes::grid::{grid_posterior, GridSpec, LeakyLikelihood};
use icm_bayes::verify::{
    battery, mixture_prior, moment_error, refinement_errors, slice_gap_for, Case, FACTORIZATION_TOL,
    INDEPENDENT_MI_TOL, SLICE_TOL,
};
use icm_bayes::{
    chain_update, factorization_gap, grid_mutual_information, marginal_psi, semi_supervised_update,
    supervised_update, Gaussian2, LikelihoodSpec, ObservationSet, PriorSpec, SufficientStats,
};
use clap::Parser;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn within_budget(start: Instant, budget: Duration) -> (bool, String) {
    let el = start.elapsed();
    (el < budget, format!("{:.2}s < {}s", el.as_secs_f64(), budget.as_secs()))
}

fn lik() -> LikelihoodSpec<f64> {
    LikelihoodSpec::new(3.0, 1.0).unwrap()
}

/// Conjugate vs grid oracle over the battery, plus second-order refinement.
fn c1() -> Outcome {
    let start = Instant::now();
    let lik = lik();
    let cases = battery(0, &PriorSpec::standard(0.0), &lik).unwrap();
    let mut worst_err: f64 = 0.0;
    let mut worst_ratio = f64::INFINITY;
    let mut quad_ok = true;
    for case in &cases {
        let spec = GridSpec::around(&case.prior, 6.0, 401).unwrap();
        let g = case.grid(&lik, spec).unwrap();
        let err = moment_error(&g, &case.analytic(&lik).unwrap());
        let h = g.spec().max_cell_width();
        quad_ok &= err <= 2.0 * h * h;
        worst_err = worst_err.max(err);
        for base in [9, 11] {
            let (coarse, fine) = refinement_errors(case, &lik, base).unwrap();
            worst_ratio = worst_ratio.min(coarse / fine);
        }
    }
    let (fast, t) = within_budget(start, Duration::from_secs(60));
    outcome(
        worst_err <= 1e-3 && quad_ok && worst_ratio >= 3.0 && fast,
        format!(
            "{} cases: max moment err {worst_err:.3e} (<= 1e-3 and <= 2h^2), min refinement ratio {worst_ratio:.2} (>= 3), {t}",
            cases.len()
        ),
    )
}

/// Factorized prior gives a factorized posterior; correlated prior MI.
fn c2() -> Outcome {
    let start = Instant::now();
    let lik = lik();
    let cases = battery(0, &PriorSpec::standard(0.0), &lik).unwrap();
    let (mut gap, mut mi) = (0.0f64, 0.0f64);
    for case in cases.iter().filter(|c| c.rho == 0.0) {
        let g = case.grid(&lik, GridSpec::default_for(&case.prior).unwrap()).unwrap();
        gap = gap.max(factorization_gap(&g));
        mi = mi.max(grid_mutual_information(&g));
    }
    let prior = PriorSpec::standard(0.75).to_gaussian().unwrap();
    let g = grid_posterior(&prior, &ObservationSet::empty(), &lik, GridSpec::default_for(&prior).unwrap()).unwrap();
    let mi75 = grid_mutual_information(&g);
    let closed = -0.5 * (1.0f64 - 0.75 * 0.75).ln();
    let (fast, t) = within_budget(start, Duration::from_secs(10));
    outcome(
        gap < FACTORIZATION_TOL && mi < INDEPENDENT_MI_TOL && (mi75 - closed).abs() <= 1e-3 && fast,
        format!("rho=0 max gap {gap:.3e}, max MI {mi:.3e}; rho=0.75 MI {mi75:.6} vs {closed:.6}; {t}"),
    )
}

/// Cause-only data leaves p(psi | theta, D) unchanged; a leaky model is caught.
fn c3() -> Outcome {
    let start = Instant::now();
    let lik = lik();
    let case = Case::build(3, &PriorSpec::standard(0.0), &lik, 0.75, 5, 50).unwrap();
    let spec = GridSpec::default_for(&case.prior).unwrap();
    let gauss = slice_gap_for(&case.prior, &case.obs, &lik, &lik, spec).unwrap();
    let mix_spec = GridSpec::new((-7.0, 7.0), (-7.0, 7.0), 401, 401).unwrap();
    let mix = slice_gap_for(&mixture_prior(), &case.obs, &lik, &lik, mix_spec).unwrap();
    let leak = slice_gap_for(&case.prior, &case.obs, &LeakyLikelihood(lik), &lik, spec).unwrap();
    let leak_mix = slice_gap_for(&mixture_prior(), &case.obs, &LeakyLikelihood(lik), &lik, mix_spec).unwrap();
    let (fast, t) = within_budget(start, Duration::from_secs(10));
    outcome(
        gauss < SLICE_TOL && mix < SLICE_TOL && !(leak < SLICE_TOL) && !(leak_mix < SLICE_TOL) && fast,
        format!("gap gaussian {gauss:.3e}, mixture {mix:.3e} (< {SLICE_TOL:.3e}); leaky {leak:.3}, {leak_mix:.3} fail the same check; {t}"),
    )
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

fn c4() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        rho_list: vec![0.75],
        ..ExperimentConfig::defaults(Mode::Unsupervised)
    };
    let report = run_unsupervised(&cfg).unwrap();
    let err = report
        .curve_rows()
        .iter()
        .map(|r| (r.posterior_density - normal_pdf(r.psi, 0.75, 0.4375)).abs())
        .fold(0.0, f64::max);
    let prior_err = report
        .curve_rows()
        .iter()
        .map(|r| (r.prior_density - normal_pdf(r.psi, 0.0, 1.0)).abs())
        .fold(0.0, f64::max);
    let tv = finite_m_tv(&cfg, 0.75).unwrap();
    let (fast, t) = within_budget(start, Duration::from_secs(1));
    outcome(
        err < 1e-10 && prior_err < 1e-10 && tv < 1e-2 && fast,
        format!("max density err {err:.3e} (< 1e-10), finite-M TV {tv:.3e} (< 1e-2), {t}"),
    )
}

fn row(rows: &[LogLikRow], rho: f64, n: usize, m: usize) -> LogLikRow {
    *rows.iter().find(|r| r.rho == rho && r.n == n && r.m == m).unwrap()
}

fn combined(a: &LogLikRow, b: &LogLikRow) -> f64 {
    a.stderr.hypot(b.stderr)
}

fn c5() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        trials: 10_000,
        ..ExperimentConfig::defaults(Mode::Supervised)
    };
    let rows = run_supervised(&cfg).unwrap().loglik_rows().to_vec();
    let mut monotone = true;
    for &rho in &cfg.rho_list {
        for w in cfg.n_list.windows(2) {
            let (a, b) = (row(&rows, rho, w[0], 0), row(&rows, rho, w[1], 0));
            monotone &= b.mean_loglik - a.mean_loglik > -combined(&a, &b);
        }
    }
    let mut min_sep = f64::INFINITY;
    for n in [1, 2, 5] {
        let (lo, hi) = (row(&rows, 0.9, n, 0), row(&rows, 0.0, n, 0));
        min_sep = min_sep.min((hi.mean_loglik - lo.mean_loglik) / combined(&lo, &hi));
    }
    let (fast, t) = within_budget(start, Duration::from_secs(120));
    outcome(
        monotone && min_sep > 3.0 && fast,
        format!("increasing in N for all rho: {monotone}; rho=0 above rho=0.9 at N in {{1,2,5}} by >= {min_sep:.1} SE (> 3); {t}"),
    )
}

fn c6() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        trials: 1000,
        ..ExperimentConfig::defaults(Mode::Trajectory)
    };
    let rows = run_trajectory(&cfg).unwrap().trajectory_rows().to_vec();
    let n_max = *cfg.n_list.last().unwrap();
    let mut worst_end: f64 = 0.0;
    for r in rows.iter().filter(|r| r.n == n_max) {
        worst_end = worst_end.max((r.mean_theta - 1.0).abs()).max((r.mean_psi + 3.0).abs());
    }
    let (l0, l9) = (path_length(&rows, 0.0), path_length(&rows, 0.9));
    let (fast, t) = within_budget(start, Duration::from_secs(60));
    outcome(
        worst_end <= 0.05 && l9 > l0 && fast,
        format!("endpoint max deviation {worst_end:.4} at N={n_max} (<= 0.05); path length rho=0.9 {l9:.3} > rho=0 {l0:.3}; {t}"),
    )
}

fn c7() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        rho_list: vec![0.0, 0.75],
        trials: 10_000,
        ..ExperimentConfig::defaults(Mode::SemiSupervised)
    };
    let rows = run_semi_supervised(&cfg).unwrap().loglik_rows().to_vec();
    let mut max_diff: f64 = 0.0;
    for &n in &cfg.n_list {
        let cell: Vec<_> = rows.iter().filter(|r| r.rho == 0.0 && r.n == n).collect();
        for a in &cell {
            for b in &cell {
                max_diff = max_diff.max((a.mean_loglik - b.mean_loglik).abs());
            }
        }
    }
    let mut min_sep = f64::INFINITY;
    for n in [1, 2, 5] {
        let strong = row(&rows, 0.75, n, ExperimentConfig::m_for(0.1, n));
        let weak = row(&rows, 0.75, n, ExperimentConfig::m_for(10.0, n));
        min_sep = min_sep.min((strong.mean_loglik - weak.mean_loglik) / combined(&strong, &weak));
    }
    let (fast, t) = within_budget(start, Duration::from_secs(180));
    outcome(
        max_diff < 1e-10 && min_sep > 3.0 && fast,
        format!("rho=0 max curve spread {max_diff:.3e} (< 1e-10); rho=0.75 M=10N below M=0.1N at N in {{1,2,5}} by >= {min_sep:.1} SE (> 3); {t}"),
    )
}

fn run_cli_in(pool_threads: usize, args: &[&str]) -> std::collections::BTreeMap<String, Vec<u8>> {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap().to_owned();
    let mut argv = vec!["icm-bayes"];
    argv.extend_from_slice(args);
    argv.extend_from_slice(&["--out", &out]);
    let cli = Cli::try_parse_from(&argv).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(pool_threads).build().unwrap();
    let code = pool.install(|| execute(&cli, &mut std::io::sink()).unwrap());
    assert_eq!(code, 0);
    std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn c8() -> Outcome {
    let max_threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4).max(4);
    let runs: [&[&str]; 5] = [
        &["fig1", "--seed", "7"],
        &["fig2", "--seed", "7", "--set", "trials=500"],
        &["fig2-traj", "--seed", "7", "--set", "trials=50", "--set", "n_list=0,1,10,100,1000"],
        &["fig3", "--seed", "0x7", "--set", "trials=500"],
        &["verify", "--seed", "7", "--export-grids"],
    ];
    let mut identical = true;
    let mut files = 0;
    for args in runs {
        let a = run_cli_in(1, args);
        let b = run_cli_in(max_threads, args);
        let c = run_cli_in(max_threads, args);
        identical &= a == b && b == c;
        files += a.len();
    }
    outcome(identical, format!("{files} output files byte-identical across 3 runs (1 and {max_threads} threads)"))
}

fn arb_prior() -> impl Strategy<Value = PriorSpec<f64>> {
    (-2.0..2.0f64, -2.0..2.0f64, 0.2..3.0f64, 0.2..3.0f64, -0.95..0.95f64).prop_map(
        |(mean_theta, mean_psi, var_theta, var_psi, rho)| PriorSpec {
            mean_theta,
            mean_psi,
            var_theta,
            var_psi,
            rho,
        },
    )
}

fn arb_lik() -> impl Strategy<Value = LikelihoodSpec<f64>> {
    (0.3..5.0f64, 0.3..5.0f64).prop_map(|(a, b)| LikelihoodSpec::new(a, b).unwrap())
}

fn arb_stats() -> impl Strategy<Value = SufficientStats<f64>> {
    (0usize..200, -4.0..4.0f64, -4.0..4.0f64).prop_map(|(n, x, e)| SufficientStats::new(n, x, e))
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[42; 32]))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn gauss_close(a: &Gaussian2<f64>, b: &Gaussian2<f64>, tol: f64) -> bool {
    let (ma, mb, ca, cb) = (a.mean(), b.mean(), a.cov(), b.cov());
    close(ma[0], mb[0], tol)
        && close(ma[1], mb[1], tol)
        && close(ca.xx, cb.xx, tol)
        && close(ca.xy, cb.xy, tol)
        && close(ca.yy, cb.yy, tol)
}

fn c9() -> Outcome {
    let mut results = Vec::new();

    let order = runner(256).run(&(arb_prior(), arb_lik(), arb_stats(), arb_stats()), |(p, lik, s1, s2)| {
        let prior = p.to_gaussian().unwrap();
        let once = supervised_update(&prior, &s1.merge(&s2), &lik).unwrap();
        let twice = supervised_update(&supervised_update(&prior, &s1, &lik).unwrap(), &s2, &lik).unwrap();
        prop_assert!(gauss_close(&once, &twice, 1e-10));
        Ok(())
    });
    results.push(("order invariance", order.map_err(|e| e.to_string())));

    let loewner = runner(256).run(&(arb_prior(), arb_lik(), arb_stats(), 0usize..500, -4.0..4.0f64), |(p, lik, s, m, xm)| {
        let prior = p.to_gaussian().unwrap();
        let post = chain_update(&prior, m, xm, &s, &lik).unwrap();
        let [lo, _] = (prior.cov() - post.cov()).eigenvalues();
        prop_assert!(lo >= -1e-10, "min eigenvalue {lo}");
        Ok(())
    });
    results.push(("Loewner monotonicity", loewner.map_err(|e| e.to_string())));

    let m_invariance = runner(256).run(&(arb_prior(), arb_lik(), 0usize..10_000, -4.0..4.0f64), |(p, lik, m, xm)| {
        let prior = p.with_rho(0.0).to_gaussian().unwrap();
        let post = semi_supervised_update(&prior, m, xm, &lik).unwrap();
        let (a, b) = (marginal_psi(&prior), marginal_psi(&post));
        prop_assert!(close(a.mean, b.mean, 1e-12) && close(a.var, b.var, 1e-12));
        prop_assert!(post.cov().xy.abs() < 1e-12);
        Ok(())
    });
    results.push(("psi-marginal M-invariance at rho=0", m_invariance.map_err(|e| e.to_string())));

    let cond = runner(256).run(
        &(arb_prior(), arb_lik(), arb_stats(), 0usize..1000, -4.0..4.0f64, -5.0..5.0f64),
        |(p, lik, s, m, xm, theta)| {
            let prior = p.to_gaussian().unwrap();
            let a = icm_bayes::condition_psi_on_theta(&chain_update(&prior, m, xm, &s, &lik).unwrap(), theta);
            let b = icm_bayes::condition_psi_on_theta(&supervised_update(&prior, &s, &lik).unwrap(), theta);
            prop_assert!(close(a.mean, b.mean, 1e-10) && close(a.var, b.var, 1e-10), "{a:?} vs {b:?}");
            Ok(())
        },
    );
    results.push(("conditional independence of psi from cause data", cond.map_err(|e| e.to_string())));

    let co_vanish = runner(100).run(&(arb_prior(), arb_lik(), 0usize..6, 0usize..12, any::<u64>(), any::<bool>()), |(p, lik, n, m, seed, zero)| {
        let p = if zero { p.with_rho(0.0) } else { p };
        let case = Case::build(seed, &p, &lik, p.rho, n, m).unwrap();
        let spec = GridSpec::around(&case.prior, 6.0, 121).unwrap();
        let g = case.grid(&lik, spec).unwrap();
        let (gap, mi) = (factorization_gap(&g), grid_mutual_information(&g));
        prop_assert_eq!(gap < 1e-8, mi < 1e-7, "gap {} mi {} rho {}", gap, mi, p.rho);
        Ok(())
    });
    results.push(("MI / factorization co-vanishing", co_vanish.map_err(|e| e.to_string())));

    let stderr = runner(100).run(&(-0.9..0.9f64, 1usize..20, any::<u64>()), |(rho, n, seed)| {
        let base = ExperimentConfig {
            rho_list: vec![rho],
            n_list: vec![n],
            master_seed: seed,
            trials: 2000,
            ..ExperimentConfig::defaults(Mode::Supervised)
        };
        let small = run_supervised(&base).unwrap().loglik_rows()[0];
        let big = run_supervised(&ExperimentConfig { trials: 8000, ..base }).unwrap().loglik_rows()[0];
        let ratio = big.stderr / (small.stderr / 2.0);
        prop_assert!((ratio - 1.0).abs() <= 0.2, "ratio {}", ratio);
        Ok(())
    });
    results.push(("stderr 1/sqrt(trials) scaling", stderr.map_err(|e| e.to_string())));

    let failed: Vec<String> = results
        .iter()
        .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} suites, >= 100 configs each, meta-seed fixed", results.len())
        } else {
            failed.join("; ")
        },
    )
}

fn main() {
    // `cargo test` passes harness flags; a name filter selects criteria
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, &str, fn() -> Outcome); 9] = [
        ("C1", "conjugate vs grid oracle", c1),
        ("C2", "factorized prior => factorized posterior", c2),
        ("C3", "cause-only data leaves psi | theta unchanged", c3),
        ("C4", "unsupervised mechanism curve", c4),
        ("C5", "supervised learning curves", c5),
        ("C6", "posterior-mean trajectories", c6),
        ("C7", "semi-supervised learning curves", c7),
        ("C8", "determinism", c8),
        ("C9", "property suites", c9),
    ];
    let mut failures = 0;
    for (id, name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| id.contains(p.as_str()) || name.contains(p.as_str())) {
            continue;
        }
        let o = f();
        if !o.passed {
            failures += 1;
        }
        println!("[{}] {id} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
