//! Grid-based verification battery.
//!
//! Cross-checks the conjugate engine against the grid oracle and measures
//! the two structural identities of the model: a factorized prior gives a
//! factorized posterior, and cause-only data leaves `p(psi | theta, D)`
//! untouched.

use std::fmt;

use crate::conjugate::chain_update;
use crate::error::Result;
use crate::experiment::{draw_labeled, draw_true_params, draw_unlabeled, stream, ExperimentConfig, Purpose};
use crate::grid::{
    conditional_slice_gap, factorization_gap, grid_mutual_information, grid_posterior_auto, GaussianMixture,
    GridDensity, GridSpec, LeakyLikelihood, ObservationModel, PriorDensity,
};
use crate::linalg::Sym2;
use crate::model::{sufficient_stats, Gaussian2, LikelihoodSpec, ObservationSet, PriorSpec};

pub const BATTERY_RHOS: [f64; 4] = [-0.9, 0.0, 0.5, 0.9];
pub const BATTERY_NS: [usize; 3] = [0, 1, 5];
pub const BATTERY_MS: [usize; 2] = [0, 10];

/// Max moment disagreement between grid and closed form on the default grid.
pub const ORACLE_TOL: f64 = 1e-3;
/// Required error reduction when cell widths are halved.
pub const REFINEMENT_MIN_RATIO: f64 = 3.0;
/// Cells per axis of the coarsest grid in the refinement ladder.
pub const REFINEMENT_BASE_CELLS: usize = 9;
/// Slack for identities that hold cell by cell on the grid, so only
/// floating point roundoff separates the two sides.
pub const QUADRATURE_TOL: f64 = 1e-9;
pub const FACTORIZATION_TOL: f64 = 1e-6 + QUADRATURE_TOL;
pub const INDEPENDENT_MI_TOL: f64 = 1e-5;
pub const SLICE_TOL: f64 = 1e-6 + QUADRATURE_TOL;
pub const PRIOR_MI_TOL: f64 = 1e-3;
pub const DETECTOR_MIN_GAP: f64 = 0.01;
pub const CO_VANISH_GAP: f64 = 1e-8;
pub const CO_VANISH_MI: f64 = 1e-7;
pub const SLICE_N: usize = 5;
pub const SLICE_M: usize = 50;
const MAX_WIDENINGS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    /// measured <= tolerance
    AtMost,
    /// measured > tolerance
    Above,
    /// measured >= tolerance
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, tolerance: f64, bound: Bound) -> Self {
        let passed = match bound {
            Bound::AtMost => measured <= tolerance,
            Bound::Above => measured > tolerance,
            Bound::AtLeast => measured >= tolerance,
        };
        Self {
            name: name.into(),
            measured,
            tolerance,
            bound,
            passed,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.bound {
            Bound::AtMost => "<=",
            Bound::Above => ">",
            Bound::AtLeast => ">=",
        };
        write!(
            f,
            "{} {:<44} measured={:.6e} (want {} {:.3e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            op,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    /// Build the with-cause-data posteriors from [`LeakyLikelihood`] so the
    /// conditional-slice checks must fail.
    pub inject_violation: bool,
}

/// One battery case with deterministic data.
#[derive(Debug, Clone)]
pub struct Case {
    pub rho: f64,
    pub n: usize,
    pub m: usize,
    pub prior: Gaussian2<f64>,
    pub obs: ObservationSet<f64>,
}

impl Case {
    pub fn build(seed: u64, base: &PriorSpec<f64>, lik: &LikelihoodSpec<f64>, rho: f64, n: usize, m: usize) -> Result<Self> {
        let spec = base.with_rho(rho);
        let prior = spec.to_gaussian()?;
        let truth = draw_true_params(&mut stream(seed, Purpose::Verify, rho, n, m), &spec);
        let mut rng = stream(seed, Purpose::Verify, rho, n, m + 1);
        let labeled = draw_labeled(&mut rng, &truth, lik, n);
        let unlabeled = draw_unlabeled(&mut rng, &truth, lik, m);
        Ok(Self {
            rho,
            n,
            m,
            prior,
            obs: ObservationSet::new(labeled, unlabeled)?,
        })
    }

    pub fn label(&self) -> String {
        format!("rho={},n={},m={}", self.rho, self.n, self.m)
    }

    /// Closed-form posterior for this case.
    pub fn analytic(&self, lik: &LikelihoodSpec<f64>) -> Result<Gaussian2<f64>> {
        let stats = sufficient_stats(&self.obs.pairs());
        let m = self.obs.unlabeled_causes.len();
        let mean_x = if m == 0 {
            0.0
        } else {
            self.obs.unlabeled_causes.iter().sum::<f64>() / m as f64
        };
        chain_update(&self.prior, m, mean_x, &stats, lik)
    }

    pub fn grid(&self, lik: &LikelihoodSpec<f64>, spec: GridSpec<f64>) -> Result<GridDensity<f64>> {
        grid_posterior_auto(&self.prior, &self.obs, lik, spec, MAX_WIDENINGS)
    }
}

pub fn battery(seed: u64, base: &PriorSpec<f64>, lik: &LikelihoodSpec<f64>) -> Result<Vec<Case>> {
    let mut out = Vec::new();
    for &rho in &BATTERY_RHOS {
        for &n in &BATTERY_NS {
            for &m in &BATTERY_MS {
                out.push(Case::build(seed, base, lik, rho, n, m)?);
            }
        }
    }
    Ok(out)
}

/// Largest absolute difference over means, variances and covariance.
pub fn moment_error(g: &GridDensity<f64>, analytic: &Gaussian2<f64>) -> f64 {
    let gm = g.moments();
    let mean = analytic.mean();
    let cov = analytic.cov();
    [
        gm.mean_theta - mean[0],
        gm.mean_psi - mean[1],
        gm.var_theta - cov.xx,
        gm.var_psi - cov.yy,
        gm.cov_theta_psi - cov.xy,
    ]
    .iter()
    .fold(0.0, |acc: f64, d| acc.max(d.abs()))
}

/// Moment errors on a grid and on the same extent with half-width cells.
pub fn refinement_errors(case: &Case, lik: &LikelihoodSpec<f64>, base_cells: usize) -> Result<(f64, f64)> {
    let analytic = case.analytic(lik)?;
    let coarse_spec = GridSpec::around(&case.prior, 6.0, base_cells)?;
    let coarse = case.grid(lik, coarse_spec)?;
    let fine = case.grid(lik, coarse.spec().refined())?;
    Ok((moment_error(&coarse, &analytic), moment_error(&fine, &analytic)))
}

/// The mixture prior used for the non-Gaussian conditional check.
pub fn mixture_prior() -> GaussianMixture<f64> {
    let a = Gaussian2::new([-1.0, -0.5], Sym2::new(0.5, 0.3, 0.6)).expect("valid component");
    let b = Gaussian2::new([1.0, 1.0], Sym2::new(0.4, -0.1, 0.5)).expect("valid component");
    GaussianMixture::new(vec![(0.5, a), (0.5, b)]).expect("valid mixture")
}

/// Slice gap between posteriors with and without `SLICE_M` causes.
pub fn slice_gap_for<P: PriorDensity<f64>>(
    prior: &P,
    obs: &ObservationSet<f64>,
    with_model: &dyn ObservationModel<f64>,
    lik: &LikelihoodSpec<f64>,
    spec: GridSpec<f64>,
) -> Result<f64> {
    let without = ObservationSet {
        labeled: obs.labeled.clone(),
        unlabeled_causes: Vec::new(),
    };
    let g_with = crate::grid::grid_posterior(prior, obs, with_model, spec)?;
    let g_without = crate::grid::grid_posterior(prior, &without, lik, spec)?;
    conditional_slice_gap(&g_with, &g_without)
}

fn slice_observations(seed: u64, prior: &PriorSpec<f64>, lik: &LikelihoodSpec<f64>, tag: f64) -> Result<ObservationSet<f64>> {
    let truth = draw_true_params(&mut stream(seed, Purpose::Verify, tag, SLICE_N, SLICE_M), prior);
    let mut rng = stream(seed, Purpose::Verify, tag, SLICE_N, SLICE_M + 1);
    let labeled = draw_labeled(&mut rng, &truth, lik, SLICE_N);
    let unlabeled = draw_unlabeled(&mut rng, &truth, lik, SLICE_M);
    ObservationSet::new(labeled, unlabeled)
}

fn push_unique(list: &mut Vec<f64>, v: f64) {
    if !list.contains(&v) {
        list.push(v);
    }
}

/// Runs the full battery with the config's prior marginals, likelihood,
/// seed and `rho_list`.
pub fn verify(cfg: &ExperimentConfig, opts: VerifyOptions) -> Result<VerifyReport> {
    let lik = cfg.lik;
    let base = cfg.prior;
    let seed = cfg.master_seed;
    let mut checks = Vec::new();

    let cases = battery(seed, &base, &lik)?;
    let mut worst_oracle: f64 = 0.0;
    let mut worst_ratio = f64::INFINITY;
    let mut worst_gap0: f64 = 0.0;
    let mut worst_mi0: f64 = 0.0;
    let mut disagreements = 0usize;
    for case in &cases {
        let g = case.grid(&lik, GridSpec::default_for(&case.prior)?)?;
        worst_oracle = worst_oracle.max(moment_error(&g, &case.analytic(&lik)?));
        let (coarse, fine) = refinement_errors(case, &lik, REFINEMENT_BASE_CELLS)?;
        worst_ratio = worst_ratio.min(coarse / fine);
        let gap = factorization_gap(&g);
        let mi = grid_mutual_information(&g);
        if case.rho == 0.0 {
            worst_gap0 = worst_gap0.max(gap);
            worst_mi0 = worst_mi0.max(mi);
        }
        if (gap < CO_VANISH_GAP) != (mi < CO_VANISH_MI) {
            disagreements += 1;
        }
    }
    // ρ = 0 entries of the config get the same factorization treatment
    for &rho in cfg.rho_list.iter().filter(|r| **r == 0.0) {
        for &(n, m) in &[(SLICE_N, SLICE_M)] {
            let case = Case::build(seed, &base, &lik, rho, n, m)?;
            let g = case.grid(&lik, GridSpec::default_for(&case.prior)?)?;
            worst_gap0 = worst_gap0.max(factorization_gap(&g));
            worst_mi0 = worst_mi0.max(grid_mutual_information(&g));
        }
    }
    checks.push(Check::new(
        format!("oracle_equivalence[{} cases]", cases.len()),
        worst_oracle,
        ORACLE_TOL,
        Bound::AtMost,
    ));
    checks.push(Check::new(
        "refinement_min_error_ratio",
        worst_ratio,
        REFINEMENT_MIN_RATIO,
        Bound::AtLeast,
    ));
    checks.push(Check::new("factorization_gap[rho=0]", worst_gap0, FACTORIZATION_TOL, Bound::AtMost));
    checks.push(Check::new("mutual_information[rho=0]", worst_mi0, INDEPENDENT_MI_TOL, Bound::AtMost));
    checks.push(Check::new("gap_mi_co_vanishing_disagreements", disagreements as f64, 0.0, Bound::AtMost));

    let mut rhos = cfg.rho_list.clone();
    push_unique(&mut rhos, 0.75);
    for &rho in &rhos {
        let prior = base.with_rho(rho).to_gaussian()?;
        let g = grid_posterior_auto(&prior, &ObservationSet::empty(), &lik, GridSpec::default_for(&prior)?, MAX_WIDENINGS)?;
        let closed = -0.5 * (1.0 - rho * rho).ln();
        checks.push(Check::new(
            format!("prior_mutual_information_error[rho={rho}]"),
            (grid_mutual_information(&g) - closed).abs(),
            PRIOR_MI_TOL,
            Bound::AtMost,
        ));
    }

    let leaky = LeakyLikelihood(lik);
    let with_model: &dyn ObservationModel<f64> = if opts.inject_violation { &leaky } else { &lik };
    for &rho in &rhos {
        let spec = base.with_rho(rho);
        let prior = spec.to_gaussian()?;
        let obs = slice_observations(seed, &spec, &lik, rho)?;
        let grid = GridSpec::default_for(&prior)?;
        let gap = slice_gap_for(&prior, &obs, with_model, &lik, grid)?;
        checks.push(Check::new(format!("conditional_slice_gap[rho={rho}]"), gap, SLICE_TOL, Bound::AtMost));
    }
    let mixture = mixture_prior();
    let mix_grid = GridSpec::new((-7.0, 7.0), (-7.0, 7.0), 401, 401)?;
    // stream key 2.0 lies outside the rho range, so it never collides
    let mix_obs = slice_observations(seed, &base, &lik, 2.0)?;
    let gap = slice_gap_for(&mixture, &mix_obs, with_model, &lik, mix_grid)?;
    checks.push(Check::new("conditional_slice_gap[mixture]", gap, SLICE_TOL, Bound::AtMost));

    // the detector must fire on a model that leaks cause data into ψ
    let spec = base.with_rho(0.75);
    let prior = spec.to_gaussian()?;
    let obs = slice_observations(seed, &spec, &lik, 0.75)?;
    let leak_gap = slice_gap_for(&prior, &obs, &leaky, &lik, GridSpec::default_for(&prior)?)?;
    checks.push(Check::new("violation_detector_gap", leak_gap, DETECTOR_MIN_GAP, Bound::Above));

    Ok(VerifyReport { checks })
}
