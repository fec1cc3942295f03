//! Seeded Monte Carlo reproductions of the learning-curve experiments.
//!
//! Every trial draws from its own ChaCha stream keyed by
//! `(master_seed, purpose, rho, n, trial)`, so trials can run in any order
//! on any number of threads and still produce bit-identical reports.
//! Reductions always walk trials in index order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugate::{
    chain_update, condition_psi_on_theta, log_density_1d, marginal_psi, semi_supervised_update,
    supervised_update, Gaussian1,
};
use crate::error::{Error, Result};
use crate::model::{
    sufficient_stats, transform_labeled, LabeledSample, LikelihoodSpec, ObservationSet, PriorSpec,
    SufficientStats,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Unsupervised,
    Supervised,
    SemiSupervised,
    Trajectory,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Unsupervised => "unsupervised",
            Mode::Supervised => "supervised",
            Mode::SemiSupervised => "semi_supervised",
            Mode::Trajectory => "trajectory",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "unsupervised" => Mode::Unsupervised,
            "supervised" => Mode::Supervised,
            "semi_supervised" => Mode::SemiSupervised,
            "trajectory" => Mode::Trajectory,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueParams {
    pub theta_star: f64,
    pub psi_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Marginal prior moments; `rho` is replaced by each entry of `rho_list`.
    pub prior: PriorSpec<f64>,
    pub lik: LikelihoodSpec<f64>,
    pub rho_list: Vec<f64>,
    pub n_list: Vec<usize>,
    /// `M = round(ratio * N)`.
    pub m_ratio_list: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    /// Fixed truth for the unsupervised curve and the trajectories.
    pub true_params: TrueParams,
    pub psi_curve_min: f64,
    pub psi_curve_max: f64,
    pub psi_curve_points: usize,
    /// Cause-only sample size for the finite-M check of the unsupervised curve.
    pub finite_m: usize,
}

impl ExperimentConfig {
    pub fn defaults(mode: Mode) -> Self {
        let sweep_rhos = vec![0.0, 0.3, 0.6, 0.9];
        let sweep_ns = vec![0, 1, 2, 5, 10, 20, 50, 100];
        let (rho_list, n_list, m_ratio_list, trials) = match mode {
            Mode::Unsupervised => (vec![0.75], vec![0], vec![0.0], 1),
            Mode::Supervised => (sweep_rhos, sweep_ns, vec![0.0], 10_000),
            Mode::SemiSupervised => (sweep_rhos, sweep_ns, vec![0.1, 1.0, 10.0], 10_000),
            Mode::Trajectory => (
                sweep_rhos,
                vec![0, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10_000],
                vec![0.0],
                1000,
            ),
        };
        let true_params = match mode {
            Mode::Unsupervised => TrueParams {
                theta_star: 1.0,
                psi_star: 0.0,
            },
            _ => TrueParams {
                theta_star: 1.0,
                psi_star: -3.0,
            },
        };
        Self {
            mode,
            prior: PriorSpec::standard(0.0),
            lik: LikelihoodSpec::reference(),
            rho_list,
            n_list,
            m_ratio_list,
            trials,
            master_seed: 0,
            true_params,
            psi_curve_min: -4.0,
            psi_curve_max: 4.0,
            psi_curve_points: 161,
            finite_m: 1_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.prior
            .validate()
            .map_err(|e| Error::validation("prior", e.to_string()))?;
        if self.trials < 1 {
            return Err(Error::validation("trials", "must be >= 1"));
        }
        if self.rho_list.is_empty() {
            return Err(Error::validation("rho_list", "must not be empty"));
        }
        if let Some(r) = self.rho_list.iter().find(|r| !(r.abs() < 1.0)) {
            return Err(Error::validation(
                "rho_list",
                format!("|rho| < 1 required, got {r}"),
            ));
        }
        if self.n_list.is_empty() {
            return Err(Error::validation("n_list", "must not be empty"));
        }
        if self.n_list.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::validation("n_list", "must be sorted ascending"));
        }
        if self.m_ratio_list.is_empty() {
            return Err(Error::validation("m_ratio_list", "must not be empty"));
        }
        if let Some(r) = self.m_ratio_list.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::validation(
                "m_ratio_list",
                format!("ratios must be finite and >= 0, got {r}"),
            ));
        }
        if self.mode == Mode::Supervised && self.m_ratio_list != [0.0] {
            return Err(Error::validation(
                "m_ratio_list",
                "supervised runs use m_ratio_list = [0]",
            ));
        }
        if !(self.true_params.theta_star.is_finite() && self.true_params.psi_star.is_finite()) {
            return Err(Error::validation("theta_star/psi_star", "must be finite"));
        }
        if !(self.psi_curve_min.is_finite()
            && self.psi_curve_max.is_finite()
            && self.psi_curve_max > self.psi_curve_min)
        {
            return Err(Error::validation("psi_curve_min/psi_curve_max", "need finite min < max"));
        }
        if self.psi_curve_points < 2 {
            return Err(Error::validation("psi_curve_points", "must be >= 2"));
        }
        Ok(())
    }

    pub fn m_for(ratio: f64, n: usize) -> usize {
        (ratio * n as f64).round().max(0.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub rho: f64,
    pub psi: f64,
    pub prior_density: f64,
    pub posterior_density: f64,
    pub finite_m_density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikRow {
    pub rho: f64,
    pub n: usize,
    pub m: usize,
    pub mean_loglik: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub rho: f64,
    pub n: usize,
    pub mean_theta: f64,
    pub mean_psi: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReportBody {
    Curves(Vec<CurveRow>),
    LogLik(Vec<LogLikRow>),
    Trajectory(Vec<TrajectoryRow>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub version: &'static str,
    pub body: ReportBody,
}

impl ExperimentReport {
    fn new(config: &ExperimentConfig, body: ReportBody) -> Self {
        Self {
            config: config.clone(),
            version: env!("CARGO_PKG_VERSION"),
            body,
        }
    }

    pub fn loglik_rows(&self) -> &[LogLikRow] {
        match &self.body {
            ReportBody::LogLik(r) => r,
            _ => &[],
        }
    }

    pub fn trajectory_rows(&self) -> &[TrajectoryRow] {
        match &self.body {
            ReportBody::Trajectory(r) => r,
            _ => &[],
        }
    }

    pub fn curve_rows(&self) -> &[CurveRow] {
        match &self.body {
            ReportBody::Curves(r) => r,
            _ => &[],
        }
    }
}

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Truth = 1,
    Labeled = 2,
    Unlabeled = 3,
    Trajectory = 4,
    Verify = 5,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for one `(purpose, rho, n, trial)` cell.
pub fn stream(master_seed: u64, purpose: Purpose, rho: f64, n: usize, trial: usize) -> ChaCha8Rng {
    let mut state = master_seed;
    let mut h = splitmix64(&mut state);
    for word in [purpose as u64, rho.to_bits(), n as u64, trial as u64] {
        state = h ^ word;
        h = splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, var: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + var.sqrt() * z
}

/// Truth drawn from the product of the prior marginals; `rho` is ignored.
pub fn draw_true_params<R: Rng + ?Sized>(rng: &mut R, prior: &PriorSpec<f64>) -> TrueParams {
    let theta_star = normal(rng, prior.mean_theta, prior.var_theta);
    let psi_star = normal(rng, prior.mean_psi, prior.var_psi);
    TrueParams {
        theta_star,
        psi_star,
    }
}

pub fn draw_labeled<R: Rng + ?Sized>(
    rng: &mut R,
    tp: &TrueParams,
    lik: &LikelihoodSpec<f64>,
    n: usize,
) -> Vec<LabeledSample<f64>> {
    (0..n)
        .map(|_| {
            let x = normal(rng, tp.theta_star, lik.var_x());
            let eta = normal(rng, tp.psi_star, lik.var_eta());
            LabeledSample { x, y: x + eta }
        })
        .collect()
}

/// Draws `m` full `(x, eta)` pairs and keeps only the causes.
pub fn draw_unlabeled<R: Rng + ?Sized>(
    rng: &mut R,
    tp: &TrueParams,
    lik: &LikelihoodSpec<f64>,
    m: usize,
) -> Vec<f64> {
    (0..m)
        .map(|_| {
            let x = normal(rng, tp.theta_star, lik.var_x());
            let _eta = normal(rng, tp.psi_star, lik.var_eta());
            x
        })
        .collect()
}

pub fn draw_observations<R: Rng + ?Sized>(
    rng: &mut R,
    tp: &TrueParams,
    lik: &LikelihoodSpec<f64>,
    n: usize,
    m: usize,
) -> ObservationSet<f64> {
    let labeled = draw_labeled(rng, tp, lik, n);
    let unlabeled_causes = draw_unlabeled(rng, tp, lik, m);
    ObservationSet {
        labeled,
        unlabeled_causes,
    }
}

fn require_mode(cfg: &ExperimentConfig, mode: Mode) -> Result<()> {
    cfg.validate()?;
    if cfg.mode != mode {
        return Err(Error::validation(
            "mode",
            format!("expected {}, got {}", mode.name(), cfg.mode.name()),
        ));
    }
    Ok(())
}

fn gaussian_density(g: &Gaussian1<f64>, x: f64) -> f64 {
    log_density_1d(g, x).exp()
}

fn psi_grid(cfg: &ExperimentConfig) -> impl Iterator<Item = f64> + '_ {
    let k = cfg.psi_curve_points;
    let step = (cfg.psi_curve_max - cfg.psi_curve_min) / (k - 1) as f64;
    (0..k).map(move |i| cfg.psi_curve_min + step * i as f64)
}

/// Mechanism beliefs after unlimited cause-only data: prior marginal vs
/// the prior conditioned on the true cause parameter.
pub fn run_unsupervised(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    require_mode(cfg, Mode::Unsupervised)?;
    let theta_star = cfg.true_params.theta_star;
    let mut rows = Vec::new();
    for &rho in &cfg.rho_list {
        let prior = cfg.prior.with_rho(rho).to_gaussian()?;
        let marginal = marginal_psi(&prior);
        let limit = condition_psi_on_theta(&prior, theta_star);
        let finite = marginal_psi(&semi_supervised_update(&prior, cfg.finite_m, theta_star, &cfg.lik)?);
        for psi in psi_grid(cfg) {
            rows.push(CurveRow {
                rho,
                psi,
                prior_density: gaussian_density(&marginal, psi),
                posterior_density: gaussian_density(&limit, psi),
                finite_m_density: gaussian_density(&finite, psi),
            });
        }
    }
    Ok(ExperimentReport::new(cfg, ReportBody::Curves(rows)))
}

/// Total-variation distance between two univariate Gaussians by midpoint
/// quadrature over +-12 standard deviations of the wider one.
pub fn gaussian_tv(a: &Gaussian1<f64>, b: &Gaussian1<f64>) -> f64 {
    let sd = a.var.max(b.var).sqrt();
    let lo = a.mean.min(b.mean) - 12.0 * sd;
    let hi = a.mean.max(b.mean) + 12.0 * sd;
    let cells = 200_000;
    let h = (hi - lo) / cells as f64;
    let s: f64 = (0..cells)
        .map(|i| {
            let x = lo + (i as f64 + 0.5) * h;
            (gaussian_density(a, x) - gaussian_density(b, x)).abs()
        })
        .sum();
    0.5 * s * h
}

/// TV distance between the finite-M mechanism marginal and its M -> infinity
/// limit, for one `rho`.
pub fn finite_m_tv(cfg: &ExperimentConfig, rho: f64) -> Result<f64> {
    let prior = cfg.prior.with_rho(rho).to_gaussian()?;
    let theta_star = cfg.true_params.theta_star;
    let limit = condition_psi_on_theta(&prior, theta_star);
    let finite = marginal_psi(&semi_supervised_update(&prior, cfg.finite_m, theta_star, &cfg.lik)?);
    Ok(gaussian_tv(&limit, &finite))
}

/// Per-trial draw shared by the supervised and semi-supervised runs.
struct TrialData {
    truth: TrueParams,
    stats: SufficientStats<f64>,
    /// Running means of the cause-only stream, indexed by prefix length.
    unlabeled_prefix_means: Vec<f64>,
}

fn draw_trial(cfg: &ExperimentConfig, rho: f64, n: usize, trial: usize, m_max: usize) -> TrialData {
    let seed = cfg.master_seed;
    let truth = draw_true_params(&mut stream(seed, Purpose::Truth, rho, n, trial), &cfg.prior);
    let labeled = draw_labeled(&mut stream(seed, Purpose::Labeled, rho, n, trial), &truth, &cfg.lik, n);
    let stats = sufficient_stats(&transform_labeled(&labeled));
    let causes = draw_unlabeled(&mut stream(seed, Purpose::Unlabeled, rho, n, trial), &truth, &cfg.lik, m_max);
    let mut unlabeled_prefix_means = Vec::with_capacity(m_max + 1);
    unlabeled_prefix_means.push(0.0);
    let mut sum = 0.0;
    for (k, x) in causes.iter().enumerate() {
        sum += x;
        unlabeled_prefix_means.push(sum / (k + 1) as f64);
    }
    TrialData {
        truth,
        stats,
        unlabeled_prefix_means,
    }
}

fn trial_loglik(cfg: &ExperimentConfig, rho: f64, data: &TrialData, m: usize) -> Result<f64> {
    let prior = cfg.prior.with_rho(rho).to_gaussian()?;
    let post = chain_update(&prior, m, data.unlabeled_prefix_means[m], &data.stats, &cfg.lik)?;
    Ok(log_density_1d(&marginal_psi(&post), data.truth.psi_star))
}

/// Log-likelihood of the true mechanism parameter for one trial, recomputed
/// from the seeds alone.
pub fn trial_value(cfg: &ExperimentConfig, rho: f64, n: usize, m: usize, trial: usize) -> Result<f64> {
    let data = draw_trial(cfg, rho, n, trial, m);
    trial_loglik(cfg, rho, &data, m)
}

pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (k - 1) as f64).sqrt() / (k as f64).sqrt())
}

/// One value per trial and per entry of `ms`, trials in index order.
fn loglik_cells(cfg: &ExperimentConfig, rho: f64, n: usize, ms: &[usize]) -> Result<Vec<Vec<f64>>> {
    let m_max = ms.iter().copied().max().unwrap_or(0);
    let per_trial: Vec<Vec<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let data = draw_trial(cfg, rho, n, t, m_max);
            ms.iter().map(|&m| trial_loglik(cfg, rho, &data, m)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..ms.len())
        .map(|k| per_trial.iter().map(|v| v[k]).collect())
        .collect())
}

fn loglik_rows(cfg: &ExperimentConfig) -> Result<Vec<LogLikRow>> {
    let mut rows = Vec::new();
    for &rho in &cfg.rho_list {
        for &n in &cfg.n_list {
            let ms: Vec<usize> = cfg.m_ratio_list.iter().map(|&r| ExperimentConfig::m_for(r, n)).collect();
            for (values, &m) in loglik_cells(cfg, rho, n, &ms)?.iter().zip(&ms) {
                let (mean_loglik, stderr) = mean_and_stderr(values);
                rows.push(LogLikRow {
                    rho,
                    n,
                    m,
                    mean_loglik,
                    stderr,
                    trials: cfg.trials,
                });
            }
        }
    }
    Ok(rows)
}

/// Learning curves from labeled data only.
pub fn run_supervised(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    require_mode(cfg, Mode::Supervised)?;
    Ok(ExperimentReport::new(cfg, ReportBody::LogLik(loglik_rows(cfg)?)))
}

/// Learning curves with cause-only data added before the labeled update.
/// All M values of one trial share its truth and labeled sample.
pub fn run_semi_supervised(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    require_mode(cfg, Mode::SemiSupervised)?;
    Ok(ExperimentReport::new(cfg, ReportBody::LogLik(loglik_rows(cfg)?)))
}

/// Posterior means along one sequentially grown dataset per trial,
/// averaged across trials.
pub fn run_trajectory(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    require_mode(cfg, Mode::Trajectory)?;
    let truth = cfg.true_params;
    let n_max = *cfg.n_list.last().expect("validated non-empty");
    let mut rows = Vec::new();
    for &rho in &cfg.rho_list {
        let prior = cfg.prior.with_rho(rho).to_gaussian()?;
        let per_trial: Vec<Vec<[f64; 2]>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream(cfg.master_seed, Purpose::Trajectory, rho, 0, t);
                let mut points = Vec::with_capacity(cfg.n_list.len());
                let (mut sx, mut se) = (0.0, 0.0);
                let mut targets = cfg.n_list.iter().peekable();
                for k in 0..=n_max {
                    if k > 0 {
                        let s = &draw_labeled(&mut rng, &truth, &cfg.lik, 1)[0];
                        sx += s.x;
                        se += s.y - s.x;
                    }
                    while targets.peek() == Some(&&k) {
                        targets.next();
                        let stats = if k == 0 {
                            SufficientStats::empty()
                        } else {
                            SufficientStats::new(k, sx / k as f64, se / k as f64)
                        };
                        points.push(supervised_update(&prior, &stats, &cfg.lik)?.mean());
                    }
                }
                Ok(points)
            })
            .collect::<Result<_>>()?;
        for (idx, &n) in cfg.n_list.iter().enumerate() {
            let (st, sp) = per_trial
                .iter()
                .fold((0.0, 0.0), |(a, b), p| (a + p[idx][0], b + p[idx][1]));
            rows.push(TrajectoryRow {
                rho,
                n,
                mean_theta: st / cfg.trials as f64,
                mean_psi: sp / cfg.trials as f64,
                trials: cfg.trials,
            });
        }
    }
    Ok(ExperimentReport::new(cfg, ReportBody::Trajectory(rows)))
}

/// Polyline length of one `rho`'s averaged trajectory.
pub fn path_length(rows: &[TrajectoryRow], rho: f64) -> f64 {
    let pts: Vec<_> = rows.iter().filter(|r| r.rho == rho).collect();
    pts.windows(2)
        .map(|w| (w[1].mean_theta - w[0].mean_theta).hypot(w[1].mean_psi - w[0].mean_psi))
        .sum()
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.mode {
        Mode::Unsupervised => run_unsupervised(cfg),
        Mode::Supervised => run_supervised(cfg),
        Mode::SemiSupervised => run_semi_supervised(cfg),
        Mode::Trajectory => run_trajectory(cfg),
    }
}
