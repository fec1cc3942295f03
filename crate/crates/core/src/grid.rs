//! Discretized joint densities over a rectangular `(theta, psi)` grid.
//!
//! Values live at cell centers of a uniform grid and integrals use the
//! midpoint rule. Everything is kept in log-space until the final
//! summation; cells whose log-density falls to the floor count as zero.
//! Cell fills run in parallel, but every reduction walks the cells in a
//! fixed row-major order so results do not depend on scheduling.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{log_likelihood, unlabeled_log_likelihood, Gaussian2, LikelihoodSpec, ObservationSet};
use crate::report::fmt_float;
use crate::scalar::Scalar;

/// Fraction of posterior mass allowed in the outermost ring of cells.
pub const EDGE_MASS_LIMIT: f64 = 1e-3;
/// Rows lighter than this are skipped by conditional comparisons.
pub const ROW_MASS_THRESHOLD: f64 = 1e-8;
pub const DEFAULT_CELLS: usize = 401;
pub const DEFAULT_HALF_WIDTH_SD: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub theta_min: T,
    pub theta_max: T,
    pub psi_min: T,
    pub psi_max: T,
    pub n_theta: usize,
    pub n_psi: usize,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(theta: (T, T), psi: (T, T), n_theta: usize, n_psi: usize) -> Result<Self> {
        if !(theta.0.is_finite() && theta.1.is_finite() && theta.1 > theta.0) {
            return Err(Error::invalid("theta range", "need finite min < max"));
        }
        if !(psi.0.is_finite() && psi.1.is_finite() && psi.1 > psi.0) {
            return Err(Error::invalid("psi range", "need finite min < max"));
        }
        if n_theta < 2 || n_psi < 2 {
            return Err(Error::invalid("cell counts", "need at least 2 cells per axis"));
        }
        Ok(Self {
            theta_min: theta.0,
            theta_max: theta.1,
            psi_min: psi.0,
            psi_max: psi.1,
            n_theta,
            n_psi,
        })
    }

    /// Square-celled grid spanning `mean +- half_width_sd * sd` on each axis.
    pub fn around(g: &Gaussian2<T>, half_width_sd: T, cells: usize) -> Result<Self> {
        let m = g.mean();
        let c = g.cov();
        let (st, sp) = (c.xx.sqrt() * half_width_sd, c.yy.sqrt() * half_width_sd);
        Self::new((m[0] - st, m[0] + st), (m[1] - sp, m[1] + sp), cells, cells)
    }

    /// The default grid for a Gaussian prior.
    pub fn default_for(prior: &Gaussian2<T>) -> Result<Self> {
        Self::around(prior, T::lit(DEFAULT_HALF_WIDTH_SD), DEFAULT_CELLS)
    }

    pub fn d_theta(&self) -> T {
        (self.theta_max - self.theta_min) / T::lit(self.n_theta as f64)
    }

    pub fn d_psi(&self) -> T {
        (self.psi_max - self.psi_min) / T::lit(self.n_psi as f64)
    }

    pub fn cell_area(&self) -> T {
        self.d_theta() * self.d_psi()
    }

    pub fn max_cell_width(&self) -> T {
        self.d_theta().max(self.d_psi())
    }

    pub fn theta_at(&self, i: usize) -> T {
        self.theta_min + (T::lit(i as f64) + T::half()) * self.d_theta()
    }

    pub fn psi_at(&self, j: usize) -> T {
        self.psi_min + (T::lit(j as f64) + T::half()) * self.d_psi()
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_psi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same extent with cell widths halved.
    pub fn refined(&self) -> Self {
        Self {
            n_theta: self.n_theta * 2,
            n_psi: self.n_psi * 2,
            ..*self
        }
    }

    /// Doubles the extent on both axes about the center, keeping widths.
    pub fn widened(&self) -> Self {
        let half = T::half();
        let (ct, cp) = (
            half * (self.theta_min + self.theta_max),
            half * (self.psi_min + self.psi_max),
        );
        let (wt, wp) = (self.theta_max - self.theta_min, self.psi_max - self.psi_min);
        Self {
            theta_min: ct - wt,
            theta_max: ct + wt,
            psi_min: cp - wp,
            psi_max: cp + wp,
            n_theta: self.n_theta * 2,
            n_psi: self.n_psi * 2,
        }
    }
}

/// Log prior density over `(theta, psi)`; need not be normalized.
pub trait PriorDensity<T>: Sync {
    fn log_density(&self, theta: T, psi: T) -> T;
}

impl<T: Scalar> PriorDensity<T> for Gaussian2<T> {
    fn log_density(&self, theta: T, psi: T) -> T {
        Gaussian2::log_density(self, theta, psi)
    }
}

/// Wraps any closure as a prior.
pub struct FnPrior<F>(pub F);

impl<T, F> PriorDensity<T> for FnPrior<F>
where
    F: Fn(T, T) -> T + Sync,
{
    fn log_density(&self, theta: T, psi: T) -> T {
        (self.0)(theta, psi)
    }
}

/// Finite mixture of bivariate Gaussians. Weights are normalized.
#[derive(Debug, Clone)]
pub struct GaussianMixture<T> {
    log_weights: Vec<T>,
    components: Vec<Gaussian2<T>>,
}

impl<T: Scalar> GaussianMixture<T> {
    pub fn new(weighted: Vec<(T, Gaussian2<T>)>) -> Result<Self> {
        if weighted.is_empty() {
            return Err(Error::invalid("mixture", "needs at least one component"));
        }
        if weighted.iter().any(|(w, _)| !(*w > T::zero() && w.is_finite())) {
            return Err(Error::invalid("mixture weights", "must be finite and > 0"));
        }
        let total: T = weighted.iter().map(|(w, _)| *w).sum();
        let (log_weights, components) = weighted
            .into_iter()
            .map(|(w, g)| ((w / total).ln(), g))
            .unzip();
        Ok(Self {
            log_weights,
            components,
        })
    }
}

impl<T: Scalar> PriorDensity<T> for GaussianMixture<T> {
    fn log_density(&self, theta: T, psi: T) -> T {
        let terms: Vec<T> = self
            .log_weights
            .iter()
            .zip(&self.components)
            .map(|(lw, g)| *lw + g.log_density(theta, psi))
            .collect();
        log_sum_exp(&terms)
    }
}

/// Likelihood of an observation set as a function of both parameters.
///
/// A lawful model ignores `psi` in [`ObservationModel::unlabeled_log_lik`];
/// the trait still passes it so that violating models can be expressed
/// and detected.
pub trait ObservationModel<T>: Sync {
    fn labeled_log_lik(&self, pairs: &[(T, T)], theta: T, psi: T) -> T;
    fn unlabeled_log_lik(&self, causes: &[T], theta: T, psi: T) -> T;
}

impl<T: Scalar> ObservationModel<T> for LikelihoodSpec<T> {
    fn labeled_log_lik(&self, pairs: &[(T, T)], theta: T, psi: T) -> T {
        log_likelihood(pairs, theta, psi, self)
    }

    fn unlabeled_log_lik(&self, causes: &[T], theta: T, _psi: T) -> T {
        unlabeled_log_likelihood(causes, theta, self)
    }
}

/// Counterexample model: treats every unlabeled cause as if it were also
/// a noise observation, so cause-only data leaks into `psi`.
#[derive(Debug, Clone, Copy)]
pub struct LeakyLikelihood<T>(pub LikelihoodSpec<T>);

impl<T: Scalar> ObservationModel<T> for LeakyLikelihood<T> {
    fn labeled_log_lik(&self, pairs: &[(T, T)], theta: T, psi: T) -> T {
        log_likelihood(pairs, theta, psi, &self.0)
    }

    fn unlabeled_log_lik(&self, causes: &[T], theta: T, psi: T) -> T {
        let leaked: Vec<(T, T)> = causes.iter().map(|&x| (x, x)).collect();
        log_likelihood(&leaked, theta, psi, &self.0)
    }
}

/// Log-density values on a grid, row-major with `theta` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity<T> {
    spec: GridSpec<T>,
    log_values: Vec<T>,
    normalized: bool,
}

impl<T: Scalar> GridDensity<T> {
    /// Evaluates an unnormalized log-density at every cell center.
    pub fn from_log_fn<F>(spec: GridSpec<T>, f: F) -> Self
    where
        F: Fn(T, T) -> T + Sync,
    {
        let log_values = (0..spec.n_theta)
            .into_par_iter()
            .flat_map_iter(|i| {
                let theta = spec.theta_at(i);
                let f = &f;
                (0..spec.n_psi).map(move |j| f(theta, spec.psi_at(j)))
            })
            .collect();
        Self {
            spec,
            log_values,
            normalized: false,
        }
    }

    pub fn spec(&self) -> &GridSpec<T> {
        &self.spec
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn log_value(&self, i: usize, j: usize) -> T {
        self.log_values[i * self.spec.n_psi + j]
    }

    pub fn log_values(&self) -> &[T] {
        &self.log_values
    }

    /// Density at a cell; zero at or below the log floor.
    pub fn density(&self, i: usize, j: usize) -> T {
        floor_exp(self.log_value(i, j))
    }

    fn row(&self, i: usize) -> &[T] {
        let n = self.spec.n_psi;
        &self.log_values[i * n..(i + 1) * n]
    }

    /// Rescales so that the midpoint-rule integral is one, then clamps at
    /// the log floor.
    pub fn normalize(&mut self) -> Result<()> {
        let max = self
            .log_values
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max);
        if !max.is_finite() {
            return Err(Error::invalid("grid density", "no finite mass on grid"));
        }
        let sum: T = self.log_values.iter().map(|&l| (l - max).exp()).sum();
        let log_norm = max + (sum * self.spec.cell_area()).ln();
        let floor = T::log_floor();
        for l in &mut self.log_values {
            let v = *l - log_norm;
            *l = if v.is_nan() || v < floor { floor } else { v };
        }
        self.normalized = true;
        Ok(())
    }

    pub fn total_mass(&self) -> T {
        let s: T = self.log_values.iter().map(|&l| floor_exp(l)).sum();
        s * self.spec.cell_area()
    }

    /// Probability mass in the outermost ring of cells.
    pub fn edge_mass(&self) -> T {
        let (nt, np) = (self.spec.n_theta, self.spec.n_psi);
        let mut s = T::zero();
        for i in 0..nt {
            for j in 0..np {
                if i == 0 || j == 0 || i == nt - 1 || j == np - 1 {
                    s = s + self.density(i, j);
                }
            }
        }
        s * self.spec.cell_area()
    }

    /// Marginal density of `theta` at each row center.
    pub fn marginal_theta(&self) -> Vec<T> {
        let dp = self.spec.d_psi();
        (0..self.spec.n_theta)
            .map(|i| self.row(i).iter().map(|&l| floor_exp(l)).sum::<T>() * dp)
            .collect()
    }

    /// Marginal density of `psi` at each column center.
    pub fn marginal_psi(&self) -> Vec<T> {
        let dt = self.spec.d_theta();
        let mut out = vec![T::zero(); self.spec.n_psi];
        for i in 0..self.spec.n_theta {
            for (o, &l) in out.iter_mut().zip(self.row(i)) {
                *o = *o + floor_exp(l);
            }
        }
        out.into_iter().map(|s| s * dt).collect()
    }

    /// Outer product of the two marginals, on the same grid.
    pub fn product_of_marginals(&self) -> Self {
        let (pt, pp) = (self.marginal_theta(), self.marginal_psi());
        let floor = T::log_floor();
        let log_values = pt
            .iter()
            .flat_map(|&a| {
                pp.iter().map(move |&b| {
                    let v = (a * b).ln();
                    if v.is_nan() || v < floor {
                        floor
                    } else {
                        v
                    }
                })
            })
            .collect();
        Self {
            spec: self.spec,
            log_values,
            normalized: true,
        }
    }

    pub fn moments(&self) -> GridMoments<T> {
        let s = &self.spec;
        let area = s.cell_area();
        let (mut m0, mut mt, mut mp) = (T::zero(), T::zero(), T::zero());
        for i in 0..s.n_theta {
            for j in 0..s.n_psi {
                let p = self.density(i, j);
                m0 = m0 + p;
                mt = mt + p * s.theta_at(i);
                mp = mp + p * s.psi_at(j);
            }
        }
        let (mt, mp) = (mt / m0, mp / m0);
        let (mut vt, mut vp, mut ctp) = (T::zero(), T::zero(), T::zero());
        for i in 0..s.n_theta {
            let dt = s.theta_at(i) - mt;
            for j in 0..s.n_psi {
                let p = self.density(i, j);
                let dp = s.psi_at(j) - mp;
                vt = vt + p * dt * dt;
                vp = vp + p * dp * dp;
                ctp = ctp + p * dt * dp;
            }
        }
        GridMoments {
            mass: m0 * area,
            mean_theta: mt,
            mean_psi: mp,
            var_theta: vt / m0,
            var_psi: vp / m0,
            cov_theta_psi: ctp / m0,
        }
    }

    /// Writes `theta,psi,density` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["theta", "psi", "density"])?;
        for i in 0..self.spec.n_theta {
            for j in 0..self.spec.n_psi {
                w.write_record([
                    fmt_float(self.spec.theta_at(i).as_f64()),
                    fmt_float(self.spec.psi_at(j).as_f64()),
                    fmt_float(self.density(i, j).as_f64()),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// Midpoint-rule moments of a grid density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMoments<T> {
    pub mass: T,
    pub mean_theta: T,
    pub mean_psi: T,
    pub var_theta: T,
    pub var_psi: T,
    pub cov_theta_psi: T,
}

#[inline]
fn floor_exp<T: Scalar>(l: T) -> T {
    if l <= T::log_floor() {
        T::zero()
    } else {
        l.exp()
    }
}

pub fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|&v| (v - max).exp()).sum::<T>().ln()
}

/// Joint posterior on a grid:
/// log prior + labeled log-likelihood + unlabeled log-likelihood, normalized.
///
/// Fails with [`Error::BoundaryMass`] when the edge cells hold more than
/// [`EDGE_MASS_LIMIT`] of the mass.
pub fn grid_posterior<T, P, L>(
    prior: &P,
    obs: &ObservationSet<T>,
    model: &L,
    spec: GridSpec<T>,
) -> Result<GridDensity<T>>
where
    T: Scalar,
    P: PriorDensity<T> + ?Sized,
    L: ObservationModel<T> + ?Sized,
{
    let pairs = obs.pairs();
    let causes = &obs.unlabeled_causes;
    let mut g = GridDensity::from_log_fn(spec, |theta, psi| {
        prior.log_density(theta, psi)
            + model.labeled_log_lik(&pairs, theta, psi)
            + model.unlabeled_log_lik(causes, theta, psi)
    });
    g.normalize()?;
    let edge = g.edge_mass();
    if edge > T::lit(EDGE_MASS_LIMIT) {
        return Err(Error::BoundaryMass {
            fraction: edge.as_f64(),
            limit: EDGE_MASS_LIMIT,
        });
    }
    Ok(g)
}

/// [`grid_posterior`], widening the grid (at fixed cell width) up to
/// `max_widenings` times while the boundary-mass check fails.
pub fn grid_posterior_auto<T, P, L>(
    prior: &P,
    obs: &ObservationSet<T>,
    model: &L,
    spec: GridSpec<T>,
    max_widenings: usize,
) -> Result<GridDensity<T>>
where
    T: Scalar,
    P: PriorDensity<T> + ?Sized,
    L: ObservationModel<T> + ?Sized,
{
    let mut spec = spec;
    let mut attempt = 0;
    loop {
        match grid_posterior(prior, obs, model, spec) {
            Err(Error::BoundaryMass { .. }) if attempt < max_widenings => {
                spec = spec.widened();
                attempt += 1;
            }
            other => return other,
        }
    }
}

fn require_normalized<T: Scalar>(g: &GridDensity<T>) -> Result<()> {
    if g.normalized {
        Ok(())
    } else {
        Err(Error::GridMismatch("density must be normalized".into()))
    }
}

/// Total-variation distance between a density and the product of its
/// marginals. Zero iff the grid density factorizes.
pub fn factorization_gap<T: Scalar>(g: &GridDensity<T>) -> T {
    let prod = g.product_of_marginals();
    let s = &g.spec;
    let mut acc = T::zero();
    for i in 0..s.n_theta {
        for j in 0..s.n_psi {
            acc = acc + (g.density(i, j) - prod.density(i, j)).abs();
        }
    }
    (T::half() * acc * s.cell_area()).min(T::one())
}

/// Outcome of a row-wise conditional comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceGap<T> {
    /// Largest total-variation distance over compared rows.
    pub gap: T,
    /// Row index achieving it.
    pub worst_row: Option<usize>,
    pub rows_compared: usize,
    pub rows_skipped: usize,
    pub row_mass_threshold: f64,
}

/// Max over `theta` rows of the TV distance between the `psi`-conditionals
/// of two grids sharing one spec.
pub fn conditional_slice_gap<T: Scalar>(with_dx: &GridDensity<T>, without_dx: &GridDensity<T>) -> Result<T> {
    conditional_slice_report(with_dx, without_dx).map(|r| r.gap)
}

/// [`conditional_slice_gap`] with row bookkeeping.
pub fn conditional_slice_report<T: Scalar>(
    with_dx: &GridDensity<T>,
    without_dx: &GridDensity<T>,
) -> Result<SliceGap<T>> {
    if with_dx.spec != without_dx.spec {
        return Err(Error::GridMismatch(
            "conditional comparison needs identical grid specs".into(),
        ));
    }
    require_normalized(with_dx)?;
    require_normalized(without_dx)?;
    let s = &with_dx.spec;
    let threshold = T::lit(ROW_MASS_THRESHOLD);
    let (ma, mb) = (with_dx.marginal_theta(), without_dx.marginal_theta());
    let mut report = SliceGap {
        gap: T::zero(),
        worst_row: None,
        rows_compared: 0,
        rows_skipped: 0,
        row_mass_threshold: ROW_MASS_THRESHOLD,
    };
    for i in 0..s.n_theta {
        let dt = s.d_theta();
        if ma[i] * dt <= threshold || mb[i] * dt <= threshold {
            report.rows_skipped += 1;
            continue;
        }
        report.rows_compared += 1;
        let (ra, rb) = (with_dx.row(i), without_dx.row(i));
        let (za, zb) = (log_sum_exp(ra), log_sum_exp(rb));
        let tv = T::half()
            * ra.iter()
                .zip(rb)
                .map(|(&a, &b)| ((a - za).exp() - (b - zb).exp()).abs())
                .sum::<T>();
        if tv > report.gap || report.worst_row.is_none() {
            report.gap = report.gap.max(tv);
            report.worst_row = Some(i);
        }
    }
    Ok(report)
}

/// Mutual information between `theta` and `psi` in nats.
pub fn grid_mutual_information<T: Scalar>(g: &GridDensity<T>) -> T {
    let s = &g.spec;
    let (pt, pp) = (g.marginal_theta(), g.marginal_psi());
    let floor = T::log_floor();
    let mut acc = T::zero();
    for i in 0..s.n_theta {
        for j in 0..s.n_psi {
            let l = g.log_value(i, j);
            let q = pt[i] * pp[j];
            if l <= floor || q <= T::zero() {
                continue;
            }
            acc = acc + l.exp() * (l - q.ln());
        }
    }
    let mi = acc * s.cell_area();
    if mi < T::zero() && mi > T::lit(-1e-9) {
        T::zero()
    } else {
        mi
    }
}
