//! Closed-form Gaussian belief updates.
//!
//! Labeled data adds `n * diag(1/var_x, 1/var_eta)` to the prior
//! precision. Cause-only data adds `m * diag(1/var_x, 0)`: the mechanism
//! row of the per-sample precision is masked, so unlabeled noise means are
//! never read.

use crate::error::{Error, Result};
use crate::linalg::{add2, Sym2};
use crate::model::{Gaussian2, LikelihoodSpec, SufficientStats};
use crate::scalar::Scalar;

/// Univariate Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1<T> {
    pub mean: T,
    pub var: T,
}

impl<T: Scalar> Gaussian1<T> {
    pub fn new(mean: T, var: T) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::invalid("mean", "must be finite"));
        }
        if !(var > T::zero() && var.is_finite()) {
            return Err(Error::invalid("var", format!("must be finite and > 0, got {var}")));
        }
        Ok(Self { mean, var })
    }

    pub fn log_density(&self, value: T) -> T {
        log_density_1d(self, value)
    }

    pub fn density(&self, value: T) -> T {
        log_density_1d(self, value).exp()
    }
}

/// Posterior from prior precision `p0`, prior mean, and a data
/// contribution `(precision, information vector)`.
fn combine<T: Scalar>(prior: &Gaussian2<T>, data_prec: Sym2<T>, data_info: [T; 2]) -> Result<Gaussian2<T>> {
    let prior_prec = prior.cov().inverse()?;
    let prec = prior_prec + data_prec;
    let cov = prec.inverse()?;
    let info = add2(data_info, prior_prec.mul_vec(prior.mean()));
    Gaussian2::new(cov.mul_vec(info), cov)
}

/// Posterior after `stats.n` labeled samples summarized by their means.
pub fn supervised_update<T: Scalar>(
    prior: &Gaussian2<T>,
    stats: &SufficientStats<T>,
    lik: &LikelihoodSpec<T>,
) -> Result<Gaussian2<T>> {
    if stats.n == 0 {
        return Ok(*prior);
    }
    prior.cov().check_nonsingular()?;
    let n = T::lit(stats.n as f64);
    let data_prec = lik.precision().scale(n);
    let data_info = data_prec.mul_vec([stats.mean_x, stats.mean_eta]);
    combine(prior, data_prec, data_info)
}

/// Posterior after `m` cause-only samples with mean `mean_x_unlabeled`.
pub fn semi_supervised_update<T: Scalar>(
    prior: &Gaussian2<T>,
    m: usize,
    mean_x_unlabeled: T,
    lik: &LikelihoodSpec<T>,
) -> Result<Gaussian2<T>> {
    if m == 0 {
        return Ok(*prior);
    }
    prior.cov().check_nonsingular()?;
    let masked = Sym2::diag(lik.var_x().recip(), T::zero());
    let data_prec = masked.scale(T::lit(m as f64));
    // second slot is a placeholder; the masked row zeroes it out
    let data_info = data_prec.mul_vec([mean_x_unlabeled, T::zero()]);
    combine(prior, data_prec, data_info)
}

/// Cause-only update followed by a labeled update.
pub fn chain_update<T: Scalar>(
    prior: &Gaussian2<T>,
    m: usize,
    mean_x_unlabeled: T,
    stats: &SufficientStats<T>,
    lik: &LikelihoodSpec<T>,
) -> Result<Gaussian2<T>> {
    let after_unlabeled = semi_supervised_update(prior, m, mean_x_unlabeled, lik)?;
    supervised_update(&after_unlabeled, stats, lik)
}

pub fn marginal_theta<T: Scalar>(g: &Gaussian2<T>) -> Gaussian1<T> {
    Gaussian1 {
        mean: g.mean()[0],
        var: g.cov().xx,
    }
}

pub fn marginal_psi<T: Scalar>(g: &Gaussian2<T>) -> Gaussian1<T> {
    Gaussian1 {
        mean: g.mean()[1],
        var: g.cov().yy,
    }
}

/// `p(psi | theta)` under the joint Gaussian `g`.
pub fn condition_psi_on_theta<T: Scalar>(g: &Gaussian2<T>, theta: T) -> Gaussian1<T> {
    let cov = g.cov();
    let mean = g.mean();
    let gain = cov.xy / cov.xx;
    Gaussian1 {
        mean: mean[1] + gain * (theta - mean[0]),
        var: cov.yy - gain * cov.xy,
    }
}

pub fn log_density_1d<T: Scalar>(g: &Gaussian1<T>, value: T) -> T {
    crate::model::log_normal(value, g.mean, g.var)
}
