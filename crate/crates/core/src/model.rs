//! Domain types, dataset transformation and likelihood evaluation.
//!
//! The generative model has a cause `x ~ N(theta, var_x)` and an additive
//! mechanism `y = x + eta` with `eta ~ N(psi, var_eta)`. Labeled pairs are
//! mapped to `(x, eta)` so that the likelihood factorizes into a cause
//! part depending only on `theta` and a mechanism part depending only on
//! `psi`. Unlabeled causes carry information about `theta` alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Sym2;
use crate::scalar::Scalar;

/// Bivariate Gaussian over `(theta, psi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2<T> {
    mean: [T; 2],
    cov: Sym2<T>,
}

impl<T: Scalar> Gaussian2<T> {
    pub fn new(mean: [T; 2], cov: Sym2<T>) -> Result<Self> {
        if !mean.iter().all(|m| m.is_finite()) {
            return Err(Error::invalid("mean", "entries must be finite"));
        }
        if !(cov.xx.is_finite() && cov.xy.is_finite() && cov.yy.is_finite()) {
            return Err(Error::invalid("cov", "entries must be finite"));
        }
        if !cov.is_positive_definite() {
            return Err(Error::invalid(
                "cov",
                format!(
                    "not positive definite (xx = {}, det = {})",
                    cov.xx,
                    cov.det()
                ),
            ));
        }
        Ok(Self { mean, cov })
    }

    pub fn standard() -> Self {
        Self {
            mean: [T::zero(); 2],
            cov: Sym2::identity(),
        }
    }

    pub fn mean(&self) -> [T; 2] {
        self.mean
    }

    pub fn cov(&self) -> Sym2<T> {
        self.cov
    }

    pub fn correlation(&self) -> T {
        self.cov.xy / (self.cov.xx * self.cov.yy).sqrt()
    }

    /// Joint log-density at `(theta, psi)`.
    pub fn log_density(&self, theta: T, psi: T) -> T {
        let det = self.cov.det();
        // precision = adj(cov) / det, evaluated without forming it
        let d = [theta - self.mean[0], psi - self.mean[1]];
        let adj = Sym2::new(self.cov.yy, -self.cov.xy, self.cov.xx);
        let maha = adj.quad_form(d) / det;
        -T::ln_2pi() - T::half() * det.ln() - T::half() * maha
    }
}

/// Prior parameterized by marginal moments and a correlation coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec<T> {
    pub mean_theta: T,
    pub mean_psi: T,
    pub var_theta: T,
    pub var_psi: T,
    pub rho: T,
}

impl<T: Scalar> PriorSpec<T> {
    /// Zero-mean, unit-variance prior with correlation `rho`.
    pub fn standard(rho: T) -> Self {
        Self {
            mean_theta: T::zero(),
            mean_psi: T::zero(),
            var_theta: T::one(),
            var_psi: T::one(),
            rho,
        }
    }

    pub fn with_rho(self, rho: T) -> Self {
        Self { rho, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_theta.is_finite() && self.mean_psi.is_finite()) {
            return Err(Error::invalid("prior mean", "must be finite"));
        }
        if !(self.var_theta > T::zero() && self.var_theta.is_finite()) {
            return Err(Error::invalid("var_theta", "must be finite and > 0"));
        }
        if !(self.var_psi > T::zero() && self.var_psi.is_finite()) {
            return Err(Error::invalid("var_psi", "must be finite and > 0"));
        }
        if !(self.rho.abs() < T::one()) {
            return Err(Error::invalid(
                "rho",
                format!("|rho| < 1 required, got {}", self.rho),
            ));
        }
        Ok(())
    }

    pub fn to_gaussian(&self) -> Result<Gaussian2<T>> {
        self.validate()?;
        let cross = self.rho * (self.var_theta * self.var_psi).sqrt();
        Gaussian2::new(
            [self.mean_theta, self.mean_psi],
            Sym2::new(self.var_theta, cross, self.var_psi),
        )
    }
}

/// Per-sample observation noise of `(x, eta)` given `(theta, psi)`.
/// Diagonal by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodSpec<T> {
    var_x: T,
    var_eta: T,
}

impl<T: Scalar> LikelihoodSpec<T> {
    pub fn new(var_x: T, var_eta: T) -> Result<Self> {
        if !(var_x > T::zero() && var_x.is_finite()) {
            return Err(Error::invalid("var_x", "must be finite and > 0"));
        }
        if !(var_eta > T::zero() && var_eta.is_finite()) {
            return Err(Error::invalid("var_eta", "must be finite and > 0"));
        }
        Ok(Self { var_x, var_eta })
    }

    /// Builds from a full covariance; any cross term is rejected.
    pub fn from_covariance(cov: Sym2<T>) -> Result<Self> {
        if cov.xy != T::zero() {
            return Err(Error::invalid(
                "likelihood covariance",
                "cause and noise must be independent (off-diagonal must be 0)",
            ));
        }
        Self::new(cov.xx, cov.yy)
    }

    pub fn var_x(&self) -> T {
        self.var_x
    }

    pub fn var_eta(&self) -> T {
        self.var_eta
    }

    pub fn covariance(&self) -> Sym2<T> {
        Sym2::diag(self.var_x, self.var_eta)
    }

    /// Per-sample precision `diag(1/var_x, 1/var_eta)`.
    pub fn precision(&self) -> Sym2<T> {
        Sym2::diag(self.var_x.recip(), self.var_eta.recip())
    }
}

impl LikelihoodSpec<f64> {
    /// `var_x = 3`, `var_eta = 1`.
    pub fn reference() -> Self {
        Self {
            var_x: 3.0,
            var_eta: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample<T> {
    pub x: T,
    pub y: T,
}

/// Labeled pairs plus cause-only realizations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationSet<T> {
    pub labeled: Vec<LabeledSample<T>>,
    pub unlabeled_causes: Vec<T>,
}

impl<T: Scalar> ObservationSet<T> {
    pub fn new(labeled: Vec<LabeledSample<T>>, unlabeled_causes: Vec<T>) -> Result<Self> {
        if !labeled.iter().all(|s| s.x.is_finite() && s.y.is_finite()) {
            return Err(Error::invalid("labeled", "all samples must be finite"));
        }
        if !unlabeled_causes.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("unlabeled_causes", "all values must be finite"));
        }
        Ok(Self {
            labeled,
            unlabeled_causes,
        })
    }

    pub fn empty() -> Self {
        Self {
            labeled: Vec::new(),
            unlabeled_causes: Vec::new(),
        }
    }

    /// Labeled pairs as `(x, eta)`.
    pub fn pairs(&self) -> Vec<(T, T)> {
        transform_labeled(&self.labeled)
    }
}

/// Sample count with mean cause and mean noise.
///
/// For `n == 0` both means are zero and must not be interpreted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SufficientStats<T> {
    pub n: usize,
    pub mean_x: T,
    pub mean_eta: T,
}

impl<T: Scalar> SufficientStats<T> {
    pub fn empty() -> Self {
        Self {
            n: 0,
            mean_x: T::zero(),
            mean_eta: T::zero(),
        }
    }

    pub fn new(n: usize, mean_x: T, mean_eta: T) -> Self {
        if n == 0 {
            Self::empty()
        } else {
            Self { n, mean_x, mean_eta }
        }
    }

    /// Pooled statistics of two disjoint datasets.
    pub fn merge(&self, other: &Self) -> Self {
        let n = self.n + other.n;
        if n == 0 {
            return Self::empty();
        }
        let total = T::lit(n as f64);
        let (wa, wb) = (T::lit(self.n as f64) / total, T::lit(other.n as f64) / total);
        Self {
            n,
            mean_x: wa * self.mean_x + wb * other.mean_x,
            mean_eta: wa * self.mean_eta + wb * other.mean_eta,
        }
    }
}

/// Maps labeled `(x, y)` to `(x, eta = y - x)`.
pub fn transform_labeled<T: Scalar>(labeled: &[LabeledSample<T>]) -> Vec<(T, T)> {
    labeled.iter().map(|s| (s.x, s.y - s.x)).collect()
}

pub fn sufficient_stats<T: Scalar>(pairs: &[(T, T)]) -> SufficientStats<T> {
    if pairs.is_empty() {
        return SufficientStats::empty();
    }
    let n = T::lit(pairs.len() as f64);
    let (sx, se) = pairs
        .iter()
        .fold((T::zero(), T::zero()), |(sx, se), &(x, e)| (sx + x, se + e));
    SufficientStats {
        n: pairs.len(),
        mean_x: sx / n,
        mean_eta: se / n,
    }
}

/// Scalar Gaussian log-density.
#[inline]
pub fn log_normal<T: Scalar>(value: T, mean: T, var: T) -> T {
    let d = value - mean;
    -T::half() * (T::ln_2pi() + var.ln()) - T::half() * d * d / var
}

/// Joint log-likelihood of `(x, eta)` pairs.
pub fn log_likelihood<T: Scalar>(
    pairs: &[(T, T)],
    theta: T,
    psi: T,
    lik: &LikelihoodSpec<T>,
) -> T {
    pairs
        .iter()
        .map(|&(x, eta)| log_normal(x, theta, lik.var_x) + log_normal(eta, psi, lik.var_eta))
        .sum()
}

/// Log-likelihood of cause-only data. There is no `psi` argument.
pub fn unlabeled_log_likelihood<T: Scalar>(causes: &[T], theta: T, lik: &LikelihoodSpec<T>) -> T {
    causes.iter().map(|&x| log_normal(x, theta, lik.var_x)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ls(x: f64, y: f64) -> LabeledSample<f64> {
        LabeledSample { x, y }
    }

    #[test]
    fn transform_examples() {
        assert_eq!(transform_labeled(&[ls(1.0, -2.0)]), vec![(1.0, -3.0)]);
        assert!(transform_labeled::<f64>(&[]).is_empty());
        assert_eq!(
            transform_labeled(&[ls(0.0, 0.0), ls(2.0, 2.0)]),
            vec![(0.0, 0.0), (2.0, 0.0)]
        );
    }

    #[test]
    fn sufficient_stats_examples() {
        let s = sufficient_stats(&[(1.0, -3.0), (3.0, -1.0)]);
        assert_eq!((s.n, s.mean_x, s.mean_eta), (2, 2.0, -2.0));
        let e = sufficient_stats::<f64>(&[]);
        assert_eq!((e.n, e.mean_x, e.mean_eta), (0, 0.0, 0.0));
    }

    #[test]
    fn merge_matches_concatenation() {
        let a = [(1.0, 2.0), (3.0, -1.0)];
        let b = [(0.5, 0.25), (-2.0, 4.0), (7.0, 1.0)];
        let all: Vec<_> = a.iter().chain(b.iter()).copied().collect();
        let merged = sufficient_stats(&a).merge(&sufficient_stats(&b));
        let direct = sufficient_stats(&all);
        assert_eq!(merged.n, 5);
        assert_relative_eq!(merged.mean_x, direct.mean_x, epsilon = 1e-15);
        assert_relative_eq!(merged.mean_eta, direct.mean_eta, epsilon = 1e-15);
        assert_eq!(SufficientStats::<f64>::empty().merge(&SufficientStats::empty()).n, 0);
    }

    #[test]
    fn log_likelihood_examples() {
        let lik = LikelihoodSpec::new(3.0, 1.0).unwrap();
        assert_eq!(log_likelihood(&[], 0.3, -0.2, &lik), 0.0);
        let expected = -0.5 * (2.0 * PI * 3.0).ln() - 0.5 * (2.0 * PI).ln();
        assert_relative_eq!(log_likelihood(&[(0.0, 0.0)], 0.0, 0.0, &lik), expected, epsilon = 1e-14);
        assert_relative_eq!(log_likelihood(&[(1.0, -3.0)], 1.0, -3.0, &lik), expected, epsilon = 1e-14);
    }

    #[test]
    fn unlabeled_log_likelihood_examples() {
        let lik = LikelihoodSpec::new(3.0, 1.0).unwrap();
        assert_eq!(unlabeled_log_likelihood(&[], 0.7, &lik), 0.0);
        assert_relative_eq!(
            unlabeled_log_likelihood(&[0.0], 0.0, &lik),
            -0.5 * (2.0 * PI * 3.0).ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn prior_materialization() {
        let p = PriorSpec {
            mean_theta: 0.5,
            mean_psi: -1.0,
            var_theta: 4.0,
            var_psi: 9.0,
            rho: 0.5,
        };
        let g = p.to_gaussian().unwrap();
        assert_eq!(g.cov(), Sym2::new(4.0, 3.0, 9.0));
        assert_relative_eq!(g.cov().det(), 4.0 * 9.0 * (1.0 - 0.25), epsilon = 1e-12);
        assert_relative_eq!(g.correlation(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn construction_rejects_invalid_inputs() {
        assert!(PriorSpec::standard(1.0).to_gaussian().is_err());
        assert!(PriorSpec::standard(-1.5).to_gaussian().is_err());
        assert!(PriorSpec { var_theta: 0.0, ..PriorSpec::standard(0.0) }.validate().is_err());
        assert!(PriorSpec { var_psi: -1.0, ..PriorSpec::standard(0.0) }.validate().is_err());
        assert!(LikelihoodSpec::new(0.0, 1.0).is_err());
        assert!(LikelihoodSpec::new(1.0, f64::NAN).is_err());
        assert!(LikelihoodSpec::from_covariance(Sym2::new(3.0, 0.1, 1.0)).is_err());
        assert!(LikelihoodSpec::from_covariance(Sym2::diag(3.0, 1.0)).is_ok());
        assert!(Gaussian2::new([0.0, 0.0], Sym2::new(1.0, 1.0, 1.0)).is_err());
        assert!(Gaussian2::new([f64::NAN, 0.0], Sym2::identity()).is_err());
        assert!(ObservationSet::new(vec![ls(f64::INFINITY, 0.0)], vec![]).is_err());
        assert!(ObservationSet::<f64>::new(vec![], vec![f64::NAN]).is_err());
    }

    #[test]
    fn joint_log_density_matches_product_when_uncorrelated() {
        let g = Gaussian2::new([1.0, -2.0], Sym2::diag(2.0, 0.5)).unwrap();
        let lhs = g.log_density(0.3, -1.1);
        let rhs = log_normal(0.3, 1.0, 2.0) + log_normal(-1.1, -2.0, 0.5);
        assert_relative_eq!(lhs, rhs, epsilon = 1e-14);
    }
}
