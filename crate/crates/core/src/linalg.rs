//! Closed-form 2x2 symmetric matrix algebra.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
///
/// Only one off-diagonal entry is stored, so symmetry holds by
/// construction and no re-symmetrization pass is needed after inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2<T> {
    pub xx: T,
    pub xy: T,
    pub yy: T,
}

impl<T: Scalar> Sym2<T> {
    pub fn new(xx: T, xy: T, yy: T) -> Self {
        Self { xx, xy, yy }
    }

    pub fn diag(xx: T, yy: T) -> Self {
        Self::new(xx, T::zero(), yy)
    }

    pub fn identity() -> Self {
        Self::diag(T::one(), T::one())
    }

    pub fn det(&self) -> T {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> T {
        self.xx + self.yy
    }

    /// Squared Frobenius norm.
    pub fn norm_sq(&self) -> T {
        self.xx * self.xx + T::lit(2.0) * self.xy * self.xy + self.yy * self.yy
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [T; 2] {
        let half_tr = T::half() * self.trace();
        let half_diff = T::half() * (self.xx - self.yy);
        let r = half_diff.hypot(self.xy);
        [half_tr - r, half_tr + r]
    }

    pub fn is_positive_definite(&self) -> bool {
        self.xx > T::zero() && self.det() > T::zero()
    }

    /// Rejects matrices with `det < rtol * ||m||_F^2` (or non-positive
    /// leading entry) before forming the adjugate inverse.
    pub fn check_nonsingular(&self) -> Result<()> {
        let det = self.det();
        let threshold = T::lit(T::SINGULAR_RTOL) * self.norm_sq();
        if !(self.xx > T::zero()) || !(det >= threshold) || !det.is_finite() {
            return Err(Error::Singular {
                det: det.as_f64(),
                threshold: threshold.as_f64(),
            });
        }
        Ok(())
    }

    /// Inverse via adjugate / determinant.
    pub fn inverse(&self) -> Result<Self> {
        self.check_nonsingular()?;
        let det = self.det();
        Ok(Self::new(self.yy / det, -self.xy / det, self.xx / det))
    }

    pub fn mul_vec(&self, v: [T; 2]) -> [T; 2] {
        [
            self.xx * v[0] + self.xy * v[1],
            self.xy * v[0] + self.yy * v[1],
        ]
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.xx * s, self.xy * s, self.yy * s)
    }

    /// Quadratic form `v^T M v`.
    pub fn quad_form(&self, v: [T; 2]) -> T {
        v[0] * v[0] * self.xx + T::lit(2.0) * v[0] * v[1] * self.xy + v[1] * v[1] * self.yy
    }
}

impl<T: Scalar> std::ops::Add for Sym2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.xx + rhs.xx, self.xy + rhs.xy, self.yy + rhs.yy)
    }
}

impl<T: Scalar> std::ops::Sub for Sym2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.xx - rhs.xx, self.xy - rhs.xy, self.yy - rhs.yy)
    }
}

pub(crate) fn add2<T: Scalar>(a: [T; 2], b: [T; 2]) -> [T; 2] {
    [a[0] + b[0], a[1] + b[1]]
}
