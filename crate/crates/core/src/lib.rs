//! Bayesian learning of an independent causal mechanism `x -> y` with
//! `y = x + eta`.
//!
//! The cause parameter `theta` (mean of `x`) and the mechanism parameter
//! `psi` (mean of `eta`) get a joint Gaussian prior that may be correlated.
//! The crate provides
//!
//! * closed-form posterior updates from labeled and cause-only data
//!   ([`conjugate`]),
//! * a grid oracle for arbitrary priors with factorization, conditional
//!   slice and mutual-information diagnostics ([`grid`], [`verify`]),
//! * seeded Monte Carlo learning-curve experiments ([`experiment`]) with
//!   CSV/JSON output ([`report`]) and flat JSON configuration ([`config`]).
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases.

pub mod cli;
pub mod config;
pub mod conjugate;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod report;
pub mod scalar;
pub mod verify;

pub use conjugate::{
    chain_update, condition_psi_on_theta, log_density_1d, marginal_psi, marginal_theta, semi_supervised_update,
    supervised_update, Gaussian1,
};
pub use error::{Error, Result};
pub use grid::{
    conditional_slice_gap, factorization_gap, grid_mutual_information, grid_posterior, GridDensity, GridSpec,
};
pub use linalg::Sym2;
pub use model::{
    log_likelihood, sufficient_stats, transform_labeled, unlabeled_log_likelihood, Gaussian2, LabeledSample,
    LikelihoodSpec, ObservationSet, PriorSpec, SufficientStats,
};
pub use scalar::Scalar;

pub type Gaussian1F64 = Gaussian1<f64>;
pub type Gaussian1F32 = Gaussian1<f32>;
pub type Gaussian2F64 = Gaussian2<f64>;
pub type Gaussian2F32 = Gaussian2<f32>;
pub type PriorSpecF64 = PriorSpec<f64>;
pub type PriorSpecF32 = PriorSpec<f32>;
pub type LikelihoodSpecF64 = LikelihoodSpec<f64>;
pub type LikelihoodSpecF32 = LikelihoodSpec<f32>;
pub type ObservationSetF64 = ObservationSet<f64>;
pub type ObservationSetF32 = ObservationSet<f32>;
pub type SufficientStatsF64 = SufficientStats<f64>;
pub type SufficientStatsF32 = SufficientStats<f32>;
pub type GridSpecF64 = GridSpec<f64>;
pub type GridSpecF32 = GridSpec<f32>;
pub type GridDensityF64 = GridDensity<f64>;
pub type GridDensityF32 = GridDensity<f32>;
