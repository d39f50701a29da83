//! Robust estimation of scatter and precision matrices for elliptical data
//! with precision-side shrinkage towards the identity.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: symmetric positive (semi)definite matrices and spectral helpers.
//! - [`weights`]: weight functions `w(s)` and the associated `κ = sup s·w(s)`.
//! - [`estimators`]: closed-form baselines and fixed-point estimators.
//! - [`shrinkage`]: data-driven choice of the shrinkage coefficient.
//! - [`datagen`]: synthetic elliptical data with planted outliers.
//! - [`experiments`]: Monte Carlo sweeps, breakdown probes and rankings.

pub mod datagen;
pub mod estimators;
pub mod experiments;
pub mod linalg;
mod seeding;
pub mod shrinkage;
pub mod weights;

pub use seeding::substream;

pub use estimators::{DataSet, EstimatorError, EstimatorResult, Init, SolverConfig, Status};
pub use linalg::{LinalgError, SpdMatrix};
pub use weights::{WeightFunction, WeightSpec};
