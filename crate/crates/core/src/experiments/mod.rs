//! Monte Carlo experiments: error metrics, estimator registry, parameter
//! sweeps, breakdown probes, Mahalanobis rankings and CSV output.

pub mod breakdown;
pub mod output;
pub mod ranking;
pub mod registry;
pub mod sweep;

pub use breakdown::{
    breakdown_probe, breakdown_sweep, empirical_frontier, BreakdownReport, Contamination,
};
pub use output::{
    emit_csv, read_csv_dataset, read_dataset, write_csv, write_matrix_csv, CsvReport,
};
pub use ranking::{mahalanobis_ranking, ranking_study, top_m_captures, RankingSummary};
pub use registry::{
    iteration_residual, AlphaChoice, EstimatorKind, EstimatorSpec, Evaluation, TrialContext,
};
pub use sweep::{run_sweep, Axis, Cell, Metric, SweepConfig, SweepResult};

use crate::datagen::DatagenError;
use crate::estimators::EstimatorError;
use crate::linalg::{self, LinalgError, SpdMatrix};
use crate::shrinkage::ShrinkageError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Shrinkage(#[from] ShrinkageError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// `Tr[V₁V₂⁻¹ + V₁⁻¹V₂]`, which is `2p` at `V₁ = V₂`.
pub fn discrepancy_sym(v1: &SpdMatrix, v2: &SpdMatrix) -> Result<f64> {
    check_dims(v1, v2)?;
    let i1 = linalg::spd_inverse(v1)?;
    let i2 = linalg::spd_inverse(v2)?;
    let a = v1.matrix().component_mul(i2.matrix()).sum();
    let b = i1.matrix().component_mul(v2.matrix()).sum();
    Ok(a + b)
}

/// `‖log(V₁^{-1/2} V₂ V₁^{-1/2})‖_F`.
pub fn discrepancy_logfro(v1: &SpdMatrix, v2: &SpdMatrix) -> Result<f64> {
    check_dims(v1, v2)?;
    let w = linalg::sqrt_psd(&linalg::spd_inverse(v1)?)?;
    let whitened = SpdMatrix::new(&w * v2.matrix() * &w)?;
    Ok(linalg::matrix_log(&whitened)?.norm())
}

fn check_dims(v1: &SpdMatrix, v2: &SpdMatrix) -> Result<()> {
    if v1.dim() != v2.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: v1.dim(),
            actual: v2.dim(),
        }
        .into());
    }
    Ok(())
}

fn normalized(v: &SpdMatrix) -> Result<nalgebra::DMatrix<f64>> {
    let mut m = v.matrix().clone();
    linalg::trace_normalize_in_place(&mut m)?;
    Ok(m)
}

/// Squared Frobenius error after rescaling both matrices to trace `p`.
pub fn normalized_sq_error(estimate: &SpdMatrix, truth: &SpdMatrix) -> Result<f64> {
    check_dims(estimate, truth)?;
    Ok((normalized(estimate)? - normalized(truth)?).norm_squared())
}

/// `sqrt(mean ‖norm(V̂) − norm(Σ)‖_F²)` with `norm` rescaling to trace `p`.
pub fn rmse(estimates: &[SpdMatrix], truth: &SpdMatrix) -> Result<f64> {
    if estimates.is_empty() {
        return Err(ExperimentError::Config("rmse of an empty list".into()));
    }
    let mut total = 0.0;
    for e in estimates {
        total += normalized_sq_error(e, truth)?;
    }
    Ok((total / estimates.len() as f64).sqrt())
}
