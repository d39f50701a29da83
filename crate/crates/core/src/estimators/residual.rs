use super::fixed_point::{apply_map, FixedPointKind};
use super::{DataSet, EstimatorError, Result};
use crate::linalg::{self, SpdMatrix};
use crate::weights::WeightFunction;
use nalgebra::DMatrix;

/// Estimating equations that a candidate `V` can be checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Equation {
    /// `V = (1/n) Σ w(xᵀV⁻¹x) x xᵀ`.
    Eq4,
    /// `V = (1/n) Σ w(xᵀV⁻¹x) x xᵀ + αI`.
    Eq5,
    /// `V = (1/(1+α)) (1/n) Σ w(xᵀV⁻¹x) x xᵀ + (α/(1+α)) I`.
    Eq6,
    /// `V = (1/n) Σ w(xᵀ{V⁻¹ + αI}x) x xᵀ`.
    Eq10,
    /// `V = (1/n) Σ w(xᵀ{(1−α)V⁻¹ + αI}x) x xᵀ`.
    Eq11,
}

/// `‖LHS − RHS‖_F / ‖V‖_F` for the selected equation. With the Tyler weight
/// the first equation only fixes `V` up to scale, so `V` is rescaled to
/// trace `p` before evaluating it.
pub fn equation_residual(
    x: &DataSet,
    v: &SpdMatrix,
    wf: &WeightFunction,
    alpha: f64,
    which: Equation,
) -> Result<f64> {
    x.require_nonempty()?;
    if v.dim() != x.p() {
        return Err(EstimatorError::DimensionMismatch {
            expected: x.p(),
            actual: v.dim(),
        });
    }
    if wf.singular_at_origin() && x.zero_row_count() > 0 {
        return Err(EstimatorError::ZeroRows {
            count: x.zero_row_count(),
        });
    }
    linalg::spd_inverse(v)?;
    let mut lhs: DMatrix<f64> = v.matrix().clone();
    if which == Equation::Eq4 && wf.singular_at_origin() {
        linalg::trace_normalize_in_place(&mut lhs)?;
    }
    let p = x.p();
    let mapped = |kind| {
        apply_map(kind, x, wf, alpha, &lhs)
            .map_err(|_| EstimatorError::Linalg(linalg::LinalgError::NonFinite))
    };
    let rhs = match which {
        Equation::Eq4 => mapped(FixedPointKind::MEstimator)?,
        Equation::Eq5 => mapped(FixedPointKind::MEstimator)? + DMatrix::identity(p, p) * alpha,
        Equation::Eq6 => mapped(FixedPointKind::Kl)?,
        Equation::Eq10 => mapped(FixedPointKind::Eq10)?,
        Equation::Eq11 => mapped(FixedPointKind::Proposed)?,
    };
    Ok((&lhs - rhs).norm() / lhs.norm())
}
