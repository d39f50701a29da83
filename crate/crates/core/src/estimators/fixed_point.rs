//! Fixed-point solvers for the M-estimation family and its shrinkage variants.
//!
//! All solvers share one driver. Each iteration evaluates the map `G` at the
//! current iterate `V`. The run is reported as converged at `V` once the
//! stopping rule holds for the update into or out of `V` and the relative
//! residual `‖G(V) − V‖/‖V‖` is below `cfg.residual_tolerance`.

use super::{
    quadratic_forms, weighted_scatter, DataSet, EstimatorError, EstimatorResult, Result,
    SolverConfig, Status,
};
use crate::linalg::{self, SpdMatrix};
use crate::weights::WeightFunction;
use nalgebra::DMatrix;

/// Divergence guard for raw iterations, relative to the data scale.
const DIVERGENCE_RATIO: f64 = 1e12;

/// Which iteration map to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixedPointKind {
    /// `V ↦ (1/n) Σ w(xᵀV⁻¹x) x xᵀ`.
    MEstimator,
    /// `V ↦ (1−α)(p/n) Σ x xᵀ/(xᵀV⁻¹x) + α I`.
    Lnsmi,
    /// `V ↦ (1/n) Σ w(xᵀ{(1−α)V⁻¹ + αI}x) x xᵀ`.
    Proposed,
    /// `V ↦ (1/n) Σ w(xᵀ{V⁻¹ + αI}x) x xᵀ`.
    Eq10,
    /// `V ↦ (1/(1+α)) (1/n) Σ w(xᵀV⁻¹x) x xᵀ + (α/(1+α)) I`.
    Kl,
    /// Iterates the precision `Ω ↦ (1/α) S_w(Ω)⁻¹ + ((α−1)/α) I`.
    Renyi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Criterion {
    /// `‖V_{k+1} − V_k‖ < ε`.
    Absolute,
    /// `‖V_{k+1} − V_k‖ < ε‖V_k‖`, used when the scale is free to drift.
    Relative,
    /// `min(‖Ω_{k+1} − Ω_k‖, ‖V_{k+1} − V_k‖) < ε` with `Ω = (1−α)V⁻¹ + αI`.
    OmegaOrV,
}

/// One application of the map of `kind` to `v` (no trace normalization).
/// For [`FixedPointKind::Renyi`], `v` is the precision iterate `Ω`.
pub fn apply_map(
    kind: FixedPointKind,
    x: &DataSet,
    wf: &WeightFunction,
    alpha: f64,
    v: &DMatrix<f64>,
) -> std::result::Result<DMatrix<f64>, Status> {
    let vinv = match kind {
        FixedPointKind::Renyi => None,
        _ => Some(linalg::chol_inverse(v).ok_or(Status::DegenerateShrinking)?),
    };
    map_with_inverse(kind, x, wf, alpha, v, vinv.as_ref())
}

fn map_with_inverse(
    kind: FixedPointKind,
    x: &DataSet,
    wf: &WeightFunction,
    alpha: f64,
    v: &DMatrix<f64>,
    vinv: Option<&DMatrix<f64>>,
) -> std::result::Result<DMatrix<f64>, Status> {
    let (n, p) = (x.n() as f64, x.p());
    let eye = || DMatrix::<f64>::identity(p, p);
    let weighted = |m: &DMatrix<f64>| {
        let w: Vec<f64> = quadratic_forms(x.rows(), m)
            .into_iter()
            .map(|s| wf.w_unchecked(s))
            .collect();
        weighted_scatter(x.rows(), &w, n)
    };
    let inv = || vinv.expect("inverse supplied for covariance-form maps");
    let out = match kind {
        FixedPointKind::MEstimator => weighted(inv()),
        FixedPointKind::Lnsmi => {
            let w: Vec<f64> = quadratic_forms(x.rows(), inv())
                .into_iter()
                .map(|s| p as f64 / s)
                .collect();
            weighted_scatter(x.rows(), &w, n) * (1.0 - alpha) + eye() * alpha
        }
        FixedPointKind::Proposed => weighted(&(inv() * (1.0 - alpha) + eye() * alpha)),
        FixedPointKind::Eq10 => weighted(&(inv() + eye() * alpha)),
        FixedPointKind::Kl => (weighted(inv()) + eye() * alpha) / (1.0 + alpha),
        FixedPointKind::Renyi => {
            let s = weighted(v);
            let s_inv = linalg::chol_inverse(&s).ok_or(Status::DegenerateShrinking)?;
            s_inv / alpha + eye() * ((alpha - 1.0) / alpha)
        }
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Status::DegenerateExploding);
    }
    Ok(out)
}

struct Run {
    state: DMatrix<f64>,
    iterations: usize,
    residual: f64,
    status: Status,
    iterates: Vec<DMatrix<f64>>,
}

fn drive(
    kind: FixedPointKind,
    x: &DataSet,
    wf: &WeightFunction,
    cfg: &SolverConfig,
    criterion: Criterion,
    initial_state: DMatrix<f64>,
) -> Run {
    let alpha = cfg.alpha;
    let p = x.p() as f64;
    let data_scale = {
        let s = x.rows().norm_squared() / (x.n() as f64 * p);
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };
    // The Renyi state is a precision matrix, so its natural scale is inverted.
    let state_scale = if kind == FixedPointKind::Renyi {
        1.0 / data_scale
    } else {
        data_scale
    };
    // Guards are relative to the larger of the data scale and the start, so
    // an ill-conditioned start is not mistaken for divergence.
    let explode_at = DIVERGENCE_RATIO * (p * state_scale).max(initial_state.trace());
    let shrink_at = DIVERGENCE_RATIO
        * linalg::chol_inverse(&initial_state)
            .map_or(0.0, |inv| inv.trace())
            .max(p / state_scale);

    let mut v = initial_state;
    let mut iterates = Vec::new();
    let mut prev_inverse: Option<DMatrix<f64>> = None;
    let mut stop_fired = false;
    let mut accepted = 0usize;
    let mut residual = f64::NAN;

    let status = loop {
        if cfg.record_iterates {
            iterates.push(v.clone());
        }
        let Some(vinv) = linalg::chol_inverse(&v) else {
            break Status::DegenerateShrinking;
        };
        if !cfg.normalize {
            if v.trace() > explode_at {
                break Status::DegenerateExploding;
            }
            if vinv.trace() > shrink_at {
                break Status::DegenerateShrinking;
            }
        }
        let mut next = match map_with_inverse(kind, x, wf, alpha, &v, Some(&vinv)) {
            Ok(m) => m,
            Err(status) => break status,
        };
        if cfg.normalize && linalg::trace_normalize_in_place(&mut next).is_err() {
            break Status::DegenerateShrinking;
        }
        let v_norm = v.norm();
        let dv = (&next - &v).norm();
        residual = dv / v_norm;
        let stop_now = match criterion {
            Criterion::Absolute => dv < cfg.epsilon,
            Criterion::Relative => dv < cfg.epsilon * v_norm,
            Criterion::OmegaOrV => {
                let d_omega = prev_inverse
                    .as_ref()
                    .map(|prev| (1.0 - alpha) * (&vinv - prev).norm())
                    .unwrap_or(f64::INFINITY);
                d_omega.min(dv) < cfg.epsilon
            }
        };
        if (stop_fired || stop_now) && residual <= cfg.residual_tolerance {
            break Status::Converged;
        }
        if accepted == cfg.max_iter {
            break Status::MaxIter;
        }
        stop_fired = stop_now;
        prev_inverse = Some(vinv);
        v = next;
        accepted += 1;
    };

    if cfg.record_iterates && iterates.last() != Some(&v) {
        iterates.push(v.clone());
    }
    Run {
        state: v,
        iterations: accepted,
        residual,
        status,
        iterates,
    }
}

fn finish(run: Run, estimate: DMatrix<f64>) -> EstimatorResult {
    let (lambda_max, lambda_min) = if estimate.iter().all(|v| v.is_finite()) {
        linalg::eigen_extremes(&estimate).unwrap_or((f64::NAN, f64::NAN))
    } else {
        (f64::NAN, f64::NAN)
    };
    EstimatorResult {
        estimate: SpdMatrix::from_trusted(estimate),
        iterations: run.iterations,
        converged: run.status == Status::Converged,
        residual: run.residual,
        lambda_max,
        lambda_min,
        status: run.status,
        iterates: run.iterates,
    }
}

fn check_rows(x: &DataSet, wf: &WeightFunction, needs_nonzero: bool) -> Result<()> {
    x.require_nonempty()?;
    if (needs_nonzero || wf.singular_at_origin()) && x.zero_row_count() > 0 {
        return Err(EstimatorError::ZeroRows {
            count: x.zero_row_count(),
        });
    }
    Ok(())
}

fn solve(
    kind: FixedPointKind,
    x: &DataSet,
    wf: &WeightFunction,
    cfg: &SolverConfig,
    criterion: Criterion,
) -> Result<EstimatorResult> {
    let v0 = cfg.initial_matrix(x);
    let run = drive(kind, x, wf, cfg, criterion, v0);
    let estimate = run.state.clone();
    Ok(finish(run, estimate))
}

fn default_criterion(cfg: &SolverConfig) -> Criterion {
    if cfg.normalize {
        Criterion::Absolute
    } else {
        Criterion::Relative
    }
}

/// M-estimator of scatter with weight `wf`; with the Tyler weight and
/// normalization this is Tyler's estimator. `cfg.alpha` must be zero.
pub fn m_fixed_point(
    x: &DataSet,
    wf: &WeightFunction,
    cfg: &SolverConfig,
) -> Result<EstimatorResult> {
    if cfg.alpha != 0.0 {
        return Err(EstimatorError::InvalidConfig(format!(
            "m_fixed_point takes no shrinkage (alpha = {})",
            cfg.alpha
        )));
    }
    cfg.validate(x.p(), (0.0, 0.0))?;
    check_rows(x, wf, false)?;
    solve(
        FixedPointKind::MEstimator,
        x,
        wf,
        cfg,
        default_criterion(cfg),
    )
}

/// Covariance-side shrinkage of Tyler's estimator towards the identity.
pub fn lnsmi(x: &DataSet, cfg: &SolverConfig) -> Result<EstimatorResult> {
    cfg.validate(x.p(), (0.0, 1.0))?;
    let wf = WeightFunction::tyler(x.p());
    check_rows(x, &wf, true)?;
    solve(FixedPointKind::Lnsmi, x, &wf, cfg, default_criterion(cfg))
}

/// Precision-shrinkage estimator: `Ω ← (1−α)V⁻¹ + αI`, then the weighted
/// scatter with weights `w(xᵀΩx)`, then (when `cfg.normalize`) rescaling to
/// trace `p`.
pub fn proposed(x: &DataSet, wf: &WeightFunction, cfg: &SolverConfig) -> Result<EstimatorResult> {
    cfg.validate(x.p(), (0.0, 1.0))?;
    check_rows(x, wf, false)?;
    let criterion = if cfg.normalize {
        Criterion::OmegaOrV
    } else {
        Criterion::Relative
    };
    solve(FixedPointKind::Proposed, x, wf, cfg, criterion)
}

/// Un-normalized solution of `V = (1/n) Σ w(xᵀ{(1−α)V⁻¹ + αI}x) x xᵀ`.
pub fn proposed_raw(
    x: &DataSet,
    wf: &WeightFunction,
    cfg: &SolverConfig,
) -> Result<EstimatorResult> {
    proposed(x, wf, &cfg.clone().raw())
}

/// Un-normalized solution of `V = (1/n) Σ w(xᵀ{V⁻¹ + αI}x) x xᵀ`.
pub fn fixed_point_variant_eq10(
    x: &DataSet,
    wf: &WeightFunction,
    cfg: &SolverConfig,
) -> Result<EstimatorResult> {
    let cfg = cfg.clone().raw();
    cfg.validate(x.p(), (0.0, 1.0))?;
    check_rows(x, wf, false)?;
    solve(FixedPointKind::Eq10, x, wf, &cfg, Criterion::Relative)
}

/// Un-normalized solution of the Kullback-Leibler penalized equation
/// `V = (1/(1+α)) (1/n) Σ w(xᵀV⁻¹x) x xᵀ + (α/(1+α)) I`.
pub fn kl_penalized(
    x: &DataSet,
    wf: &WeightFunction,
    cfg: &SolverConfig,
) -> Result<EstimatorResult> {
    let cfg = cfg.clone().raw();
    cfg.validate(x.p(), (0.0, f64::MAX))?;
    check_rows(x, wf, false)?;
    solve(FixedPointKind::Kl, x, wf, &cfg, Criterion::Relative)
}

/// Solution of the Renyi-penalized equation, iterated in the precision
/// `Ω = (1/α) S_w(Ω)⁻¹ + ((α−1)/α) I`. Returns `V = Ω⁻¹`; `lambda_max` and
/// `lambda_min` refer to `V`.
pub fn fixed_point_renyi(
    x: &DataSet,
    wf: &WeightFunction,
    cfg: &SolverConfig,
) -> Result<EstimatorResult> {
    let cfg = cfg.clone().raw();
    if !(cfg.alpha > 0.0) || !cfg.alpha.is_finite() {
        return Err(EstimatorError::InvalidConfig(format!(
            "Renyi penalty needs alpha > 0 (got {})",
            cfg.alpha
        )));
    }
    cfg.validate(x.p(), (0.0, f64::MAX))?;
    check_rows(x, wf, false)?;
    let v0 = cfg.initial_matrix(x);
    let omega0 = linalg::chol_inverse(&v0).ok_or(EstimatorError::InvalidConfig(
        "initial matrix is not invertible".into(),
    ))?;
    let mut run = drive(
        FixedPointKind::Renyi,
        x,
        wf,
        &cfg,
        Criterion::Relative,
        omega0,
    );
    run.status = match run.status {
        Status::DegenerateExploding => Status::DegenerateShrinking,
        Status::DegenerateShrinking => Status::DegenerateExploding,
        s => s,
    };
    let v = linalg::chol_inverse(&run.state).unwrap_or_else(|| run.state.clone());
    Ok(finish(run, v))
}
