//! Scatter estimators: closed-form baselines (SCM, SSCM, GSSCM, EM-type
//! precision) and the fixed-point family (Tyler/Maronna M-estimators,
//! covariance-shrinkage and precision-shrinkage variants).

pub mod baseline;
pub mod diagnostics;
pub mod fixed_point;
pub mod residual;

pub use baseline::{em_precision, gsscm, quadratic_forms_of, scm, sscm, GsscmWeight};
pub use diagnostics::{condition_f_diagnostic, ConditionFReport};
pub use fixed_point::{
    apply_map, fixed_point_renyi, fixed_point_variant_eq10, kl_penalized, lnsmi, m_fixed_point,
    proposed, proposed_raw, FixedPointKind,
};
pub use residual::{equation_residual, Equation};

use crate::linalg::{self, LinalgError, SpdMatrix};
use crate::weights::WeightError;
use nalgebra::{DMatrix, DVector};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("dataset is empty")]
    EmptyDataSet,
    #[error("dataset has zero columns")]
    ZeroDimension,
    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },
    #[error("row {row} has length {len}, expected {expected}")]
    RaggedRows {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error(
        "{count} zero observation(s) cannot be weighted by a weight that is singular at the origin"
    )]
    ZeroRows { count: usize },
    #[error("every observation is zero")]
    AllRowsZero,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Weight(#[from] WeightError),
}

pub type Result<T> = std::result::Result<T, EstimatorError>;

/// `n` observations in `ℝᵖ` with known zero mean, stored as an `n x p`
/// matrix (one row per observation).
#[derive(Clone, Debug, PartialEq)]
pub struct DataSet {
    rows: DMatrix<f64>,
    outlier_indices: Option<Vec<usize>>,
    zero_rows: usize,
}

impl DataSet {
    pub fn new(rows: DMatrix<f64>) -> Result<Self> {
        if rows.ncols() == 0 {
            return Err(EstimatorError::ZeroDimension);
        }
        for i in 0..rows.nrows() {
            if rows.row(i).iter().any(|x| !x.is_finite()) {
                return Err(EstimatorError::NonFinite { row: i });
            }
        }
        let zero_rows = (0..rows.nrows())
            .filter(|&i| rows.row(i).iter().all(|&x| x == 0.0))
            .count();
        Ok(Self {
            rows,
            outlier_indices: None,
            zero_rows,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(EstimatorError::EmptyDataSet);
        };
        let p = first.len();
        for (row, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(EstimatorError::RaggedRows {
                    row,
                    len: r.len(),
                    expected: p,
                });
            }
        }
        Self::new(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
    }

    /// An empty dataset of dimension `p`.
    pub fn empty(p: usize) -> Self {
        Self {
            rows: DMatrix::zeros(0, p),
            outlier_indices: None,
            zero_rows: 0,
        }
    }

    pub fn with_outlier_indices(mut self, indices: Vec<usize>) -> Self {
        self.outlier_indices = Some(indices);
        self
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn p(&self) -> usize {
        self.rows.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.n() == 0
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.rows.row(i).transpose()
    }

    pub fn zero_row_count(&self) -> usize {
        self.zero_rows
    }

    pub fn outlier_indices(&self) -> Option<&[usize]> {
        self.outlier_indices.as_deref()
    }

    /// Applies `x ↦ A x` to every observation.
    pub fn transform(&self, a: &DMatrix<f64>) -> Self {
        let rows = &self.rows * a.transpose();
        let zero_rows = (0..rows.nrows())
            .filter(|&i| rows.row(i).iter().all(|&x| x == 0.0))
            .count();
        Self {
            rows,
            outlier_indices: self.outlier_indices.clone(),
            zero_rows,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rows: &self.rows * c,
            outlier_indices: self.outlier_indices.clone(),
            zero_rows: if c == 0.0 { self.n() } else { self.zero_rows },
        }
    }

    /// Appends `other`'s rows after this dataset's rows. Outlier annotations
    /// are dropped.
    pub fn concat(&self, other: &DataSet) -> Result<Self> {
        if other.p() != self.p() {
            return Err(EstimatorError::DimensionMismatch {
                expected: self.p(),
                actual: other.p(),
            });
        }
        let (n1, n2, p) = (self.n(), other.n(), self.p());
        let rows = DMatrix::from_fn(n1 + n2, p, |i, j| {
            if i < n1 {
                self.rows[(i, j)]
            } else {
                other.rows[(i - n1, j)]
            }
        });
        Ok(Self {
            rows,
            outlier_indices: None,
            zero_rows: self.zero_rows + other.zero_rows,
        })
    }

    /// Rows at `indices` (repetitions allowed).
    pub fn select(&self, indices: &[usize]) -> Self {
        let rows = DMatrix::from_fn(indices.len(), self.p(), |i, j| self.rows[(indices[i], j)]);
        let zero_rows = (0..rows.nrows())
            .filter(|&i| rows.row(i).iter().all(|&x| x == 0.0))
            .count();
        Self {
            rows,
            outlier_indices: None,
            zero_rows,
        }
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            return Err(EstimatorError::EmptyDataSet);
        }
        Ok(())
    }
}

/// Starting point of a fixed-point iteration.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum Init {
    /// Trace-normalized SCM, falling back to the identity when it is singular.
    #[default]
    NormalizedScm,
    Identity,
    User(SpdMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub init: Init,
    /// Rescale to trace `p` after every update.
    pub normalize: bool,
    /// Relative residual of the iteration equation required to report
    /// convergence.
    pub residual_tolerance: f64,
    /// Keep every iterate in the result (memory heavy; for diagnostics).
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            epsilon: 1e-6,
            max_iter: 1000,
            init: Init::NormalizedScm,
            normalize: true,
            residual_tolerance: 1e-5,
            record_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn normalized(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    /// Un-normalized iteration (estimating-equation mode).
    pub fn raw(self) -> Self {
        self.normalized(false)
    }

    pub fn recording(mut self) -> Self {
        self.record_iterates = true;
        self
    }

    pub(crate) fn validate(&self, p: usize, alpha_range: (f64, f64)) -> Result<()> {
        let (lo, hi) = alpha_range;
        if !(self.alpha >= lo && self.alpha <= hi) {
            return Err(EstimatorError::InvalidConfig(format!(
                "alpha {} outside [{lo}, {hi}]",
                self.alpha
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(EstimatorError::InvalidConfig(format!(
                "epsilon {} must be positive",
                self.epsilon
            )));
        }
        if self.max_iter == 0 {
            return Err(EstimatorError::InvalidConfig(
                "max_iter must be positive".into(),
            ));
        }
        if let Init::User(v0) = &self.init {
            if v0.dim() != p {
                return Err(EstimatorError::DimensionMismatch {
                    expected: p,
                    actual: v0.dim(),
                });
            }
            if !v0.is_strictly_pd() {
                return Err(EstimatorError::InvalidConfig(
                    "initial matrix must be positive definite".into(),
                ));
            }
        }
        Ok(())
    }

    pub(crate) fn initial_matrix(&self, x: &DataSet) -> DMatrix<f64> {
        let p = x.p();
        match &self.init {
            Init::Identity => DMatrix::identity(p, p),
            Init::User(v0) => v0.matrix().clone(),
            Init::NormalizedScm => {
                let mut s = baseline::scm_matrix(x);
                if linalg::chol_inverse(&s).is_some()
                    && linalg::trace_normalize_in_place(&mut s).is_ok()
                {
                    s
                } else {
                    DMatrix::identity(p, p)
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Status {
    Converged,
    MaxIter,
    /// Smallest eigenvalue collapsed towards zero.
    DegenerateShrinking,
    /// Largest eigenvalue diverged (raw mode only).
    DegenerateExploding,
    InvalidInput,
}

impl Status {
    pub const ALL: [Status; 5] = [
        Status::Converged,
        Status::MaxIter,
        Status::DegenerateShrinking,
        Status::DegenerateExploding,
        Status::InvalidInput,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::DegenerateShrinking => "degenerate_shrinking",
            Status::DegenerateExploding => "degenerate_exploding",
            Status::InvalidInput => "invalid_input",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct EstimatorResult {
    pub estimate: SpdMatrix,
    /// Number of accepted updates.
    pub iterations: usize,
    pub converged: bool,
    /// Relative Frobenius residual `‖G(V) − V‖ / ‖V‖` of the map being
    /// iterated, evaluated at `estimate`.
    pub residual: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub status: Status,
    /// Every iterate starting from `V₀` when requested in the config.
    pub iterates: Vec<DMatrix<f64>>,
}

impl EstimatorResult {
    pub(crate) fn closed_form(estimate: SpdMatrix) -> Self {
        let (lambda_max, lambda_min) =
            linalg::eigen_extremes(estimate.matrix()).unwrap_or((f64::NAN, f64::NAN));
        Self {
            estimate,
            iterations: 0,
            converged: true,
            residual: 0.0,
            lambda_max,
            lambda_min,
            status: Status::Converged,
            iterates: Vec::new(),
        }
    }
}

/// `q_i = x_iᵀ M x_i` for every row.
pub(crate) fn quadratic_forms(x: &DMatrix<f64>, m: &DMatrix<f64>) -> Vec<f64> {
    let xm = x * m;
    let (n, p) = x.shape();
    let mut out = vec![0.0; n];
    for j in 0..p {
        let (a, b) = (xm.column(j), x.column(j));
        for i in 0..n {
            out[i] += a[i] * b[i];
        }
    }
    out
}

/// `(1/divisor) Σ_i weights_i x_i x_iᵀ`.
pub(crate) fn weighted_scatter(x: &DMatrix<f64>, weights: &[f64], divisor: f64) -> DMatrix<f64> {
    let mut xw = x.clone();
    for mut col in xw.column_iter_mut() {
        for (v, w) in col.iter_mut().zip(weights) {
            *v *= w;
        }
    }
    let mut s = xw.tr_mul(x);
    s /= divisor;
    linalg::symmetrize(&mut s);
    s
}

pub(crate) fn squared_norms(x: &DMatrix<f64>) -> Vec<f64> {
    let (n, p) = x.shape();
    let mut out = vec![0.0; n];
    for j in 0..p {
        let c = x.column(j);
        for i in 0..n {
            out[i] += c[i] * c[i];
        }
    }
    out
}
