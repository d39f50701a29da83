//! Dense symmetric linear algebra.
//!
//! Everything here works on small dense `p x p` matrices (p is at most a few
//! hundred). Eigendecompositions are delegated to nalgebra's symmetric QR
//! solver; the rest (logarithm, inverses, Gram-Schmidt, Löwner comparisons)
//! is built on top of it.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use std::cmp::Ordering;
use std::ops::Deref;
use thiserror::Error;

/// Relative eigenvalue floor below which a matrix is treated as singular.
pub const PD_TOLERANCE: f64 = 1e-10;

const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("matrix is singular (smallest eigenvalue {min_eigenvalue:e} <= {tolerance:e})")]
    Singular { min_eigenvalue: f64, tolerance: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("trace must be positive, got {0:e}")]
    NonPositiveTrace(f64),
    #[error("vector {index} is numerically dependent on its predecessors")]
    Degenerate { index: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// A symmetric positive semidefinite matrix.
///
/// Construction validates symmetry and semidefiniteness and records whether
/// the matrix is strictly positive definite (smallest eigenvalue above
/// `PD_TOLERANCE * λ₁`).
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix {
    inner: DMatrix<f64>,
    strictly_pd: bool,
}

impl SpdMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&matrix)?;
        let eig = sym_eigen(&matrix)?;
        let top = eig.eigenvalues[0].max(0.0);
        let bottom = eig.min();
        if bottom < -PD_TOLERANCE * top.max(1.0) {
            return Err(LinalgError::NotPositiveSemidefinite {
                min_eigenvalue: bottom,
            });
        }
        let strictly_pd = top > 0.0 && bottom > PD_TOLERANCE * top;
        Ok(Self {
            inner: matrix,
            strictly_pd,
        })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            inner: DMatrix::identity(p, p),
            strictly_pd: true,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Wraps a matrix produced by an internal computation that is PSD by
    /// construction. The matrix is symmetrized; positive definiteness is
    /// checked with a Cholesky attempt rather than a full eigensolve.
    pub(crate) fn from_trusted(mut matrix: DMatrix<f64>) -> Self {
        symmetrize(&mut matrix);
        let strictly_pd = Cholesky::new(matrix.clone()).is_some();
        Self {
            inner: matrix,
            strictly_pd,
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn is_strictly_pd(&self) -> bool {
        self.strictly_pd
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn frobenius_distance(&self, other: &SpdMatrix) -> f64 {
        (&self.inner - &other.inner).norm()
    }

    /// Multiplies by a positive scalar.
    pub fn scaled(&self, factor: f64) -> Self {
        debug_assert!(factor > 0.0);
        Self {
            inner: &self.inner * factor,
            strictly_pd: self.strictly_pd,
        }
    }

    /// `Q · A · Qᵀ` for an orthogonal `Q`.
    pub fn conjugate(&self, q: &DMatrix<f64>) -> Self {
        Self::from_trusted(q * &self.inner * q.transpose())
    }
}

impl Deref for SpdMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.inner
    }
}

impl AsRef<DMatrix<f64>> for SpdMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.inner
    }
}

/// Eigenvalues sorted descending with matching orthonormal eigenvectors
/// stored as columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    /// `Q · diag(f(λ)) · Qᵀ`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let fj = f(lambda);
            scaled.column_mut(j).scale_mut(fj);
        }
        let mut out = scaled * q.transpose();
        symmetrize(&mut out);
        out
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.map_spectrum(|l| l)
    }
}

pub(crate) fn check_square(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

pub(crate) fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    check_square(a)?;
    let p = a.nrows();
    for j in 0..p {
        for i in 0..p {
            let (aij, aji) = (a[(i, j)], a[(j, i)]);
            if !aij.is_finite() {
                return Err(LinalgError::NonFinite);
            }
            if (aij - aji).abs() > SYMMETRY_TOLERANCE * aij.abs().max(1.0) {
                return Err(LinalgError::NotSymmetric { i, j });
            }
        }
    }
    Ok(())
}

pub(crate) fn symmetrize(a: &mut DMatrix<f64>) {
    let p = a.nrows();
    for j in 0..p {
        for i in (j + 1)..p {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
}

/// Flips each eigenvector so its first non-negligible component is positive.
fn canonical_sign(v: &mut DVector<f64>) {
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

fn lexicographic(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(ord) => return ord,
        }
    }
    Ordering::Equal
}

/// Symmetric eigendecomposition with descending eigenvalues.
///
/// Eigenvectors are sign-normalized (first non-negligible entry positive) and
/// exactly tied eigenvalues are ordered lexicographically by eigenvector so
/// that outputs are deterministic.
pub fn sym_eigen(a: &DMatrix<f64>) -> Result<EigenDecomposition> {
    check_symmetric(a)?;
    let p = a.nrows();
    let mut sym = a.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let mut pairs: Vec<(f64, DVector<f64>)> = (0..p)
        .map(|j| {
            let mut v = eig.eigenvectors.column(j).into_owned();
            canonical_sign(&mut v);
            (eig.eigenvalues[j], v)
        })
        .collect();
    pairs.sort_by(|(la, va), (lb, vb)| {
        lb.partial_cmp(la)
            .unwrap_or(Ordering::Equal)
            .then_with(|| lexicographic(vb, va))
    });
    let mut eigenvectors = DMatrix::zeros(p, p);
    let mut eigenvalues = Vec::with_capacity(p);
    for (j, (lambda, v)) in pairs.into_iter().enumerate() {
        eigenvalues.push(lambda);
        eigenvectors.set_column(j, &v);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn require_pd(eig: &EigenDecomposition) -> Result<()> {
    let tolerance = PD_TOLERANCE * eig.max().max(0.0);
    if eig.min() <= tolerance || eig.max() <= 0.0 {
        return Err(LinalgError::Singular {
            min_eigenvalue: eig.min(),
            tolerance,
        });
    }
    Ok(())
}

/// Principal matrix logarithm of a strictly positive definite matrix.
pub fn matrix_log(a: &SpdMatrix) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(a)?;
    require_pd(&eig)?;
    Ok(eig.map_spectrum(f64::ln))
}

/// Exponential of a symmetric matrix through its eigenbasis.
pub fn matrix_exp_sym(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(sym_eigen(a)?.map_spectrum(f64::exp))
}

/// Symmetric square root of a PSD matrix (negative rounding noise clipped).
pub fn sqrt_psd(a: &SpdMatrix) -> Result<DMatrix<f64>> {
    Ok(sym_eigen(a)?.map_spectrum(|l| l.max(0.0).sqrt()))
}

/// Inverse of a strictly positive definite matrix via its spectrum.
pub fn spd_inverse(a: &SpdMatrix) -> Result<SpdMatrix> {
    let eig = sym_eigen(a)?;
    require_pd(&eig)?;
    Ok(SpdMatrix {
        inner: eig.map_spectrum(|l| 1.0 / l),
        strictly_pd: true,
    })
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix. Eigenvalues at or
/// below `rank_tolerance * max(λ₁, 1)` are treated as zero.
pub fn pseudo_inverse(a: &DMatrix<f64>, rank_tolerance: f64) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(a)?;
    let cutoff = rank_tolerance * eig.max().abs().max(1.0);
    Ok(eig.map_spectrum(|l| if l > cutoff { 1.0 / l } else { 0.0 }))
}

/// Cholesky-based inverse used on hot paths. Returns `None` when the matrix
/// is not numerically positive definite.
pub(crate) fn chol_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = Cholesky::new(a.clone())?;
    let mut inv = chol.inverse();
    if inv.iter().any(|x| !x.is_finite()) {
        return None;
    }
    symmetrize(&mut inv);
    Some(inv)
}

/// Orthonormalizes `vectors` in order (modified Gram-Schmidt with one
/// re-orthogonalization pass). The first output is the first input rescaled.
pub fn gram_schmidt(vectors: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let Some(first) = vectors.first() else {
        return Ok(Vec::new());
    };
    let dim = first.len();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for (index, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(LinalgError::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        let norm = r.norm();
        if norm < 1e-12 * v.norm().max(1.0) {
            return Err(LinalgError::Degenerate { index });
        }
        basis.push(r / norm);
    }
    Ok(basis)
}

/// Rescales so that the trace equals the dimension.
pub fn trace_normalize(a: &SpdMatrix) -> Result<SpdMatrix> {
    let mut m = a.inner.clone();
    trace_normalize_in_place(&mut m)?;
    Ok(SpdMatrix {
        inner: m,
        strictly_pd: a.strictly_pd,
    })
}

pub(crate) fn trace_normalize_in_place(a: &mut DMatrix<f64>) -> Result<()> {
    let tr = a.trace();
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(LinalgError::NonPositiveTrace(tr));
    }
    let p = a.nrows() as f64;
    a.scale_mut(p / tr);
    Ok(())
}

/// `A ⪯ B` in the Löwner order, i.e. `λ_min(B - A) >= -tol`.
pub fn loewner_leq(a: &SpdMatrix, b: &SpdMatrix, tol: f64) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let diff = b.matrix() - a.matrix();
    Ok(sym_eigen(&diff)?.min() >= -tol)
}

/// Extreme eigenvalues `(λ₁, λ_p)` of a symmetric matrix.
pub fn eigen_extremes(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    let eig = sym_eigen(a)?;
    Ok((eig.max(), eig.min()))
}
