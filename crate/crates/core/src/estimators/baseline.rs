//! Closed-form scatter estimators.

use super::{quadratic_forms, squared_norms, weighted_scatter, DataSet, EstimatorError, Result};
use crate::linalg::{self, SpdMatrix};
use crate::weights::WeightFunction;
use nalgebra::DMatrix;

pub(crate) fn scm_matrix(x: &DataSet) -> DMatrix<f64> {
    let mut s = x.rows().tr_mul(x.rows());
    s /= x.n().max(1) as f64;
    linalg::symmetrize(&mut s);
    s
}

/// `(1/n) Σ x_i x_iᵀ`. May be singular.
pub fn scm(x: &DataSet) -> Result<SpdMatrix> {
    x.require_nonempty()?;
    Ok(SpdMatrix::from_trusted(scm_matrix(x)))
}

/// `(1/n) Σ x_i x_iᵀ / ‖x_i‖²`. Zero rows are skipped and `n` counts only
/// the rows used, so the result always has unit trace.
pub fn sscm(x: &DataSet) -> Result<SpdMatrix> {
    gsscm(x, GsscmWeight::Sign)
}

/// `(1/n) Σ w(x_iᵀx_i) x_i x_iᵀ`. For weights singular at the origin, zero
/// rows are skipped in both the sum and the divisor.
pub fn gsscm(x: &DataSet, wf: impl Into<GsscmWeight>) -> Result<SpdMatrix> {
    let wf = wf.into();
    x.require_nonempty()?;
    let norms = squared_norms(x.rows());
    let singular = wf.singular_at_origin();
    let mut used = 0usize;
    let weights: Vec<f64> = norms
        .iter()
        .map(|&s| {
            if s == 0.0 && singular {
                0.0
            } else {
                used += 1;
                wf.eval(s)
            }
        })
        .collect();
    if used == 0 {
        return Err(EstimatorError::AllRowsZero);
    }
    Ok(SpdMatrix::from_trusted(weighted_scatter(
        x.rows(),
        &weights,
        used as f64,
    )))
}

/// Weight accepted by [`gsscm`]: any [`WeightFunction`], or the spatial-sign
/// weight `1/s` that is not itself a member of the M-estimation families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GsscmWeight {
    Family(WeightFunction),
    Sign,
}

impl GsscmWeight {
    fn singular_at_origin(&self) -> bool {
        match self {
            GsscmWeight::Family(wf) => wf.singular_at_origin(),
            GsscmWeight::Sign => true,
        }
    }

    fn eval(&self, s: f64) -> f64 {
        match self {
            GsscmWeight::Family(wf) => wf.w_unchecked(s),
            GsscmWeight::Sign => 1.0 / s,
        }
    }
}

impl From<WeightFunction> for GsscmWeight {
    fn from(wf: WeightFunction) -> Self {
        GsscmWeight::Family(wf)
    }
}

impl From<&WeightFunction> for GsscmWeight {
    fn from(wf: &WeightFunction) -> Self {
        GsscmWeight::Family(*wf)
    }
}

/// `β S⁻¹ + α I` with `S` the SCM.
pub fn em_precision(x: &DataSet, beta: f64, alpha: f64) -> Result<SpdMatrix> {
    if !(beta > 0.0) || !(alpha >= 0.0) {
        return Err(EstimatorError::InvalidConfig(format!(
            "em_precision needs beta > 0 and alpha >= 0 (got {beta}, {alpha})"
        )));
    }
    let s = scm(x)?;
    let inv = linalg::spd_inverse(&s)?;
    let p = x.p();
    let m = inv.matrix() * beta + DMatrix::identity(p, p) * alpha;
    Ok(SpdMatrix::from_trusted(m))
}

/// Mahalanobis-type quadratic forms `x_iᵀ M x_i`.
pub fn quadratic_forms_of(x: &DataSet, m: &DMatrix<f64>) -> Vec<f64> {
    quadratic_forms(x.rows(), m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_data(n: usize, p: usize, seed: u64) -> DataSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataSet::new(DMatrix::from_fn(n, p, |_, _| {
            StandardNormal.sample(&mut rng)
        }))
        .unwrap()
    }

    #[test]
    fn scm_examples() {
        let x = DataSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((scm(&x).unwrap().matrix() - DMatrix::identity(2, 2) * 0.5).norm() < 1e-15);
        let x = DataSet::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let r = x.row(0);
        assert!((scm(&x).unwrap().matrix() - &r * r.transpose()).norm() < 1e-15);
        let x = random_data(5, 3, 11);
        let mut direct = DMatrix::zeros(3, 3);
        for i in 0..5 {
            let r = x.row(i);
            direct += &r * r.transpose();
        }
        direct /= 5.0;
        assert!((scm(&x).unwrap().matrix() - direct).norm() < 1e-12);
        assert!(scm(&DataSet::empty(2)).is_err());
    }

    #[test]
    fn sscm_examples() {
        let x = DataSet::from_rows(&[vec![2.0, 0.0], vec![5.0, 0.0]]).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((sscm(&x).unwrap().matrix() - expected).norm() < 1e-15);
        let x = DataSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((sscm(&x).unwrap().matrix() - DMatrix::identity(2, 2) * 0.5).norm() < 1e-15);
        let x = random_data(40, 4, 3);
        assert!((sscm(&x).unwrap().trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sscm_skips_zero_rows() {
        let x = DataSet::from_rows(&[vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(x.zero_row_count(), 1);
        let s = sscm(&x).unwrap();
        assert!((s.trace() - 1.0).abs() < 1e-15);
        let zeros = DataSet::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert_eq!(sscm(&zeros), Err(EstimatorError::AllRowsZero));
    }

    #[test]
    fn gsscm_examples() {
        let x = random_data(30, 3, 5);
        let t = gsscm(&x, WeightFunction::tyler(3)).unwrap();
        assert!((t.matrix() - sscm(&x).unwrap().matrix() * 3.0).norm() < 1e-12);
        let c = gsscm(&x, WeightFunction::constant(1.0).unwrap()).unwrap();
        assert!((c.matrix() - scm(&x).unwrap().matrix()).norm() < 1e-12);
        let small = x.scaled(0.1);
        let max_sq = (0..small.n())
            .map(|i| small.row(i).norm_squared())
            .fold(0.0, f64::max);
        let h = gsscm(&small, WeightFunction::huber(max_sq).unwrap()).unwrap();
        assert!((h.matrix() - scm(&small).unwrap().matrix()).norm() < 1e-12);
    }

    #[test]
    fn em_precision_examples() {
        let x = random_data(50, 3, 9);
        let s = scm(&x).unwrap();
        let inv = linalg::spd_inverse(&s).unwrap();
        assert!((em_precision(&x, 1.0, 0.0).unwrap().matrix() - inv.matrix()).norm() < 1e-10);

        // S = I from a scaled orthonormal design.
        let x = DataSet::new(DMatrix::identity(3, 3) * 3f64.sqrt()).unwrap();
        let om = em_precision(&x, 2.0, 3.0).unwrap();
        assert!((om.matrix() - DMatrix::identity(3, 3) * 5.0).norm() < 1e-12);

        let x = random_data(60, 4, 2);
        let (beta, alpha) = (1.7, 0.4);
        let om = em_precision(&x, beta, alpha).unwrap();
        let shifted = om.matrix() - DMatrix::identity(4, 4) * alpha;
        let mut got = linalg::sym_eigen(&shifted).unwrap().eigenvalues;
        let mut want: Vec<f64> = linalg::sym_eigen(scm(&x).unwrap().matrix())
            .unwrap()
            .eigenvalues
            .iter()
            .map(|l| beta / l)
            .collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9 * b.max(1.0));
        }

        let singular = DataSet::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert!(em_precision(&singular, 1.0, 0.0).is_err());
    }
}
