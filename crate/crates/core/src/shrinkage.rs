//! Choice of the shrinkage coefficient `α`.
//!
//! The coefficient minimizes the Frobenius risk of `(1−α)C⁻¹ + αI` as an
//! estimate of the precision `Ω`, where `C = (p/n) Σ x xᵀ/(xᵀΩx)`. The
//! minimizer is a ratio of traces involving `E[C⁻¹]` and `E[‖C⁻¹‖²]`. In
//! practice `Ω` is replaced by a pilot precision `M2` and the expectations by
//! bootstrap averages.

use crate::estimators::{self, quadratic_forms_of, DataSet, EstimatorError, SolverConfig};
use crate::linalg::{self, SpdMatrix};
use crate::seeding::substream;
use crate::weights::WeightFunction;
use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

pub const DEFAULT_REPLICATES: usize = 200;
/// Fraction of distinct points a resample should reach on average.
pub const DISTINCT_FRACTION: f64 = 0.975;
/// Resamples whose `C` has a Frobenius condition number above this are
/// treated as singular.
const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShrinkageError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("denominator of the shrinkage ratio vanishes ({0:e})")]
    DegenerateDenominator(f64),
    #[error("all {0} bootstrap resamples produced a singular matrix")]
    AllResamplesSingular(usize),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

pub type Result<T> = std::result::Result<T, ShrinkageError>;

/// Bootstrap approximations of `E[C⁻¹]` and `E[‖C⁻¹‖_F²]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentEstimates {
    pub m1: DMatrix<f64>,
    pub m2: f64,
    /// Requested replicates `B`.
    pub replicates: usize,
    pub resample_size: usize,
    /// Replicates skipped because `C` was singular.
    pub degenerate_count: usize,
}

/// Clamped coefficient together with the unclamped ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaValue {
    pub alpha: f64,
    pub raw: f64,
}

/// `(p/n) Σ x xᵀ / (xᵀ M x)`.
pub fn c_p_matrix(x: &DataSet, m: &SpdMatrix) -> Result<SpdMatrix> {
    let q = validated_forms(x, m)?;
    let counts = vec![1.0; x.n()];
    Ok(SpdMatrix::from_trusted(weighted_c_p(
        x,
        &q,
        &counts,
        x.n() as f64,
    )))
}

fn validated_forms(x: &DataSet, m: &SpdMatrix) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(EstimatorError::EmptyDataSet.into());
    }
    if m.dim() != x.p() {
        return Err(EstimatorError::DimensionMismatch {
            expected: x.p(),
            actual: m.dim(),
        }
        .into());
    }
    if x.zero_row_count() > 0 {
        return Err(EstimatorError::ZeroRows {
            count: x.zero_row_count(),
        }
        .into());
    }
    if !m.is_strictly_pd() {
        return Err(ShrinkageError::InvalidArgument(
            "M must be positive definite".into(),
        ));
    }
    Ok(quadratic_forms_of(x, m.matrix()))
}

/// `(p/size) Σ_i counts_i x_i x_iᵀ / q_i`.
fn weighted_c_p(x: &DataSet, q: &[f64], counts: &[f64], size: f64) -> DMatrix<f64> {
    let p = x.p() as f64;
    let w: Vec<f64> = q.iter().zip(counts).map(|(q, c)| p * c / q).collect();
    estimators::weighted_scatter(x.rows(), &w, size)
}

/// Closed-form risk minimizer
/// `(Tr M2 − Tr m1 − Tr[m1 M2] + m2) / (p − 2 Tr m1 + m2)`, clamped to `[0, 1]`.
pub fn alpha_from_moments(
    m2_matrix: &SpdMatrix,
    m: &MomentEstimates,
    p: usize,
) -> Result<AlphaValue> {
    if m.m1.shape() != (p, p) || m2_matrix.dim() != p {
        return Err(ShrinkageError::InvalidArgument(format!(
            "moment matrices must be {p}x{p}"
        )));
    }
    let tr_m1 = m.m1.trace();
    let cross = m.m1.component_mul(m2_matrix.matrix()).sum();
    let num = m2_matrix.trace() - tr_m1 - cross + m.m2;
    let den = p as f64 - 2.0 * tr_m1 + m.m2;
    if den.abs() < 1e-12 {
        return Err(ShrinkageError::DegenerateDenominator(den));
    }
    let raw = num / den;
    Ok(AlphaValue {
        alpha: raw.clamp(0.0, 1.0),
        raw,
    })
}

/// Moments from `B` with-replacement resamples of size `resample_size`,
/// each replicate drawn from its own substream of `seed`.
pub fn bootstrap_moments(
    x: &DataSet,
    m2_matrix: &SpdMatrix,
    replicates: usize,
    resample_size: usize,
    seed: u64,
) -> Result<MomentEstimates> {
    if replicates == 0 {
        return Err(ShrinkageError::InvalidArgument(
            "B must be at least 1".into(),
        ));
    }
    if resample_size < x.p() + 1 {
        return Err(ShrinkageError::InvalidArgument(format!(
            "resample size {resample_size} must exceed p = {}",
            x.p()
        )));
    }
    let n = x.n();
    let plan = (0..replicates).map(|b| {
        let mut rng = substream(seed, &[b as u64]);
        let mut counts = vec![0.0; n];
        for _ in 0..resample_size {
            counts[rng.random_range(0..n)] += 1.0;
        }
        counts
    });
    moments_from_counts(x, m2_matrix, plan, resample_size)
}

/// Moments from explicit resamples (row indices, repetition allowed).
pub fn moments_from_resamples(
    x: &DataSet,
    m2_matrix: &SpdMatrix,
    resamples: &[Vec<usize>],
) -> Result<MomentEstimates> {
    let Some(first) = resamples.first() else {
        return Err(ShrinkageError::InvalidArgument("no resamples given".into()));
    };
    let size = first.len();
    if resamples.iter().any(|r| r.len() != size) {
        return Err(ShrinkageError::InvalidArgument(
            "resamples must share one size".into(),
        ));
    }
    let n = x.n();
    if resamples.iter().flatten().any(|&i| i >= n) {
        return Err(ShrinkageError::InvalidArgument(
            "resample index out of range".into(),
        ));
    }
    let plan = resamples.iter().map(|r| {
        let mut counts = vec![0.0; n];
        for &i in r {
            counts[i] += 1.0;
        }
        counts
    });
    moments_from_counts(x, m2_matrix, plan, size)
}

fn moments_from_counts(
    x: &DataSet,
    m2_matrix: &SpdMatrix,
    plan: impl Iterator<Item = Vec<f64>>,
    resample_size: usize,
) -> Result<MomentEstimates> {
    let q = validated_forms(x, m2_matrix)?;
    let p = x.p();
    let mut m1 = DMatrix::zeros(p, p);
    let mut m2 = 0.0;
    let mut used = 0usize;
    let mut degenerate_count = 0usize;
    let mut replicates = 0usize;
    for counts in plan {
        replicates += 1;
        let c = weighted_c_p(x, &q, &counts, resample_size as f64);
        match linalg::chol_inverse(&c) {
            Some(inv) if c.norm() * inv.norm() < CONDITION_LIMIT => {
                m2 += inv.norm_squared();
                m1 += inv;
                used += 1;
            }
            _ => degenerate_count += 1,
        }
    }
    if used == 0 {
        return Err(ShrinkageError::AllResamplesSingular(replicates));
    }
    m1 /= used as f64;
    m2 /= used as f64;
    Ok(MomentEstimates {
        m1,
        m2,
        replicates,
        resample_size,
        degenerate_count,
    })
}

/// Expected number of with-replacement draws from `n` items until `k`
/// distinct items have been seen: `n Σ_{i=n−k+1}^{n} 1/i`.
pub fn coupon_resamples(n: usize, k: usize) -> Result<f64> {
    if k == 0 || k > n {
        return Err(ShrinkageError::InvalidArgument(format!(
            "need 1 <= k <= n (n = {n}, k = {k})"
        )));
    }
    // Smallest terms first.
    let sum: f64 = (n - k + 1..=n).rev().map(|i| 1.0 / i as f64).sum();
    Ok(n as f64 * sum)
}

/// Bootstrap resample size for a dataset of `n` points.
pub fn default_resample_size(n: usize) -> Result<usize> {
    let k = ((DISTINCT_FRACTION * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(coupon_resamples(n, k.min(n))?.round() as usize)
}

/// Origin of the pilot precision `M2`.
#[derive(Clone, Debug, PartialEq)]
pub enum M2Source {
    /// Inverse of the trace-normalized SCM (identity if singular).
    ScmInverse,
    /// Inverse of Tyler's estimator.
    TmeInverse,
    User(SpdMatrix),
}

impl std::str::FromStr for M2Source {
    type Err = ShrinkageError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scm" => Ok(M2Source::ScmInverse),
            "tme" => Ok(M2Source::TmeInverse),
            other => Err(ShrinkageError::InvalidArgument(format!(
                "unknown M2 source {other:?} (expected scm or tme)"
            ))),
        }
    }
}

pub fn pilot_precision(x: &DataSet, source: &M2Source) -> Result<SpdMatrix> {
    let p = x.p();
    match source {
        M2Source::User(m) => {
            if m.dim() != p {
                return Err(EstimatorError::DimensionMismatch {
                    expected: p,
                    actual: m.dim(),
                }
                .into());
            }
            Ok(m.clone())
        }
        M2Source::ScmInverse => {
            let s = estimators::scm(x)?;
            let inverse = linalg::trace_normalize(&s)
                .ok()
                .filter(|s| s.is_strictly_pd())
                .and_then(|s| linalg::spd_inverse(&s).ok());
            Ok(inverse.unwrap_or_else(|| SpdMatrix::identity(p)))
        }
        M2Source::TmeInverse => {
            let tme =
                estimators::m_fixed_point(x, &WeightFunction::tyler(p), &SolverConfig::default())?;
            Ok(linalg::spd_inverse(&tme.estimate)?)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaHat {
    pub alpha: f64,
    pub raw: f64,
    pub moments: MomentEstimates,
    pub pilot: SpdMatrix,
}

/// Plug-in coefficient: pilot precision, bootstrap moments with the
/// coupon-collector resample size, then the closed-form ratio.
pub fn alpha_hat(x: &DataSet, source: &M2Source, replicates: usize, seed: u64) -> Result<AlphaHat> {
    let pilot = pilot_precision(x, source)?;
    let size = default_resample_size(x.n())?.max(x.p() + 1);
    let moments = bootstrap_moments(x, &pilot, replicates, size, seed)?;
    let value = alpha_from_moments(&pilot, &moments, x.p())?;
    Ok(AlphaHat {
        alpha: value.alpha,
        raw: value.raw,
        moments,
        pilot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, scales: &[f64], seed: u64) -> DataSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataSet::new(DMatrix::from_fn(n, scales.len(), |_, j| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scales[j]
        }))
        .unwrap()
    }

    #[test]
    fn c_p_examples() {
        let x = DataSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let c = c_p_matrix(&x, &SpdMatrix::identity(2)).unwrap();
        assert!((c.matrix() - DMatrix::identity(2, 2)).norm() < 1e-15);

        let x = gaussian(30, &[1.0, 2.0, 0.5], 1);
        let m = SpdMatrix::from_diagonal(&[1.0, 0.25, 4.0]).unwrap();
        let a = c_p_matrix(&x, &m).unwrap();
        let b = c_p_matrix(&x.scaled(10.0), &m).unwrap();
        assert!((a.matrix() - b.matrix()).norm() < 1e-12);

        let zero = DataSet::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(c_p_matrix(&zero, &SpdMatrix::identity(2)).is_err());
    }

    #[test]
    fn c_p_trace_concentrates_at_p() {
        // Σ = diag(2, 1, 0.5, 0.5) has trace p = 4; with M = Σ⁻¹ the expected
        // trace is Tr Σ.
        let scales = [2f64.sqrt(), 1.0, 0.5f64.sqrt(), 0.5f64.sqrt()];
        let m = SpdMatrix::from_diagonal(&[0.5, 1.0, 2.0, 2.0]).unwrap();
        let traces: Vec<f64> = (0..200)
            .map(|s| {
                c_p_matrix(&gaussian(100, &scales, 100 + s), &m)
                    .unwrap()
                    .trace()
            })
            .collect();
        let mean = traces.iter().sum::<f64>() / 200.0;
        let var = traces.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / 199.0;
        let se = (var / 200.0).sqrt();
        assert!((mean - 4.0).abs() < 4.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn alpha_from_moments_examples() {
        let omega = SpdMatrix::from_diagonal(&[2.0, 0.5, 1.5]).unwrap();
        let m = MomentEstimates {
            m1: omega.matrix().clone(),
            m2: omega.matrix().norm_squared(),
            replicates: 1,
            resample_size: 1,
            degenerate_count: 0,
        };
        let a = alpha_from_moments(&omega, &m, 3).unwrap();
        assert!(a.raw.abs() < 1e-14);

        let degenerate = MomentEstimates {
            m1: DMatrix::identity(3, 3),
            m2: 3.0,
            ..m
        };
        assert!(matches!(
            alpha_from_moments(&omega, &degenerate, 3),
            Err(ShrinkageError::DegenerateDenominator(_))
        ));
    }

    #[test]
    fn alpha_matches_grid_search_on_same_draws() {
        let scales = [2.0, 1.5, 1.0, 0.7, 0.5];
        let x = gaussian(100, &scales, 7);
        let pilot = pilot_precision(&x, &M2Source::ScmInverse).unwrap();
        let plan: Vec<Vec<usize>> = (0..200)
            .map(|b| {
                let mut rng = substream(3, &[b]);
                (0..369).map(|_| rng.random_range(0..100)).collect()
            })
            .collect();
        let m = moments_from_resamples(&x, &pilot, &plan).unwrap();
        let a = alpha_from_moments(&pilot, &m, 5).unwrap();

        // Oracle: empirical risk of (1−α)C⁻¹ + αI against M2 over the same
        // resamples, minimized on a grid.
        let inverses: Vec<DMatrix<f64>> = plan
            .iter()
            .map(|r| {
                let sub = x.select(r);
                let c = c_p_matrix(&sub, &pilot).unwrap();
                linalg::chol_inverse(c.matrix()).unwrap()
            })
            .collect();
        let eye = DMatrix::<f64>::identity(5, 5);
        let risk = |alpha: f64| {
            inverses
                .iter()
                .map(|ci| (ci * (1.0 - alpha) + &eye * alpha - pilot.matrix()).norm_squared())
                .sum::<f64>()
        };
        let best = (0..=1000)
            .map(|i| i as f64 / 1000.0)
            .min_by(|a, b| risk(*a).total_cmp(&risk(*b)))
            .unwrap();
        assert!(
            (best - a.alpha).abs() < 0.01,
            "grid {best} formula {}",
            a.alpha
        );
    }

    #[test]
    fn bootstrap_single_forced_replicate() {
        let x = gaussian(20, &[1.0, 2.0], 2);
        let pilot = pilot_precision(&x, &M2Source::ScmInverse).unwrap();
        let all: Vec<usize> = (0..20).collect();
        let m = moments_from_resamples(&x, &pilot, &[all]).unwrap();
        let c = c_p_matrix(&x, &pilot).unwrap();
        let inv = linalg::chol_inverse(c.matrix()).unwrap();
        assert!((m.m1 - &inv).norm() < 1e-12);
        assert!((m.m2 - inv.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_counts_degenerate_resamples() {
        let x = gaussian(10, &[1.0, 2.0], 3);
        let pilot = SpdMatrix::identity(2);
        let plan = vec![vec![4; 10], (0..10).collect()];
        let m = moments_from_resamples(&x, &pilot, &plan).unwrap();
        assert_eq!(m.degenerate_count, 1);
        assert_eq!(m.replicates, 2);
        assert!(matches!(
            moments_from_resamples(&x, &pilot, &[vec![4; 10]]),
            Err(ShrinkageError::AllResamplesSingular(1))
        ));
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let x = gaussian(50, &[1.0, 2.0, 3.0], 4);
        let pilot = pilot_precision(&x, &M2Source::TmeInverse).unwrap();
        let a = bootstrap_moments(&x, &pilot, 50, 120, 9).unwrap();
        let b = bootstrap_moments(&x, &pilot, 50, 120, 9).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_moments(&x, &pilot, 50, 120, 10).unwrap();
        assert_ne!(a, c);
        assert!(a.m2 >= a.m1.norm_squared() - 1e-6 * a.m2);
    }

    #[test]
    fn duplicated_dataset_has_same_moments_in_law() {
        let x = gaussian(40, &[1.0, 1.5], 5);
        let xx = x.concat(&x).unwrap();
        let pilot = pilot_precision(&x, &M2Source::ScmInverse).unwrap();
        let single = |data: &DataSet, seed: u64| -> Vec<f64> {
            (0..500)
                .map(|b| {
                    bootstrap_moments(data, &pilot, 1, 100, seed + b)
                        .unwrap()
                        .m1
                        .trace()
                })
                .collect()
        };
        let a = single(&x, 0);
        let b = single(&xx, 10_000);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let se = ((var(&a) + var(&b)) / 500.0).sqrt();
        assert!((mean(&a) - mean(&b)).abs() < 3.0 * se);
    }

    #[test]
    fn coupon_examples() {
        assert_eq!(coupon_resamples(1, 1).unwrap(), 1.0);
        assert!((coupon_resamples(2, 2).unwrap() - 3.0).abs() < 1e-15);
        let expected = 100.0 * (5.187_377_517_639_621 - 1.5);
        assert!((coupon_resamples(100, 98).unwrap() - expected).abs() < 1e-9);
        assert_eq!(default_resample_size(100).unwrap(), 369);
        assert!(coupon_resamples(3, 4).is_err());
        assert!(coupon_resamples(3, 0).is_err());
    }

    #[test]
    fn coupon_is_increasing_and_convex() {
        let n = 100;
        let v: Vec<f64> = (1..=n).map(|k| coupon_resamples(n, k).unwrap()).collect();
        for w in v.windows(3) {
            assert!(w[1] > w[0]);
            assert!(w[2] - w[1] > w[1] - w[0]);
        }
    }

    #[test]
    fn m2_source_parsing() {
        assert_eq!("scm".parse::<M2Source>().unwrap(), M2Source::ScmInverse);
        assert_eq!("tme".parse::<M2Source>().unwrap(), M2Source::TmeInverse);
        assert!("oracle".parse::<M2Source>().is_err());
    }

    #[test]
    fn alpha_hat_is_in_unit_interval() {
        let x = gaussian(100, &[1.0; 5], 6);
        let a = alpha_hat(&x, &M2Source::ScmInverse, 100, 1).unwrap();
        assert!((0.0..=1.0).contains(&a.alpha));
        assert_eq!(a.moments.resample_size, 369);
    }

    proptest! {
        #[test]
        fn alpha_ratio_invariant_under_permutation(seed in 0u64..500, perm_seed in 0u64..500) {
            let p = 4;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g: DMatrix<f64> = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(&mut rng));
            let m1: DMatrix<f64> = &g * g.transpose() / p as f64 + DMatrix::identity(p, p) * 0.1;
            let h: DMatrix<f64> = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(&mut rng));
            let pilot = SpdMatrix::new(&h * h.transpose() + DMatrix::identity(p, p)).unwrap();
            let m = MomentEstimates { m2: m1.norm_squared() * 1.3, m1, replicates: 1, resample_size: 1, degenerate_count: 0 };

            let mut order: Vec<usize> = (0..p).collect();
            let mut prng = ChaCha8Rng::seed_from_u64(perm_seed);
            for i in (1..p).rev() {
                order.swap(i, prng.random_range(0..=i));
            }
            let perm = DMatrix::from_fn(p, p, |i, j| if order[i] == j { 1.0 } else { 0.0 });
            let conj = |a: &DMatrix<f64>| &perm * a * perm.transpose();
            let pm = MomentEstimates { m1: conj(&m.m1), ..m.clone() };
            let pp = SpdMatrix::new(conj(pilot.matrix())).unwrap();

            let a = alpha_from_moments(&pilot, &m, p).unwrap().raw;
            let b = alpha_from_moments(&pp, &pm, p).unwrap().raw;
            prop_assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        }
    }
}
