//! Data-side checks of the existence conditions: mass at the origin and
//! concentration on `(p−1)`-dimensional subspaces.

use super::DataSet;
use crate::linalg;
use nalgebra::DVector;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Above this many candidate subsets the search switches to sampling.
const EXACT_SUBSET_LIMIT: u128 = 200_000;
const SAMPLED_SUBSETS: usize = 20_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionFReport {
    pub kappa: f64,
    /// `1 − p/κ`.
    pub threshold: f64,
    pub zero_fraction: f64,
    /// `zero_fraction <= threshold`.
    pub zero_ok: bool,
    /// Largest fraction of rows (zeros included) inside one subspace of
    /// dimension `p − 1` spanned by rows.
    pub max_subspace_fraction: f64,
    /// `max_subspace_fraction < threshold`.
    pub subspace_ok: bool,
    /// Whether every candidate subspace was examined.
    pub exact: bool,
}

impl ConditionFReport {
    pub fn passes(&self) -> bool {
        self.zero_ok && self.subspace_ok
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u128::MAX / 1024 {
            return u128::MAX;
        }
    }
    acc
}

/// Counts rows lying in the span of `basis_rows` (must be `p − 1` of them).
fn count_in_span(rows: &[DVector<f64>], basis_rows: &[usize], zeros: usize) -> Option<usize> {
    let vecs: Vec<DVector<f64>> = basis_rows.iter().map(|&i| rows[i].clone()).collect();
    let basis = linalg::gram_schmidt(&vecs).ok()?;
    let count = rows
        .iter()
        .filter(|x| {
            let mut r = (*x).clone();
            for q in &basis {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
            r.norm() <= 1e-9 * x.norm()
        })
        .count();
    Some(count + zeros)
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

pub fn condition_f_diagnostic(x: &DataSet, kappa: f64) -> ConditionFReport {
    let (n, p) = (x.n(), x.p());
    let threshold = 1.0 - p as f64 / kappa;
    let zeros = x.zero_row_count();
    let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
    let zero_fraction = frac(zeros);

    let nonzero: Vec<DVector<f64>> = (0..n)
        .map(|i| x.row(i))
        .filter(|r| r.iter().any(|&v| v != 0.0))
        .collect();
    let m = nonzero.len();
    let k = p.saturating_sub(1);

    let (best, exact) = if k == 0 || m == 0 {
        (zeros, true)
    } else if m < k {
        // Every nonzero row fits in some common (p−1)-subspace.
        (n, true)
    } else if binomial(m, k) <= EXACT_SUBSET_LIMIT {
        let mut comb: Vec<usize> = (0..k).collect();
        let mut best = zeros;
        let mut any_independent = false;
        loop {
            if let Some(c) = count_in_span(&nonzero, &comb, zeros) {
                any_independent = true;
                best = best.max(c);
            }
            if !next_combination(&mut comb, m) {
                break;
            }
        }
        if !any_independent {
            // Rows span fewer than p−1 dimensions.
            best = n;
        }
        (best, true)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut best = zeros;
        for _ in 0..SAMPLED_SUBSETS {
            let comb: Vec<usize> = sample(&mut rng, m, k).into_vec();
            if let Some(c) = count_in_span(&nonzero, &comb, zeros) {
                best = best.max(c);
            }
        }
        (best, false)
    };
    let max_subspace_fraction = frac(best);
    ConditionFReport {
        kappa,
        threshold,
        zero_fraction,
        zero_ok: zero_fraction <= threshold,
        max_subspace_fraction,
        subspace_ok: max_subspace_fraction < threshold,
        exact,
    }
}
