use super::{discrepancy_sym, ExperimentError, Result};
use crate::datagen::{make_sigma_with, sample_gaussian};
use crate::estimators::{fixed_point_variant_eq10, DataSet, SolverConfig, Status};
use crate::substream;
use crate::weights::WeightFunction;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeMap;

/// Iteration budget for probes; slow convergence near the frontier is
/// common and a run that never settles counts as non-existence.
pub const PROBE_MAX_ITER: usize = 50_000;

/// Spread of the far cluster around its centre.
const CLUSTER_NOISE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Contamination {
    /// `m` copies of the origin.
    Zeros(usize),
    /// `m` points at `norm · u` plus small noise, `u` a random unit vector.
    FarCluster { m: usize, norm: f64 },
}

impl Contamination {
    pub fn count(&self) -> usize {
        match *self {
            Contamination::Zeros(m) => m,
            Contamination::FarCluster { m, .. } => m,
        }
    }

    fn rows<R: Rng + ?Sized>(&self, p: usize, rng: &mut R) -> DMatrix<f64> {
        match *self {
            Contamination::Zeros(m) => DMatrix::zeros(m, p),
            Contamination::FarCluster { m, norm } => {
                let mut u: DVector<f64> = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
                u /= u.norm();
                DMatrix::from_fn(m, p, |_, j| {
                    let z: f64 = StandardNormal.sample(rng);
                    norm * u[j] + CLUSTER_NOISE * z
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BreakdownReport {
    pub n_good: usize,
    pub p: usize,
    pub m: usize,
    /// `m / (n + m)`.
    pub epsilon_m: f64,
    pub kappa: f64,
    pub tally: BTreeMap<Status, usize>,
    /// Largest `λ₁` seen per status.
    pub lambda_max: BTreeMap<Status, f64>,
    /// Smallest `λ_p` over converged runs.
    pub lambda_min: Option<f64>,
    /// Largest `Tr[V₁V₂⁻¹ + V₁⁻¹V₂]` between clean and contaminated
    /// solutions over converged runs; infinite when a solution is
    /// numerically singular.
    pub max_discrepancy: Option<f64>,
    /// `1 − p/κ − (p−1)/n`.
    pub threshold_lo: f64,
    /// `1 − p/κ`.
    pub threshold_hi: f64,
}

impl BreakdownReport {
    fn new(n_good: usize, p: usize, m: usize, kappa: f64) -> Self {
        let hi = 1.0 - p as f64 / kappa;
        Self {
            n_good,
            p,
            m,
            epsilon_m: m as f64 / (n_good + m) as f64,
            kappa,
            tally: BTreeMap::new(),
            lambda_max: BTreeMap::new(),
            lambda_min: None,
            max_discrepancy: None,
            threshold_lo: hi - (p as f64 - 1.0) / n_good as f64,
            threshold_hi: hi,
        }
    }

    pub fn runs(&self) -> usize {
        self.tally.values().sum()
    }

    pub fn converged(&self) -> usize {
        self.tally.get(&Status::Converged).copied().unwrap_or(0)
    }

    /// Every run found a solution.
    pub fn exists(&self) -> bool {
        self.runs() > 0 && self.converged() == self.runs()
    }

    /// No run found a solution.
    pub fn none_exist(&self) -> bool {
        self.runs() > 0 && self.converged() == 0
    }

    fn merge(&mut self, other: &BreakdownReport) {
        for (s, c) in &other.tally {
            *self.tally.entry(*s).or_insert(0) += c;
        }
        for (s, l) in &other.lambda_max {
            let e = self.lambda_max.entry(*s).or_insert(*l);
            *e = e.max(*l);
        }
        self.lambda_min = merge_opt(self.lambda_min, other.lambda_min, f64::min);
        self.max_discrepancy = merge_opt(self.max_discrepancy, other.max_discrepancy, f64::max);
    }
}

fn merge_opt(a: Option<f64>, b: Option<f64>, f: fn(f64, f64) -> f64) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(f(x, y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn probe_solver(alpha: f64) -> SolverConfig {
    SolverConfig::default()
        .with_alpha(alpha)
        .with_max_iter(PROBE_MAX_ITER)
        .raw()
}

fn finite_kappa(wf: &WeightFunction) -> Result<f64> {
    wf.kappa()
        .finite()
        .ok_or_else(|| ExperimentError::Config(format!("{wf} has unbounded kappa")))
}

fn good_data(n_good: usize, p: usize, seed: u64) -> Result<DataSet> {
    let mut rng = substream(seed, &[0]);
    let sigma = make_sigma_with(p, p as f64, 0.3, 50.0, &mut rng).sigma;
    Ok(sample_gaussian(n_good, &sigma, rng.random())?)
}

/// Appends `contamination` to `n_good` Gaussian points and solves the
/// un-normalized shrinkage equation `V = (1/n) Σ w(xᵀ{V⁻¹+αI}x) x xᵀ`.
pub fn breakdown_probe(
    n_good: usize,
    p: usize,
    wf: &WeightFunction,
    alpha: f64,
    contamination: Contamination,
    seed: u64,
) -> Result<BreakdownReport> {
    let kappa = finite_kappa(wf)?;
    let good = good_data(n_good, p, seed)?;
    probe_on(&good, wf, alpha, contamination, kappa, seed)
}

fn probe_on(
    good: &DataSet,
    wf: &WeightFunction,
    alpha: f64,
    contamination: Contamination,
    kappa: f64,
    seed: u64,
) -> Result<BreakdownReport> {
    let (n_good, p) = (good.n(), good.p());
    let cfg = probe_solver(alpha);
    let mut report = BreakdownReport::new(n_good, p, contamination.count(), kappa);
    let rows = contamination.rows(p, &mut substream(seed, &[1]));
    let data = good.concat(&DataSet::new(rows)?)?;
    let result = fixed_point_variant_eq10(&data, wf, &cfg)?;
    report.tally.insert(result.status, 1);
    if result.lambda_max.is_finite() {
        report.lambda_max.insert(result.status, result.lambda_max);
    }
    if result.converged {
        report.lambda_min = Some(result.lambda_min);
        let clean = fixed_point_variant_eq10(good, wf, &cfg)?;
        if clean.converged {
            // A numerically singular solution is an unbounded discrepancy.
            let d = discrepancy_sym(&clean.estimate, &result.estimate).unwrap_or(f64::INFINITY);
            report.max_discrepancy = Some(d);
        }
    }
    Ok(report)
}

/// Probes each contamination level on `replicates` good datasets; the good
/// data of a replicate are shared by all levels.
pub fn breakdown_sweep(
    n_good: usize,
    p: usize,
    wf: &WeightFunction,
    alpha: f64,
    levels: &[Contamination],
    replicates: usize,
    seed: u64,
) -> Result<Vec<BreakdownReport>> {
    let kappa = finite_kappa(wf)?;
    if replicates == 0 {
        return Err(ExperimentError::Config(
            "replicates must be positive".into(),
        ));
    }
    let goods: Vec<DataSet> = (0..replicates as u64)
        .map(|r| good_data(n_good, p, substream(seed, &[r]).random()))
        .collect::<Result<_>>()?;
    levels
        .iter()
        .enumerate()
        .map(|(li, &c)| {
            let mut total = BreakdownReport::new(n_good, p, c.count(), kappa);
            for (r, good) in goods.iter().enumerate() {
                let s = substream(seed, &[r as u64, li as u64 + 1]).random();
                total.merge(&probe_on(good, wf, alpha, c, kappa, s)?);
            }
            Ok(total)
        })
        .collect()
}

/// `(largest ε_m below the first failure, smallest ε_m without any
/// solution)` over reports sorted by contamination level.
pub fn empirical_frontier(reports: &[BreakdownReport]) -> (Option<f64>, Option<f64>) {
    let mut sorted: Vec<&BreakdownReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.epsilon_m.total_cmp(&b.epsilon_m));
    let last_exist = sorted
        .iter()
        .take_while(|r| r.exists())
        .last()
        .map(|r| r.epsilon_m);
    let first_none = sorted.iter().find(|r| r.none_exist()).map(|r| r.epsilon_m);
    (last_exist, first_none)
}
