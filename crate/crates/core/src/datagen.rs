//! Synthetic data: true scatter matrices with a prescribed trace, largest
//! contribution ratio and condition number; Gaussian and multivariate-t
//! bodies; outliers at a fixed squared Mahalanobis radius.

use crate::estimators::{quadratic_forms_of, DataSet, EstimatorError};
use crate::linalg::{self, LinalgError, SpdMatrix};
use crate::seeding::substream;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Dirichlet draws attempted before falling back to equal middle ratios.
pub const MAX_ATTEMPTS: usize = 100_000;
/// Variance of each coordinate around a clustered-outlier center.
pub const CLUSTER_VARIANCE: f64 = 0.01;

const TAG_SIGMA: u64 = 1;
const TAG_BODY: u64 = 2;
const TAG_OUTLIERS: u64 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatagenError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("line {line}: {message}")]
    Config { line: usize, message: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

pub type Result<T> = std::result::Result<T, DatagenError>;

/// Which branch produced a set of contribution ratios.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatioBranch {
    /// `(c1, c2)` cannot be met; uniform ratios.
    Infeasible,
    /// A Dirichlet draw satisfied both bounds.
    Accepted,
    /// No acceptable draw; equal middle ratios.
    Fallback,
    /// `p <= 4`, where the Dirichlet construction is not defined.
    SmallDimension,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioDraw {
    /// Descending, summing to one.
    pub ratios: Vec<f64>,
    pub branch: RatioBranch,
}

fn uniform(p: usize) -> Vec<f64> {
    vec![1.0 / p as f64; p]
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Contribution ratios `λ_j / Tr Σ` with largest `c1` and condition
/// number `c2`. The middle `p − 2` ratios are a flat Dirichlet draw scaled to
/// the remaining mass `1 − c1 − c1/c2`, accepted when every scaled value lies
/// in `[c1/c2, c1]`.
pub fn contribution_ratios_with<R: Rng + ?Sized>(
    p: usize,
    c1: f64,
    c2: f64,
    rng: &mut R,
) -> RatioDraw {
    let lo = c1 / c2;
    let pf = p as f64;
    if p == 1 {
        return RatioDraw {
            ratios: vec![1.0],
            branch: RatioBranch::SmallDimension,
        };
    }
    let rest = 1.0 - c1 - lo;
    let k = p - 2;
    if p <= 4 {
        // (c1, middles, c1/c2) with the middles at rest/k when that fits the
        // bounds; otherwise midway between the extremes, rescaled to sum 1.
        // Either way the condition number c2 is kept.
        let exact = k > 0 && rest / k as f64 >= lo - 1e-12 && rest / k as f64 <= c1 + 1e-12;
        let mid = if exact {
            rest / k as f64
        } else {
            0.5 * (c1 + lo)
        };
        let mut v = vec![c1];
        v.extend(std::iter::repeat_n(mid, k));
        v.push(lo);
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|r| *r /= total);
        return RatioDraw {
            ratios: sorted_desc(v),
            branch: RatioBranch::SmallDimension,
        };
    }
    if (pf - 1.0) * c1 + lo < 1.0 - 1e-12 || c1 + (pf - 1.0) * lo > 1.0 + 1e-12 {
        return RatioDraw {
            ratios: uniform(p),
            branch: RatioBranch::Infeasible,
        };
    }
    let (a, b) = (lo / rest, c1 / rest);
    let fallback = || {
        let mut v = vec![c1, lo];
        v.extend(std::iter::repeat_n(rest / k as f64, k));
        RatioDraw {
            ratios: sorted_desc(v),
            branch: RatioBranch::Fallback,
        }
    };
    // P(min l >= a) = (1 − k·a)^(k−1) bounds the acceptance probability.
    let accept_bound = (1.0 - k as f64 * a).max(0.0).powi(k as i32 - 1);
    if accept_bound * (MAX_ATTEMPTS as f64) < 1e-6 {
        return fallback();
    }
    let mut l = vec![0.0; k];
    for _ in 0..MAX_ATTEMPTS {
        let mut sum = 0.0;
        for v in l.iter_mut() {
            *v = Exp1.sample(rng);
            sum += *v;
        }
        let (mut mn, mut mx) = (f64::INFINITY, 0.0f64);
        for v in l.iter_mut() {
            *v /= sum;
            mn = mn.min(*v);
            mx = mx.max(*v);
        }
        if a <= mn && mx <= b {
            let mut v = vec![c1, lo];
            v.extend(l.iter().map(|x| x * rest));
            return RatioDraw {
                ratios: sorted_desc(v),
                branch: RatioBranch::Accepted,
            };
        }
    }
    fallback()
}

pub fn contribution_ratios(p: usize, c1: f64, c2: f64, seed: u64) -> RatioDraw {
    contribution_ratios_with(p, c1, c2, &mut substream(seed, &[TAG_SIGMA, 0]))
}

/// Gram-Schmidt orthonormalization of `p` standard Gaussian vectors
/// (columns of the result).
pub fn random_orthonormal_with<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let draws: Vec<DVector<f64>> = (0..p)
            .map(|_| DVector::from_fn(p, |_, _| StandardNormal.sample(rng)))
            .collect();
        if let Ok(basis) = linalg::gram_schmidt(&draws) {
            return DMatrix::from_columns(&basis);
        }
    }
}

pub fn random_orthonormal(p: usize, seed: u64) -> DMatrix<f64> {
    random_orthonormal_with(p, &mut substream(seed, &[TAG_SIGMA, 1]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SigmaDraw {
    pub sigma: SpdMatrix,
    pub eigenvalues: Vec<f64>,
    pub branch: RatioBranch,
}

/// `Q diag(trace · ratios) Qᵀ` with random orthonormal `Q`.
pub fn make_sigma_with<R: Rng + ?Sized>(
    p: usize,
    trace: f64,
    c1: f64,
    c2: f64,
    rng: &mut R,
) -> SigmaDraw {
    let draw = contribution_ratios_with(p, c1, c2, rng);
    let q = random_orthonormal_with(p, rng);
    let eigenvalues: Vec<f64> = draw.ratios.iter().map(|r| r * trace).collect();
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(&eigenvalues));
    let sigma = SpdMatrix::from_trusted(&q * d * q.transpose());
    SigmaDraw {
        sigma,
        eigenvalues,
        branch: draw.branch,
    }
}

pub fn make_sigma(scn: &Scenario, seed: u64) -> Result<SigmaDraw> {
    scn.validate()?;
    Ok(make_sigma_with(
        scn.p,
        scn.trace(),
        scn.c1_value(),
        scn.c2,
        &mut substream(seed, &[TAG_SIGMA]),
    ))
}

fn correlate(z: DMatrix<f64>, sigma: &SpdMatrix) -> Result<DMatrix<f64>> {
    let root = linalg::sqrt_psd(sigma)?;
    Ok(z * root)
}

fn gaussian_matrix<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> DMatrix<f64> {
    // Row-major fill so that a prefix of rows does not depend on n.
    let mut z = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            z[(i, j)] = StandardNormal.sample(rng);
        }
    }
    z
}

/// `n` draws `x = Σ^{1/2} z`, `z ~ N(0, I)`.
pub fn sample_gaussian(n: usize, sigma: &SpdMatrix, seed: u64) -> Result<DataSet> {
    let mut rng = substream(seed, &[TAG_BODY, 0]);
    let z = gaussian_matrix(n, sigma.dim(), &mut rng);
    Ok(DataSet::new(correlate(z, sigma)?)?)
}

/// Multivariate t: `x = Σ^{1/2} z / sqrt(u/df)` with `u ~ χ²(df)`.
pub fn sample_t(n: usize, sigma: &SpdMatrix, df: u32, seed: u64) -> Result<DataSet> {
    if df == 0 {
        return Err(DatagenError::InvalidScenario(
            "t degrees of freedom must be positive".into(),
        ));
    }
    let chi =
        ChiSquared::new(df as f64).map_err(|e| DatagenError::InvalidScenario(e.to_string()))?;
    let mut rng = substream(seed, &[TAG_BODY, 1]);
    let u: Vec<f64> = (0..n).map(|_| chi.sample(&mut rng)).collect();
    sample_t_with_mixing(n, sigma, df, &u, seed)
}

/// Multivariate t with the chi-square mixing draws supplied by the caller.
/// With every `u_i = df` this reproduces [`sample_gaussian`] exactly.
pub fn sample_t_with_mixing(
    n: usize,
    sigma: &SpdMatrix,
    df: u32,
    u: &[f64],
    seed: u64,
) -> Result<DataSet> {
    if u.len() != n {
        return Err(DatagenError::InvalidScenario(format!(
            "{} mixing draws for {n} rows",
            u.len()
        )));
    }
    let mut rng = substream(seed, &[TAG_BODY, 0]);
    let mut z = gaussian_matrix(n, sigma.dim(), &mut rng);
    for (i, ui) in u.iter().enumerate() {
        let s = (ui / df as f64).sqrt();
        z.row_mut(i).unscale_mut(s);
    }
    Ok(DataSet::new(correlate(z, sigma)?)?)
}

/// `r = (1/n) Σ z_iᵀ Σ⁻¹ z_i`.
pub fn mean_sq_mahalanobis(x: &DataSet, sigma: &SpdMatrix) -> Result<f64> {
    if x.is_empty() {
        return Err(EstimatorError::EmptyDataSet.into());
    }
    let inv = linalg::spd_inverse(sigma)?;
    let q = quadratic_forms_of(x, inv.matrix());
    Ok(q.iter().sum::<f64>() / x.n() as f64)
}

fn on_radius<R: Rng + ?Sized>(sigma_inv: &DMatrix<f64>, target: f64, rng: &mut R) -> DVector<f64> {
    let p = sigma_inv.nrows();
    loop {
        let g: DVector<f64> = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
        let norm = g.norm();
        if norm == 0.0 {
            continue;
        }
        let u = g / norm;
        let form = (u.transpose() * sigma_inv * &u)[(0, 0)];
        return u * (target / form).sqrt();
    }
}

fn check_target(target: f64) -> Result<()> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(DatagenError::InvalidScenario(format!(
            "outlier radius {target} must be positive"
        )));
    }
    Ok(())
}

/// `m` points in uniformly random directions, each with `zᵀΣ⁻¹z = target`.
/// Rows of the returned `m x p` matrix are the points.
pub fn outliers_unclustered(
    m: usize,
    sigma: &SpdMatrix,
    target: f64,
    seed: u64,
) -> Result<DMatrix<f64>> {
    check_target(target)?;
    let inv = linalg::spd_inverse(sigma)?;
    let mut rng = substream(seed, &[TAG_OUTLIERS, 0]);
    let p = sigma.dim();
    let mut out = DMatrix::zeros(m, p);
    for i in 0..m {
        let z = on_radius(inv.matrix(), target, &mut rng);
        out.row_mut(i).copy_from(&z.transpose());
    }
    Ok(out)
}

/// `m` points from `N(μ_o, 0.01 I)` around one center `μ_o` with
/// `μ_oᵀΣ⁻¹μ_o = target`.
pub fn outliers_clustered(
    m: usize,
    sigma: &SpdMatrix,
    target: f64,
    seed: u64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_target(target)?;
    let inv = linalg::spd_inverse(sigma)?;
    let mut rng = substream(seed, &[TAG_OUTLIERS, 1]);
    let center = on_radius(inv.matrix(), target, &mut rng);
    let p = sigma.dim();
    let sd = CLUSTER_VARIANCE.sqrt();
    let mut out = DMatrix::zeros(m, p);
    for i in 0..m {
        for j in 0..p {
            let z: f64 = StandardNormal.sample(&mut rng);
            out[(i, j)] = center[j] + sd * z;
        }
    }
    Ok((out, center))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutlierMode {
    None,
    Unclustered,
    Clustered,
}

impl FromStr for OutlierMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(OutlierMode::None),
            "unclustered" => Ok(OutlierMode::Unclustered),
            "clustered" => Ok(OutlierMode::Clustered),
            other => Err(format!("unknown outlier_mode {other:?}")),
        }
    }
}

impl fmt::Display for OutlierMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutlierMode::None => "none",
            OutlierMode::Unclustered => "unclustered",
            OutlierMode::Clustered => "clustered",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Body {
    Gaussian,
    T { df: u32 },
}

impl FromStr for Body {
    type Err = String;

    /// `gaussian`, `t:<df>` or `t(<df>)`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "gaussian" {
            return Ok(Body::Gaussian);
        }
        let df = s
            .strip_prefix("t:")
            .or_else(|| s.strip_prefix("t(").and_then(|r| r.strip_suffix(')')))
            .ok_or_else(|| format!("unknown body {s:?} (expected gaussian or t:<df>)"))?;
        match df.trim().parse::<u32>() {
            Ok(df) if df > 0 => Ok(Body::T { df }),
            _ => Err(format!("invalid t degrees of freedom {df:?}")),
        }
    }
}

impl fmt::Display for Body {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Body::Gaussian => f.write_str("gaussian"),
            Body::T { df } => write!(f, "t:{df}"),
        }
    }
}

/// Largest contribution ratio, possibly tied to the dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LargestRatio {
    Value(f64),
    /// `1/p`, which together with `c2 = 1` gives `Σ ∝ I`.
    InverseDim,
}

impl FromStr for LargestRatio {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "1/p" {
            return Ok(LargestRatio::InverseDim);
        }
        s.parse::<f64>()
            .map(LargestRatio::Value)
            .map_err(|_| format!("invalid c1 {s:?}"))
    }
}

impl fmt::Display for LargestRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LargestRatio::Value(v) => write!(f, "{v}"),
            LargestRatio::InverseDim => f.write_str("1/p"),
        }
    }
}

/// One simulation setting.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub p: usize,
    /// `Tr Σ`; `None` means `p`.
    pub trace: Option<f64>,
    pub c1: LargestRatio,
    pub c2: f64,
    /// Total sample size `N` (body plus outliers).
    pub n_total: usize,
    pub xi: f64,
    pub k: f64,
    pub outlier_mode: OutlierMode,
    pub body: Body,
    pub trials: usize,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            p: 5,
            trace: None,
            c1: LargestRatio::Value(0.3),
            c2: 50.0,
            n_total: 100,
            xi: 0.03,
            k: 10.0,
            outlier_mode: OutlierMode::Clustered,
            body: Body::Gaussian,
            trials: 200,
            seed: 0,
        }
    }
}

pub const SCENARIO_KEYS: [&str; 11] = [
    "p",
    "trace",
    "c1",
    "c2",
    "N",
    "xi",
    "k",
    "outlier_mode",
    "body",
    "trials",
    "seed",
];

impl Scenario {
    pub fn trace(&self) -> f64 {
        self.trace.unwrap_or(self.p as f64)
    }

    pub fn c1_value(&self) -> f64 {
        match self.c1 {
            LargestRatio::Value(v) => v,
            LargestRatio::InverseDim => 1.0 / self.p as f64,
        }
    }

    /// `m = ⌈N ξ⌉`, guarded against products like `100 · 0.03` landing just
    /// above an integer.
    pub fn outlier_count(&self) -> usize {
        if self.outlier_mode == OutlierMode::None {
            return 0;
        }
        let m = (self.n_total as f64 * self.xi - 1e-9).ceil().max(0.0) as usize;
        m.min(self.n_total)
    }

    pub fn body_count(&self) -> usize {
        self.n_total - self.outlier_count()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DatagenError::InvalidScenario(m));
        let c1 = self.c1_value();
        if self.p == 0 {
            return bad("p must be positive".into());
        }
        if !(c1 > 0.0 && c1 <= 1.0) {
            return bad(format!("c1 = {c1} outside (0, 1]"));
        }
        if !(self.c2 >= 1.0) || !self.c2.is_finite() {
            return bad(format!("c2 = {} must be >= 1", self.c2));
        }
        if !(self.trace() > 0.0) || !self.trace().is_finite() {
            return bad(format!("trace = {} must be positive", self.trace()));
        }
        if !(0.0..1.0).contains(&self.xi) {
            return bad(format!("xi = {} outside [0, 1)", self.xi));
        }
        if !(self.k > 0.0) || !self.k.is_finite() {
            return bad(format!("k = {} must be positive", self.k));
        }
        if self.n_total == 0 {
            return bad("N must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.outlier_count() > 0 && self.body_count() == 0 {
            return bad("no body observations left after outliers".into());
        }
        Ok(())
    }

    /// Sets one field from its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| format!("{key}: invalid number {v:?}"))
        };
        let int = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| format!("{key}: invalid integer {v:?}"))
        };
        match key {
            "p" => self.p = int(value)?,
            "trace" => {
                self.trace = if value == "p" {
                    None
                } else {
                    Some(num(value)?)
                };
            }
            "c1" => self.c1 = value.parse()?,
            "c2" => self.c2 = num(value)?,
            "N" => self.n_total = int(value)?,
            "xi" => self.xi = num(value)?,
            "k" => self.k = num(value)?,
            "outlier_mode" => self.outlier_mode = value.parse()?,
            "body" => self.body = value.parse()?,
            "trials" => self.trials = int(value)?,
            "seed" => {
                self.seed = value
                    .parse::<u64>()
                    .map_err(|_| format!("seed: invalid integer {value:?}"))?
            }
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are ignored;
    /// unknown or repeated keys are errors. Missing keys keep their defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut scn = Scenario::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| DatagenError::Config {
                    line,
                    message: format!("expected key=value, got {content:?}"),
                })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) && SCENARIO_KEYS.contains(&key) {
                return Err(DatagenError::Config {
                    line,
                    message: format!("duplicate key {key:?}"),
                });
            }
            scn.set(key, value)
                .map_err(|message| DatagenError::Config { line, message })?;
        }
        scn.validate()?;
        Ok(scn)
    }

    pub fn to_config_string(&self) -> String {
        let trace = match self.trace {
            Some(t) => t.to_string(),
            None => "p".into(),
        };
        format!(
            "p = {}\ntrace = {trace}\nc1 = {}\nc2 = {}\nN = {}\nxi = {}\nk = {}\noutlier_mode = {}\nbody = {}\ntrials = {}\nseed = {}\n",
            self.p, self.c1, self.c2, self.n_total, self.xi, self.k, self.outlier_mode, self.body, self.trials, self.seed
        )
    }
}

/// A generated trial: data (outliers last, indices recorded) and truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub data: DataSet,
    pub sigma: SpdMatrix,
    pub outlier_center: Option<DVector<f64>>,
}

/// Trial `trial` of `scn`, from the substream `(scn.seed, trial)`.
pub fn scenario_dataset(scn: &Scenario, trial: u64) -> Result<Trial> {
    trial_from_stream(scn, &[trial], None)
}

/// Trial generation keyed by an arbitrary stream path. A `fixed_sigma`
/// replaces the per-trial draw of `Σ`.
pub fn trial_from_stream(
    scn: &Scenario,
    stream: &[u64],
    fixed_sigma: Option<&SpdMatrix>,
) -> Result<Trial> {
    scn.validate()?;
    let mut path = stream.to_vec();
    let key = |rng: &mut rand_chacha::ChaCha8Rng| rng.random::<u64>();
    path.push(TAG_SIGMA);
    let sigma = match fixed_sigma {
        Some(s) => {
            if s.dim() != scn.p {
                return Err(DatagenError::InvalidScenario(format!(
                    "fixed sigma has dimension {}, scenario has p = {}",
                    s.dim(),
                    scn.p
                )));
            }
            s.clone()
        }
        None => {
            make_sigma_with(
                scn.p,
                scn.trace(),
                scn.c1_value(),
                scn.c2,
                &mut substream(scn.seed, &path),
            )
            .sigma
        }
    };
    path.pop();
    path.push(TAG_BODY);
    let body_seed = key(&mut substream(scn.seed, &path));
    path.pop();
    path.push(TAG_OUTLIERS);
    let outlier_seed = key(&mut substream(scn.seed, &path));

    let n = scn.body_count();
    let m = scn.outlier_count();
    let body = match scn.body {
        Body::Gaussian => sample_gaussian(n, &sigma, body_seed)?,
        Body::T { df } => sample_t(n, &sigma, df, body_seed)?,
    };
    if m == 0 {
        return Ok(Trial {
            data: body.with_outlier_indices(Vec::new()),
            sigma,
            outlier_center: None,
        });
    }
    let target = scn.k * mean_sq_mahalanobis(&body, &sigma)?;
    let (rows, center) = match scn.outlier_mode {
        OutlierMode::Unclustered => (outliers_unclustered(m, &sigma, target, outlier_seed)?, None),
        OutlierMode::Clustered => {
            let (rows, c) = outliers_clustered(m, &sigma, target, outlier_seed)?;
            (rows, Some(c))
        }
        OutlierMode::None => unreachable!("outlier_count is zero without outliers"),
    };
    let data = body
        .concat(&DataSet::new(rows)?)?
        .with_outlier_indices((n..n + m).collect());
    Ok(Trial {
        data,
        sigma,
        outlier_center: center,
    })
}
