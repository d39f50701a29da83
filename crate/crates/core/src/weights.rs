//! Weight functions `w(s)` for M-estimation of scatter and the associated
//! `ψ(s) = s·w(s)` and `κ = sup ψ`.

use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("Tyler weight p/s is unbounded at s = 0")]
    SingularAtOrigin,
    #[error("invalid weight parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot parse weight spec {0:?} (expected tyler, huber:<c>, t:<nu> or const:<beta>)")]
    Parse(String),
    #[error("existence check requires n > p (n = {n}, p = {p})")]
    SampleTooSmall { n: usize, p: usize },
}

/// A member of one of the supported weight families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightFunction {
    /// `w(s) = p / s`.
    Tyler { p: usize },
    /// `w(s) = 1` for `s <= c`, `c / s` beyond.
    Huber { c: f64 },
    /// `w(s) = (p + ν) / (s + ν)`.
    TDist { p: usize, nu: u32 },
    /// `w(s) = 1 / β`. Not bounded in ψ; only used for closed-form checks.
    Constant { beta: f64 },
}

/// `κ = sup ψ`, which is infinite for the constant family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kappa {
    Finite(f64),
    Unbounded,
}

impl Kappa {
    pub fn finite(self) -> Option<f64> {
        match self {
            Kappa::Finite(k) => Some(k),
            Kappa::Unbounded => None,
        }
    }
}

impl WeightFunction {
    pub fn tyler(p: usize) -> Self {
        WeightFunction::Tyler { p }
    }

    pub fn huber(c: f64) -> Result<Self, WeightError> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(WeightError::InvalidParameter(format!(
                "huber threshold {c}"
            )));
        }
        Ok(WeightFunction::Huber { c })
    }

    pub fn t_dist(p: usize, nu: u32) -> Result<Self, WeightError> {
        if nu == 0 {
            return Err(WeightError::InvalidParameter(
                "t degrees of freedom 0".into(),
            ));
        }
        Ok(WeightFunction::TDist { p, nu })
    }

    pub fn constant(beta: f64) -> Result<Self, WeightError> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(WeightError::InvalidParameter(format!(
                "constant beta {beta}"
            )));
        }
        Ok(WeightFunction::Constant { beta })
    }

    /// True when `w` blows up at the origin, so zero observations must be
    /// rejected before weighting.
    pub fn singular_at_origin(&self) -> bool {
        matches!(self, WeightFunction::Tyler { .. })
    }

    pub fn w(&self, s: f64) -> Result<f64, WeightError> {
        match *self {
            WeightFunction::Tyler { p } => {
                if s > 0.0 {
                    Ok(p as f64 / s)
                } else {
                    Err(WeightError::SingularAtOrigin)
                }
            }
            _ => Ok(self.w_unchecked(s)),
        }
    }

    /// Weight evaluation without the origin check. Callers guarantee `s > 0`
    /// for the Tyler family.
    #[inline]
    pub(crate) fn w_unchecked(&self, s: f64) -> f64 {
        match *self {
            WeightFunction::Tyler { p } => p as f64 / s,
            WeightFunction::Huber { c } => {
                if s <= c {
                    1.0
                } else {
                    c / s
                }
            }
            WeightFunction::TDist { p, nu } => {
                let nu = nu as f64;
                (p as f64 + nu) / (s + nu)
            }
            WeightFunction::Constant { beta } => 1.0 / beta,
        }
    }

    /// `ψ(s) = s·w(s)`; the Tyler family uses `ψ(0) = 0`.
    pub fn psi(&self, s: f64) -> f64 {
        match *self {
            WeightFunction::Tyler { p } => {
                if s > 0.0 {
                    p as f64
                } else {
                    0.0
                }
            }
            WeightFunction::Huber { c } => s.min(c),
            _ => s * self.w_unchecked(s),
        }
    }

    pub fn kappa(&self) -> Kappa {
        match *self {
            WeightFunction::Tyler { p } => Kappa::Finite(p as f64),
            WeightFunction::Huber { c } => Kappa::Finite(c),
            WeightFunction::TDist { p, nu } => Kappa::Finite((p + nu as usize) as f64),
            WeightFunction::Constant { .. } => Kappa::Unbounded,
        }
    }

    /// Re-targets the dimension-dependent families to dimension `p`.
    pub fn with_dim(self, p: usize) -> Self {
        match self {
            WeightFunction::Tyler { .. } => WeightFunction::Tyler { p },
            WeightFunction::TDist { nu, .. } => WeightFunction::TDist { p, nu },
            other => other,
        }
    }
}

impl fmt::Display for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFunction::Tyler { .. } => write!(f, "tyler"),
            WeightFunction::Huber { c } => write!(f, "huber:{c}"),
            WeightFunction::TDist { nu, .. } => write!(f, "t:{nu}"),
            WeightFunction::Constant { beta } => write!(f, "const:{beta}"),
        }
    }
}

/// Parsed form of the `tyler | huber:<c> | t:<nu> | const:<beta>` grammar.
/// The dimension is bound later through [`WeightSpec::resolve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightSpec(WeightFunction);

impl WeightSpec {
    pub fn resolve(self, p: usize) -> WeightFunction {
        self.0.with_dim(p)
    }
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec(WeightFunction::Tyler { p: 0 })
    }
}

impl FromStr for WeightSpec {
    type Err = WeightError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || WeightError::Parse(s.to_string());
        let (family, arg) = match s.split_once(':') {
            Some((f, a)) => (f.trim(), Some(a.trim())),
            None => (s, None),
        };
        let wf = match (family, arg) {
            ("tyler", None) => WeightFunction::Tyler { p: 0 },
            ("huber", Some(c)) => WeightFunction::huber(c.parse().map_err(|_| bad())?)?,
            ("t", Some(nu)) => WeightFunction::t_dist(0, nu.parse().map_err(|_| bad())?)?,
            ("const", Some(b)) => WeightFunction::constant(b.parse().map_err(|_| bad())?)?,
            _ => return Err(bad()),
        };
        Ok(WeightSpec(wf))
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Outcome of the existence checks for a weight at sample size `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExistenceReport {
    pub kappa: Kappa,
    /// `κ > p`.
    pub condition_e: bool,
    /// `κ > n(p-1)/(n-p)`.
    pub corollary1: bool,
    pub threshold_e: f64,
    pub threshold_corollary1: f64,
}

pub fn check_existence(
    wf: &WeightFunction,
    n: usize,
    p: usize,
) -> Result<ExistenceReport, WeightError> {
    if n <= p || p == 0 {
        return Err(WeightError::SampleTooSmall { n, p });
    }
    let threshold_e = p as f64;
    let threshold_corollary1 = (n * (p - 1)) as f64 / (n - p) as f64;
    let kappa = wf.kappa();
    let (condition_e, corollary1) = match kappa {
        Kappa::Finite(k) => (k > threshold_e, k > threshold_corollary1),
        Kappa::Unbounded => (true, true),
    };
    Ok(ExistenceReport {
        kappa,
        condition_e,
        corollary1,
        threshold_e,
        threshold_corollary1,
    })
}

/// `count` log-spaced points covering `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Grid check of Condition (A) (w nonincreasing) and (C) (ψ nondecreasing).
pub fn monotonicity_holds(wf: &WeightFunction, grid: &[f64]) -> bool {
    grid.windows(2).all(|pair| {
        let (a, b) = (pair[0], pair[1]);
        wf.w_unchecked(b) <= wf.w_unchecked(a) && wf.psi(b) >= wf.psi(a)
    })
}
