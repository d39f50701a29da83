//! Named estimators used by sweeps, the ranking study and the CLI.
//!
//! A spec reads `name[<weight>][@alpha]`, for example `tme`, `lnsmi@0.05`,
//! `proposed@auto` or `proposed_raw<huber:4>@0.3`.

use super::{ExperimentError, Result};
use crate::estimators::{
    self, apply_map, DataSet, EstimatorResult, FixedPointKind, SolverConfig, Status,
};
use crate::linalg::{self, SpdMatrix};
use crate::shrinkage::{self, AlphaHat, M2Source};
use crate::weights::{WeightFunction, WeightSpec};
use std::cell::OnceCell;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    Scm,
    Tme,
    Lnsmi,
    Sscm,
    Identity,
    Proposed,
    ProposedRaw,
    Kl,
    Renyi,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 9] = [
        EstimatorKind::Scm,
        EstimatorKind::Tme,
        EstimatorKind::Lnsmi,
        EstimatorKind::Sscm,
        EstimatorKind::Identity,
        EstimatorKind::Proposed,
        EstimatorKind::ProposedRaw,
        EstimatorKind::Kl,
        EstimatorKind::Renyi,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Scm => "scm",
            EstimatorKind::Tme => "tme",
            EstimatorKind::Lnsmi => "lnsmi",
            EstimatorKind::Sscm => "sscm",
            EstimatorKind::Identity => "identity",
            EstimatorKind::Proposed => "proposed",
            EstimatorKind::ProposedRaw => "proposed_raw",
            EstimatorKind::Kl => "kl",
            EstimatorKind::Renyi => "renyi",
        }
    }

    pub fn takes_alpha(&self) -> bool {
        matches!(
            self,
            EstimatorKind::Lnsmi
                | EstimatorKind::Proposed
                | EstimatorKind::ProposedRaw
                | EstimatorKind::Kl
                | EstimatorKind::Renyi
        )
    }

    pub fn takes_weight(&self) -> bool {
        matches!(
            self,
            EstimatorKind::Tme
                | EstimatorKind::Proposed
                | EstimatorKind::ProposedRaw
                | EstimatorKind::Kl
                | EstimatorKind::Renyi
        )
    }

    fn default_alpha(&self) -> AlphaChoice {
        match self {
            EstimatorKind::Lnsmi => AlphaChoice::Fixed(0.05),
            EstimatorKind::Proposed | EstimatorKind::ProposedRaw => AlphaChoice::Auto,
            EstimatorKind::Kl => AlphaChoice::Fixed(0.05),
            EstimatorKind::Renyi => AlphaChoice::Fixed(1.0),
            _ => AlphaChoice::Fixed(0.0),
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = EstimatorKind::ALL.iter().map(|k| k.name()).collect();
                ExperimentError::Config(format!(
                    "unknown estimator {s:?} (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaChoice {
    Fixed(f64),
    /// Bootstrap plug-in coefficient computed per dataset.
    Auto,
}

impl FromStr for AlphaChoice {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(AlphaChoice::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|a| a.is_finite())
            .map(AlphaChoice::Fixed)
            .ok_or_else(|| ExperimentError::Config(format!("invalid alpha {s:?}")))
    }
}

impl fmt::Display for AlphaChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaChoice::Fixed(a) => write!(f, "{a}"),
            AlphaChoice::Auto => f.write_str("auto"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub alpha: AlphaChoice,
    /// Weight family; `None` means Tyler in the data dimension.
    pub weight: Option<WeightSpec>,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            alpha: kind.default_alpha(),
            weight: None,
        }
    }

    pub fn with_alpha(mut self, alpha: AlphaChoice) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_weight(mut self, weight: WeightSpec) -> Self {
        self.weight = Some(weight);
        self
    }

    /// Comma-separated list of specs.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        let specs: Vec<Self> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if specs.is_empty() {
            return Err(ExperimentError::Config("empty estimator list".into()));
        }
        Ok(specs)
    }

    pub fn weight_function(&self, p: usize) -> WeightFunction {
        self.weight
            .map_or_else(|| WeightFunction::tyler(p), |w| w.resolve(p))
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    /// Label without the coefficient, used when a sweep sets it.
    pub fn base_label(&self) -> String {
        match &self.weight {
            Some(w) => format!("{}<{w}>", self.kind.name()),
            None => self.kind.name().to_string(),
        }
    }

    /// Runs the estimator on the trial data.
    pub fn evaluate(&self, ctx: &TrialContext<'_>, solver: &SolverConfig) -> Result<Evaluation> {
        let x = ctx.data;
        let p = x.p();
        let closed = |m: SpdMatrix| Evaluation::closed_form(m);
        match self.kind {
            EstimatorKind::Scm => return Ok(closed(estimators::scm(x)?)),
            EstimatorKind::Sscm => return Ok(closed(estimators::sscm(x)?)),
            EstimatorKind::Identity => return Ok(closed(SpdMatrix::identity(p))),
            _ => {}
        }
        let wf = self.weight_function(p);
        let alpha = match self.alpha {
            _ if !self.kind.takes_alpha() => 0.0,
            AlphaChoice::Fixed(a) => a,
            AlphaChoice::Auto => ctx.alpha_hat()?.alpha,
        };
        let cfg = solver.clone().with_alpha(alpha);
        let (result, kind, normalize) = match self.kind {
            EstimatorKind::Tme => (
                estimators::m_fixed_point(x, &wf, &cfg.clone().with_alpha(0.0))?,
                FixedPointKind::MEstimator,
                cfg.normalize,
            ),
            EstimatorKind::Lnsmi => (
                estimators::lnsmi(x, &cfg)?,
                FixedPointKind::Lnsmi,
                cfg.normalize,
            ),
            EstimatorKind::Proposed => (
                estimators::proposed(x, &wf, &cfg)?,
                FixedPointKind::Proposed,
                cfg.normalize,
            ),
            EstimatorKind::ProposedRaw => (
                estimators::proposed_raw(x, &wf, &cfg)?,
                FixedPointKind::Proposed,
                false,
            ),
            EstimatorKind::Kl => (
                estimators::kl_penalized(x, &wf, &cfg)?,
                FixedPointKind::Kl,
                false,
            ),
            EstimatorKind::Renyi => (
                estimators::fixed_point_renyi(x, &wf, &cfg)?,
                FixedPointKind::Renyi,
                false,
            ),
            EstimatorKind::Scm | EstimatorKind::Sscm | EstimatorKind::Identity => unreachable!(),
        };
        let check = if result.converged {
            Some(iteration_residual(
                kind,
                x,
                &wf,
                alpha,
                normalize,
                &result.estimate,
            )?)
        } else {
            None
        };
        Ok(Evaluation {
            alpha: self.kind.takes_alpha().then_some(alpha),
            equation_residual: check,
            result,
        })
    }
}

impl FromStr for EstimatorSpec {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, alpha) = match s.split_once('@') {
            Some((h, a)) => (h, Some(a.trim().parse::<AlphaChoice>()?)),
            None => (s, None),
        };
        let (name, weight) = match head.split_once('<') {
            Some((n, rest)) => {
                let w = rest.strip_suffix('>').ok_or_else(|| {
                    ExperimentError::Config(format!("unterminated weight in {s:?}"))
                })?;
                let w = w
                    .parse::<WeightSpec>()
                    .map_err(|e| ExperimentError::Config(e.to_string()))?;
                (n, Some(w))
            }
            None => (head, None),
        };
        let kind: EstimatorKind = name.trim().parse()?;
        if alpha.is_some() && !kind.takes_alpha() {
            return Err(ExperimentError::Config(format!(
                "{} takes no alpha",
                kind.name()
            )));
        }
        if weight.is_some() && !kind.takes_weight() {
            return Err(ExperimentError::Config(format!(
                "{} takes no weight",
                kind.name()
            )));
        }
        let mut spec = EstimatorSpec::new(kind);
        if let Some(a) = alpha {
            spec.alpha = a;
        }
        spec.weight = weight;
        Ok(spec)
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())?;
        if let Some(w) = &self.weight {
            write!(f, "<{w}>")?;
        }
        if self.kind.takes_alpha() {
            write!(f, "@{}", self.alpha)?;
        }
        Ok(())
    }
}

/// Outcome of one estimator on one dataset.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub result: EstimatorResult,
    /// Shrinkage coefficient actually used.
    pub alpha: Option<f64>,
    /// Independently recomputed residual of the iteration equation at the
    /// reported estimate (converged iterative runs only).
    pub equation_residual: Option<f64>,
}

impl Evaluation {
    fn closed_form(estimate: SpdMatrix) -> Self {
        Self {
            result: EstimatorResult::closed_form(estimate),
            alpha: None,
            equation_residual: None,
        }
    }

    pub fn ok(&self) -> bool {
        self.result.status == Status::Converged
    }
}

/// Per-dataset state shared by the estimators evaluated on it. The
/// plug-in coefficient is computed at most once.
pub struct TrialContext<'a> {
    pub data: &'a DataSet,
    pub m2_source: M2Source,
    pub replicates: usize,
    pub seed: u64,
    alpha_hat: OnceCell<std::result::Result<AlphaHat, String>>,
}

impl<'a> TrialContext<'a> {
    pub fn new(data: &'a DataSet, m2_source: M2Source, replicates: usize, seed: u64) -> Self {
        Self {
            data,
            m2_source,
            replicates,
            seed,
            alpha_hat: OnceCell::new(),
        }
    }

    pub fn alpha_hat(&self) -> Result<&AlphaHat> {
        self.alpha_hat
            .get_or_init(|| {
                shrinkage::alpha_hat(self.data, &self.m2_source, self.replicates, self.seed)
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| ExperimentError::Config(format!("alpha selection failed: {e}")))
    }
}

/// `‖G(V) − V‖/‖V‖` recomputed from scratch, with trace normalization of
/// `G(V)` in normalized modes. Renyi runs are checked in the precision.
pub fn iteration_residual(
    kind: FixedPointKind,
    x: &DataSet,
    wf: &WeightFunction,
    alpha: f64,
    normalize: bool,
    v: &SpdMatrix,
) -> Result<f64> {
    let state = match kind {
        FixedPointKind::Renyi => linalg::spd_inverse(v)?.into_matrix(),
        _ => v.matrix().clone(),
    };
    let mut g = apply_map(kind, x, wf, alpha, &state)
        .map_err(|s| ExperimentError::Config(format!("map evaluation failed: {s}")))?;
    if normalize {
        linalg::trace_normalize_in_place(&mut g)?;
    }
    Ok((&g - &state).norm() / state.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> DataSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataSet::new(DMatrix::from_fn(n, p, |_, j| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * (1.0 + j as f64)
        }))
        .unwrap()
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in [
            "scm",
            "tme",
            "lnsmi@0.05",
            "sscm",
            "identity",
            "proposed@auto",
            "proposed_raw<huber:4>@0.3",
            "kl@0.1",
            "renyi@2",
        ] {
            let spec: EstimatorSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert_eq!(
            "proposed".parse::<EstimatorSpec>().unwrap().alpha,
            AlphaChoice::Auto
        );
        assert_eq!(
            "lnsmi".parse::<EstimatorSpec>().unwrap().to_string(),
            "lnsmi@0.05"
        );
        assert!("scm@0.1".parse::<EstimatorSpec>().is_err());
        assert!("sscm<huber:4>".parse::<EstimatorSpec>().is_err());
        assert!("mcd".parse::<EstimatorSpec>().is_err());
        assert!("proposed@x".parse::<EstimatorSpec>().is_err());
        assert_eq!(
            EstimatorSpec::parse_list("scm, tme,proposed@auto")
                .unwrap()
                .len(),
            3
        );
        assert!(EstimatorSpec::parse_list(" , ").is_err());
    }

    #[test]
    fn converged_runs_carry_small_recomputed_residuals() {
        let x = gaussian(60, 3, 5);
        let ctx = TrialContext::new(&x, M2Source::ScmInverse, 50, 9);
        for s in [
            "tme",
            "lnsmi@0.2",
            "proposed@0.4",
            "proposed@auto",
            "proposed_raw<huber:4>@0.3",
            "kl<huber:4>@0.3",
            "renyi@2",
        ] {
            let e = s
                .parse::<EstimatorSpec>()
                .unwrap()
                .evaluate(&ctx, &SolverConfig::default())
                .unwrap();
            assert!(e.ok(), "{s}: {:?}", e.result.status);
            let r = e.equation_residual.unwrap();
            assert!(r < 1e-5, "{s}: {r}");
        }
        let e = EstimatorSpec::new(EstimatorKind::Identity)
            .evaluate(&ctx, &SolverConfig::default())
            .unwrap();
        assert_eq!(e.result.estimate, SpdMatrix::identity(3));
    }

    #[test]
    fn auto_alpha_is_shared_within_a_trial() {
        let x = gaussian(40, 2, 6);
        let ctx = TrialContext::new(&x, M2Source::ScmInverse, 30, 3);
        let a = ctx.alpha_hat().unwrap().alpha;
        let e = "proposed@auto"
            .parse::<EstimatorSpec>()
            .unwrap()
            .evaluate(&ctx, &SolverConfig::default())
            .unwrap();
        assert_eq!(e.alpha, Some(a));
    }
}
