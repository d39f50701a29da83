use super::registry::{AlphaChoice, EstimatorSpec, Evaluation, TrialContext};
use super::{discrepancy_logfro, normalized_sq_error, ExperimentError, Result};
use crate::datagen::{trial_from_stream, Body, Scenario, Trial};
use crate::estimators::{SolverConfig, Status};
use crate::shrinkage::{M2Source, DEFAULT_REPLICATES};
use crate::{datagen, substream};
use rand::Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Scenario parameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Dimension,
    /// Shrinkage coefficient of every estimator that takes one. The data
    /// are the same at every grid point.
    Alpha,
    Xi,
    K,
    TDf,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Dimension => "dimension",
            Axis::Alpha => "alpha",
            Axis::Xi => "xi",
            Axis::K => "k",
            Axis::TDf => "t_df",
        }
    }

    fn apply(&self, scn: &mut Scenario, value: f64) -> Result<()> {
        let bad = || ExperimentError::Config(format!("invalid {} value {value}", self.name()));
        let as_int = || {
            (value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64)
                .then_some(value as u32)
                .ok_or_else(bad)
        };
        match self {
            Axis::Dimension => scn.p = as_int()? as usize,
            Axis::Alpha => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(bad());
                }
            }
            Axis::Xi => scn.xi = value,
            Axis::K => scn.k = value,
            Axis::TDf => scn.body = Body::T { df: as_int()? },
        }
        Ok(())
    }
}

impl FromStr for Axis {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dimension" | "p" => Ok(Axis::Dimension),
            "alpha" => Ok(Axis::Alpha),
            "xi" => Ok(Axis::Xi),
            "k" => Ok(Axis::K),
            "t_df" | "df" => Ok(Axis::TDf),
            other => Err(ExperimentError::Config(format!(
                "unknown axis {other:?} (expected dimension, alpha, xi, k or t_df)"
            ))),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Error measure aggregated into the `rmse` column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Metric {
    /// Frobenius distance between trace-normalized estimate and truth.
    #[default]
    Frobenius,
    /// Affine-invariant log-Frobenius distance.
    LogFro,
}

impl FromStr for Metric {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frobenius" | "fro" => Ok(Metric::Frobenius),
            "logfro" => Ok(Metric::LogFro),
            other => Err(ExperimentError::Config(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub scenario: Scenario,
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub estimators: Vec<EstimatorSpec>,
    pub trials: usize,
    pub solver: SolverConfig,
    pub replicates: usize,
    pub m2_source: M2Source,
    /// Draw `Σ` once per grid point instead of once per trial.
    pub fixed_sigma: bool,
    pub metric: Metric,
}

impl SweepConfig {
    pub fn new(
        scenario: Scenario,
        axis: Axis,
        grid: Vec<f64>,
        estimators: Vec<EstimatorSpec>,
    ) -> Self {
        let trials = scenario.trials;
        Self {
            scenario,
            axis,
            grid,
            estimators,
            trials,
            solver: SolverConfig::default(),
            replicates: DEFAULT_REPLICATES,
            m2_source: M2Source::ScmInverse,
            fixed_sigma: false,
            metric: Metric::Frobenius,
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }
}

/// Aggregate for one estimator at one grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// Root mean squared error over the successful trials; NaN when none
    /// succeeded.
    pub rmse: f64,
    pub trials_ok: usize,
    pub trials_failed: usize,
    pub statuses: BTreeMap<Status, usize>,
    /// Largest recomputed equation residual over converged iterative runs.
    pub max_residual: Option<f64>,
    /// Mean shrinkage coefficient over successful trials.
    pub mean_alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub estimators: Vec<String>,
    pub trials: usize,
    /// `cells[g][e]` for grid point `g` and estimator `e`.
    pub cells: Vec<Vec<Cell>>,
}

impl SweepResult {
    pub fn empty(axis: Axis, estimators: Vec<String>) -> Self {
        Self {
            axis,
            grid: Vec::new(),
            estimators,
            trials: 0,
            cells: Vec::new(),
        }
    }

    pub fn estimator_index(&self, label: &str) -> Option<usize> {
        self.estimators.iter().position(|e| e == label)
    }

    /// RMSE series of one estimator along the grid.
    pub fn series(&self, label: &str) -> Option<Vec<f64>> {
        let e = self.estimator_index(label)?;
        Some(self.cells.iter().map(|row| row[e].rmse).collect())
    }
}

/// Per-trial record before aggregation.
struct TrialOutcome {
    /// Squared error per estimator; `None` for failed trials.
    errors: Vec<Option<f64>>,
    statuses: Vec<Status>,
    residuals: Vec<Option<f64>>,
    alphas: Vec<Option<f64>>,
}

/// Runs every estimator on `trials` generated datasets per grid point.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.estimators.is_empty() {
        return Err(ExperimentError::Config("no estimators selected".into()));
    }
    if cfg.trials == 0 {
        return Err(ExperimentError::Config("trials must be positive".into()));
    }
    let labels: Vec<String> = cfg
        .estimators
        .iter()
        .map(|e| match cfg.axis {
            Axis::Alpha if e.kind.takes_alpha() => e.base_label(),
            _ => e.label(),
        })
        .collect();
    let mut cells = Vec::with_capacity(cfg.grid.len());
    for (gi, &value) in cfg.grid.iter().enumerate() {
        let mut scn = cfg.scenario.clone();
        cfg.axis.apply(&mut scn, value)?;
        scn.validate()?;
        let estimators: Vec<EstimatorSpec> = cfg
            .estimators
            .iter()
            .map(|e| match cfg.axis {
                Axis::Alpha if e.kind.takes_alpha() => {
                    e.clone().with_alpha(AlphaChoice::Fixed(value))
                }
                _ => e.clone(),
            })
            .collect();
        // The alpha axis reuses one set of datasets for every grid point.
        let stream_index = if cfg.axis == Axis::Alpha {
            0
        } else {
            gi as u64
        };
        let sigma = if cfg.fixed_sigma {
            Some(
                datagen::make_sigma(
                    &scn,
                    substream(scn.seed, &[stream_index, u64::MAX]).random(),
                )?
                .sigma,
            )
        } else {
            None
        };
        let outcomes: Vec<Result<TrialOutcome>> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| {
                let trial = trial_from_stream(&scn, &[stream_index, t], sigma.as_ref())?;
                Ok(run_trial(cfg, &estimators, &trial, stream_index, t))
            })
            .collect();
        let mut outcomes_ok = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            outcomes_ok.push(o?);
        }
        cells.push(aggregate(&outcomes_ok, estimators.len()));
    }
    Ok(SweepResult {
        axis: cfg.axis,
        grid: cfg.grid.clone(),
        estimators: labels,
        trials: cfg.trials,
        cells,
    })
}

fn run_trial(
    cfg: &SweepConfig,
    estimators: &[EstimatorSpec],
    trial: &Trial,
    stream: u64,
    t: u64,
) -> TrialOutcome {
    let alpha_seed: u64 = substream(cfg.scenario.seed, &[stream, t, 0xa1fa]).random();
    let ctx = TrialContext::new(
        &trial.data,
        cfg.m2_source.clone(),
        cfg.replicates,
        alpha_seed,
    );
    let mut out = TrialOutcome {
        errors: Vec::with_capacity(estimators.len()),
        statuses: Vec::with_capacity(estimators.len()),
        residuals: Vec::with_capacity(estimators.len()),
        alphas: Vec::with_capacity(estimators.len()),
    };
    for spec in estimators {
        let evaluation = spec.evaluate(&ctx, &cfg.solver);
        let (err, status, residual, alpha) = match evaluation {
            Ok(e) if e.ok() => match error_of(cfg.metric, &e, trial) {
                Some(err) => (Some(err), Status::Converged, e.equation_residual, e.alpha),
                None => (None, Status::DegenerateShrinking, None, None),
            },
            Ok(e) => (None, e.result.status, None, None),
            Err(_) => (None, Status::InvalidInput, None, None),
        };
        out.errors.push(err);
        out.statuses.push(status);
        out.residuals.push(residual);
        out.alphas.push(alpha);
    }
    out
}

fn error_of(metric: Metric, e: &Evaluation, trial: &Trial) -> Option<f64> {
    let value = match metric {
        Metric::Frobenius => normalized_sq_error(&e.result.estimate, &trial.sigma).ok()?,
        Metric::LogFro => {
            let truth = crate::linalg::trace_normalize(&trial.sigma).ok()?;
            let est = crate::linalg::trace_normalize(&e.result.estimate).ok()?;
            discrepancy_logfro(&truth, &est).ok()?.powi(2)
        }
    };
    value.is_finite().then_some(value)
}

fn aggregate(outcomes: &[TrialOutcome], n_estimators: usize) -> Vec<Cell> {
    (0..n_estimators)
        .map(|e| {
            let mut sum = 0.0;
            let mut ok = 0;
            let mut statuses = BTreeMap::new();
            let mut max_residual: Option<f64> = None;
            let mut alpha_sum = 0.0;
            let mut alpha_count = 0;
            for o in outcomes {
                *statuses.entry(o.statuses[e]).or_insert(0) += 1;
                if let Some(err) = o.errors[e] {
                    sum += err;
                    ok += 1;
                }
                if let Some(r) = o.residuals[e] {
                    max_residual = Some(max_residual.map_or(r, |m| m.max(r)));
                }
                if let Some(a) = o.alphas[e] {
                    alpha_sum += a;
                    alpha_count += 1;
                }
            }
            Cell {
                rmse: if ok > 0 {
                    (sum / ok as f64).sqrt()
                } else {
                    f64::NAN
                },
                trials_ok: ok,
                trials_failed: outcomes.len() - ok,
                statuses,
                max_residual,
                mean_alpha: (alpha_count > 0).then(|| alpha_sum / alpha_count as f64),
            }
        })
        .collect()
}
