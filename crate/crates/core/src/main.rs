use clap::{Args, Parser, Subcommand, ValueEnum};
use robust_scatter::datagen::Scenario;
use robust_scatter::estimators::{EstimatorError, SolverConfig};
use robust_scatter::experiments::{
    self, breakdown_sweep, mahalanobis_ranking, run_sweep, AlphaChoice, Axis, Contamination,
    EstimatorSpec, ExperimentError, Metric, SweepConfig, TrialContext,
};
use robust_scatter::shrinkage::{M2Source, DEFAULT_REPLICATES};
use robust_scatter::{DataSet, WeightSpec};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const DEFAULT_ESTIMATORS: &str = "scm,tme,lnsmi@0.05,proposed@auto";

#[derive(Parser)]
#[command(
    name = "robust-scatter",
    version,
    about = "Robust scatter estimation and simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a scatter matrix from a CSV file.
    Estimate(EstimateArgs),
    /// RMSE table for one scenario.
    Simulate(SimulateArgs),
    /// RMSE along one scenario axis.
    Sweep(SweepArgs),
    /// Existence and eigenvalue probes under contamination.
    Breakdown(BreakdownArgs),
    /// Rank observations by Mahalanobis distance under an estimate.
    Rank(RankArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// Weight family: tyler, huber:<c>, t:<nu> or const:<beta>.
    #[arg(long, default_value = "tyler")]
    weight: WeightSpec,
    /// Shrinkage coefficient or `auto`.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Bootstrap replicates for `--alpha auto`.
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// The first line of the input is a header.
    #[arg(long)]
    header: bool,
    /// Estimator name (scm, tme, lnsmi, sscm, identity, proposed, proposed_raw, kl, renyi).
    #[arg(long, default_value = "proposed")]
    method: String,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Flat `key = value` scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_ESTIMATORS)]
    estimators: String,
    /// Overrides the scenario's trial count.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    replicates: usize,
    /// Draw the true covariance once per grid point.
    #[arg(long)]
    fixed_sigma: bool,
    #[arg(long, value_enum, default_value_t = MetricArg::Frobenius)]
    metric: MetricArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Frobenius,
    Logfro,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// dimension, alpha, xi, k or t_df.
    #[arg(long)]
    axis: String,
    /// Comma-separated grid values.
    #[arg(long)]
    grid: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum ContaminationArg {
    Zeros,
    Cluster,
}

#[derive(Args)]
struct BreakdownArgs {
    #[arg(long)]
    p: usize,
    /// Number of good observations.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "huber:4")]
    weight: WeightSpec,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = ContaminationArg::Zeros)]
    contamination: ContaminationArg,
    /// Comma-separated outlier counts.
    #[arg(long)]
    m_grid: String,
    /// Cluster distance from the origin.
    #[arg(long, default_value_t = 1e6)]
    norm: f64,
    #[arg(long, default_value_t = 5)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Only print the first rows of the ranking.
    #[arg(long)]
    top: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match &e {
            ExperimentError::Linalg(_) => Failure::Numerical(e.to_string()),
            ExperimentError::Estimator(inner) => match inner {
                EstimatorError::Linalg(_) => Failure::Numerical(e.to_string()),
                _ => Failure::Config(e.to_string()),
            },
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Breakdown(a) => breakdown(a),
        Command::Rank(a) => rank(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn config_error(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn spec_from(input: &InputArgs, solver: &SolverArgs) -> Result<EstimatorSpec, Failure> {
    let mut spec: EstimatorSpec = input.method.parse::<EstimatorSpec>()?;
    if let Some(a) = &solver.alpha {
        if !spec.kind.takes_alpha() {
            return Err(config_error(format!("{} takes no alpha", spec.kind.name())));
        }
        spec.alpha = a.parse::<AlphaChoice>()?;
    }
    if spec.kind.takes_weight() {
        spec.weight = Some(solver.weight);
    }
    Ok(spec)
}

fn solver_config(solver: &SolverArgs) -> SolverConfig {
    SolverConfig::default()
        .with_epsilon(solver.epsilon)
        .with_max_iter(solver.max_iter)
}

/// Runs the selected estimator; a run that does not converge is a
/// numerical failure.
fn fit(
    input: &InputArgs,
    solver: &SolverArgs,
) -> Result<(DataSet, robust_scatter::SpdMatrix), Failure> {
    let spec = spec_from(input, solver)?;
    let data = experiments::read_csv_dataset(&input.input, input.header)?;
    let ctx = TrialContext::new(&data, M2Source::ScmInverse, solver.replicates, solver.seed);
    let e = spec.evaluate(&ctx, &solver_config(solver))?;
    if !e.ok() {
        return Err(Failure::Numerical(format!(
            "{} stopped with status {} after {} iterations",
            spec, e.result.status, e.result.iterations
        )));
    }
    if let Some(a) = e.alpha.filter(|_| spec.kind.takes_alpha()) {
        eprintln!("alpha = {a}");
    }
    Ok((data, e.result.estimate))
}

fn estimate(a: EstimateArgs) -> CliResult {
    let (_, v) = fit(&a.input, &a.solver)?;
    let out = open_output(a.output.as_deref())?;
    experiments::write_matrix_csv(v.matrix(), out)?;
    Ok(())
}

fn rank(a: RankArgs) -> CliResult {
    let (data, v) = fit(&a.input, &a.solver)?;
    let ranking = mahalanobis_ranking(&data, &v)?;
    let mut out = open_output(a.output.as_deref())?;
    writeln!(out, "rank,index,distance")?;
    for (r, (i, d)) in ranking.iter().take(a.top.unwrap_or(usize::MAX)).enumerate() {
        writeln!(out, "{},{i},{d}", r + 1)?;
    }
    out.flush()?;
    Ok(())
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario, Failure> {
    match path {
        None => Ok(Scenario::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| config_error(format!("{}: {e}", p.display())))?;
            Scenario::from_config_str(&text).map_err(|e| config_error(e.to_string()))
        }
    }
}

fn sweep_config(s: &ScenarioArgs, axis: Axis, grid: Vec<f64>) -> Result<SweepConfig, Failure> {
    let scenario = load_scenario(s.config.as_deref())?;
    let estimators = EstimatorSpec::parse_list(&s.estimators)?;
    let trials = s.trials.unwrap_or(scenario.trials);
    let mut cfg = SweepConfig::new(scenario, axis, grid, estimators).with_trials(trials);
    cfg.replicates = s.replicates;
    cfg.fixed_sigma = s.fixed_sigma;
    cfg.metric = match s.metric {
        MetricArg::Frobenius => Metric::Frobenius,
        MetricArg::Logfro => Metric::LogFro,
    };
    Ok(cfg)
}

fn write_sweep(cfg: &SweepConfig, out: Option<&Path>) -> CliResult {
    let result = run_sweep(cfg)?;
    experiments::write_csv(&result, open_output(out)?)?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> CliResult {
    let p = load_scenario(a.scenario.config.as_deref())?.p;
    let cfg = sweep_config(&a.scenario, Axis::Dimension, vec![p as f64])?;
    write_sweep(&cfg, a.scenario.out.as_deref())
}

fn parse_grid<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Failure> {
    let values = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| config_error(format!("invalid {what} value {t:?}")))
        })
        .collect::<Result<Vec<T>, Failure>>()?;
    if values.is_empty() {
        return Err(config_error(format!("empty {what}")));
    }
    Ok(values)
}

fn sweep(a: SweepArgs) -> CliResult {
    let axis: Axis = a.axis.parse()?;
    let grid = parse_grid::<f64>(&a.grid, "grid")?;
    let cfg = sweep_config(&a.scenario, axis, grid)?;
    write_sweep(&cfg, a.scenario.out.as_deref())
}

fn breakdown(a: BreakdownArgs) -> CliResult {
    if a.p == 0 || a.n == 0 {
        return Err(config_error("p and n must be positive"));
    }
    let ms = parse_grid::<usize>(&a.m_grid, "m-grid")?;
    let levels: Vec<Contamination> = ms
        .iter()
        .map(|&m| match a.contamination {
            ContaminationArg::Zeros => Contamination::Zeros(m),
            ContaminationArg::Cluster => Contamination::FarCluster { m, norm: a.norm },
        })
        .collect();
    let wf = a.weight.resolve(a.p);
    let reports = breakdown_sweep(a.n, a.p, &wf, a.alpha, &levels, a.replicates, a.seed)?;
    experiments::write_csv(&reports, open_output(a.out.as_deref())?)?;
    Ok(())
}
