//! Dimension sweep with clustered outliers, printed as CSV.
//!
//! ```text
//! cargo run --release --example dimension_sweep -- [trials] [p,p,...]
//! ```

use robust_scatter::datagen::Scenario;
use robust_scatter::experiments::{run_sweep, write_csv, Axis, EstimatorSpec, SweepConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let trials: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);
    let grid: Vec<f64> = match args.next() {
        Some(s) => s.split(',').map(str::parse).collect::<Result<_, _>>()?,
        None => vec![5.0, 15.0, 25.0, 35.0, 45.0, 55.0],
    };
    let estimators = EstimatorSpec::parse_list("scm,tme,lnsmi@0.05,proposed@auto")?;
    let cfg = SweepConfig::new(Scenario::default(), Axis::Dimension, grid, estimators)
        .with_trials(trials);
    let result = run_sweep(&cfg)?;
    write_csv(&result, std::io::stdout().lock())?;
    Ok(())
}
