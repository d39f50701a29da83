//! RMSE of the shrinkage estimators as the coefficient moves from 0 to 1,
//! on the same datasets at every grid point.
//!
//! ```text
//! cargo run --release --example alpha_sweep -- [trials] [p]
//! ```

use robust_scatter::datagen::Scenario;
use robust_scatter::experiments::{run_sweep, write_csv, Axis, EstimatorSpec, SweepConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let trials: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);
    let p: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(25);
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let scn = Scenario {
        p,
        ..Scenario::default()
    };
    let estimators = EstimatorSpec::parse_list("proposed,lnsmi,sscm,tme,identity")?;
    let cfg = SweepConfig::new(scn, Axis::Alpha, grid, estimators).with_trials(trials);
    write_csv(&run_sweep(&cfg)?, std::io::stdout().lock())?;
    Ok(())
}
