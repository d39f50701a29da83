//! Heavy-tailed bodies without outliers: TME against the proposed estimator
//! for several degrees of freedom.

use robust_scatter::datagen::{OutlierMode, Scenario};
use robust_scatter::experiments::{run_sweep, write_csv, Axis, EstimatorSpec, SweepConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(20);
    let scn = Scenario {
        p: 15,
        xi: 0.0,
        outlier_mode: OutlierMode::None,
        ..Scenario::default()
    };
    let estimators = EstimatorSpec::parse_list("scm,tme,proposed@auto")?;
    let cfg = SweepConfig::new(scn, Axis::TDf, vec![1.0, 3.0, 5.0, 10.0, 30.0], estimators)
        .with_trials(trials);
    write_csv(&run_sweep(&cfg)?, std::io::stdout().lock())?;
    Ok(())
}
