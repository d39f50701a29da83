//! Fits every registered estimator to one simulated dataset with planted
//! clustered outliers and prints the error of each estimate.

use robust_scatter::datagen::{scenario_dataset, Scenario};
use robust_scatter::experiments::{normalized_sq_error, EstimatorSpec, TrialContext};
use robust_scatter::shrinkage::M2Source;
use robust_scatter::SolverConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scn = Scenario {
        p: 20,
        seed: 7,
        ..Scenario::default()
    };
    let trial = scenario_dataset(&scn, 0)?;
    println!(
        "n = {}, p = {}, planted outliers = {}",
        trial.data.n(),
        trial.data.p(),
        scn.outlier_count()
    );

    let ctx = TrialContext::new(&trial.data, M2Source::ScmInverse, 200, 1);
    let specs = EstimatorSpec::parse_list(
        "scm,sscm,identity,tme,lnsmi@0.05,proposed@auto,proposed@0.5,proposed_raw<huber:40>@0.5,kl<huber:40>@0.1,renyi@2",
    )?;
    println!(
        "{:<28} {:>10} {:>6} {:>8} {:>10}",
        "estimator", "status", "iters", "alpha", "error"
    );
    for spec in &specs {
        let e = spec.evaluate(&ctx, &SolverConfig::default())?;
        let err = normalized_sq_error(&e.result.estimate, &trial.sigma)?.sqrt();
        println!(
            "{:<28} {:>10} {:>6} {:>8} {:>10.4}",
            spec.to_string(),
            e.result.status.to_string(),
            e.result.iterations,
            e.alpha.map_or("-".into(), |a| format!("{a:.4}")),
            err
        );
    }
    Ok(())
}
