//! Adds zeros or a far cluster to clean data and reports whether the raw
//! shrinkage equation still has a solution.

use robust_scatter::experiments::{breakdown_sweep, empirical_frontier, write_csv, Contamination};
use robust_scatter::WeightFunction;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, p) = (20, 2);
    let wf = WeightFunction::huber(4.0)?;

    let zeros: Vec<Contamination> = (1..=25).map(Contamination::Zeros).collect();
    let reports = breakdown_sweep(n, p, &wf, 0.0, &zeros, 5, 1)?;
    let (last, first_none) = empirical_frontier(&reports);
    eprintln!(
        "zeros: solutions up to eps = {last:?}, none from eps = {first_none:?}; bounds [{}, {}]",
        reports[0].threshold_lo, reports[0].threshold_hi
    );
    write_csv(&reports, std::io::stdout().lock())?;

    let alpha = 0.5;
    let cap = (wf.kappa().finite().unwrap() - 1.0) / alpha;
    for norm in [1e2, 1e4, 1e6] {
        let r = breakdown_sweep(
            n,
            p,
            &wf,
            alpha,
            &[Contamination::FarCluster { m: 10, norm }],
            5,
            2,
        )?;
        eprintln!(
            "far cluster at {norm:e}: largest eigenvalue {:?} (cap {cap})",
            r[0].lambda_max.values().cloned().fold(f64::NAN, f64::max)
        );
    }
    Ok(())
}
