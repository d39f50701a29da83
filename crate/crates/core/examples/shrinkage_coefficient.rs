//! Bootstrap selection of the shrinkage coefficient.

use robust_scatter::datagen::{scenario_dataset, Scenario};
use robust_scatter::shrinkage::{alpha_hat, coupon_resamples, default_resample_size, M2Source};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 100;
    let k = 98;
    println!(
        "expected draws to see {k} of {n} points: {:.4} (resample size {})",
        coupon_resamples(n, k)?,
        default_resample_size(n)?
    );

    for p in [5, 25, 45] {
        let scn = Scenario {
            p,
            ..Scenario::default()
        };
        let x = scenario_dataset(&scn, 0)?.data;
        for (name, source) in [("scm", M2Source::ScmInverse), ("tme", M2Source::TmeInverse)] {
            let a = alpha_hat(&x, &source, 200, 42)?;
            println!(
                "p = {p:>2}  pilot {name}: alpha = {:.4} (unclamped {:.4}, {} singular resamples)",
                a.alpha, a.raw, a.moments.degenerate_count
            );
        }
    }
    Ok(())
}
