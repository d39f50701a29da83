//! Builds a scenario from a flat config, draws one trial and prints the
//! spectrum of the true covariance alongside the outlier layout.

use robust_scatter::datagen::{
    contribution_ratios, mean_sq_mahalanobis, scenario_dataset, Scenario,
};
use robust_scatter::linalg::sym_eigen;

const CONFIG: &str = "\
p = 10
c1 = 0.3
c2 = 50
N = 100
xi = 0.05
k = 10
outlier_mode = clustered
body = t:5
seed = 3
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scn = Scenario::from_config_str(CONFIG)?;
    print!("{}", scn.to_config_string());

    let ratios = contribution_ratios(scn.p, scn.c1_value(), scn.c2, 1);
    println!(
        "contribution ratios ({:?}): {:.4?}",
        ratios.branch, ratios.ratios
    );

    let trial = scenario_dataset(&scn, 0)?;
    let eig = sym_eigen(trial.sigma.matrix())?;
    println!("eigenvalues of sigma: {:.4?}", eig.eigenvalues.as_slice());
    let idx = trial.data.outlier_indices().unwrap();
    let body = trial
        .data
        .select(&(0..trial.data.n() - idx.len()).collect::<Vec<_>>());
    let outliers = trial.data.select(idx);
    println!(
        "mean squared Mahalanobis radius: body {:.2}, outliers {:.2}",
        mean_sq_mahalanobis(&body, &trial.sigma)?,
        mean_sq_mahalanobis(&outliers, &trial.sigma)?
    );
    Ok(())
}
