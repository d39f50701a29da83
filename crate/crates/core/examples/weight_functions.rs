use robust_scatter::weights::{check_existence, log_grid, monotonicity_holds};
use robust_scatter::WeightFunction;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, p) = (100, 5);
    let grid = log_grid(1e-6, 1e6, 121);
    let families = [
        WeightFunction::tyler(p),
        WeightFunction::huber(4.0)?,
        WeightFunction::huber(8.0)?,
        WeightFunction::t_dist(p, 5)?,
        WeightFunction::constant(1.0)?,
    ];
    for wf in families {
        let r = check_existence(&wf, n, p)?;
        println!(
            "{:<10} w(1) = {:<8.4} psi(100) = {:<8.4} kappa = {:?} monotone = {} kappa > p: {} kappa > n(p-1)/(n-p) = {:.3}: {}",
            wf.to_string(),
            wf.w(1.0)?,
            wf.psi(100.0),
            r.kappa,
            monotonicity_holds(&wf, &grid),
            r.condition_e,
            r.threshold_corollary1,
            r.corollary1
        );
    }
    Ok(())
}
