use super::registry::{EstimatorSpec, TrialContext};
use super::{ExperimentError, Result};
use crate::datagen::{scenario_dataset, Scenario};
use crate::estimators::{quadratic_forms_of, DataSet, SolverConfig};
use crate::linalg::{self, SpdMatrix};
use crate::shrinkage::M2Source;
use crate::substream;
use rand::Rng;
use rayon::prelude::*;

/// Row indices sorted by decreasing `xᵀV⁻¹x`, ties by index.
pub fn mahalanobis_ranking(x: &DataSet, v: &SpdMatrix) -> Result<Vec<(usize, f64)>> {
    if v.dim() != x.p() {
        return Err(ExperimentError::Config(format!(
            "scatter has dimension {}, data have p = {}",
            v.dim(),
            x.p()
        )));
    }
    let inv = linalg::spd_inverse(v)?;
    let mut ranked: Vec<(usize, f64)> = quadratic_forms_of(x, inv.matrix())
        .into_iter()
        .enumerate()
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Whether the `m` highest-ranked rows are exactly the planted outliers.
pub fn top_m_captures(ranking: &[(usize, f64)], planted: &[usize]) -> bool {
    let m = planted.len();
    ranking.len() >= m && ranking[..m].iter().all(|(i, _)| planted.contains(i))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankingSummary {
    pub estimator: String,
    pub trials: usize,
    /// Trials where the estimator failed to produce an estimate.
    pub failed: usize,
    /// Trials where every planted outlier is in the top `m`.
    pub captured: usize,
}

impl RankingSummary {
    pub fn capture_fraction(&self) -> f64 {
        self.captured as f64 / self.trials as f64
    }

    /// Failed trials count as misses.
    pub fn miss_fraction(&self) -> f64 {
        1.0 - self.capture_fraction()
    }
}

/// Ranks each trial's data by the Mahalanobis distance under every
/// estimator and counts how often the planted outliers fill the top `m`.
pub fn ranking_study(
    scn: &Scenario,
    estimators: &[EstimatorSpec],
    trials: usize,
    solver: &SolverConfig,
    replicates: usize,
) -> Result<Vec<RankingSummary>> {
    scn.validate()?;
    if scn.outlier_count() == 0 {
        return Err(ExperimentError::Config(
            "ranking study needs planted outliers".into(),
        ));
    }
    let per_trial: Vec<Result<Vec<Option<bool>>>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let trial = scenario_dataset(scn, t)?;
            let planted = trial.data.outlier_indices().unwrap_or(&[]).to_vec();
            let seed = substream(scn.seed, &[t, 0xa1fa]).random();
            let ctx = TrialContext::new(&trial.data, M2Source::ScmInverse, replicates, seed);
            Ok(estimators
                .iter()
                .map(|spec| {
                    let e = spec.evaluate(&ctx, solver).ok().filter(|e| e.ok())?;
                    let ranking = mahalanobis_ranking(&trial.data, &e.result.estimate).ok()?;
                    Some(top_m_captures(&ranking, &planted))
                })
                .collect())
        })
        .collect();
    let mut summaries: Vec<RankingSummary> = estimators
        .iter()
        .map(|e| RankingSummary {
            estimator: e.label(),
            trials,
            failed: 0,
            captured: 0,
        })
        .collect();
    for row in per_trial {
        for (s, outcome) in summaries.iter_mut().zip(row?) {
            match outcome {
                None => s.failed += 1,
                Some(true) => s.captured += 1,
                Some(false) => {}
            }
        }
    }
    Ok(summaries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::OutlierMode;

    #[test]
    fn scaled_row_ranks_first() {
        let x = DataSet::from_rows(&[
            vec![1.0, 0.5],
            vec![0.3, -0.2],
            vec![100.0, 50.0],
            vec![-1.0, 1.0],
        ])
        .unwrap();
        let r = mahalanobis_ranking(&x, &SpdMatrix::identity(2)).unwrap();
        assert_eq!(r[0].0, 2);
        assert!(r.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn ties_keep_index_order() {
        let x = DataSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 2.0]]).unwrap();
        let r = mahalanobis_ranking(&x, &SpdMatrix::identity(2)).unwrap();
        assert_eq!(r.iter().map(|p| p.0).collect::<Vec<_>>(), vec![2, 0, 1]);
    }

    #[test]
    fn true_sigma_puts_planted_outliers_on_top() {
        for mode in [OutlierMode::Clustered, OutlierMode::Unclustered] {
            let scn = Scenario {
                p: 10,
                outlier_mode: mode,
                seed: 3,
                ..Scenario::default()
            };
            for t in 0..10 {
                let trial = scenario_dataset(&scn, t).unwrap();
                let r = mahalanobis_ranking(&trial.data, &trial.sigma).unwrap();
                assert!(
                    top_m_captures(&r, trial.data.outlier_indices().unwrap()),
                    "{mode} trial {t}"
                );
            }
        }
    }

    #[test]
    fn study_counts_every_trial() {
        let scn = Scenario {
            p: 4,
            n_total: 60,
            seed: 8,
            ..Scenario::default()
        };
        let specs = EstimatorSpec::parse_list("scm,tme,proposed@0.5").unwrap();
        let s = ranking_study(&scn, &specs, 5, &SolverConfig::default(), 20).unwrap();
        for r in &s {
            assert_eq!(r.trials, 5);
            assert!(r.captured + r.failed <= 5);
        }
        let none = Scenario { xi: 0.0, ..scn };
        assert!(ranking_study(&none, &specs, 2, &SolverConfig::default(), 20).is_err());
    }
}
