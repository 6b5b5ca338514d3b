use stochopt::smd::*;
use stochopt::stats::median;
use stochopt::{Error, ProxGeometry, SimRng};

struct ConstOracle {
    g: Vec<f64>,
    nan_at_call: Option<usize>,
    calls: std::sync::atomic::AtomicUsize,
}

impl ConstOracle {
    fn new(g: Vec<f64>) -> Self {
        Self {
            g,
            nan_at_call: None,
            calls: Default::default(),
        }
    }
}

impl StochasticOracle for ConstOracle {
    fn dim(&self) -> usize {
        self.g.len()
    }
    fn grad(&self, _x: &[f64], _rng: &mut SimRng) -> Vec<f64> {
        let c = self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        if Some(c) == self.nan_at_call {
            vec![f64::NAN; self.g.len()]
        } else {
            self.g.clone()
        }
    }
    fn noise_model(&self) -> NoiseModel {
        NoiseModel::Bounded
    }
    fn second_moment_bound(&self) -> f64 {
        1.0
    }
}

#[test]
fn required_iterations_examples() {
    assert_eq!(required_iterations(1.0, 1.0, 0.1).unwrap(), 200);
    assert_eq!(required_iterations(1.0, 1.0, 2f64.sqrt()).unwrap(), 1);
    assert_eq!(required_iterations(2.0, 3.0, 0.3).unwrap(), 800);
    assert!(matches!(
        required_iterations(0.0, 1.0, 0.1),
        Err(Error::Input(_))
    ));
    assert!(matches!(
        required_iterations(1.0, -1.0, 0.1),
        Err(Error::Input(_))
    ));
}

#[test]
fn trajectory_counts() {
    assert_eq!(trajectories_for_confidence(0.25).unwrap(), 4);
    assert_eq!(trajectories_for_confidence(0.1).unwrap(), 7);
    assert!(trajectories_for_confidence(1.0).is_err());
    assert!(trajectories_for_confidence(0.0).is_err());
}

#[test]
fn zero_gradient_keeps_start() {
    let g = ProxGeometry::entropic(4).unwrap();
    let o = ConstOracle::new(vec![0.0; 4]);
    let rec = run_smd(&o, &g, &SolverConfig::new(50, 1.0, 1)).unwrap();
    assert_eq!(rec.averaged_point, g.start_point());
    assert_eq!(rec.oracle_calls, 50);
}

#[test]
fn deterministic_linear_loss_concentrates_on_cheap_vertex() {
    let g = ProxGeometry::entropic(2).unwrap();
    let o = LinearOracle::new(vec![1.0, 0.0], NoiseSource::none(), f64::INFINITY).unwrap();
    let n = 1000;
    let r = 2f64.ln().sqrt();
    let rec = run_smd(&o, &g, &SolverConfig::new(n, r, 0)).unwrap();
    assert!(rec.averaged_point[1] >= 0.95);
    // closed-form trajectory: x_1^k = 1 / (1 + e^{h k})
    let h = fixed_step(1.0, r, n);
    let avg0: f64 = (0..n)
        .map(|k| 1.0 / (1.0 + (h * k as f64).exp()))
        .sum::<f64>()
        / n as f64;
    assert!((rec.averaged_point[0] - avg0).abs() < 1e-12);
}

#[test]
fn stochastic_gap_within_bound_for_most_seeds() {
    let n_dim = 10;
    let g = ProxGeometry::entropic(n_dim).unwrap();
    let costs: Vec<f64> = (0..n_dim).map(|i| 0.05 * i as f64).collect();
    let o = LinearOracle::new(
        costs,
        NoiseSource::new(NoiseModel::Bounded, 0.5).unwrap(),
        f64::INFINITY,
    )
    .unwrap();
    let m = o.second_moment_bound();
    let r = (n_dim as f64).ln().sqrt();
    let n = 500;
    let bound = convex_gap_bound(m, r, n);
    let hits = (0..50)
        .filter(|&seed| {
            let rec = run_smd(&o, &g, &SolverConfig::new(n, r, seed)).unwrap();
            rec.final_gap.unwrap() <= bound
        })
        .count();
    assert!(hits >= 45, "{hits}/50 within bound");
}

#[test]
fn nan_gradient_aborts_with_step() {
    let g = ProxGeometry::entropic(3).unwrap();
    let mut o = ConstOracle::new(vec![0.1, 0.2, 0.3]);
    o.nan_at_call = Some(7);
    let err = run_smd(&o, &g, &SolverConfig::new(20, 1.0, 0)).unwrap_err();
    assert_eq!(err, Error::OracleNan { step: 7 });
}

#[test]
fn invalid_configs() {
    let g = ProxGeometry::entropic(3).unwrap();
    let o = ConstOracle::new(vec![0.0; 3]);
    assert!(matches!(
        run_smd(&o, &g, &SolverConfig::new(0, 1.0, 0)),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        run_smd(&o, &g, &SolverConfig::new(5, 0.0, 0)),
        Err(Error::Config(_))
    ));
    let wrong = ProxGeometry::entropic(4).unwrap();
    assert!(matches!(
        run_smd(&o, &wrong, &SolverConfig::new(5, 1.0, 0)),
        Err(Error::Config(_))
    ));
}

#[test]
fn runs_are_reproducible() {
    let g = ProxGeometry::entropic(5).unwrap();
    let o = LinearOracle::new(
        vec![0.3, 0.1, 0.4, 0.2, 0.5],
        NoiseSource::new(NoiseModel::SubGaussian, 0.3).unwrap(),
        f64::INFINITY,
    )
    .unwrap();
    let cfg = SolverConfig::new(300, 1.0, 99).with_trace(10, true);
    let a = run_smd(&o, &g, &cfg).unwrap();
    let b = run_smd(&o, &g, &cfg).unwrap();
    assert!(a.same_outcome(&b));
    assert_eq!(a.gap_trace.len(), 30);
    assert!(a.gap_trace.windows(2).all(|w| w[0].step < w[1].step));
    let c = run_smd(&o, &g, &SolverConfig { seed: 100, ..cfg }).unwrap();
    assert!(!a.same_outcome(&c));
}

#[test]
fn strongly_convex_noiseless_improves() {
    let g = ProxGeometry::euclidean(2).unwrap();
    let o = QuadraticOracle::new(vec![0.0, 0.0], 1.0, NoiseSource::none(), 1.0).unwrap();
    let gap = |n: usize| {
        let cfg = SolverConfig::new(n, 1.0, 0)
            .with_step_rule(StepRule::InverseK)
            .with_start(vec![1.0, 0.0]);
        run_smd_strongly_convex(&o, &g, &cfg)
            .unwrap()
            .final_gap
            .unwrap()
    };
    let (g10, g100) = (gap(10), gap(100));
    assert!(g100 < g10);
    // first step with h = 1/mu lands on the minimizer, so the average is x^1 / N
    assert!((g100 - 0.5 / 1e4).abs() < 1e-15);
}

#[test]
fn strongly_convex_median_gap_under_bound() {
    let g = ProxGeometry::euclidean(3).unwrap();
    let o = QuadraticOracle::new(
        vec![0.5, -0.3, 0.2],
        1.0,
        NoiseSource::new(NoiseModel::Bounded, 0.5).unwrap(),
        1.0,
    )
    .unwrap();
    let m = o.second_moment_bound();
    for n in [100, 1000] {
        let gaps: Vec<f64> = (0..50)
            .map(|seed| {
                let cfg = SolverConfig::new(n, 1.0, seed).with_step_rule(StepRule::InverseK);
                run_smd_strongly_convex(&o, &g, &cfg)
                    .unwrap()
                    .final_gap
                    .unwrap()
            })
            .collect();
        assert!(median(&gaps) <= strongly_convex_gap_bound(m, 1.0, n, 0.0));
    }
}

// Grid oracle: locate the stationary point of the biased field on a fine 1-D
// grid and confirm its excess objective stays below delta.
#[test]
fn biased_stationary_point_costs_at_most_delta() {
    let delta = 0.05;
    let diameter = 2.0;
    let o = QuadraticOracle::new(vec![0.0], 1.0, NoiseSource::none(), 1.0)
        .unwrap()
        .with_bias(delta, diameter)
        .unwrap();
    let mut rng = stochopt::rng::seeded(0);
    let (mut best_x, mut best_g) = (0.0, f64::INFINITY);
    for i in 0..=200_000 {
        let x = -1.0 + 2.0 * i as f64 / 200_000.0;
        let g = o.grad(&[x], &mut rng)[0].abs();
        if g < best_g {
            best_g = g;
            best_x = x;
        }
    }
    let gap = o.true_value(&[best_x]).unwrap();
    assert!(gap <= delta);

    let g = ProxGeometry::euclidean(1).unwrap();
    let cfg = SolverConfig::new(1000, 1.0, 3).with_step_rule(StepRule::InverseK);
    let rec = run_smd_strongly_convex(&o, &g, &cfg).unwrap();
    let bound = strongly_convex_gap_bound(o.second_moment_bound(), 1.0, 1000, delta);
    assert!(rec.final_gap.unwrap() <= bound);
}

#[test]
fn strongly_convex_preconditions() {
    let o = LinearOracle::new(vec![0.1, 0.2], NoiseSource::none(), 2.0).unwrap();
    let g = ProxGeometry::euclidean(2).unwrap();
    let cfg = SolverConfig::new(10, 1.0, 0).with_step_rule(StepRule::InverseK);
    let err = run_smd_strongly_convex(&o, &g, &cfg).unwrap_err();
    assert!(err.to_string().contains("run_smd"), "{err}");
    let q = QuadraticOracle::new(vec![0.1, 0.2], 1.0, NoiseSource::none(), 1.0).unwrap();
    let ent = ProxGeometry::entropic(2).unwrap();
    assert!(run_smd_strongly_convex(&q, &ent, &cfg).is_err());
}

#[test]
fn parallel_aggregate_of_deterministic_oracle_matches_single_run() {
    let g = ProxGeometry::entropic(3).unwrap();
    let cfg = SolverConfig::new(200, 1.0, 4);
    let single = run_smd(&ConstOracle::new(vec![0.3, 0.1, 0.2]), &g, &cfg).unwrap();
    let agg =
        run_parallel_aggregate(|_| ConstOracle::new(vec![0.3, 0.1, 0.2]), &g, &cfg, 0.1).unwrap();
    assert_eq!(agg.trajectory_averages.len(), 7);
    assert_eq!(agg.oracle_calls, 7 * 200);
    for (a, b) in agg.averaged_point.iter().zip(&single.averaged_point) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn parallel_aggregate_is_reproducible_and_uses_distinct_streams() {
    let g = ProxGeometry::entropic(4).unwrap();
    let cfg = SolverConfig::new(100, 1.0, 8);
    let make = |_| {
        LinearOracle::new(
            vec![0.1, 0.2, 0.3, 0.4],
            NoiseSource::new(NoiseModel::Bounded, 0.5).unwrap(),
            f64::INFINITY,
        )
        .unwrap()
    };
    let a = run_parallel_aggregate(make, &g, &cfg, 0.25).unwrap();
    let b = run_parallel_aggregate(make, &g, &cfg, 0.25).unwrap();
    assert!(a.same_outcome(&b));
    assert_ne!(a.trajectory_averages[0], a.trajectory_averages[1]);
    g.check_feasible(&a.averaged_point).unwrap();
}

#[test]
fn parallel_abort_names_trajectory() {
    let g = ProxGeometry::entropic(2).unwrap();
    let cfg = SolverConfig::new(10, 1.0, 0);
    let err = run_parallel_aggregate(
        |i| {
            let mut o = ConstOracle::new(vec![0.0, 1.0]);
            if i == 3 {
                o.nan_at_call = Some(2);
            }
            o
        },
        &g,
        &cfg,
        0.1,
    )
    .unwrap_err();
    match err {
        Error::Trajectory { index, source } => {
            assert_eq!(index, 3);
            assert_eq!(*source, Error::OracleNan { step: 2 });
        }
        other => panic!("unexpected {other:?}"),
    }
}
