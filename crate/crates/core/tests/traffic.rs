use proptest::prelude::*;
use stochopt::rng::{seeded, substream};
use stochopt::stats::{mean, std_error, variance};
use stochopt::traffic::*;
use stochopt::Error;

fn s(v: &str) -> String {
    v.to_string()
}

fn paths(p: &[&[&str]]) -> Vec<Vec<String>> {
    p.iter().map(|q| q.iter().map(|e| s(e)).collect()).collect()
}

fn single_edge(t0: f64, rho: f64, mu: f64, fbar: f64, d: f64) -> RoadNetwork {
    RoadNetwork::new(
        vec![s("o"), s("d")],
        vec![Edge::new("e", "o", "d", t0, rho, mu, fbar)],
        vec![(s("o"), s("d"), d, paths(&[&["e"]]))],
    )
    .unwrap()
}

/// `Psi_gamma` on Pigou as a function of the share `s` on the congestible link.
fn pigou_objective(share: f64, gamma: f64) -> f64 {
    let xlx = |v: f64| if v > 0.0 { v * v.ln() } else { 0.0 };
    (1.0 - share) + 0.5 * share + 0.25 * share * share + gamma * (xlx(share) + xlx(1.0 - share))
}

/// Grid search followed by local refinement.
fn grid_argmin(f: impl Fn(f64) -> f64) -> f64 {
    let mut best = 0.0;
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..8 {
        let n = 1000;
        let mut val = f64::INFINITY;
        for i in 0..=n {
            let s = lo + (hi - lo) * i as f64 / n as f64;
            let v = f(s);
            if v < val {
                val = v;
                best = s;
            }
        }
        let w = (hi - lo) / n as f64;
        lo = (best - 2.0 * w).max(0.0);
        hi = (best + 2.0 * w).min(1.0);
    }
    best
}

fn pigou() -> RoadNetwork {
    shipped_instance("pigou").unwrap()
}

#[test]
fn edge_flow_examples() {
    let chain = RoadNetwork::new(
        vec![s("a"), s("b"), s("c"), s("d"), s("z")],
        vec![
            Edge::new("1", "a", "b", 1.0, 0.0, 1.0, 1.0),
            Edge::new("2", "b", "c", 1.0, 0.0, 1.0, 1.0),
            Edge::new("3", "c", "d", 1.0, 0.0, 1.0, 1.0),
            Edge::new("4", "a", "z", 1.0, 0.0, 1.0, 1.0),
        ],
        vec![(s("a"), s("d"), 1.0, paths(&[&["1", "2", "3"]]))],
    )
    .unwrap();
    assert_eq!(
        edge_flows(&chain, &[1.0]).unwrap(),
        vec![1.0, 1.0, 1.0, 0.0]
    );

    let two = shipped_instance("two-route").unwrap();
    assert_eq!(edge_flows(&two, &[0.3, 0.7]).unwrap(), vec![0.3, 0.7]);

    let braess = shipped_instance("braess").unwrap();
    let f = edge_flows(&braess, &[0.2, 0.3, 0.5]).unwrap();
    let sa = braess.edges().iter().position(|e| e.id == "sa").unwrap();
    let bt = braess.edges().iter().position(|e| e.id == "bt").unwrap();
    assert!((f[sa] - 0.7).abs() < 1e-15 && (f[bt] - 0.8).abs() < 1e-15);

    assert!(matches!(
        edge_flows(&two, &[0.3, 0.3]),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        edge_flows(&two, &[1.1, -0.1]),
        Err(Error::Domain(_))
    ));
}

#[test]
fn bpr_examples() {
    let e = Edge::new("e", "a", "b", 2.0, 0.15, 0.25, 3.0);
    assert_eq!(bpr_cost(&e, 0.0).unwrap(), 2.0);
    assert!((bpr_cost(&e, 3.0).unwrap() - 2.3).abs() < 1e-15);
    let flat = Edge::new("e", "a", "b", 2.0, 0.0, 0.25, 3.0);
    for f in [0.0, 1.0, 100.0] {
        assert_eq!(bpr_cost(&flat, f).unwrap(), 2.0);
    }
    assert!(bpr_cost(&e, -1e-3).is_err());
}

#[test]
fn braess_path_costs_match_hand_sums() {
    let net = shipped_instance("braess").unwrap();
    let x = [0.2, 0.3, 0.5];
    let g = path_costs(&net, &x).unwrap();
    let lin = |f: f64| 0.01 * (1.0 + 99.0 * f);
    let (fsa, fbt) = (0.7, 0.8);
    let want = [lin(fsa) + 1.2, 1.2 + lin(fbt), lin(fsa) + 0.01 + lin(fbt)];
    for (a, b) in g.iter().zip(want) {
        assert!((a - b).abs() < 1e-14, "{a} vs {b}");
    }
    let free = path_costs(&net, &[1.0, 0.0, 0.0]).unwrap();
    assert!((free[1] - (1.2 + 0.01)).abs() < 1e-15);
}

#[test]
fn beckmann_examples() {
    let net = single_edge(1.0, 1.0, 1.0, 1.0, 1.0);
    assert!((beckmann_potential(&net, &[1.0]).unwrap() - 1.5).abs() < 1e-15);
    assert_eq!(net.edges()[0].sigma(0.0), 0.0);
}

#[test]
fn potential_gradient_is_path_cost() {
    let mut rng = seeded(3);
    for _ in 0..10 {
        let net = random_network(&mut rng);
        let x = net.uniform_flow();
        let g = path_costs(&net, &x).unwrap();
        let f = edge_flows(&net, &x).unwrap();
        let potential =
            |f: &[f64]| -> f64 { net.edges().iter().zip(f).map(|(e, v)| e.sigma(*v)).sum() };
        for (p, path) in net.paths().enumerate() {
            let h = 1e-6;
            let mut up = f.clone();
            let mut dn = f.clone();
            for &e in path {
                up[e] += h;
                dn[e] -= h;
            }
            let fd = (potential(&up) - potential(&dn)) / (2.0 * h);
            assert!(
                (fd - g[p]).abs() <= 1e-5 * g[p].abs().max(1.0),
                "{fd} vs {}",
                g[p]
            );
        }
    }
}

#[test]
fn entropy_potential_examples() {
    let net = pigou();
    let x = [0.3, 0.7];
    assert_eq!(
        entropy_potential(&net, &x, 0.0).unwrap(),
        beckmann_potential(&net, &x).unwrap()
    );
    assert!(entropy_potential(&net, &x, -0.1).is_err());
    assert!((entropy_potential(&net, &x, 0.1).unwrap() - pigou_objective(0.7, 0.1)).abs() < 1e-14);

    // equal constant costs: the entropy term alone picks the uniform split
    let flat = RoadNetwork::new(
        vec![s("o"), s("d")],
        vec![
            Edge::new("a", "o", "d", 1.0, 0.0, 1.0, 1.0),
            Edge::new("b", "o", "d", 1.0, 0.0, 1.0, 1.0),
            Edge::new("c", "o", "d", 1.0, 0.0, 1.0, 1.0),
        ],
        vec![(s("o"), s("d"), 2.0, paths(&[&["a"], &["b"], &["c"]]))],
    )
    .unwrap();
    let st = solve_dual(&flat, 0.5, 1e-10, 1000).unwrap();
    for v in &st.x {
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }
    let u = entropy_potential(&flat, &st.x, 0.5).unwrap();
    assert!(u < entropy_potential(&flat, &[1.0, 0.5, 0.5], 0.5).unwrap());
}

#[test]
fn entropy_shift_relates_the_two_conventions() {
    let net = RoadNetwork::new(
        vec![s("o"), s("d")],
        vec![
            Edge::new("a", "o", "d", 1.0, 0.5, 1.0, 1.0),
            Edge::new("b", "o", "d", 1.5, 0.2, 0.5, 1.0),
        ],
        vec![(s("o"), s("d"), 2.5, paths(&[&["a"], &["b"]]))],
    )
    .unwrap();
    let x = [1.0f64, 1.5];
    let gamma = 0.3;
    let xlnx: f64 = x.iter().map(|v| v * v.ln()).sum();
    let with_plain = beckmann_potential(&net, &x).unwrap() + gamma * xlnx;
    let shifted =
        entropy_potential(&net, &x, gamma).unwrap() + entropy_convention_shift(&net, gamma);
    assert!((with_plain - shifted).abs() < 1e-13);
}

#[test]
fn pigou_smoothed_equilibrium_matches_grid() {
    let share = grid_argmin(|v| pigou_objective(v, 0.1));
    for method in [DualMethod::FixedPoint, DualMethod::DualGradient] {
        let st = solve_dual_with(&pigou(), 0.1, 1e-9, 1_000_000, method).unwrap();
        assert!(st.converged, "{method:?}: residual {}", st.residual);
        assert!(
            (st.x[1] - share).abs() < 1e-3,
            "{method:?}: {} vs {share}",
            st.x[1]
        );
    }
}

#[test]
fn exp_weights_dynamics_examples() {
    let two = shipped_instance("two-route").unwrap();
    let star = beckmann_equilibrium(&two, 1e-12, 10_000).unwrap();
    let r = run_exp_weights_traffic(&two, 1000, star.potential, 0).unwrap();
    assert!((r.averaged[0] - 0.5).abs() < 1e-12);

    let net = pigou();
    let psi_star = {
        let v = grid_argmin(|v| pigou_objective(v, 0.0));
        pigou_objective(v, 0.0)
    };
    assert!((psi_star - 0.75).abs() < 1e-9);
    for n in [100usize, 1000, 10_000] {
        let r = run_exp_weights_traffic(&net, n, psi_star, 0).unwrap();
        assert!(
            r.gap >= -1e-12 && r.within_bound(),
            "N={n}: {} vs {}",
            r.gap,
            r.bound
        );
    }

    let braess = shipped_instance("braess").unwrap();
    let eq = beckmann_equilibrium(&braess, 1e-10, 100_000).unwrap();
    assert!((eq.x[2] - 1.0).abs() < 1e-6, "{:?}", eq.x);
    assert!((eq.potential - 1.02).abs() < 1e-6);
    // brute force over the 3-path simplex grid
    let mut best = f64::INFINITY;
    let k = 200;
    for i in 0..=k {
        for j in 0..=k - i {
            let x = [
                i as f64 / k as f64,
                j as f64 / k as f64,
                (k - i - j) as f64 / k as f64,
            ];
            best = best.min(beckmann_potential(&braess, &x).unwrap());
        }
    }
    assert!((best - eq.potential).abs() < 1e-9);
    let r = run_exp_weights_traffic(&braess, 10_000, eq.potential, 0).unwrap();
    assert!(r.within_bound());
}

#[test]
fn gap_bound_uses_cost_ceiling() {
    let net = pigou();
    // M~ = tau_2(1) = 1, H = 1, one pair with n_w = 2, d = 1
    let want = 1.0 / 10.0 * 2f64.ln() / (2.0 * 2f64.ln()).sqrt() * 2.0;
    assert!((exp_weights_gap_bound(&net, 100) - want).abs() < 1e-15);
}

#[test]
fn gumbel_examples() {
    for gamma in [0.5, 2.0] {
        assert!((gumbel_quantile(gamma, (-1f64).exp()) + gamma * EULER_GAMMA).abs() < 1e-15);
    }
    assert!(gumbel_sample(0.0, &mut seeded(0)).is_err());
    let gamma = 0.7;
    let mut rng = seeded(11);
    let draws: Vec<f64> = (0..1_000_000)
        .map(|_| gumbel_sample(gamma, &mut rng).unwrap())
        .collect();
    assert!(mean(&draws).abs() <= 3.0 * std_error(&draws));
    let want = gamma * gamma * std::f64::consts::PI.powi(2) / 6.0;
    assert!((variance(&draws) / want - 1.0).abs() < 0.02);
}

#[test]
fn logit_examples() {
    assert_eq!(
        logit_choice(&[2.0, 2.0, 2.0, 2.0], 0.3).unwrap(),
        vec![0.25; 4]
    );
    let gamma = 0.4;
    let p = logit_choice(&[0.0, gamma * 2f64.ln()], gamma).unwrap();
    assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
    let p = logit_choice(&[1.0, 0.9, 1.2], 1e-4).unwrap();
    assert!(p[1] > 1.0 - 1e-12);
    let p = logit_choice(&[1e5, 1e5 + 1.0], 1e-3).unwrap();
    assert!(p.iter().all(|v| v.is_finite()));
    assert!(logit_choice(&[1.0], 0.0).is_err());
}

#[test]
fn mean_field_large_gamma_is_proportional() {
    let net = shipped_instance("grid3x3").unwrap();
    let cfg = LogitConfig::new(1e6, 1.0, 2.0, 200, LogitMode::MeanField);
    let tr = run_logit_dynamics(&net, &cfg, &mut seeded(0)).unwrap();
    for (a, b) in tr.last.iter().zip(net.uniform_flow()) {
        assert!((a - b).abs() < 1e-5);
    }
}

#[test]
fn mean_field_converges_to_smoothed_equilibrium() {
    let share = grid_argmin(|v| pigou_objective(v, 0.1));
    let cfg = LogitConfig::new(0.1, 1.0, 10.0, 2000, LogitMode::MeanField);
    let tr = run_logit_dynamics(&pigou(), &cfg, &mut seeded(0)).unwrap();
    assert!(
        (tr.last[1] - share).abs() < 1e-4,
        "{} vs {share}",
        tr.last[1]
    );
}

#[test]
fn agent_dynamics_concentrate_near_mean_field() {
    let net = pigou();
    let mf = run_logit_dynamics(
        &net,
        &LogitConfig::new(0.1, 1.0, 10.0, 2000, LogitMode::MeanField),
        &mut seeded(0),
    )
    .unwrap();
    let cfg = LogitConfig::new(
        0.1,
        1.0,
        10.0,
        1200,
        LogitMode::Agents {
            agents_per_unit: 10_000,
        },
    )
    .with_burn_in(200);
    let tr = run_logit_dynamics(&net, &cfg, &mut seeded(5)).unwrap();
    for p in 0..2 {
        let se = tr.batch_std_error[p];
        assert!(
            (tr.time_average[p] - mf.last[p]).abs() <= 3.0 * se,
            "path {p}: {} vs {} (se {se})",
            tr.time_average[p],
            mf.last[p]
        );
    }
}

#[test]
fn agent_mode_needs_integer_counts() {
    let net = pigou();
    let cfg = LogitConfig::new(
        0.1,
        1.0,
        10.0,
        10,
        LogitMode::Agents {
            agents_per_unit: 10,
        },
    );
    assert!(run_logit_dynamics(&net, &cfg, &mut seeded(0)).is_ok());
    let odd = RoadNetwork::new(
        vec![s("o"), s("d")],
        vec![Edge::new("a", "o", "d", 1.0, 1.0, 1.0, 1.0)],
        vec![(s("o"), s("d"), 0.55, paths(&[&["a"]]))],
    )
    .unwrap();
    assert!(matches!(
        run_logit_dynamics(&odd, &cfg, &mut seeded(0)),
        Err(Error::Config(_))
    ));
}

#[test]
fn agent_mode_is_reproducible() {
    let net = shipped_instance("two-route").unwrap();
    let cfg = LogitConfig::new(
        0.2,
        1.0,
        5.0,
        50,
        LogitMode::Agents {
            agents_per_unit: 100,
        },
    )
    .with_trace(10);
    let a = run_logit_dynamics(&net, &cfg, &mut seeded(9)).unwrap();
    let b = run_logit_dynamics(&net, &cfg, &mut seeded(9)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.samples.len(), 6);
}

#[test]
fn conjugate_examples() {
    let e = Edge::new("e", "a", "b", 1.0, 1.0, 1.0, 1.0);
    assert_eq!(conjugate_sigma(&e, 1.0).unwrap(), 0.0);
    assert!((conjugate_sigma(&e, 2.0).unwrap() - 0.5).abs() < 1e-15);
    // numeric sup over a flow grid
    let sup = (0..=400_000)
        .map(|i| i as f64 * 1e-5)
        .map(|f| 2.0 * f - e.sigma(f))
        .fold(f64::MIN, f64::max);
    assert!((sup - 0.5).abs() < 1e-9);
    assert!((conjugate_sigma_derivative(&e, 2.0).unwrap() - 1.0).abs() < 1e-15);
    let h = 1e-6;
    let fd =
        (conjugate_sigma(&e, 2.0 + h).unwrap() - conjugate_sigma(&e, 2.0 - h).unwrap()) / (2.0 * h);
    assert!((fd - 1.0).abs() < 1e-8);
    assert!(matches!(conjugate_sigma(&e, 0.9), Err(Error::Domain(_))));
    let flat = Edge::new("flat", "a", "b", 1.0, 0.0, 1.0, 1.0);
    assert_eq!(conjugate_sigma(&flat, 1.0).unwrap(), 0.0);
    let err = conjugate_sigma(&flat, 1.1).unwrap_err();
    assert!(err.to_string().contains("flat"));
}

#[test]
fn conjugate_matches_numeric_sup_for_quartic_cost() {
    let e = Edge::new("e", "a", "b", 1.5, 0.15, 0.25, 2.0);
    for t in [1.6, 2.0, 3.0] {
        let sup = (0..=200_000)
            .map(|i| i as f64 * 2e-5)
            .map(|f| t * f - e.sigma(f))
            .fold(f64::MIN, f64::max);
        assert!(
            (sup - conjugate_sigma(&e, t).unwrap()).abs() < 1e-7,
            "t {t}"
        );
    }
}

#[test]
fn single_edge_dual_is_minimized_at_unit_flow_cost() {
    let net = single_edge(1.0, 1.0, 1.0, 1.0, 1.0);
    for gamma in [0.05, 1.0] {
        let (v, g) = smoothed_dual_objective(&net, &[2.5], gamma).unwrap();
        assert!((v - (-2.5 + conjugate_sigma(&net.edges()[0], 2.5).unwrap())).abs() < 1e-13);
        assert!(g[0] > 0.0);
        let st = solve_dual(&net, gamma, 1e-10, 100).unwrap();
        assert!(st.converged);
        assert!((st.t[0] - 2.0).abs() < 1e-9);
        assert_eq!(st.x, vec![1.0]);
    }
}

#[test]
fn dual_gradient_matches_central_differences() {
    let mut rng = seeded(41);
    for _ in 0..10 {
        let net = random_network(&mut rng);
        let t: Vec<f64> = net
            .edges()
            .iter()
            .map(|e| e.t0 * (1.0 + 0.5 * e.rho) + 0.1)
            .collect();
        let gamma = 0.1;
        let (_, g) = smoothed_dual_objective(&net, &t, gamma).unwrap();
        for e in 0..t.len() {
            let h = 1e-6;
            let mut up = t.clone();
            let mut dn = t.clone();
            up[e] += h;
            dn[e] -= h;
            let fd = (smoothed_dual_objective(&net, &up, gamma).unwrap().0
                - smoothed_dual_objective(&net, &dn, gamma).unwrap().0)
                / (2.0 * h);
            assert!(
                (fd - g[e]).abs() <= 1e-5 * g[e].abs().max(1.0),
                "{fd} vs {}",
                g[e]
            );
        }
    }
}

#[test]
fn pigou_small_gamma_recovers_wardrop_split() {
    let st = solve_dual_with(&pigou(), 1e-3, 1e-9, 100_000, DualMethod::DualGradient).unwrap();
    assert!(st.converged);
    assert!(st.x[0] < 1e-2 && (st.x[1] - 1.0).abs() < 1e-2, "{:?}", st.x);
}

#[test]
fn recovery_examples() {
    let two = shipped_instance("two-route").unwrap();
    assert_eq!(
        recover_path_flows(&two, &[1.3, 1.3], 0.2).unwrap(),
        vec![0.5, 0.5]
    );
    let braess = shipped_instance("braess").unwrap();
    let t = [0.5, 1.2, 1.2, 0.5, 0.01];
    let x = recover_path_flows(&braess, &t, 1e-3).unwrap();
    assert!(x[2] > 1.0 - 1e-12);
    let x = recover_path_flows(&braess, &t, 0.3).unwrap();
    let direct = logit_choice(&[1.7, 1.7, 1.01], 0.3).unwrap();
    for (a, b) in x.iter().zip(direct) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!(recover_path_flows(&braess, &[0.0, 1.2, 1.2, 0.5, 0.01], 0.3).is_err());
}

#[test]
fn residual_examples() {
    let net = shipped_instance("grid3x3").unwrap();
    let st = solve_dual(&net, 0.1, 1e-7, 1_000_000).unwrap();
    assert!(st.converged && st.residual <= 1e-7);
    assert!(fixed_point_residual(&net, &st.t, 0.1).unwrap() <= 1e-7);
    let mut bumped = st.t.clone();
    bumped[0] *= 1.1;
    assert!(fixed_point_residual(&net, &bumped, 0.1).unwrap() > 1e-3);

    let one = single_edge(1.0, 0.5, 0.5, 2.0, 1.0);
    for t in [1.0, 1.2, 3.0] {
        let want = (2.0 * ((t - 1.0) / 0.5f64).powf(0.5) - 1.0).abs();
        assert!((fixed_point_residual(&one, &[t], 0.1).unwrap() - want).abs() < 1e-14);
    }
}

#[test]
fn fixed_point_and_dual_gradient_agree() {
    let mut rng = substream(8, 0);
    for _ in 0..10 {
        let net = random_network(&mut rng);
        let a = solve_dual_with(&net, 0.1, 1e-7, 2_000_000, DualMethod::FixedPoint).unwrap();
        let b = solve_dual_with(&net, 0.1, 1e-7, 100_000, DualMethod::DualGradient).unwrap();
        assert!(
            a.converged && b.converged,
            "{} {} after {} / {}",
            a.residual,
            b.residual,
            a.iterations,
            b.iterations
        );
        let d =
            a.t.iter()
                .zip(&b.t)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
        assert!(d < 1e-4, "{d}");
    }
}

#[test]
fn duality_gap_closes_at_the_solution() {
    let mut rng = seeded(77);
    for _ in 0..10 {
        let net = random_network(&mut rng);
        let tol = 1e-8;
        let st = solve_dual(&net, 0.1, tol, 2_000_000).unwrap();
        let gap = primal_dual_gap(&net, &st.x, &st.t, 0.1).unwrap();
        let psi = entropy_potential(&net, &st.x, 0.1).unwrap();
        assert!(gap >= -1e-12 && gap <= tol * (1.0 + psi.abs()), "{gap}");
        let worse: Vec<f64> =
            st.t.iter()
                .zip(net.edges())
                .map(|(t, e)| if e.rho > 0.0 { t + 0.05 } else { *t })
                .collect();
        assert!(primal_dual_gap(&net, &st.x, &worse, 0.1).unwrap() > gap);
    }
}

#[test]
fn wardrop_holds_at_small_gamma() {
    for (name, _) in SHIPPED_INSTANCES {
        let net = shipped_instance(name).unwrap();
        let st = solve_dual_with(&net, 1e-4, 1e-8, 200_000, DualMethod::DualGradient).unwrap();
        let v = wardrop_violation(&net, &st.x, 1e-3).unwrap();
        assert!(
            st.converged && v <= 1e-3,
            "{name}: residual {} after {}, violation {v}",
            st.residual,
            st.iterations
        );
    }
}

#[test]
fn json_round_trip_and_numeric_ids() {
    for (name, _) in SHIPPED_INSTANCES {
        let net = shipped_instance(name).unwrap();
        assert_eq!(RoadNetwork::from_json(&net.to_json()).unwrap(), net);
    }
    let text = r#"{"nodes": [1, 2], "edges": [{"id": 7, "tail": 1, "head": 2, "t0": 1, "rho": 0.15, "mu": 0.25, "fbar": 1}],
        "od_pairs": [{"origin": 1, "dest": 2, "demand": 1, "paths": [[7]]}]}"#;
    let net = RoadNetwork::from_json(text).unwrap();
    assert_eq!(net.edges()[0].id, "7");
    assert!(shipped_instance("pigou.json").is_ok());
    assert!(shipped_instance("nowhere").is_err());
}

fn line_of(err: Error) -> Option<usize> {
    match err {
        Error::Network { line, .. } => line,
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn validation_reports_lines() {
    let base = shipped_instance("braess").unwrap().to_json();
    let dangling = base.replacen("\"ab\",\n          \"bt\"", "\"zz\",\n          \"bt\"", 1);
    assert_ne!(dangling, base);
    let err = RoadNetwork::from_json(&dangling).unwrap_err();
    assert!(err.to_string().contains("unknown edge id zz"), "{err}");
    let want = base.lines().position(|l| l.contains("\"origin\"")).unwrap() + 1;
    assert_eq!(line_of(err), Some(want));

    let text = r#"{
  "nodes": ["a", "b", "c"],
  "edges": [
    {"id": "x", "tail": "a", "head": "b", "t0": 1, "rho": 0, "mu": 1, "fbar": 1},
    {"id": "y", "tail": "b", "head": "c", "t0": 1, "rho": 0, "mu": 1, "fbar": 1}
  ],
  "od_pairs": [
    {"origin": "a", "dest": "c", "demand": 1, "paths": [["x", "y"]]},
    {"origin": "a", "dest": "c", "demand": 1, "paths": [["y", "x"]]}
  ]
}"#;
    let err = RoadNetwork::from_json(text).unwrap_err();
    assert!(err.to_string().contains("disconnected"), "{err}");
    assert_eq!(line_of(err), Some(9));

    let bad_edge = text.replace(
        "\"tail\": \"b\", \"head\": \"c\"",
        "\"tail\": \"b\", \"head\": \"q\"",
    );
    assert_eq!(
        line_of(RoadNetwork::from_json(&bad_edge).unwrap_err()),
        Some(5)
    );
    let syntax = text.replace(
        "\"demand\": 1, \"paths\": [[\"y\"",
        "\"demand\": , \"paths\": [[\"y\"",
    );
    assert_eq!(
        line_of(RoadNetwork::from_json(&syntax).unwrap_err()),
        Some(9)
    );
    let wrong_end = text.replace("[[\"y\", \"x\"]]", "[[\"x\"]]");
    assert!(RoadNetwork::from_json(&wrong_end)
        .unwrap_err()
        .to_string()
        .contains("not at destination"));
}

#[test]
fn network_constants() {
    let net = shipped_instance("braess").unwrap();
    assert_eq!(net.max_path_len(), 3);
    assert_eq!(net.num_paths(), 3);
    // sa and bt can carry the full demand: 0.01 (1 + 99) = 1
    assert!((net.edge_cost_ceiling() - 1.2).abs() < 1e-15);
    assert!((net.path_cost_ceiling() - 3.6).abs() < 1e-15);
}

fn random_flow(net: &RoadNetwork, weights: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; net.num_paths()];
    for (w, pair) in net.od_pairs().iter().enumerate() {
        let r = net.path_range(w);
        let s: f64 = r.clone().map(|p| weights[p % weights.len()]).sum();
        for p in r {
            x[p] = pair.demand * weights[p % weights.len()] / s;
        }
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conservation_and_convexity(seed in any::<u64>(), a in prop::collection::vec(0.01f64..1.0, 10), b in prop::collection::vec(0.01f64..1.0, 10)) {
        let net = random_network(&mut seeded(seed));
        let x = random_flow(&net, &a);
        let y = random_flow(&net, &b);
        let f = edge_flows(&net, &x).unwrap();
        let lhs: f64 = f.iter().sum();
        let rhs: f64 = net.paths().zip(&x).map(|(p, xp)| xp * p.len() as f64).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        let mid: Vec<f64> = x.iter().zip(&y).map(|(u, v)| 0.5 * (u + v)).collect();
        let pm = beckmann_potential(&net, &mid).unwrap();
        let pa = beckmann_potential(&net, &x).unwrap();
        let pb = beckmann_potential(&net, &y).unwrap();
        prop_assert!(pm <= 0.5 * (pa + pb) + 1e-10);
    }

    #[test]
    fn bpr_is_nondecreasing(t0 in 0.1f64..5.0, rho in 0.0f64..2.0, mu in 0.2f64..2.0, fbar in 0.1f64..5.0, f in 0.0f64..10.0, df in 0.0f64..1.0) {
        let e = Edge::new("e", "a", "b", t0, rho, mu, fbar);
        let lo = bpr_cost(&e, f).unwrap();
        prop_assert!(lo >= t0);
        prop_assert!(bpr_cost(&e, f + df).unwrap() >= lo);
    }

    #[test]
    fn gibbs_rows_sum_to_demand(seed in any::<u64>(), gamma in 1e-3f64..10.0, bump in 0.0f64..3.0) {
        let net = random_network(&mut seeded(seed));
        let t: Vec<f64> = net.edges().iter().map(|e| if e.rho > 0.0 { e.t0 + bump } else { e.t0 }).collect();
        let x = recover_path_flows(&net, &t, gamma).unwrap();
        prop_assert!(net.check_path_flow(&x).is_ok());
    }
}
