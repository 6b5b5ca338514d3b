use crate::error::Result;
use crate::rng::{seeded, substream};
use crate::traffic::{
    beckmann_equilibrium, beckmann_potential, entropy_potential, primal_dual_gap, random_network,
    run_exp_weights_traffic, run_logit_dynamics, shipped_instance, smoothed_dual_objective,
    solve_dual, solve_dual_with, wardrop_violation, DualMethod, LogitConfig, LogitMode,
    RoadNetwork, SHIPPED_INSTANCES,
};

/// Potential of Pigou's network with share `s` on the constant road:
/// `s + 1/2 ((1 - s) + (1 - s)^2 / 2)`, minimized over a grid of step 1e-6.
fn pigou_grid_optimum() -> f64 {
    (0..=1_000_000)
        .map(|i| {
            let s = i as f64 * 1e-6;
            s + 0.5 * ((1.0 - s) + 0.5 * (1.0 - s) * (1.0 - s))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Beckmann optimum of a network by the path-space reference solver.
pub fn reference_optimum(net: &RoadNetwork) -> Result<f64> {
    Ok(beckmann_equilibrium(net, 1e-10, 200_000)?.potential)
}

/// Equilibria of the bundled networks: symmetric split, Pigou's corner
/// solution and potential, the exp-weights potential bound and the Wardrop
/// condition. Returns `(passed, detail)`.
pub fn traffic_equilibria() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();

    let two = shipped_instance("two-route")?;
    let st = solve_dual(&two, 1e-3, 1e-9, 1_000_000)?;
    let d = two.total_demand();
    let split = (st.x[0] / d - 0.5).abs().max((st.x[1] / d - 0.5).abs());
    ok &= st.converged && split <= 1e-3;
    parts.push(format!("two-route split err {split:.1e}"));

    let pigou = shipped_instance("pigou")?;
    let st = solve_dual(&pigou, 1e-3, 1e-9, 1_000_000)?;
    let corner = st.x[0].abs().max((st.x[1] - 1.0).abs());
    let grid = pigou_grid_optimum();
    let psi = beckmann_potential(&pigou, &st.x)?;
    ok &=
        st.converged && corner <= 1e-2 && (grid - 0.75).abs() <= 1e-3 && (psi - grid).abs() <= 1e-3;
    parts.push(format!(
        "pigou corner err {corner:.1e}, psi {psi:.5} vs grid {grid:.5}"
    ));

    let mut worst_ratio = 0.0_f64;
    for (name, _) in SHIPPED_INSTANCES {
        let net = shipped_instance(name)?;
        let psi_star = reference_optimum(&net)?;
        for steps in [100, 1_000, 10_000] {
            let run = run_exp_weights_traffic(&net, steps, psi_star, 0)?;
            ok &= run.within_bound();
            if run.bound > 0.0 {
                worst_ratio = worst_ratio.max(run.gap / run.bound);
            }
        }
    }
    parts.push(format!("exp-weights gap/bound max {worst_ratio:.3}"));

    let mut worst_wardrop = 0.0_f64;
    for (name, _) in SHIPPED_INSTANCES {
        let net = shipped_instance(name)?;
        let st = solve_dual_with(&net, 1e-4, 1e-8, 200_000, DualMethod::DualGradient)?;
        ok &= st.converged;
        worst_wardrop = worst_wardrop.max(wardrop_violation(&net, &st.x, 1e-3)?);
    }
    ok &= worst_wardrop <= 1e-3;
    parts.push(format!("wardrop excess max {worst_wardrop:.1e}"));
    Ok((ok, parts.join(", ")))
}

pub(super) fn criterion_equilibria() -> Result<(bool, String)> {
    traffic_equilibria()
}

/// Largest relative error of the analytic dual gradient against central
/// differences at `t`.
fn gradient_check(net: &RoadNetwork, t: &[f64], gamma: f64) -> Result<f64> {
    let (_, g) = smoothed_dual_objective(net, t, gamma)?;
    let scale = g.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-12);
    let mut worst = 0.0_f64;
    for (i, e) in net.edges().iter().enumerate() {
        if e.rho == 0.0 {
            continue;
        }
        let h = 1e-6 * t[i].abs().max(1.0);
        let mut up = t.to_vec();
        let mut down = t.to_vec();
        up[i] += h;
        down[i] -= h;
        let fd = (smoothed_dual_objective(net, &up, gamma)?.0
            - smoothed_dual_objective(net, &down, gamma)?.0)
            / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / scale);
    }
    Ok(worst)
}

/// Duality, fixed-point, gradient and mean-field checks on `count` random
/// networks at `gamma`. Returns `(passed, detail)`.
pub fn duality_and_chain(count: usize, gamma: f64, tol: f64, seed: u64) -> Result<(bool, String)> {
    let mut rng = substream(seed, 0);
    let mut ok = true;
    let (mut worst_gap, mut worst_res, mut worst_fd, mut worst_mf) =
        (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..count {
        let net = random_network(&mut rng);
        let st = solve_dual(&net, gamma, tol, 2_000_000)?;
        let psi = entropy_potential(&net, &st.x, gamma)?;
        let gap = primal_dual_gap(&net, &st.x, &st.t, gamma)?;
        ok &= st.converged && st.residual <= 1e-6 && gap <= tol * (1.0 + psi.abs());
        worst_gap = worst_gap.max(gap / (1.0 + psi.abs()));
        worst_res = worst_res.max(st.residual);

        let shifted: Vec<f64> =
            st.t.iter()
                .zip(net.edges())
                .map(|(t, e)| if e.rho > 0.0 { t + 0.05 } else { *t })
                .collect();
        let fd = gradient_check(&net, &shifted, gamma)?;
        ok &= fd <= 1e-5;
        worst_fd = worst_fd.max(fd);

        let cfg = LogitConfig::new(gamma, 1.0, 20.0, 20_000, LogitMode::MeanField);
        let mf = run_logit_dynamics(&net, &cfg, &mut seeded(seed))?;
        let dev = mf
            .last
            .iter()
            .zip(&st.x)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        ok &= dev <= 1e-4;
        worst_mf = worst_mf.max(dev);
    }
    Ok((
        ok,
        format!(
            "{count} networks: gap/(1+|psi|) max {worst_gap:.1e}, residual max {worst_res:.1e}, \
             gradient rel err max {worst_fd:.1e}, mean-field dev max {worst_mf:.1e}"
        ),
    ))
}

pub(super) fn criterion_duality() -> Result<(bool, String)> {
    duality_and_chain(10, 0.1, 1e-7, 1000)
}
