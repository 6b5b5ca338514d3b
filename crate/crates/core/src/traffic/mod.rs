//! Equilibrium traffic assignment on networks with BPR costs.
//!
//! Users of each origin-destination pair split their demand over an explicit
//! path set. The Wardrop equilibrium minimizes the Beckmann potential `Psi`;
//! the stochastic (logit) equilibrium minimizes `Psi` plus `gamma` times the
//! path-flow entropy and is computed through its dual in edge times.

pub mod dual;
pub mod dynamics;
pub mod network;

pub use dual::{
    beckmann_equilibrium, chain_residual, conjugate_sigma, conjugate_sigma_derivative,
    equilibrium_gap, fixed_point_residual, logit_choice, primal_dual_gap, recover_path_flows,
    smoothed_dual_objective, solve_dual, solve_dual_with, wardrop_violation, BeckmannSolution,
    DualMethod, DualState,
};
pub use dynamics::{
    exp_weights_gap_bound, gumbel_quantile, gumbel_sample, run_exp_weights_traffic,
    run_logit_dynamics, LogitConfig, LogitMode, LogitTrajectory, TrafficExpWeights, EULER_GAMMA,
};
pub use network::{
    beckmann_potential, bpr_cost, edge_flows, entropy_convention_shift, entropy_potential,
    path_costs, Edge, OdPair, PathFlow, RoadNetwork,
};

use crate::error::{Error, Result};

/// Networks bundled with the library, by name.
pub const SHIPPED_INSTANCES: [(&str, &str); 4] = [
    ("pigou", include_str!("../../instances/pigou.json")),
    ("braess", include_str!("../../instances/braess.json")),
    ("two-route", include_str!("../../instances/two-route.json")),
    ("grid3x3", include_str!("../../instances/grid3x3.json")),
];

/// A bundled network; the name may carry a `.json` suffix.
pub fn shipped_instance(name: &str) -> Result<RoadNetwork> {
    let key = name.strip_suffix(".json").unwrap_or(name);
    SHIPPED_INSTANCES
        .iter()
        .find(|(n, _)| *n == key)
        .ok_or_else(|| {
            let names: Vec<&str> = SHIPPED_INSTANCES.iter().map(|(n, _)| *n).collect();
            Error::Config(format!(
                "unknown instance {name}; bundled: {}",
                names.join(", ")
            ))
        })
        .and_then(|(_, text)| RoadNetwork::from_json(text))
}

/// A random small network: a layered DAG on 4 to 6 nodes with one or two
/// pairs, at most 10 paths per pair, and BPR exponents `1/mu` for `mu` in
/// `{1, 1/2, 1/4}`.
pub fn random_network(rng: &mut crate::rng::SimRng) -> RoadNetwork {
    use rand::Rng;
    let v = rng.gen_range(4..=6);
    let nodes: Vec<String> = (0..v).map(|i| format!("v{i}")).collect();
    let mut edges = Vec::new();
    let mut out: Vec<Vec<(usize, String)>> = vec![Vec::new(); v];
    for i in 0..v {
        for j in i + 1..v {
            if j == i + 1 || rng.gen_bool(0.5) {
                let id = format!("e{i}-{j}");
                let mu = [1.0, 0.5, 0.25][rng.gen_range(0..3)];
                edges.push(Edge::new(
                    &id,
                    &nodes[i],
                    &nodes[j],
                    rng.gen_range(0.5..2.0),
                    rng.gen_range(0.1..1.0),
                    mu,
                    rng.gen_range(0.5..2.0),
                ));
                out[i].push((j, id));
            }
        }
    }
    fn enumerate(
        out: &[Vec<(usize, String)>],
        at: usize,
        dest: usize,
        acc: &mut Vec<String>,
        all: &mut Vec<Vec<String>>,
    ) {
        if at == dest {
            all.push(acc.clone());
            return;
        }
        for (j, id) in &out[at] {
            if *j <= dest {
                acc.push(id.clone());
                enumerate(out, *j, dest, acc, all);
                acc.pop();
            }
        }
    }
    let mut pairs = vec![(0, v - 1)];
    if rng.gen_bool(0.5) {
        pairs.push((1, v - 1));
    }
    let od = pairs
        .into_iter()
        .map(|(o, d)| {
            let mut all = Vec::new();
            enumerate(&out, o, d, &mut Vec::new(), &mut all);
            while all.len() > 10 {
                let k = rng.gen_range(0..all.len());
                all.swap_remove(k);
            }
            (
                nodes[o].clone(),
                nodes[d].clone(),
                rng.gen_range(0.5..2.0),
                all,
            )
        })
        .collect();
    RoadNetwork::new(nodes, edges, od).expect("generated network is valid")
}
