//! The entropy-regularized equilibrium and its dual in edge times.
//!
//! The primal is `min_{x in X} Psi(x) + gamma sum x_p ln(x_p/d_w)`. Its dual
//! is `min_{t >= t0} phi(t) = gamma psi(t/gamma) + sum_e sigma_e*(t_e)` with
//! `psi(t) = sum_w d_w ln sum_{p in P_w} exp(-sum_e delta_ep t_e)`, and the
//! optimal primal is the Gibbs flow `x_p = d_w softmin_p(T_p / gamma)`.
//! Weak duality reads `Psi_gamma(x) + phi(t) >= 0`.

use serde::{Deserialize, Serialize};

use super::network::{beckmann_potential, entropy_potential, Edge, PathFlow, RoadNetwork};
use crate::error::{check_positive, Error, Result};
use crate::prox::project_simplex;

/// Relative slack allowed when checking `t = t0` on edges with `rho = 0`.
const FLAT_EDGE_TOL: f64 = 1e-12;

/// Softmin distribution `exp(-c_p/gamma) / sum_q exp(-c_q/gamma)`.
pub fn logit_choice(costs: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_positive(gamma, "gamma")?;
    crate::error::check_finite(costs, "costs")?;
    if costs.is_empty() {
        return Err(Error::Input("logit choice over an empty path set".into()));
    }
    Ok(softmin(costs, gamma))
}

pub(crate) fn softmin(costs: &[f64], gamma: f64) -> Vec<f64> {
    let m = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = costs.iter().map(|c| (-(c - m) / gamma).exp()).collect();
    let s: f64 = w.iter().sum();
    for v in &mut w {
        *v /= s;
    }
    w
}

/// `-gamma ln sum_p exp(-c_p / gamma)`, stabilized.
fn soft_minimum(costs: &[f64], gamma: f64) -> f64 {
    let m = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    let s: f64 = costs.iter().map(|c| (-(c - m) / gamma).exp()).sum();
    m - gamma * s.ln()
}

fn check_time(edge: &Edge, t: f64) -> Result<()> {
    if !t.is_finite() || t < edge.t0 {
        return Err(Error::Domain(format!(
            "edge {}: time {t} is below the free-flow time {}",
            edge.id, edge.t0
        )));
    }
    if edge.rho == 0.0 && t - edge.t0 > FLAT_EDGE_TOL * edge.t0 {
        return Err(Error::Domain(format!(
            "edge {}: constant-cost edge admits only t = {}, got {t}",
            edge.id, edge.t0
        )));
    }
    Ok(())
}

/// `sigma*(t) = fbar ((t - t0)/(t0 rho))^mu (t - t0)/(1 + mu)` on `t >= t0`.
/// Constant-cost edges have `sigma* = 0` at `t = t0` and no other admissible
/// time.
pub fn conjugate_sigma(edge: &Edge, t: f64) -> Result<f64> {
    check_time(edge, t)?;
    if edge.rho == 0.0 {
        return Ok(0.0);
    }
    Ok(edge.inverse_cost(t) * (t - edge.t0) / (1.0 + edge.mu))
}

/// `d sigma*/dt = fbar ((t - t0)/(t0 rho))^mu`, the flow whose cost is `t`.
pub fn conjugate_sigma_derivative(edge: &Edge, t: f64) -> Result<f64> {
    check_time(edge, t)?;
    if edge.rho == 0.0 {
        return Ok(0.0);
    }
    Ok(edge.inverse_cost(t))
}

fn check_times(net: &RoadNetwork, t: &[f64]) -> Result<()> {
    if t.len() != net.edges().len() {
        return Err(Error::Input(format!(
            "edge-time vector has length {}, the network has {} edges",
            t.len(),
            net.edges().len()
        )));
    }
    for (e, &te) in net.edges().iter().zip(t) {
        check_time(e, te)?;
    }
    Ok(())
}

pub(crate) fn gibbs_flows(net: &RoadNetwork, t: &[f64], gamma: f64) -> PathFlow {
    let times = net.path_times(t);
    let mut x = vec![0.0; times.len()];
    for (w, pair) in net.od_pairs().iter().enumerate() {
        let r = net.path_range(w);
        for (xp, s) in x[r.clone()].iter_mut().zip(softmin(&times[r], gamma)) {
            *xp = pair.demand * s;
        }
    }
    x
}

/// Gibbs recovery `x_p = d_w softmin_p(T_p(t) / gamma)`.
pub fn recover_path_flows(net: &RoadNetwork, t: &[f64], gamma: f64) -> Result<PathFlow> {
    check_positive(gamma, "gamma")?;
    check_times(net, t)?;
    Ok(gibbs_flows(net, t, gamma))
}

fn dual_value_unchecked(net: &RoadNetwork, t: &[f64], gamma: f64) -> f64 {
    let times = net.path_times(t);
    let smooth: f64 = net
        .od_pairs()
        .iter()
        .enumerate()
        .map(|(w, pair)| -pair.demand * soft_minimum(&times[net.path_range(w)], gamma))
        .sum();
    let conj: f64 = net
        .edges()
        .iter()
        .zip(t)
        .map(|(e, &te)| {
            if e.rho == 0.0 {
                0.0
            } else {
                e.inverse_cost(te) * (te - e.t0) / (1.0 + e.mu)
            }
        })
        .sum();
    smooth + conj
}

/// Gradient of `phi`: `-f_e(x(t)) + d sigma_e*/dt`, with the
/// component of a constant-cost edge set to zero since its time is fixed.
fn dual_gradient_unchecked(net: &RoadNetwork, t: &[f64], gamma: f64) -> (Vec<f64>, PathFlow) {
    let x = gibbs_flows(net, t, gamma);
    let f = net.flows_unchecked(&x);
    let g = net
        .edges()
        .iter()
        .zip(t.iter().zip(&f))
        .map(|(e, (&te, &fe))| {
            if e.rho == 0.0 {
                0.0
            } else {
                e.inverse_cost(te) - fe
            }
        })
        .collect();
    (g, x)
}

/// Value and gradient of `phi(t) = gamma psi(t/gamma) + sum_e sigma_e*(t_e)`.
pub fn smoothed_dual_objective(
    net: &RoadNetwork,
    t: &[f64],
    gamma: f64,
) -> Result<(f64, Vec<f64>)> {
    check_positive(gamma, "gamma")?;
    check_times(net, t)?;
    let (g, _) = dual_gradient_unchecked(net, t, gamma);
    Ok((dual_value_unchecked(net, t, gamma), g))
}

/// `||f_in - f_out||_inf` over edges with `rho > 0`, where `f_in` has cost
/// `t` and `f_out = Theta x(t)`.
pub fn fixed_point_residual(net: &RoadNetwork, t: &[f64], gamma: f64) -> Result<f64> {
    check_positive(gamma, "gamma")?;
    check_times(net, t)?;
    Ok(residual_unchecked(net, t, gamma))
}

fn residual_unchecked(net: &RoadNetwork, t: &[f64], gamma: f64) -> f64 {
    let (g, _) = dual_gradient_unchecked(net, t, gamma);
    crate::stats::norm_inf(&g)
}

/// `Psi_gamma(x) + phi(t)`; nonnegative, zero exactly at the solution pair.
pub fn primal_dual_gap(net: &RoadNetwork, x: &[f64], t: &[f64], gamma: f64) -> Result<f64> {
    let (phi, _) = smoothed_dual_objective(net, t, gamma)?;
    Ok(entropy_potential(net, x, gamma)? + phi)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualMethod {
    /// Successive averages on edge flows, `f <- f + (Theta x(tau(f)) - f)/(m+1)`.
    #[default]
    FixedPoint,
    /// Line-search descent on `phi` over `t >= t0` along the direction
    /// `tau(Theta x(t)) - t`.
    DualGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub gamma: f64,
    pub method: DualMethod,
    pub t: Vec<f64>,
    pub x: PathFlow,
    pub f: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves the smoothed equilibrium with the default fixed-point method.
pub fn solve_dual(net: &RoadNetwork, gamma: f64, tol: f64, max_iters: usize) -> Result<DualState> {
    solve_dual_with(net, gamma, tol, max_iters, DualMethod::FixedPoint)
}

pub fn solve_dual_with(
    net: &RoadNetwork,
    gamma: f64,
    tol: f64,
    max_iters: usize,
    method: DualMethod,
) -> Result<DualState> {
    check_positive(gamma, "gamma")?;
    check_positive(tol, "tol")?;
    let free: Vec<f64> = net.edges().iter().map(|e| e.t0).collect();
    let f0 = net.flows_unchecked(&gibbs_flows(net, &free, gamma));
    let (f, iterations, residual) = match method {
        DualMethod::FixedPoint => successive_averages(net, f0, gamma, tol, max_iters),
        DualMethod::DualGradient => {
            let t0 = net.edge_costs_unchecked(&f0);
            descent(net, t0, gamma, tol, max_iters)
        }
    };
    let t = net.edge_costs_unchecked(&f);
    let x = gibbs_flows(net, &t, gamma);
    Ok(DualState {
        gamma,
        method,
        t,
        x,
        f,
        residual,
        iterations,
        converged: residual <= tol,
    })
}

/// `Theta x(tau(f))` and its distance to `f` over edges with `rho > 0`.
fn chain_step(net: &RoadNetwork, f: &[f64], gamma: f64) -> (Vec<f64>, f64) {
    let t = net.edge_costs_unchecked(f);
    let y = net.flows_unchecked(&gibbs_flows(net, &t, gamma));
    let r = net
        .edges()
        .iter()
        .zip(f.iter().zip(&y))
        .filter(|(e, _)| e.rho > 0.0)
        .fold(0.0_f64, |acc, (_, (a, b))| acc.max((a - b).abs()));
    (y, r)
}

/// The chain residual `||Theta x(tau(f)) - f||_inf` of edge flows `f`.
pub fn chain_residual(net: &RoadNetwork, f: &[f64], gamma: f64) -> Result<f64> {
    check_positive(gamma, "gamma")?;
    if f.len() != net.edges().len() || f.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Input(format!(
            "edge flows must be {} finite nonnegative numbers",
            net.edges().len()
        )));
    }
    Ok(chain_step(net, f, gamma).1)
}

fn successive_averages(
    net: &RoadNetwork,
    mut f: Vec<f64>,
    gamma: f64,
    tol: f64,
    max_iters: usize,
) -> (Vec<f64>, usize, f64) {
    let (mut y, mut residual) = chain_step(net, &f, gamma);
    let mut m = 0;
    while residual > tol && m < max_iters {
        let beta = 1.0 / (m + 1) as f64;
        for (fe, ye) in f.iter_mut().zip(&y) {
            *fe += beta * (ye - *fe);
        }
        (y, residual) = chain_step(net, &f, gamma);
        m += 1;
    }
    (f, m, residual)
}

/// Descent on `phi` along `tau(Theta x(t)) - t`, which opposes the gradient
/// componentwise and stays in the domain for steps up to 1. The step comes
/// from bisection on the directional derivative, which unlike `phi` itself
/// is free of cancellation near the optimum.
fn descent(
    net: &RoadNetwork,
    mut t: Vec<f64>,
    gamma: f64,
    tol: f64,
    max_iters: usize,
) -> (Vec<f64>, usize, f64) {
    let mut it = 0;
    loop {
        let (g, x) = dual_gradient_unchecked(net, &t, gamma);
        let f = net.flows_unchecked(&x);
        let (_, residual) = chain_step(net, &f, gamma);
        if residual <= tol || it >= max_iters {
            return (f, it, residual);
        }
        let target = net.edge_costs_unchecked(&f);
        let d: Vec<f64> = target.iter().zip(&t).map(|(a, b)| a - b).collect();
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let along = |s: f64| -> (Vec<f64>, f64) {
            let c: Vec<f64> = t.iter().zip(&d).map(|(a, b)| a + s * b).collect();
            let (cg, _) = dual_gradient_unchecked(net, &c, gamma);
            let dd = cg.iter().zip(&d).map(|(a, b)| a * b).sum();
            (c, dd)
        };
        let (full, end) = along(1.0);
        t = if end <= 0.0 {
            full
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            let mut best = t.clone();
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let (c, dd) = along(mid);
                if dd > 0.0 {
                    hi = mid;
                } else {
                    best = c;
                    if dd >= 0.5 * slope {
                        break;
                    }
                    lo = mid;
                }
            }
            best
        };
        it += 1;
    }
}

/// The largest excess `G_p - min_q G_q` over used paths `p` (flow at least
/// `used_fraction d_w`) within each pair.
pub fn wardrop_violation(net: &RoadNetwork, x: &[f64], used_fraction: f64) -> Result<f64> {
    let g = super::network::path_costs(net, x)?;
    let mut worst: f64 = 0.0;
    for (w, pair) in net.od_pairs().iter().enumerate() {
        let r = net.path_range(w);
        let best = g[r.clone()].iter().cloned().fold(f64::INFINITY, f64::min);
        for p in r {
            if x[p] >= used_fraction * pair.demand {
                worst = worst.max(g[p] - best);
            }
        }
    }
    Ok(worst)
}

/// `sum_p x_p G_p(x) - sum_w d_w min_{q in P_w} G_q(x)`, an upper bound on
/// `Psi(x) - Psi_*` by convexity.
pub fn equilibrium_gap(net: &RoadNetwork, x: &[f64]) -> Result<f64> {
    let g = super::network::path_costs(net, x)?;
    let mut gap = 0.0;
    for (w, pair) in net.od_pairs().iter().enumerate() {
        let r = net.path_range(w);
        let best = g[r.clone()].iter().cloned().fold(f64::INFINITY, f64::min);
        gap += r.map(|p| x[p] * g[p]).sum::<f64>() - pair.demand * best;
    }
    Ok(gap.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeckmannSolution {
    pub x: PathFlow,
    pub potential: f64,
    /// Certified bound on `Psi(x) - Psi_*`.
    pub gap: f64,
    pub iterations: usize,
}

fn project_path_flow(net: &RoadNetwork, y: &[f64]) -> PathFlow {
    let mut out = vec![0.0; y.len()];
    for (w, pair) in net.od_pairs().iter().enumerate() {
        let r = net.path_range(w);
        let scaled: Vec<f64> = y[r.clone()].iter().map(|v| v / pair.demand).collect();
        for (o, v) in out[r].iter_mut().zip(project_simplex(&scaled)) {
            *o = pair.demand * v;
        }
    }
    out
}

/// Minimizes the Beckmann potential over `X` by projected gradient in path
/// space, stopping once [`equilibrium_gap`] is at most `tol`.
pub fn beckmann_equilibrium(
    net: &RoadNetwork,
    tol: f64,
    max_iters: usize,
) -> Result<BeckmannSolution> {
    check_positive(tol, "tol")?;
    let mut x = net.uniform_flow();
    let mut value = net.potential_unchecked(&x);
    let mut g = net.path_costs_unchecked(&x);
    let mut step = 1.0 / net.path_cost_ceiling().max(1e-12);
    let mut it = 0;
    let mut gap = equilibrium_gap(net, &x)?;
    while gap > tol && it < max_iters {
        let mut s = step;
        let (cand, cand_value) = loop {
            let y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - s * b).collect();
            let c = project_path_flow(net, &y);
            let v = net.potential_unchecked(&c);
            let decrease: f64 = g
                .iter()
                .zip(c.iter().zip(&x))
                .map(|(gi, (ci, xi))| gi * (ci - xi))
                .sum();
            if v <= value + 1e-4 * decrease || s < 1e-300 {
                break (c, v);
            }
            s *= 0.5;
        };
        let cg = net.path_costs_unchecked(&cand);
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..x.len() {
            let si = cand[i] - x[i];
            ss += si * si;
            sy += si * (cg[i] - g[i]);
        }
        step = if sy > 0.0 { ss / sy } else { s * 2.0 };
        if ss == 0.0 {
            break;
        }
        x = cand;
        value = cand_value;
        g = cg;
        gap = equilibrium_gap(net, &x)?;
        it += 1;
    }
    Ok(BeckmannSolution {
        potential: beckmann_potential(net, &x)?,
        x,
        gap,
        iterations: it,
    })
}
