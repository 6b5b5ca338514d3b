use std::path::Path;

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use stochopt::rng::seeded;
use stochopt::traffic::{
    beckmann_equilibrium, beckmann_potential, chain_residual, entropy_potential, primal_dual_gap,
    run_exp_weights_traffic, run_logit_dynamics, shipped_instance, solve_dual_with,
    wardrop_violation, DualMethod, DualState, LogitConfig, LogitMode, RoadNetwork,
};

use crate::config::{check, merge_fields, required, ConfigFile};
use crate::output::{num, Output};
use crate::{CmdResult, Failure};

#[derive(Debug, Subcommand)]
pub enum TrafficCommand {
    /// Exp-weights route choice; potential gap of the averaged flow.
    Equilibrium(EquilibriumArgs),
    /// Logit revision dynamics.
    Logit(LogitArgs),
    /// Solves the smoothed equilibrium through its dual.
    Dual(DualArgs),
    /// Fixed-point residual, duality gap and Wardrop condition.
    Check(CheckArgs),
}

/// A network file, or the name of a bundled instance (pigou, braess,
/// two-route, grid3x3).
fn load_network(source: &str) -> Result<(String, RoadNetwork), Failure> {
    let path = Path::new(source);
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(source)
        .to_string();
    if path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::InvalidConfig(format!("network: cannot read {source}: {e}")))?;
        let net = RoadNetwork::from_json(&text)
            .map_err(|e| Failure::InvalidConfig(format!("network: {e}")))?;
        Ok((name, net))
    } else {
        let net = shipped_instance(source)
            .map_err(|e| Failure::InvalidConfig(format!("network: {e}")))?;
        Ok((name, net))
    }
}

fn positive(v: f64, field: &str) -> Result<(), Failure> {
    check(v > 0.0 && v.is_finite(), field, "must be positive")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FixedPoint,
    DualGradient,
}

impl Method {
    fn dual(self) -> DualMethod {
        match self {
            Method::FixedPoint => DualMethod::FixedPoint,
            Method::DualGradient => DualMethod::DualGradient,
        }
    }
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EquilibriumArgs {
    #[arg(long)]
    pub network: Option<String>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub trace_stride: Option<usize>,
    /// Exit with status 1 when the final gap exceeds the bound.
    #[arg(long)]
    #[serde(default)]
    pub check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dynamics {
    MeanField,
    Agents,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct LogitArgs {
    #[arg(long)]
    pub network: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Revision intensity.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Ticks per unit of time.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub scale: Option<f64>,
    /// Number of ticks.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<Dynamics>,
    #[arg(long)]
    pub agents_per_unit: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trace_stride: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct DualArgs {
    #[arg(long)]
    pub network: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct CheckArgs {
    #[arg(long)]
    pub network: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Solver for the residual and gap checks (default: dual-gradient).
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Smoothing level of the Wardrop check.
    #[arg(long)]
    pub wardrop_gamma: Option<f64>,
    /// Largest admissible cost excess on used paths, relative to demand.
    #[arg(long)]
    pub wardrop_tol: Option<f64>,
}

pub fn run(command: TrafficCommand, file: &mut ConfigFile, out: &Output) -> CmdResult {
    match command {
        TrafficCommand::Equilibrium(mut a) => {
            if let Some(mut f) = file.traffic_equilibrium.take() {
                merge_fields!(a, f; network, steps, trace_stride; check);
            }
            equilibrium(a, out)
        }
        TrafficCommand::Logit(mut a) => {
            if let Some(mut f) = file.traffic_logit.take() {
                merge_fields!(a, f; network, gamma, lambda, scale, horizon, mode, agents_per_unit, seed,
                    trace_stride, burn_in;);
            }
            logit(a, out)
        }
        TrafficCommand::Dual(mut a) => {
            if let Some(mut f) = file.traffic_dual.take() {
                merge_fields!(a, f; network, gamma, tol, max_iters, method;);
            }
            dual(a, out)
        }
        TrafficCommand::Check(mut a) => {
            if let Some(mut f) = file.traffic_check.take() {
                merge_fields!(a, f; network, gamma, tol, max_iters, method, wardrop_gamma, wardrop_tol;);
            }
            check_network(a, out)
        }
    }
}

#[derive(Debug, Serialize)]
struct EquilibriumSummary {
    experiment: &'static str,
    network: String,
    #[serde(rename = "N")]
    steps: usize,
    optimum: f64,
    potential: f64,
    gap: f64,
    bound: f64,
    bound_formula: &'static str,
    averaged_flow: Vec<f64>,
    within_bound: bool,
}

fn equilibrium(args: EquilibriumArgs, out: &Output) -> CmdResult {
    let (name, net) = load_network(&required(args.network, "network")?)?;
    let steps = args.steps.unwrap_or(10_000);
    check(steps >= 1, "N", "must be at least 1")?;
    let stride = args.trace_stride.unwrap_or((steps / 100).max(1));
    check(stride >= 1, "trace-stride", "must be at least 1")?;
    let optimum = beckmann_equilibrium(&net, 1e-10, 200_000)?.potential;
    let run = run_exp_weights_traffic(&net, steps, optimum, stride)?;
    let formula = "(M / sqrt N) max_w ln n_w / sqrt(2 min_w ln n_w) (sum_w d_w^2 + 1), M = max edge cost x max path length";
    let experiment = "traffic-equilibrium";
    let mut table = out.csv(
        &format!("{experiment}-{name}.csv"),
        &[format!("bound: {formula}; N = {steps}")],
        &["experiment", "seed", "step", "potential", "gap", "bound"],
    )?;
    for s in &run.trace {
        table.row([
            experiment.to_string(),
            "0".to_string(),
            s.step.to_string(),
            num(s.potential),
            num(s.gap),
            num(run.bound),
        ])?;
    }
    println!("{}", table.finish()?.display());
    let summary = EquilibriumSummary {
        experiment,
        network: name.clone(),
        steps,
        optimum,
        potential: run.potential,
        gap: run.gap,
        bound: run.bound,
        bound_formula: formula,
        within_bound: run.within_bound(),
        averaged_flow: run.averaged,
    };
    println!(
        "{}",
        out.json(&format!("{experiment}-{name}-summary.json"), &summary)?
            .display()
    );
    println!("gap {:.6e}, bound {:.6e}", summary.gap, summary.bound);
    if args.check && !summary.within_bound {
        return Err(Failure::CheckFailed(format!(
            "gap {} exceeds bound {}",
            summary.gap, summary.bound
        )));
    }
    Ok(())
}

fn logit(args: LogitArgs, out: &Output) -> CmdResult {
    let (name, net) = load_network(&required(args.network, "network")?)?;
    let gamma = args.gamma.unwrap_or(0.1);
    positive(gamma, "gamma")?;
    let lambda = args.lambda.unwrap_or(1.0);
    positive(lambda, "lambda")?;
    let scale = args.scale.unwrap_or(20.0);
    positive(scale, "N")?;
    check(lambda <= scale, "lambda", "lambda / N must be at most 1")?;
    let horizon = args.horizon.unwrap_or(20_000);
    check(horizon >= 1, "horizon", "must be at least 1")?;
    let burn_in = args.burn_in.unwrap_or(0);
    check(burn_in < horizon, "burn-in", "must be below the horizon")?;
    let stride = args.trace_stride.unwrap_or((horizon / 100).max(1));
    check(stride >= 1, "trace-stride", "must be at least 1")?;
    let mode = match args.mode.unwrap_or(Dynamics::MeanField) {
        Dynamics::MeanField => {
            check(
                args.agents_per_unit.is_none(),
                "agents-per-unit",
                "only applies to --mode agents",
            )?;
            LogitMode::MeanField
        }
        Dynamics::Agents => {
            let agents_per_unit = args.agents_per_unit.unwrap_or(100);
            check(
                agents_per_unit >= 1,
                "agents-per-unit",
                "must be at least 1",
            )?;
            LogitMode::Agents { agents_per_unit }
        }
    };
    let seed = args.seed.unwrap_or(0);
    let cfg = LogitConfig::new(gamma, lambda, scale, horizon, mode)
        .with_trace(stride)
        .with_burn_in(burn_in);
    let traj = run_logit_dynamics(&net, &cfg, &mut seeded(seed))?;

    let experiment = "traffic-logit";
    let mut header = vec![
        "experiment".to_string(),
        "seed".into(),
        "step".into(),
        "potential".into(),
        "smoothed_potential".into(),
    ];
    header.extend((0..net.num_paths()).map(|p| format!("x{p}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = out.csv(
        &format!("{experiment}-{name}-seed{seed}.csv"),
        &[format!(
            "gamma = {gamma}, lambda = {lambda}, N = {scale}; no bound column"
        )],
        &header,
    )?;
    for s in &traj.samples {
        let mut row = vec![
            experiment.to_string(),
            seed.to_string(),
            s.step.to_string(),
            num(beckmann_potential(&net, &s.x)?),
            num(entropy_potential(&net, &s.x, gamma)?),
        ];
        row.extend(s.x.iter().map(|v| num(*v)));
        table.row(row)?;
    }
    println!("{}", table.finish()?.display());
    #[derive(Serialize)]
    struct Summary<'a> {
        experiment: &'static str,
        network: &'a str,
        config: &'a LogitConfig,
        seed: u64,
        last: &'a [f64],
        time_average: &'a [f64],
        batch_std_error: &'a [f64],
    }
    let summary = Summary {
        experiment,
        network: &name,
        config: &cfg,
        seed,
        last: &traj.last,
        time_average: &traj.time_average,
        batch_std_error: &traj.batch_std_error,
    };
    println!(
        "{}",
        out.json(
            &format!("{experiment}-{name}-seed{seed}-summary.json"),
            &summary
        )?
        .display()
    );
    Ok(())
}

fn dual_settings(
    gamma: Option<f64>,
    tol: Option<f64>,
    max_iters: Option<usize>,
) -> Result<(f64, f64, usize), Failure> {
    let gamma = gamma.unwrap_or(0.1);
    positive(gamma, "gamma")?;
    let tol = tol.unwrap_or(1e-9);
    positive(tol, "tol")?;
    let max_iters = max_iters.unwrap_or(1_000_000);
    check(max_iters >= 1, "max-iters", "must be at least 1")?;
    Ok((gamma, tol, max_iters))
}

fn dual(args: DualArgs, out: &Output) -> CmdResult {
    let (name, net) = load_network(&required(args.network, "network")?)?;
    let (gamma, tol, max_iters) = dual_settings(args.gamma, args.tol, args.max_iters)?;
    let method = args.method.unwrap_or(Method::FixedPoint).dual();
    let state: DualState = solve_dual_with(&net, gamma, tol, max_iters, method)?;
    let path = out.json(&format!("traffic-dual-{name}.json"), &state)?;
    println!("{}", path.display());
    println!(
        "residual {:.3e} after {} iterations",
        state.residual, state.iterations
    );
    if !state.converged {
        return Err(Failure::Aborted(format!(
            "no convergence: residual {} above tol {tol} after {max_iters} iterations",
            state.residual
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CheckReport {
    network: String,
    method: DualMethod,
    gamma: f64,
    tol: f64,
    residual: f64,
    residual_ok: bool,
    duality_gap: f64,
    duality_gap_ok: bool,
    wardrop_gamma: f64,
    wardrop_excess: f64,
    wardrop_threshold: f64,
    wardrop_ok: bool,
}

fn check_network(args: CheckArgs, out: &Output) -> CmdResult {
    let (name, net) = load_network(&required(args.network, "network")?)?;
    let (gamma, tol, max_iters) = dual_settings(args.gamma, args.tol, args.max_iters)?;
    let wg = args.wardrop_gamma.unwrap_or(1e-4);
    positive(wg, "wardrop-gamma")?;
    let wt = args.wardrop_tol.unwrap_or(1e-3);
    positive(wt, "wardrop-tol")?;

    let method = args.method.unwrap_or(Method::DualGradient).dual();
    let st = solve_dual_with(&net, gamma, tol, max_iters, method)?;
    let residual = chain_residual(&net, &st.f, gamma)?;
    let psi = entropy_potential(&net, &st.x, gamma)?;
    let gap = primal_dual_gap(&net, &st.x, &st.t, gamma)?;
    let small = solve_dual_with(&net, wg, 1e-8, 200_000, DualMethod::DualGradient)?;
    let excess = wardrop_violation(&net, &small.x, 1e-3)?;
    let max_demand = net.od_pairs().iter().map(|w| w.demand).fold(0.0, f64::max);
    let threshold = wt * max_demand.max(1.0);
    let report = CheckReport {
        network: name.clone(),
        method,
        gamma,
        tol,
        residual,
        residual_ok: residual <= tol,
        duality_gap: gap,
        duality_gap_ok: gap <= tol * (1.0 + psi.abs()),
        wardrop_gamma: wg,
        wardrop_excess: excess,
        wardrop_threshold: threshold,
        wardrop_ok: excess <= threshold,
    };
    println!(
        "{}",
        out.json(&format!("traffic-check-{name}.json"), &report)?
            .display()
    );
    let verdict = |ok: bool| if ok { "ok" } else { "FAILED" };
    println!("residual {residual:.3e} ({})", verdict(report.residual_ok));
    println!("duality gap {gap:.3e} ({})", verdict(report.duality_gap_ok));
    println!(
        "wardrop excess {excess:.3e} ({})",
        verdict(report.wardrop_ok)
    );
    let failed: Vec<&str> = [
        (report.residual_ok, "residual"),
        (report.duality_gap_ok, "duality gap"),
        (report.wardrop_ok, "wardrop"),
    ]
    .iter()
    .filter(|(ok, _)| !ok)
    .map(|(_, n)| *n)
    .collect();
    if !failed.is_empty() {
        return Err(Failure::CheckFailed(format!(
            "{name}: {}",
            failed.join(", ")
        )));
    }
    Ok(())
}
