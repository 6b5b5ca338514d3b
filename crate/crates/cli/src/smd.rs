use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use stochopt::experiments::{quadratic_oracle, simplex_oracle};
use stochopt::prox::ProxGeometry;
use stochopt::smd::{
    convex_gap_bound, run_parallel_aggregate, run_smd, run_smd_strongly_convex,
    strongly_convex_gap_bound, trajectories_for_confidence, NoiseModel, NoiseSource, SolverConfig,
    StepRule, StochasticOracle,
};
use stochopt::stats::median;

use crate::config::{check, merge_fields, seed_list};
use crate::output::{num, Output};
use crate::{CmdResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmdProblem {
    /// `<c, x>` on the simplex, entropic setup.
    SimplexLinear,
    /// `1/2 ||x - c||^2` on `R^n`, Euclidean setup.
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Bounded,
    Subgaussian,
    HeavyTail,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SmdArgs {
    #[arg(long, value_enum)]
    pub problem: Option<SmdProblem>,
    /// Dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Iteration budget per trajectory.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub iterations: Option<usize>,
    /// Number of seeds, counted up from --seed.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Explicit seeds, comma separated; overrides --seeds.
    #[arg(long, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
    #[arg(long, value_enum)]
    pub noise: Option<NoiseKind>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
    /// Tail index of heavy-tailed noise.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Aggregate K independent trajectories for confidence 1 - sigma.
    #[arg(long)]
    #[serde(default)]
    pub parallel: bool,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Use the 1/(mu k) schedule (quadratic problem only).
    #[arg(long)]
    #[serde(default)]
    pub strongly_convex: bool,
    /// Gradient bias level (quadratic problem only).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub trace_stride: Option<usize>,
    /// Exit with status 1 when the median gap exceeds the bound.
    #[arg(long)]
    #[serde(default)]
    pub check: bool,
}

impl SmdArgs {
    pub fn merged(mut self, file: Option<SmdArgs>) -> Result<Self, Failure> {
        if let Some(mut f) = file {
            merge_fields!(self, f; problem, n, iterations, seeds, seed, seed_list, noise, noise_scale, alpha,
                sigma, delta, trace_stride; parallel, strongly_convex, check);
        }
        Ok(self)
    }
}

#[derive(Debug, Serialize)]
struct SeedResult {
    seed: u64,
    final_gap: f64,
    oracle_calls: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    trajectory_gaps: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Summary {
    experiment: String,
    problem: SmdProblem,
    n: usize,
    #[serde(rename = "N")]
    iterations: usize,
    step_rule: StepRule,
    noise: NoiseKind,
    noise_scale: f64,
    moment_bound: f64,
    radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectories: Option<usize>,
    delta: f64,
    bound: f64,
    bound_formula: String,
    runs: Vec<SeedResult>,
    median_gap: f64,
    within_bound: bool,
}

pub fn run(args: SmdArgs, out: &Output) -> CmdResult {
    let problem = args.problem.unwrap_or(SmdProblem::SimplexLinear);
    let n = args.n.unwrap_or(10);
    let iters = args.iterations.unwrap_or(1000);
    check(iters >= 1, "N", "must be at least 1")?;
    check(n >= 1, "n", "must be at least 1")?;
    let seeds = seed_list(args.seeds, args.seed, args.seed_list)?;
    let noise_kind = args.noise.unwrap_or(NoiseKind::Bounded);
    let scale = args.noise_scale.unwrap_or(0.5);
    check(
        scale >= 0.0 && scale.is_finite(),
        "noise-scale",
        "must be nonnegative",
    )?;
    let model = match noise_kind {
        NoiseKind::Bounded => NoiseModel::Bounded,
        NoiseKind::Subgaussian => NoiseModel::SubGaussian,
        NoiseKind::HeavyTail => NoiseModel::HeavyTail {
            alpha: args.alpha.unwrap_or(3.0),
        },
    };
    let noise = NoiseSource::new(model, scale)
        .map_err(|e| Failure::InvalidConfig(format!("alpha: {e}")))?;
    let delta = args.delta.unwrap_or(0.0);
    check(
        delta >= 0.0 && delta.is_finite(),
        "delta",
        "must be nonnegative",
    )?;
    check(
        problem == SmdProblem::Quadratic || (delta == 0.0 && !args.strongly_convex),
        "problem",
        "--delta and --strongly-convex need the quadratic problem",
    )?;
    check(
        !(args.parallel && args.strongly_convex),
        "parallel",
        "aggregation uses the fixed step",
    )?;
    let stride = args.trace_stride.unwrap_or((iters / 100).max(1));
    check(stride >= 1, "trace-stride", "must be at least 1")?;

    let (oracle, geo, r): (Box<dyn StochasticOracle>, ProxGeometry, f64) = match problem {
        SmdProblem::SimplexLinear => {
            let o = simplex_oracle(n, noise)?;
            (
                Box::new(o),
                ProxGeometry::entropic(n)?,
                (n as f64).ln().sqrt(),
            )
        }
        SmdProblem::Quadratic => {
            let o = quadratic_oracle(n, noise, delta)?;
            (Box::new(o), ProxGeometry::euclidean(n)?, 1.0 / 2f64.sqrt())
        }
    };
    let m = oracle.second_moment_bound();
    let rule = if args.strongly_convex {
        StepRule::InverseK
    } else {
        StepRule::Fixed
    };
    let (bound, formula) = if args.strongly_convex {
        (
            strongly_convex_gap_bound(m, 1.0, iters, delta),
            format!(
                "M^2 (1 + ln k) / (2 mu k) + delta at step k, M = {m}, mu = 1, delta = {delta}"
            ),
        )
    } else {
        (
            convex_gap_bound(m, r, iters),
            format!("M R sqrt(2/N), M = {m}, R = {r}, N = {iters}"),
        )
    };
    let tag = match problem {
        SmdProblem::SimplexLinear => "simplex-linear",
        SmdProblem::Quadratic => "quadratic",
    };
    let experiment = if args.parallel {
        format!("smd-{tag}-parallel")
    } else {
        format!("smd-{tag}")
    };

    let mut runs = Vec::new();
    let mut trajectories = None;
    if args.parallel {
        let sigma = args.sigma.unwrap_or(0.1);
        check(sigma > 0.0 && sigma < 1.0, "sigma", "must lie in (0, 1)")?;
        let k = trajectories_for_confidence(sigma)?;
        trajectories = Some(k);
        for &seed in &seeds {
            let cfg = SolverConfig::new(iters, r, seed);
            let mut table = out.csv(
                &format!("{experiment}-seed{seed}.csv"),
                &[format!(
                    "bound: {formula} (per trajectory); K = ceil(2 log2(1/sigma)) = {k} trajectories"
                )],
                &["experiment", "seed", "step", "gap", "bound"],
            )?;
            let rec = match problem {
                SmdProblem::SimplexLinear => {
                    let o = simplex_oracle(n, noise)?;
                    run_parallel_aggregate(|_| o.clone(), &geo, &cfg, sigma)?
                }
                SmdProblem::Quadratic => {
                    let o = quadratic_oracle(n, noise, delta)?;
                    run_parallel_aggregate(|_| o.clone(), &geo, &cfg, sigma)?
                }
            };
            let gap = rec.final_gap.expect("synthetic problems have known optima");
            let trajectory_gaps = rec
                .trajectory_averages
                .iter()
                .map(|x| {
                    oracle.true_value(x).expect("known value")
                        - oracle.optimal_value().expect("known optimum")
                })
                .collect();
            table.row([
                experiment.clone(),
                seed.to_string(),
                iters.to_string(),
                num(gap),
                num(bound),
            ])?;
            table.finish()?;
            runs.push(SeedResult {
                seed,
                final_gap: gap,
                oracle_calls: rec.oracle_calls,
                trajectory_gaps,
            });
        }
    } else {
        for &seed in &seeds {
            let cfg = SolverConfig::new(iters, r, seed)
                .with_step_rule(rule)
                .with_trace(stride, false);
            let rec = if args.strongly_convex {
                run_smd_strongly_convex(oracle.as_ref(), &geo, &cfg)?
            } else {
                run_smd(oracle.as_ref(), &geo, &cfg)?
            };
            let mut table = out.csv(
                &format!("{experiment}-seed{seed}.csv"),
                &[format!("bound: {formula}")],
                &["experiment", "seed", "step", "gap", "bound"],
            )?;
            for s in &rec.gap_trace {
                let b = if args.strongly_convex {
                    strongly_convex_gap_bound(m, 1.0, s.step, delta)
                } else {
                    bound
                };
                table.row([
                    experiment.clone(),
                    seed.to_string(),
                    s.step.to_string(),
                    num(s.gap),
                    num(b),
                ])?;
            }
            table.finish()?;
            runs.push(SeedResult {
                seed,
                final_gap: rec.final_gap.expect("synthetic problems have known optima"),
                oracle_calls: rec.oracle_calls,
                trajectory_gaps: Vec::new(),
            });
        }
    }
    let gaps: Vec<f64> = runs.iter().map(|r| r.final_gap).collect();
    let median_gap = median(&gaps);
    let summary = Summary {
        experiment: experiment.clone(),
        problem,
        n,
        iterations: iters,
        step_rule: rule,
        noise: noise_kind,
        noise_scale: scale,
        moment_bound: m,
        radius: r,
        trajectories,
        delta,
        bound,
        bound_formula: formula,
        runs,
        median_gap,
        within_bound: median_gap <= bound,
    };
    let path = out.json(&format!("{experiment}-summary.json"), &summary)?;
    println!("{}", path.display());
    println!("median gap {median_gap:.6e}, bound {bound:.6e}");
    if args.check && !summary.within_bound {
        return Err(Failure::CheckFailed(format!(
            "median gap {median_gap} exceeds bound {bound}"
        )));
    }
    Ok(())
}
