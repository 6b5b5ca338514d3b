use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use stochopt::experiments::{calls_to_reach, reference_problem, reference_smoothing, ZoProblem};
use stochopt::smd::{convex_gap_bound, required_iterations, SolverConfig};
use stochopt::stats::{log_log_slope, median};
use stochopt::zeroth_order::{
    run_zeroth_order, surrogate_second_moment, FeedbackKind, Perturbation, SecondProbe,
    SmoothingParams,
};
use stochopt::Error;

use crate::config::{check, merge_fields, seed_list};
use crate::output::{num, Output};
use crate::{CmdResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Feedback {
    OnePoint,
    TwoPoint,
    Directional,
    DoubleSmoothed,
}

impl Feedback {
    fn kind(self) -> FeedbackKind {
        match self {
            Feedback::OnePoint => FeedbackKind::OnePoint,
            Feedback::TwoPoint => FeedbackKind::TwoPoint,
            Feedback::Directional => FeedbackKind::Directional,
            Feedback::DoubleSmoothed => FeedbackKind::DoubleSmoothed,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Feedback::OnePoint => "one-point",
            Feedback::TwoPoint => "two-point",
            Feedback::Directional => "directional",
            Feedback::DoubleSmoothed => "double-smoothed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Quadratic,
    Distance,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ZoArgs {
    #[arg(long, value_enum)]
    pub feedback: Option<Feedback>,
    #[arg(long, value_enum)]
    pub problem: Option<Problem>,
    /// Dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Target accuracy; sets the smoothing radii and the default budget.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Iterations per run (default: the prescribed budget for eps).
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
    /// Tracking perturbation at this multiple of the admissible level.
    #[arg(long)]
    pub delta_factor: Option<f64>,
    /// Double smoothing: put the second probe at `x + tau2 u`.
    #[arg(long = "paper-literal")]
    #[serde(default, rename = "paper-literal")]
    pub inner_offset: bool,
    #[arg(long)]
    pub trace_stride: Option<usize>,
    /// Also search the smallest budget reaching eps for each dimension,
    /// stopping at this many oracle calls.
    #[arg(long)]
    pub max_calls: Option<u64>,
    /// Exit with status 1 when a median final gap exceeds eps.
    #[arg(long)]
    #[serde(default)]
    pub check: bool,
}

impl ZoArgs {
    pub fn merged(mut self, file: Option<ZoArgs>) -> Result<Self, Failure> {
        if let Some(mut f) = file {
            merge_fields!(self, f; feedback, problem, dims, eps, iterations, seeds, seed, seed_list,
                delta_factor, trace_stride, max_calls; inner_offset, check);
        }
        Ok(self)
    }
}

#[derive(Debug, Serialize)]
struct RunResult {
    seed: u64,
    /// `None` when the iterates left the region where values are finite.
    final_gap: Option<f64>,
    oracle_calls: u64,
}

#[derive(Debug, Serialize)]
struct DimResult {
    n: usize,
    params: SmoothingParams,
    delta: f64,
    radius: f64,
    surrogate_moment: f64,
    #[serde(rename = "N")]
    iterations: usize,
    bound: f64,
    runs: Vec<RunResult>,
    median_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    calls_to_reach: Option<Option<u64>>,
}

#[derive(Debug, Serialize)]
struct Summary {
    experiment: String,
    eps: f64,
    bound_formula: &'static str,
    dims: Vec<DimResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scaling_exponent: Option<f64>,
}

pub fn run(args: ZoArgs, out: &Output) -> CmdResult {
    let feedback = args.feedback.unwrap_or(Feedback::TwoPoint);
    let problem = match args.problem.unwrap_or(Problem::Quadratic) {
        Problem::Quadratic => ZoProblem::Quadratic,
        Problem::Distance => ZoProblem::Distance,
    };
    let dims = args.dims.unwrap_or_else(|| vec![10]);
    check(
        !dims.is_empty() && dims.iter().all(|&n| n >= 1),
        "dims",
        "need at least one positive dimension",
    )?;
    let eps = args.eps.unwrap_or(0.05);
    check(eps > 0.0 && eps.is_finite(), "eps", "must be positive")?;
    if let Some(n) = args.iterations {
        check(n >= 1, "N", "must be at least 1")?;
    }
    let seeds = seed_list(args.seeds, args.seed, args.seed_list)?;
    let factor = args.delta_factor.unwrap_or(0.0);
    check(
        factor >= 0.0 && factor.is_finite(),
        "delta-factor",
        "must be nonnegative",
    )?;
    check(
        !args.inner_offset || feedback == Feedback::DoubleSmoothed,
        "paper-literal",
        "only applies to double-smoothed feedback",
    )?;
    if let Some(cap) = args.max_calls {
        check(cap >= 1, "max-calls", "must be at least 1")?;
    }
    let experiment = format!("zo-{}", feedback.tag());
    let formula = "M_eff R sqrt(2/N), the optimization term of the surrogate problem; \
                   the smoothing bias is not included";

    let mut results = Vec::new();
    for &n in &dims {
        let (base, geo, r) = reference_problem(problem, n)?;
        let mut params = reference_smoothing(&base, r, eps, feedback.kind())?;
        if args.inner_offset {
            params = params.with_second_probe(SecondProbe::InnerOffset);
        }
        let delta = factor * params.delta_max;
        let oracle = if delta > 0.0 {
            base.with_perturbation(Perturbation::Tracking, delta)?
        } else {
            base
        };
        let m_eff = surrogate_second_moment(&oracle, &params, geo.dual_exponent())?.sqrt();
        let iters = match args.iterations {
            Some(n) => n,
            None => required_iterations(m_eff, r, eps)?,
        };
        let bound = convex_gap_bound(m_eff, r, iters);
        let stride = args.trace_stride.unwrap_or((iters / 100).max(1));
        check(stride >= 1, "trace-stride", "must be at least 1")?;
        let per = feedback.kind().calls_per_step();

        let mut runs = Vec::new();
        for &seed in &seeds {
            let cfg = SolverConfig::new(iters, r, seed).with_trace(stride, false);
            let mut table = out.csv(
                &format!("{experiment}-n{n}-seed{seed}.csv"),
                &[format!(
                    "bound: {formula}; M_eff = {m_eff}, R = {r}, N = {iters}"
                )],
                &[
                    "experiment",
                    "n",
                    "seed",
                    "step",
                    "oracle_calls",
                    "gap",
                    "bound",
                ],
            )?;
            match run_zeroth_order(&oracle, &geo, &cfg, &params) {
                Ok(rec) => {
                    for s in &rec.gap_trace {
                        table.row([
                            experiment.clone(),
                            n.to_string(),
                            seed.to_string(),
                            s.step.to_string(),
                            (s.step as u64 * per).to_string(),
                            num(s.gap),
                            num(bound),
                        ])?;
                    }
                    runs.push(RunResult {
                        seed,
                        final_gap: rec.final_gap,
                        oracle_calls: rec.oracle_calls,
                    });
                }
                Err(Error::OracleNan { step }) => {
                    eprintln!("n = {n}, seed {seed}: iterates diverged at step {step}");
                    runs.push(RunResult {
                        seed,
                        final_gap: None,
                        oracle_calls: step as u64 * per,
                    });
                }
                Err(e) => return Err(e.into()),
            }
            table.finish()?;
        }
        let gaps: Vec<f64> = runs
            .iter()
            .map(|r| r.final_gap.unwrap_or(f64::INFINITY))
            .collect();
        let median_gap = median(&gaps);
        let reach = match args.max_calls {
            Some(cap) => {
                let base_seed = seeds[0];
                Some(calls_to_reach(
                    &oracle,
                    &geo,
                    r,
                    &params,
                    eps,
                    seeds.len(),
                    base_seed,
                    cap,
                )?)
            }
            None => None,
        };
        println!("n = {n}: N = {iters}, median gap {median_gap:.6e} (eps {eps})");
        results.push(DimResult {
            n,
            params,
            delta,
            radius: r,
            surrogate_moment: m_eff,
            iterations: iters,
            bound,
            runs,
            median_gap,
            calls_to_reach: reach,
        });
    }

    let mut exponent = None;
    if args.max_calls.is_some() {
        let mut table = out.csv(
            &format!("{experiment}-scaling.csv"),
            &[format!("smallest budget on the grid ceil(4 2^(k/4)) with median gap <= {eps}, in oracle calls")],
            &["experiment", "n", "oracle_calls"],
        )?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for d in &results {
            let calls = d.calls_to_reach.flatten();
            table.row([
                experiment.clone(),
                d.n.to_string(),
                calls.map_or_else(String::new, |c| c.to_string()),
            ])?;
            if let Some(c) = calls {
                xs.push(d.n as f64);
                ys.push(c as f64);
            }
        }
        println!("{}", table.finish()?.display());
        if xs.len() >= 2 {
            let e = log_log_slope(&xs, &ys);
            println!("calls ~ n^{e:.3}");
            exponent = Some(e);
        }
    }

    let failing: Vec<usize> = results
        .iter()
        .filter(|d| d.median_gap > eps)
        .map(|d| d.n)
        .collect();
    let summary = Summary {
        experiment: experiment.clone(),
        eps,
        bound_formula: formula,
        dims: results,
        scaling_exponent: exponent,
    };
    println!(
        "{}",
        out.json(&format!("{experiment}-summary.json"), &summary)?
            .display()
    );
    if args.check && !failing.is_empty() {
        return Err(Failure::CheckFailed(format!(
            "median gap above eps = {eps} at n = {failing:?}"
        )));
    }
    Ok(())
}
