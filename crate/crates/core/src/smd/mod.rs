//! Stochastic mirror descent.
//!
//! * [`run_smd`]: fixed step `h = (R/M) sqrt(2/N)`, uniform average of
//!   `x^0 .. x^{N-1}`;
//! * [`run_smd_strongly_convex`]: Euclidean setup with `h_k = 1/(mu k)`,
//!   average of `x^1 .. x^N`;
//! * [`run_parallel_aggregate`]: `K = ceil(2 log2(1/sigma))` independent
//!   trajectories whose averages are averaged again.

pub mod oracle;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::prox::ProxGeometry;
use crate::rng::{seeded, substream, SimRng};

pub use oracle::{LinearOracle, NoiseModel, NoiseSource, QuadraticOracle, StochasticOracle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    Fixed,
    InverseK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Iteration budget `N`; one oracle call per iteration.
    pub iterations: usize,
    /// Bregman radius `R`, `R^2 >= V(x_*, x^0)`.
    pub radius: f64,
    pub step_rule: StepRule,
    pub seed: u64,
    /// Starting point; the geometry's prox center when absent.
    pub start: Option<Vec<f64>>,
    /// Record the running-average gap every `trace_stride` steps (0 disables).
    pub trace_stride: usize,
    /// Keep the decimated iterates as well (same stride).
    pub keep_iterates: bool,
}

impl SolverConfig {
    pub fn new(iterations: usize, radius: f64, seed: u64) -> Self {
        Self {
            iterations,
            radius,
            step_rule: StepRule::Fixed,
            seed,
            start: None,
            trace_stride: 0,
            keep_iterates: false,
        }
    }

    pub fn with_step_rule(mut self, rule: StepRule) -> Self {
        self.step_rule = rule;
        self
    }

    pub fn with_start(mut self, start: Vec<f64>) -> Self {
        self.start = Some(start);
        self
    }

    pub fn with_trace(mut self, stride: usize, keep_iterates: bool) -> Self {
        self.trace_stride = stride;
        self.keep_iterates = keep_iterates;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations: N must be at least 1".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!(
                "radius: R must be positive, got {}",
                self.radius
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSample {
    pub step: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateSample {
    pub step: usize,
    pub point: Vec<f64>,
}

/// Outcome of a solver run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub averaged_point: Vec<f64>,
    /// Per-trajectory averages (parallel aggregation only), in trajectory order.
    pub trajectory_averages: Vec<Vec<f64>>,
    pub iterates: Vec<IterateSample>,
    /// Gap of the running average, `f(avg) - f_*`.
    pub gap_trace: Vec<GapSample>,
    pub final_gap: Option<f64>,
    pub oracle_calls: u64,
    pub wall_clock_secs: f64,
}

impl RunRecord {
    /// Equality of everything except timing.
    pub fn same_outcome(&self, other: &RunRecord) -> bool {
        self.averaged_point == other.averaged_point
            && self.trajectory_averages == other.trajectory_averages
            && self.iterates == other.iterates
            && self.gap_trace == other.gap_trace
            && self.final_gap == other.final_gap
            && self.oracle_calls == other.oracle_calls
    }
}

/// Step-size schedule used by [`drive`].
#[derive(Debug, Clone, Copy)]
pub(crate) enum Schedule {
    /// Constant `h`, steps indexed `0..N`.
    Fixed(f64),
    /// `h_k = 1/(mu k)`, steps indexed `1..=N`.
    InverseK(f64),
}

/// Objective used for gap tracing.
pub(crate) struct GapProbe<'a> {
    pub value: &'a dyn Fn(&[f64]) -> Option<f64>,
    pub optimum: Option<f64>,
}

impl GapProbe<'_> {
    fn gap(&self, x: &[f64]) -> Option<f64> {
        Some((self.value)(x)? - self.optimum?)
    }
}

/// The mirror-descent recursion shared by every runner. `grad` is called once
/// per step at the current iterate; the returned record averages exactly the
/// points at which `grad` was called.
pub(crate) fn drive<G>(
    geometry: &ProxGeometry,
    config: &SolverConfig,
    schedule: Schedule,
    calls_per_step: u64,
    probe: &GapProbe<'_>,
    rng: &mut SimRng,
    mut grad: G,
) -> Result<RunRecord>
where
    G: FnMut(&[f64], &mut SimRng) -> Result<Vec<f64>>,
{
    let started = Instant::now();
    let n = config.iterations;
    let mut x = match &config.start {
        Some(s) => s.clone(),
        None => geometry.start_point(),
    };
    geometry.check_feasible(&x)?;
    let mut sum = vec![0.0; geometry.dim()];
    let mut iterates = Vec::new();
    let mut gap_trace = Vec::new();
    let first = match schedule {
        Schedule::Fixed(_) => 0,
        Schedule::InverseK(_) => 1,
    };
    for done in 1..=n {
        let k = first + done - 1;
        for (s, xi) in sum.iter_mut().zip(&x) {
            *s += xi;
        }
        let g = grad(&x, rng)?;
        if g.len() != x.len() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::OracleNan { step: k });
        }
        let h = match schedule {
            Schedule::Fixed(h) => h,
            Schedule::InverseK(mu) => 1.0 / (mu * k as f64),
        };
        let next = geometry.mirror_step(&x, &g, h)?;
        if config.trace_stride > 0 && (done % config.trace_stride == 0 || done == n) {
            let avg: Vec<f64> = sum.iter().map(|s| s / done as f64).collect();
            if let Some(gap) = probe.gap(&avg) {
                gap_trace.push(GapSample { step: done, gap });
            }
            if config.keep_iterates {
                iterates.push(IterateSample {
                    step: k,
                    point: x.clone(),
                });
            }
        }
        x = next;
    }
    let averaged_point: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let final_gap = probe.gap(&averaged_point);
    Ok(RunRecord {
        averaged_point,
        trajectory_averages: Vec::new(),
        iterates,
        gap_trace,
        final_gap,
        oracle_calls: calls_per_step * n as u64,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

/// Rounds values that are integers up to floating noise before taking the
/// ceiling, so that e.g. `2/0.1^2` gives 200 rather than 201.
pub(crate) fn stable_ceil(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        v.ceil()
    }
}

/// `N = ceil(2 M^2 R^2 / eps^2)` iterations for an expected gap of at most `eps`.
pub fn required_iterations(m: f64, r: f64, eps: f64) -> Result<usize> {
    check_positive(m, "M")?;
    check_positive(r, "R")?;
    check_positive(eps, "eps")?;
    Ok(stable_ceil(2.0 * m * m * r * r / (eps * eps)).max(1.0) as usize)
}

/// Fixed step `h = (R/M) sqrt(2/N)`.
pub fn fixed_step(m: f64, r: f64, n: usize) -> f64 {
    (r / m) * (2.0 / n as f64).sqrt()
}

/// Expected-gap guarantee `M R sqrt(2/N)` of the fixed-step method.
pub fn convex_gap_bound(m: f64, r: f64, n: usize) -> f64 {
    m * r * (2.0 / n as f64).sqrt()
}

/// Guarantee `M^2 (1 + ln N) / (2 mu N) + delta` of the `1/(mu k)` schedule.
pub fn strongly_convex_gap_bound(m: f64, mu: f64, n: usize, delta: f64) -> f64 {
    m * m * (1.0 + (n as f64).ln()) / (2.0 * mu * n as f64) + delta
}

/// Number of trajectories `K = ceil(2 log2(1/sigma))` for confidence `1 - sigma`.
pub fn trajectories_for_confidence(sigma: f64) -> Result<usize> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::Input(format!(
            "sigma must lie in (0, 1), got {sigma}"
        )));
    }
    Ok(stable_ceil(2.0 * (1.0 / sigma).log2()).max(1.0) as usize)
}

fn check_dims<O: StochasticOracle + ?Sized>(oracle: &O, geometry: &ProxGeometry) -> Result<()> {
    if oracle.dim() != geometry.dim() {
        return Err(Error::Config(format!(
            "oracle dimension {} does not match geometry dimension {}",
            oracle.dim(),
            geometry.dim()
        )));
    }
    Ok(())
}

fn run_fixed_with_rng<O: StochasticOracle + ?Sized>(
    oracle: &O,
    geometry: &ProxGeometry,
    config: &SolverConfig,
    rng: &mut SimRng,
) -> Result<RunRecord> {
    let m = oracle.second_moment_bound();
    check_positive(m, "oracle moment bound M")?;
    let h = fixed_step(m, config.radius, config.iterations);
    let value = |x: &[f64]| oracle.true_value(x);
    let probe = GapProbe {
        value: &value,
        optimum: oracle.optimal_value(),
    };
    drive(
        geometry,
        config,
        Schedule::Fixed(h),
        1,
        &probe,
        rng,
        |x, rng| Ok(oracle.grad(x, rng)),
    )
}

/// Fixed-step stochastic mirror descent.
pub fn run_smd<O: StochasticOracle + ?Sized>(
    oracle: &O,
    geometry: &ProxGeometry,
    config: &SolverConfig,
) -> Result<RunRecord> {
    config.validate()?;
    if config.step_rule != StepRule::Fixed {
        return Err(Error::Config(
            "step_rule: run_smd uses the fixed step; use run_smd_strongly_convex for 1/(mu k)"
                .into(),
        ));
    }
    check_dims(oracle, geometry)?;
    run_fixed_with_rng(oracle, geometry, config, &mut seeded(config.seed))
}

/// Euclidean mirror descent with `h_k = 1/(mu k)` for `mu`-strongly convex
/// objectives.
pub fn run_smd_strongly_convex<O: StochasticOracle + ?Sized>(
    oracle: &O,
    geometry: &ProxGeometry,
    config: &SolverConfig,
) -> Result<RunRecord> {
    config.validate()?;
    let mu = match oracle.strong_convexity() {
        Some(mu) if mu > 0.0 => mu,
        _ => {
            return Err(Error::Config(
                "strong convexity modulus is zero or unknown; use run_smd with the fixed step"
                    .into(),
            ))
        }
    };
    if !geometry.is_euclidean() {
        return Err(Error::Config(
            "the 1/(mu k) schedule needs a Euclidean geometry".into(),
        ));
    }
    if config.step_rule != StepRule::InverseK {
        return Err(Error::Config("step_rule: expected inverse-k".into()));
    }
    check_dims(oracle, geometry)?;
    let value = |x: &[f64]| oracle.true_value(x);
    let probe = GapProbe {
        value: &value,
        optimum: oracle.optimal_value(),
    };
    let mut rng = seeded(config.seed);
    drive(
        geometry,
        config,
        Schedule::InverseK(mu),
        1,
        &probe,
        &mut rng,
        |x, rng| Ok(oracle.grad(x, rng)),
    )
}

/// Runs `K` independent fixed-step trajectories and averages their averages.
///
/// Trajectory `i` gets its own oracle from `factory(i)` and the random stream
/// `substream(config.seed, i)`. Trajectories run concurrently; the final
/// average is accumulated in trajectory order.
pub fn run_parallel_aggregate<O, F>(
    factory: F,
    geometry: &ProxGeometry,
    config: &SolverConfig,
    sigma: f64,
) -> Result<RunRecord>
where
    O: StochasticOracle,
    F: Fn(usize) -> O + Sync,
{
    config.validate()?;
    if config.step_rule != StepRule::Fixed {
        return Err(Error::Config(
            "step_rule: parallel aggregation uses the fixed step".into(),
        ));
    }
    let k = trajectories_for_confidence(sigma)?;
    let started = Instant::now();
    let probe_oracle = factory(0);
    check_dims(&probe_oracle, geometry)?;
    if let NoiseModel::HeavyTail { alpha } = probe_oracle.noise_model() {
        let needed = sigma.powf(-1.0 / (alpha - 1.0));
        if 10.0 * needed > config.iterations as f64 {
            log::warn!(
                "heavy-tail regime: sigma^(-1/(alpha-1)) = {needed:.3} is not small against N = {}",
                config.iterations
            );
        }
    }
    let runs: Vec<Result<RunRecord>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let oracle = if i == 0 { None } else { Some(factory(i)) };
            let oracle_ref: &O = oracle.as_ref().unwrap_or(&probe_oracle);
            let mut rng = substream(config.seed, i as u64);
            run_fixed_with_rng(oracle_ref, geometry, config, &mut rng)
        })
        .collect();
    let mut averages = Vec::with_capacity(k);
    let mut calls = 0;
    for (index, run) in runs.into_iter().enumerate() {
        let run = run.map_err(|e| Error::Trajectory {
            index,
            source: Box::new(e),
        })?;
        calls += run.oracle_calls;
        averages.push(run.averaged_point);
    }
    let mut averaged_point = vec![0.0; geometry.dim()];
    for avg in &averages {
        for (a, v) in averaged_point.iter_mut().zip(avg) {
            *a += v;
        }
    }
    for a in &mut averaged_point {
        *a /= k as f64;
    }
    let final_gap = match (
        probe_oracle.true_value(&averaged_point),
        probe_oracle.optimal_value(),
    ) {
        (Some(v), Some(opt)) => Some(v - opt),
        _ => None,
    };
    Ok(RunRecord {
        averaged_point,
        trajectory_averages: averages,
        iterates: Vec::new(),
        gap_trace: Vec::new(),
        final_gap,
        oracle_calls: calls,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}
