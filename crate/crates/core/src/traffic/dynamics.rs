//! Route-choice dynamics: per-pair exponential weights on path costs, and
//! logit revision dynamics with Gumbel-perturbed best responses.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dual::softmin;
use super::network::{PathFlow, RoadNetwork};
use crate::error::{check_positive, Error, Result};
use crate::prox::entropic_step;
use crate::rng::SimRng;

/// Euler's constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Gumbel draw with CDF `exp(-e^{-z/gamma - E})`, mean 0 and variance
/// `gamma^2 pi^2 / 6`.
pub fn gumbel_sample(gamma: f64, rng: &mut SimRng) -> Result<f64> {
    check_positive(gamma, "gamma")?;
    Ok(gumbel_unchecked(gamma, rng))
}

pub(crate) fn gumbel_unchecked(gamma: f64, rng: &mut SimRng) -> f64 {
    let u = loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            break u;
        }
    };
    gumbel_quantile(gamma, u)
}

/// Inverse CDF of the Gumbel law at `u` in `(0, 1)`.
pub fn gumbel_quantile(gamma: f64, u: f64) -> f64 {
    -gamma * ((-u.ln()).ln() + EULER_GAMMA)
}

/// `(M / sqrt N) max_w ln n_w / sqrt(2 min_w ln n_w) (sum_w d_w^2 + 1)` with
/// `M = M~ H`. Pairs with a single path have no choice to make and are left
/// out of the maximum and minimum; the bound is 0 when no pair has a choice.
pub fn exp_weights_gap_bound(net: &RoadNetwork, steps: usize) -> f64 {
    let logs: Vec<f64> = net
        .od_pairs()
        .iter()
        .filter(|w| w.paths.len() > 1)
        .map(|w| (w.paths.len() as f64).ln())
        .collect();
    if logs.is_empty() || steps == 0 {
        return 0.0;
    }
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    let d2: f64 = net.od_pairs().iter().map(|w| w.demand * w.demand).sum();
    net.path_cost_ceiling() / (steps as f64).sqrt() * max / (2.0 * min).sqrt() * (d2 + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSample {
    pub step: usize,
    /// `Psi` at the running average.
    pub potential: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficExpWeights {
    pub steps: usize,
    pub averaged: PathFlow,
    pub potential: f64,
    pub optimum: f64,
    pub gap: f64,
    pub bound: f64,
    pub trace: Vec<PotentialSample>,
}

impl TrafficExpWeights {
    pub fn within_bound(&self) -> bool {
        self.gap <= self.bound
    }
}

/// Every pair runs exponential weights on its own path costs
/// `l_p = G_p(x^k)` with `h_w = sqrt(2 ln n_w / N) / M`, all pairs moving
/// simultaneously from the uniform split. Returns the average of
/// `x^1 .. x^N` and its potential gap against `psi_star`.
pub fn run_exp_weights_traffic(
    net: &RoadNetwork,
    steps: usize,
    psi_star: f64,
    trace_stride: usize,
) -> Result<TrafficExpWeights> {
    if steps == 0 {
        return Err(Error::Config(
            "N: the dynamics need at least one step".into(),
        ));
    }
    let m = net.path_cost_ceiling();
    check_positive(m, "path cost ceiling")?;
    let steps_f = steps as f64;
    let rates: Vec<f64> = net
        .od_pairs()
        .iter()
        .map(|w| ((w.paths.len() as f64).ln() * 2.0 / steps_f).sqrt() / m)
        .collect();
    let mut shares: Vec<Vec<f64>> = net
        .od_pairs()
        .iter()
        .map(|w| vec![1.0 / w.paths.len() as f64; w.paths.len()])
        .collect();
    let mut sum = vec![0.0; net.num_paths()];
    let mut trace = Vec::new();
    let mut x = vec![0.0; net.num_paths()];
    for k in 1..=steps {
        for (w, pair) in net.od_pairs().iter().enumerate() {
            for (xp, s) in x[net.path_range(w)].iter_mut().zip(&shares[w]) {
                *xp = pair.demand * s;
            }
        }
        for (s, xp) in sum.iter_mut().zip(&x) {
            *s += xp;
        }
        let g = net.path_costs_unchecked(&x);
        for (w, share) in shares.iter_mut().enumerate() {
            if share.len() > 1 {
                *share = entropic_step(share, &g[net.path_range(w)], rates[w]);
            }
        }
        if trace_stride > 0 && (k % trace_stride == 0 || k == steps) {
            let avg: Vec<f64> = sum.iter().map(|s| s / k as f64).collect();
            let potential = net.potential_unchecked(&avg);
            trace.push(PotentialSample {
                step: k,
                potential,
                gap: potential - psi_star,
            });
        }
    }
    let averaged: Vec<f64> = sum.iter().map(|s| s / steps_f).collect();
    let potential = net.potential_unchecked(&averaged);
    Ok(TrafficExpWeights {
        steps,
        gap: potential - psi_star,
        averaged,
        potential,
        optimum: psi_star,
        bound: exp_weights_gap_bound(net, steps),
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LogitMode {
    /// `x <- (1 - eta) x + eta d_w softmin(G(x) / gamma)`, `eta = lambda / N`.
    MeanField,
    /// `agents_per_unit` agents per unit of demand, each revising with
    /// probability `lambda / N` per tick.
    Agents { agents_per_unit: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitConfig {
    pub gamma: f64,
    pub lambda: f64,
    /// Time scale `N`; one unit of time is `N` ticks.
    pub scale: f64,
    pub horizon: usize,
    pub mode: LogitMode,
    pub trace_stride: usize,
    /// Ticks excluded from the time average.
    pub burn_in: usize,
}

impl LogitConfig {
    pub fn new(gamma: f64, lambda: f64, scale: f64, horizon: usize, mode: LogitMode) -> Self {
        Self {
            gamma,
            lambda,
            scale,
            horizon,
            mode,
            trace_stride: 0,
            burn_in: 0,
        }
    }

    pub fn with_trace(mut self, stride: usize) -> Self {
        self.trace_stride = stride;
        self
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    fn revision_rate(&self) -> Result<f64> {
        check_positive(self.gamma, "gamma")?;
        check_positive(self.lambda, "lambda")?;
        check_positive(self.scale, "scale")?;
        let eta = self.lambda / self.scale;
        if eta > 1.0 {
            return Err(Error::Config(format!(
                "lambda / N must be at most 1, got {eta}"
            )));
        }
        if self.burn_in >= self.horizon {
            return Err(Error::Config(format!(
                "burn_in ({}) must be below the horizon ({})",
                self.burn_in, self.horizon
            )));
        }
        Ok(eta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub step: usize,
    pub x: PathFlow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitTrajectory {
    pub samples: Vec<FlowSample>,
    pub last: PathFlow,
    /// Average of `x^k` over ticks after the burn-in.
    pub time_average: PathFlow,
    /// Per-path standard errors of the time average from 20 batch means.
    pub batch_std_error: Vec<f64>,
}

/// Logit revision dynamics started from the uniform split.
pub fn run_logit_dynamics(
    net: &RoadNetwork,
    config: &LogitConfig,
    rng: &mut SimRng,
) -> Result<LogitTrajectory> {
    let eta = config.revision_rate()?;
    match config.mode {
        LogitMode::MeanField => Ok(mean_field(net, config, eta)),
        LogitMode::Agents { agents_per_unit } => agents(net, config, eta, agents_per_unit, rng),
    }
}

struct Recorder {
    stride: usize,
    burn_in: usize,
    samples: Vec<FlowSample>,
    kept: Vec<PathFlow>,
}

impl Recorder {
    fn push(&mut self, step: usize, x: &[f64]) {
        if self.stride > 0 && step.is_multiple_of(self.stride) {
            self.samples.push(FlowSample {
                step,
                x: x.to_vec(),
            });
        }
        if step > self.burn_in {
            self.kept.push(x.to_vec());
        }
    }

    fn finish(self, last: PathFlow) -> LogitTrajectory {
        let n = last.len();
        let count = self.kept.len() as f64;
        let mut avg = vec![0.0; n];
        for x in &self.kept {
            for (a, v) in avg.iter_mut().zip(x) {
                *a += v / count;
            }
        }
        let batches = 20.min(self.kept.len());
        let size = self.kept.len() / batches.max(1);
        let mut se = vec![f64::NAN; n];
        if batches >= 2 && size > 0 {
            for (p, s) in se.iter_mut().enumerate() {
                let means: Vec<f64> = (0..batches)
                    .map(|b| {
                        self.kept[b * size..(b + 1) * size]
                            .iter()
                            .map(|x| x[p])
                            .sum::<f64>()
                            / size as f64
                    })
                    .collect();
                *s = crate::stats::std_error(&means);
            }
        }
        LogitTrajectory {
            samples: self.samples,
            last,
            time_average: avg,
            batch_std_error: se,
        }
    }
}

fn mean_field(net: &RoadNetwork, config: &LogitConfig, eta: f64) -> LogitTrajectory {
    let mut rec = Recorder {
        stride: config.trace_stride,
        burn_in: config.burn_in,
        samples: Vec::new(),
        kept: Vec::new(),
    };
    let mut x = net.uniform_flow();
    rec.push(0, &x);
    for k in 1..=config.horizon {
        let g = net.path_costs_unchecked(&x);
        for (w, pair) in net.od_pairs().iter().enumerate() {
            let r = net.path_range(w);
            let target = softmin(&g[r.clone()], config.gamma);
            for (xp, s) in x[r].iter_mut().zip(target) {
                *xp = (1.0 - eta) * *xp + eta * pair.demand * s;
            }
        }
        rec.push(k, &x);
    }
    rec.finish(x)
}

fn agents(
    net: &RoadNetwork,
    config: &LogitConfig,
    eta: f64,
    per_unit: usize,
    rng: &mut SimRng,
) -> Result<LogitTrajectory> {
    if per_unit == 0 {
        return Err(Error::Config("agents_per_unit must be positive".into()));
    }
    let scale = per_unit as f64;
    // choice[a] is the global path index of agent a; agents are grouped by pair
    let mut choice = Vec::new();
    let mut owner = Vec::new();
    for (w, pair) in net.od_pairs().iter().enumerate() {
        let count = pair.demand * scale;
        if (count - count.round()).abs() > 1e-9 * count.max(1.0) {
            return Err(Error::Config(format!(
                "pair {} -> {}: demand {} times {per_unit} agents is not an integer",
                pair.origin, pair.dest, pair.demand
            )));
        }
        let r = net.path_range(w);
        for a in 0..count.round() as usize {
            choice.push(r.start + a % r.len());
            owner.push(w);
        }
    }
    let mut counts = vec![0usize; net.num_paths()];
    for &p in &choice {
        counts[p] += 1;
    }
    let flows = |counts: &[usize]| {
        counts
            .iter()
            .map(|&c| c as f64 / scale)
            .collect::<Vec<f64>>()
    };
    let mut rec = Recorder {
        stride: config.trace_stride,
        burn_in: config.burn_in,
        samples: Vec::new(),
        kept: Vec::new(),
    };
    let mut x = flows(&counts);
    rec.push(0, &x);
    let mut best = Vec::new();
    for k in 1..=config.horizon {
        let g = net.path_costs_unchecked(&x);
        for a in 0..choice.len() {
            if rng.gen::<f64>() >= eta {
                continue;
            }
            let r = net.path_range(owner[a]);
            best.clear();
            let mut top = f64::NEG_INFINITY;
            for q in r {
                let u = -g[q] + gumbel_unchecked(config.gamma, rng);
                if u > top {
                    top = u;
                    best.clear();
                    best.push(q);
                } else if u == top {
                    best.push(q);
                }
            }
            let pick = if best.len() == 1 {
                best[0]
            } else {
                best[rng.gen_range(0..best.len())]
            };
            counts[choice[a]] -= 1;
            counts[pick] += 1;
            choice[a] = pick;
        }
        x = flows(&counts);
        rec.push(k, &x);
    }
    Ok(rec.finish(x))
}
