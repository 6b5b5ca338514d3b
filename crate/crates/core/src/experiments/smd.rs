use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prox::ProxGeometry;
use crate::rng::substream;
use crate::smd::{
    convex_gap_bound, required_iterations, run_parallel_aggregate, run_smd,
    run_smd_strongly_convex, strongly_convex_gap_bound, trajectories_for_confidence, LinearOracle,
    NoiseModel, NoiseSource, QuadraticOracle, SolverConfig, StepRule, StochasticOracle,
};
use crate::stats::{log_log_slope, median, norm2};
use crate::zeroth_order::{
    choose_smoothing_params, project_on_direction, q_norm, run_zeroth_order, sample_sphere,
    sphere_mixed_moment_bound, sphere_norm_moment_bound, surrogate_second_moment, FeedbackKind,
    Objective, Perturbation, SmoothingParams, SyntheticOracle, ValueOracle,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub iterations: usize,
    pub median_gap: f64,
    pub bound: f64,
}

/// Linear costs `c_i = 0.5 i / (n - 1)` in `[0, 0.5]` on the simplex, so
/// with bounded noise of scale 0.5 the declared `M` is 1.
pub fn simplex_oracle(n: usize, noise: NoiseSource) -> Result<LinearOracle> {
    if n < 2 {
        return Err(Error::Config(format!(
            "n: the simplex problem needs n >= 2, got {n}"
        )));
    }
    let costs = (0..n).map(|i| 0.5 * i as f64 / (n - 1) as f64).collect();
    LinearOracle::new(costs, noise, f64::INFINITY)
}

/// `1/2 ||x - c||^2` with `c_i = +-1/sqrt(n)` (so `||c|| = 1`), declared over
/// the ball `||x - c|| <= 1.5`, with an optional bias `delta` over diameter 3.
pub fn quadratic_oracle(n: usize, noise: NoiseSource, delta: f64) -> Result<QuadraticOracle> {
    if n == 0 {
        return Err(Error::Config("n: dimension must be at least 1".into()));
    }
    let center: Vec<f64> = (0..n)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } / (n as f64).sqrt())
        .collect();
    let oracle = QuadraticOracle::new(center, 1.0, noise, 1.5)?;
    if delta > 0.0 {
        oracle.with_bias(delta, 3.0)
    } else {
        Ok(oracle)
    }
}

/// Entropic SMD on a noisy linear objective over the 10-simplex: median gap
/// over `seeds` runs at each budget, against `M R sqrt(2/N)`.
pub fn simplex_rate(budgets: &[usize], seeds: usize, seed: u64) -> Result<Vec<RatePoint>> {
    let n = 10;
    let oracle = simplex_oracle(n, NoiseSource::new(NoiseModel::Bounded, 0.5)?)?;
    let geo = ProxGeometry::entropic(n)?;
    let r = (n as f64).ln().sqrt();
    budgets
        .iter()
        .map(|&iters| {
            let gaps: Result<Vec<f64>> = (0..seeds as u64)
                .into_par_iter()
                .map(|s| {
                    let rec = run_smd(&oracle, &geo, &SolverConfig::new(iters, r, seed + s))?;
                    Ok(rec.final_gap.expect("linear oracle has an optimum"))
                })
                .collect();
            Ok(RatePoint {
                iterations: iters,
                median_gap: median(&gaps?),
                bound: convex_gap_bound(oracle.second_moment_bound(), r, iters),
            })
        })
        .collect()
}

pub(super) fn criterion_simplex_rate() -> Result<(bool, String)> {
    let pts = simplex_rate(&[100, 1_000, 10_000], 20, 100)?;
    let xs: Vec<f64> = pts.iter().map(|p| p.iterations as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.median_gap).collect();
    let slope = log_log_slope(&xs, &ys);
    let under = pts.iter().all(|p| p.median_gap <= p.bound);
    let parts: Vec<String> = pts
        .iter()
        .map(|p| {
            format!(
                "N={} gap={:.2e}/{:.2e}",
                p.iterations, p.median_gap, p.bound
            )
        })
        .collect();
    Ok((
        under && (-0.65..=-0.35).contains(&slope),
        format!("{}; slope {slope:.3}", parts.join(", ")),
    ))
}

/// `f(x) = 1/2 ||x - c||^2` on `R^5` with `||c|| = 1` under bounded noise of
/// scale 0.1 and optional bias `delta`, run with `h_k = 1/k`.
pub fn strongly_convex_rate(
    budgets: &[usize],
    delta: f64,
    seeds: usize,
    seed: u64,
) -> Result<Vec<RatePoint>> {
    let n = 5;
    let oracle = quadratic_oracle(n, NoiseSource::new(NoiseModel::Bounded, 0.1)?, delta)?;
    let geo = ProxGeometry::euclidean(n)?;
    budgets
        .iter()
        .map(|&iters| {
            let cfg = SolverConfig::new(iters, 1.0, 0).with_step_rule(StepRule::InverseK);
            let gaps: Result<Vec<f64>> = (0..seeds as u64)
                .into_par_iter()
                .map(|s| {
                    let cfg = SolverConfig {
                        seed: seed + s,
                        ..cfg.clone()
                    };
                    Ok(run_smd_strongly_convex(&oracle, &geo, &cfg)?
                        .final_gap
                        .expect("known optimum"))
                })
                .collect();
            let m = oracle.second_moment_bound();
            Ok(RatePoint {
                iterations: iters,
                median_gap: median(&gaps?),
                bound: strongly_convex_gap_bound(m, 1.0, iters, delta),
            })
        })
        .collect()
}

pub(super) fn criterion_strongly_convex() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for delta in [0.0, 0.05] {
        for p in strongly_convex_rate(&[100, 1_000], delta, 20, 200)? {
            ok &= p.median_gap <= p.bound;
            parts.push(format!(
                "delta={delta} N={} gap={:.2e}/{:.2e}",
                p.iterations, p.median_gap, p.bound
            ));
        }
    }
    Ok((ok, parts.join(", ")))
}

/// Fraction of `reps` aggregated runs (`K` trajectories for confidence
/// `1 - sigma`) whose gap is at most `eps`, on the simplex problem with the
/// given noise model. The budget is the one guaranteeing an expected gap of
/// `eps` per trajectory.
pub fn parallel_confidence(
    model: NoiseModel,
    sigma: f64,
    eps: f64,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    let n = 10;
    let scale = match model {
        NoiseModel::HeavyTail { .. } => 0.2,
        _ => 0.5,
    };
    let noise = NoiseSource::new(model, scale)?;
    let oracle = simplex_oracle(n, noise)?;
    let geo = ProxGeometry::entropic(n)?;
    let r = (n as f64).ln().sqrt();
    let iters = required_iterations(oracle.second_moment_bound(), r, eps)?;
    let hits: Result<Vec<bool>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let cfg = SolverConfig::new(iters, r, seed + rep);
            let rec = run_parallel_aggregate(|_| oracle.clone(), &geo, &cfg, sigma)?;
            Ok(rec.final_gap.expect("linear oracle has an optimum") <= eps)
        })
        .collect();
    let hits = hits?;
    Ok(hits.iter().filter(|h| **h).count() as f64 / reps as f64)
}

pub(super) fn criterion_parallel() -> Result<(bool, String)> {
    let sigma = 0.1;
    let k = trajectories_for_confidence(sigma)?;
    let mut ok = k == 7;
    let mut parts = vec![format!("K={k}")];
    for model in [
        NoiseModel::Bounded,
        NoiseModel::SubGaussian,
        NoiseModel::HeavyTail { alpha: 3.0 },
    ] {
        let freq = parallel_confidence(model, sigma, 0.05, 200, 300)?;
        ok &= freq >= 1.0 - sigma;
        parts.push(format!("{} {:.3}", model.label(), freq));
    }
    Ok((ok, parts.join(", ")))
}

/// Largest per-coordinate `|mean - g_i| / SE` of `n <g, e> e` over `draws`
/// sphere directions, with `g_i = sin(i + 1)`.
pub fn directional_unbiasedness(n: usize, draws: usize, seed: u64) -> Result<f64> {
    let g: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).sin()).collect();
    let mut rng = substream(seed, n as u64);
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    for _ in 0..draws {
        let e = sample_sphere(n, &mut rng)?;
        for (i, v) in project_on_direction(&g, &e).into_iter().enumerate() {
            sum[i] += v;
            sum_sq[i] += v * v;
        }
    }
    let d = draws as f64;
    Ok((0..n)
        .map(|i| {
            let m = sum[i] / d;
            let var = (sum_sq[i] - d * m * m) / (d - 1.0);
            (m - g[i]).abs() / (var / d).sqrt()
        })
        .fold(0.0, f64::max))
}

pub(super) fn criterion_unbiasedness() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [2, 10, 100] {
        let z = directional_unbiasedness(n, 100_000, 400)?;
        ok &= z <= 3.0;
        parts.push(format!("n={n} max|z|={z:.2}"));
    }
    Ok((ok, parts.join(", ")))
}

/// Monte-Carlo `E ||e||_q^2` and `E[<c, e>^2 ||e||_q^2]` (for `c = (1, .., 1)`
/// and `c = e_1`, reporting the larger ratio to its bound) against the
/// closed-form bounds. Returns `(norm, norm bound, mixed, mixed bound)`.
pub fn sphere_moments(n: usize, q: f64, draws: usize, seed: u64) -> Result<(f64, f64, f64, f64)> {
    let chunks = 20;
    let per = draws / chunks;
    let parts: Result<Vec<(f64, f64, f64)>> = (0..chunks as u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c);
            let (mut a, mut ones, mut first) = (0.0, 0.0, 0.0);
            for _ in 0..per {
                let e = sample_sphere(n, &mut rng)?;
                let nq = q_norm(&e, q).powi(2);
                let s: f64 = e.iter().sum();
                a += nq;
                ones += s * s * nq;
                first += e[0] * e[0] * nq;
            }
            Ok((a, ones, first))
        })
        .collect();
    let total = (per * chunks) as f64;
    let (a, ones, first) = parts?.into_iter().fold((0.0, 0.0, 0.0), |acc, p| {
        (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2)
    });
    let mixed_bound = sphere_mixed_moment_bound(n, q);
    // per unit ||c||^2: ||1||^2 = n, ||e_1||^2 = 1
    let mixed = (ones / total / n as f64).max(first / total);
    Ok((
        a / total,
        sphere_norm_moment_bound(n, q),
        mixed,
        mixed_bound,
    ))
}

pub(super) fn criterion_sphere_moments() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [10, 100, 1000] {
        for q in [2.0, f64::INFINITY] {
            let (a, ab, b, bb) = sphere_moments(n, q, 100_000, 500)?;
            // for q = 2 the norm bound is attained exactly, up to rounding
            ok &= a <= ab * (1.0 + 1e-12) && b <= bb;
            parts.push(format!("n={n} q={q}: {a:.3e}/{ab:.3e} {b:.3e}/{bb:.3e}"));
        }
    }
    Ok((ok, parts.join(", ")))
}

/// Test objectives for the gradient-free runners, centered at `c` with
/// `||c|| = 1/2` and noiseless values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZoProblem {
    /// `1/2 ||x - c||^2`.
    #[default]
    Quadratic,
    /// `||x - c||_2`.
    Distance,
}

/// The oracle, Euclidean geometry and radius `R = ||c|| / sqrt 2` of a
/// reference problem in `R^n`, started from the origin.
pub fn reference_problem(
    problem: ZoProblem,
    n: usize,
) -> Result<(SyntheticOracle, ProxGeometry, f64)> {
    if n == 0 {
        return Err(Error::Config("n: dimension must be at least 1".into()));
    }
    let center: Vec<f64> = (0..n)
        .map(|i| if i % 2 == 0 { 0.5 } else { -0.5 } / (n as f64).sqrt())
        .collect();
    let r = norm2(&center) / 2f64.sqrt();
    let objective = match problem {
        ZoProblem::Quadratic => Objective::Quadratic { center },
        ZoProblem::Distance => Objective::Distance { center },
    };
    Ok((
        SyntheticOracle::new(objective, 0.5)?,
        ProxGeometry::euclidean(n)?,
        r,
    ))
}

/// Default smoothing for `feedback` on a reference problem at accuracy `eps`.
pub fn reference_smoothing(
    oracle: &SyntheticOracle,
    r: f64,
    eps: f64,
    feedback: FeedbackKind,
) -> Result<SmoothingParams> {
    let n = ValueOracle::dim(oracle);
    choose_smoothing_params(
        eps,
        ValueOracle::lipschitz(oracle),
        oracle.smoothness(),
        r,
        n,
        feedback,
    )
}

/// Median final gap of `seeds` runs with `iters` steps each. Runs whose
/// iterates blew up count as an infinite gap.
pub fn median_gap<O: ValueOracle + ?Sized>(
    oracle: &O,
    geo: &ProxGeometry,
    r: f64,
    params: &SmoothingParams,
    iters: usize,
    seeds: usize,
    seed: u64,
) -> Result<f64> {
    let gaps: Result<Vec<f64>> = (0..seeds as u64)
        .into_par_iter()
        .map(|s| {
            match run_zeroth_order(oracle, geo, &SolverConfig::new(iters, r, seed + s), params) {
                Ok(rec) => Ok(rec.final_gap.expect("synthetic oracle has an optimum")),
                Err(Error::OracleNan { .. }) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            }
        })
        .collect();
    Ok(median(&gaps?))
}

/// Smallest budget on the grid `ceil(4 * 2^(k/4))` whose median gap is at
/// most `eps`, as oracle calls; `None` once the grid passes `cap_calls`.
#[allow(clippy::too_many_arguments)]
pub fn calls_to_reach<O: ValueOracle + ?Sized>(
    oracle: &O,
    geo: &ProxGeometry,
    r: f64,
    params: &SmoothingParams,
    eps: f64,
    seeds: usize,
    seed: u64,
    cap_calls: u64,
) -> Result<Option<u64>> {
    let per = params.feedback.calls_per_step();
    let mut k = 0;
    loop {
        let iters = (4.0 * 2f64.powf(k as f64 / 4.0)).ceil() as usize;
        if iters as u64 * per > cap_calls {
            return Ok(None);
        }
        if median_gap(oracle, geo, r, params, iters, seeds, seed)? <= eps {
            return Ok(Some(iters as u64 * per));
        }
        k += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSummary {
    pub eps: f64,
    /// `(n, oracle calls)` of the smallest two-point budget reaching `eps`.
    pub two_point_calls: Vec<(usize, u64)>,
    pub exponent: f64,
    /// Two-point and one-point calls at `n = 10`; `None` when the one-point
    /// search stopped at its cap without reaching `eps`.
    pub two_point_at_10: u64,
    pub one_point_at_10: Option<u64>,
    pub one_point_cap: u64,
}

/// Oracle calls the two-point runner needs to reach a median gap of `eps` on
/// the reference quadratic for each `n`, and the one-point comparison at
/// `n = 10`.
pub fn zeroth_order_scaling(
    dims: &[usize],
    eps: f64,
    seeds: usize,
    seed: u64,
) -> Result<ScalingSummary> {
    let search = |n: usize, feedback: FeedbackKind, cap: u64| -> Result<Option<u64>> {
        let (oracle, geo, r) = reference_problem(ZoProblem::Quadratic, n)?;
        let p = reference_smoothing(&oracle, r, eps, feedback)?;
        calls_to_reach(&oracle, &geo, r, &p, eps, seeds, seed, cap)
    };
    let uncapped = 1 << 26;
    let mut calls = Vec::new();
    for &n in dims {
        let c = search(n, FeedbackKind::TwoPoint, uncapped)?.ok_or_else(|| {
            Error::Config(format!(
                "two-point runner did not reach eps = {eps} at n = {n}"
            ))
        })?;
        calls.push((n, c));
    }
    let xs: Vec<f64> = calls.iter().map(|c| c.0 as f64).collect();
    let ys: Vec<f64> = calls.iter().map(|c| c.1 as f64).collect();
    let exponent = log_log_slope(&xs, &ys);
    let two_at_10 = search(10, FeedbackKind::TwoPoint, uncapped)?.ok_or_else(|| {
        Error::Config(format!(
            "two-point runner did not reach eps = {eps} at n = 10"
        ))
    })?;
    let cap = 64 * two_at_10;
    let one = search(10, FeedbackKind::OnePoint, cap)?;
    Ok(ScalingSummary {
        eps,
        two_point_calls: calls,
        exponent,
        two_point_at_10: two_at_10,
        one_point_at_10: one,
        one_point_cap: cap,
    })
}

pub(super) fn criterion_scaling() -> Result<(bool, String)> {
    let s = zeroth_order_scaling(&[4, 16, 64], 0.01, 20, 600)?;
    let more = s.one_point_at_10.is_none_or(|c| c > s.two_point_at_10);
    let calls: Vec<String> = s
        .two_point_calls
        .iter()
        .map(|(n, c)| format!("n={n}:{c}"))
        .collect();
    let one = match s.one_point_at_10 {
        Some(c) => c.to_string(),
        None => format!(">{}", s.one_point_cap),
    };
    Ok((
        (0.7..=1.3).contains(&s.exponent) && more,
        format!(
            "two-point calls {}; exponent {:.3}; n=10 two-point {} vs one-point {one}",
            calls.join(" "),
            s.exponent,
            s.two_point_at_10
        ),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleSmoothingSummary {
    pub eps: f64,
    pub delta: f64,
    pub delta_max: f64,
    pub iterations: usize,
    pub final_gap: f64,
    /// Smallest running-average gap over the second half of the run.
    pub late_min_gap: f64,
}

/// Double smoothing on `||x - c||_2` in `R^4` (`||c|| = 1/4`) with values
/// corrupted by the tracking adversary at level `factor * delta_max`. The
/// budget is the prescribed one for the resulting surrogate moment.
pub fn double_smoothing_stall(eps: f64, factor: f64, seed: u64) -> Result<DoubleSmoothingSummary> {
    let n = 4;
    let center: Vec<f64> = (0..n)
        .map(|i| if i % 2 == 0 { 0.125 } else { -0.125 })
        .collect();
    let r = norm2(&center) / 2f64.sqrt();
    let base = SyntheticOracle::new(Objective::Distance { center }, 1.0)?;
    let m2 = ValueOracle::lipschitz(&base);
    let p = choose_smoothing_params(eps, m2, None, r, n, FeedbackKind::DoubleSmoothed)?;
    let delta = factor * p.delta_max;
    let oracle = base.with_perturbation(Perturbation::Tracking, delta)?;
    let m_eff = surrogate_second_moment(&oracle, &p, 2.0)?.sqrt();
    let iters = required_iterations(m_eff, r, eps)?;
    let geo = ProxGeometry::euclidean(n)?;
    let cfg = SolverConfig::new(iters, r, seed).with_trace((iters / 100).max(1), false);
    let rec = run_zeroth_order(&oracle, &geo, &cfg, &p)?;
    let late = rec
        .gap_trace
        .iter()
        .filter(|s| 2 * s.step >= iters)
        .map(|s| s.gap)
        .fold(f64::INFINITY, f64::min);
    Ok(DoubleSmoothingSummary {
        eps,
        delta,
        delta_max: p.delta_max,
        iterations: iters,
        final_gap: rec.final_gap.expect("distance objective has an optimum"),
        late_min_gap: late,
    })
}

pub(super) fn criterion_double_smoothing() -> Result<(bool, String)> {
    let eps = 0.1;
    let seeds = 20;
    let runs = |factor: f64| -> Result<Vec<DoubleSmoothingSummary>> {
        (0..seeds)
            .into_par_iter()
            .map(|s| double_smoothing_stall(eps, factor, 700 + s))
            .collect()
    };
    let good = runs(1.0)?;
    let bad = runs(100.0)?;
    let good_gap = median(&good.iter().map(|s| s.final_gap).collect::<Vec<_>>());
    let bad_late = median(&bad.iter().map(|s| s.late_min_gap).collect::<Vec<_>>());
    Ok((
        good_gap <= eps && bad_late > eps,
        format!(
            "delta_max={:.3e}: median gap {:.3e} (N={}); 100x: median late gap {:.3e} (N={})",
            good[0].delta_max, good_gap, good[0].iterations, bad_late, bad[0].iterations
        ),
    ))
}
