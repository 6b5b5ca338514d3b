//! Gradient-free mirror descent.
//!
//! The stochastic gradient of [`crate::smd`] is replaced by a surrogate built
//! from function values along random directions `e`:
//!
//! | feedback        | surrogate                                                   | calls |
//! |-----------------|-------------------------------------------------------------|-------|
//! | one-point       | `(n/tau) f(x + tau e) e`                                    | 1     |
//! | two-point       | `(n/tau) (f(x + tau e) - f(x)) e`                           | 2     |
//! | directional     | `n <grad f(x, xi), e> e`                                    | 1     |
//! | double-smoothed | `(n/tau2) (f(x + tau1 u + tau2 e) - f(x + tau1 u)) e`       | 2     |
//!
//! Two-call surrogates evaluate both points under the same noise realization
//! by replaying the random stream.

pub mod oracle;
pub mod sphere;

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::prox::ProxGeometry;
use crate::rng::{seeded, SimRng};
use crate::smd::{drive, GapProbe, RunRecord, Schedule, SolverConfig, StepRule, StochasticOracle};

pub use oracle::{Objective, Perturbation, SyntheticOracle, ValueOracle};
pub use sphere::{
    q_norm, sample_ball, sample_coordinate, sample_sphere, sphere_mixed_moment_bound,
    sphere_norm_moment_bound, DirectionSampler,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackKind {
    OnePoint,
    TwoPoint,
    Directional,
    DoubleSmoothed,
}

impl FeedbackKind {
    pub fn calls_per_step(&self) -> u64 {
        match self {
            FeedbackKind::OnePoint | FeedbackKind::Directional => 1,
            FeedbackKind::TwoPoint | FeedbackKind::DoubleSmoothed => 2,
        }
    }
}

/// Where the second probe of the double-smoothed surrogate sits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecondProbe {
    /// `x + tau1 u`: both probes share the outer ball offset.
    #[default]
    OuterOffset,
    /// `x + tau2 u`, the literal printed form of the construction.
    InnerOffset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub feedback: FeedbackKind,
    /// Smoothing radius `tau`, or the outer radius `tau1` when double smoothing.
    pub tau: f64,
    /// Inner radius `tau2` of double smoothing.
    pub tau_inner: Option<f64>,
    /// Admissible level of non-random noise.
    pub delta_max: f64,
    pub second_probe: SecondProbe,
    pub directions: DirectionSampler,
}

impl SmoothingParams {
    pub fn validate(&self) -> Result<()> {
        check_positive(self.tau, "tau")?;
        if self.feedback == FeedbackKind::DoubleSmoothed {
            let inner = self
                .tau_inner
                .ok_or_else(|| Error::Config("double smoothing needs tau2".into()))?;
            check_positive(inner, "tau2")?;
            if inner > self.tau {
                return Err(Error::Config(format!(
                    "double smoothing needs tau1 >= tau2, got tau1 = {}, tau2 = {inner}",
                    self.tau
                )));
            }
        }
        Ok(())
    }

    pub fn with_second_probe(mut self, probe: SecondProbe) -> Self {
        self.second_probe = probe;
        self
    }

    pub fn with_directions(mut self, directions: DirectionSampler) -> Self {
        self.directions = directions;
        self
    }
}

/// Smoothing radii and admissible noise for a target accuracy `eps`.
///
/// * two-point: `tau = min{max{eps/(2 M2), sqrt(eps/L2)}, (M2/L2) sqrt(1/(6n))}`,
///   `delta <= eps^{3/2} / (16 R sqrt(L2 n))`; needs `L2`.
/// * double-smoothed: `tau1 = eps/(4 M2)`, `tau2 = eps/(4 M2 n)`,
///   `delta <= eps^2 / (56 M2 R n^{3/2})`.
/// * one-point: `tau = eps/(2 M2)` (a heuristic default), with the two-point
///   form `eps tau / (16 R sqrt n)` for `delta`.
/// * directional: no smoothing radius is used; `tau = eps/(2 M2)` is stored
///   only to keep the parameters well formed, and `delta_max = 0`.
pub fn choose_smoothing_params(
    eps: f64,
    m2: f64,
    l2: Option<f64>,
    r: f64,
    n: usize,
    feedback: FeedbackKind,
) -> Result<SmoothingParams> {
    check_positive(eps, "eps")?;
    check_positive(m2, "M2")?;
    check_positive(r, "R")?;
    if n == 0 {
        return Err(Error::Input("dimension must be positive".into()));
    }
    let nf = n as f64;
    let base = SmoothingParams {
        feedback,
        tau: eps / (2.0 * m2),
        tau_inner: None,
        delta_max: 0.0,
        second_probe: SecondProbe::default(),
        directions: DirectionSampler::default(),
    };
    let params = match feedback {
        FeedbackKind::TwoPoint => {
            let l2 = l2.ok_or_else(|| {
                Error::Config(
                    "two-point smoothing needs the gradient Lipschitz constant L2; \
                     use double smoothing for nonsmooth objectives"
                        .into(),
                )
            })?;
            check_positive(l2, "L2")?;
            let tau = (eps / (2.0 * m2))
                .max((eps / l2).sqrt())
                .min((m2 / l2) * (1.0 / (6.0 * nf)).sqrt());
            SmoothingParams {
                tau,
                delta_max: eps.powf(1.5) / (16.0 * r * (l2 * nf).sqrt()),
                ..base
            }
        }
        FeedbackKind::DoubleSmoothed => SmoothingParams {
            tau: eps / (4.0 * m2),
            tau_inner: Some(eps / (4.0 * m2 * nf)),
            delta_max: eps * eps / (56.0 * m2 * r * nf.powf(1.5)),
            ..base
        },
        FeedbackKind::OnePoint => SmoothingParams {
            delta_max: eps * base.tau / (16.0 * r * nf.sqrt()),
            ..base
        },
        FeedbackKind::Directional => base,
    };
    Ok(params)
}

fn check_direction(e: &[f64], n: usize) -> Result<()> {
    if e.len() != n {
        return Err(Error::Input(format!(
            "direction has length {}, expected {n}",
            e.len()
        )));
    }
    let norm = crate::stats::norm2(e);
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Input(format!(
            "direction must be a unit vector, |e| = {norm}"
        )));
    }
    Ok(())
}

fn probe_point<O: ValueOracle + ?Sized>(oracle: &O, point: Vec<f64>) -> Result<Vec<f64>> {
    if !oracle.contains(&point) {
        return Err(Error::Domain(
            "probe point leaves the oracle's domain; shrink tau".into(),
        ));
    }
    Ok(point)
}

fn offset(x: &[f64], terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = x.to_vec();
    for (scale, dir) in terms {
        for (o, d) in out.iter_mut().zip(dir.iter()) {
            *o += scale * d;
        }
    }
    out
}

fn scaled(e: &[f64], factor: f64) -> Vec<f64> {
    e.iter().map(|v| factor * v).collect()
}

/// Two oracle calls under one noise realization: the stream is cloned before
/// the first call and the second call replays it.
fn paired_values<O: ValueOracle + ?Sized>(
    oracle: &O,
    first: &[f64],
    second: &[f64],
    rng: &mut SimRng,
) -> (f64, f64) {
    let replay = rng.clone();
    let a = oracle.value(first, rng);
    let mut replay = replay;
    let b = oracle.value(second, &mut replay);
    (a, b)
}

/// `(n/tau) f(x + tau e, xi) e`; one oracle call.
pub fn one_point_gradient<O: ValueOracle + ?Sized>(
    oracle: &O,
    x: &[f64],
    tau: f64,
    e: &[f64],
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    let n = oracle.dim();
    check_positive(tau, "tau")?;
    check_direction(e, n)?;
    let p = probe_point(oracle, offset(x, &[(tau, e)]))?;
    let v = oracle.value(&p, rng);
    Ok(scaled(e, n as f64 / tau * v))
}

/// `(n/tau) (f(x + tau e, xi) - f(x, xi)) e`; two oracle calls, common noise.
pub fn two_point_gradient<O: ValueOracle + ?Sized>(
    oracle: &O,
    x: &[f64],
    tau: f64,
    e: &[f64],
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    let n = oracle.dim();
    check_positive(tau, "tau")?;
    check_direction(e, n)?;
    let p = probe_point(oracle, offset(x, &[(tau, e)]))?;
    let base = probe_point(oracle, x.to_vec())?;
    let (hi, lo) = paired_values(oracle, &p, &base, rng);
    Ok(scaled(e, n as f64 / tau * (hi - lo)))
}

/// `n <g, e> e` for a given gradient realization `g`.
pub fn project_on_direction(g: &[f64], e: &[f64]) -> Vec<f64> {
    let n = g.len() as f64;
    scaled(e, n * crate::stats::dot(g, e))
}

/// `n <grad f(x, xi), e> e`; one gradient-oracle call.
pub fn directional_gradient<O: StochasticOracle + ?Sized>(
    oracle: &O,
    x: &[f64],
    e: &[f64],
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    check_direction(e, oracle.dim())?;
    let g = oracle.grad(x, rng);
    Ok(project_on_direction(&g, e))
}

/// `(n/tau2) (f(x + tau1 u + tau2 e) - f(x + s u)) e` with `u` in the unit
/// ball, `e` on the unit sphere and `s = tau1` (default) or `s = tau2`.
#[allow(clippy::too_many_arguments)]
pub fn double_smoothed_gradient<O: ValueOracle + ?Sized>(
    oracle: &O,
    x: &[f64],
    tau1: f64,
    tau2: f64,
    ball: &[f64],
    e: &[f64],
    second_probe: SecondProbe,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    let n = oracle.dim();
    check_positive(tau1, "tau1")?;
    check_positive(tau2, "tau2")?;
    check_direction(e, n)?;
    if ball.len() != n || crate::stats::norm2(ball) > 1.0 + 1e-12 {
        return Err(Error::Input("ball offset must lie in the unit ball".into()));
    }
    let shift = match second_probe {
        SecondProbe::OuterOffset => tau1,
        SecondProbe::InnerOffset => tau2,
    };
    let hi = probe_point(oracle, offset(x, &[(tau1, ball), (tau2, e)]))?;
    let lo = probe_point(oracle, offset(x, &[(shift, ball)]))?;
    let (a, b) = paired_values(oracle, &hi, &lo, rng);
    Ok(scaled(e, n as f64 / tau2 * (a - b)))
}

/// Bound `M_eff^2` on the second moment of the surrogate in the geometry's
/// dual norm; it sets the step `h = (R / M_eff) sqrt(2/N)`.
///
/// With `a = E||e||_q^2` and `b = E[<c,e>^2 ||e||_q^2] / ||c||^2`:
///
/// * directional: `n^2 b M2^2`;
/// * two-point: `3/4 n^2 tau^2 L2^2 a + 3 n^2 b M2^2 + 12 delta^2 n^2 a / tau^2`;
/// * double-smoothed: the two-point bound with `tau = tau2` and `L2` replaced
///   by `sqrt(n) M2 / tau1`, the smoothness of the ball-smoothed objective;
/// * one-point: `n^2 B^2 a / tau^2`.
pub fn surrogate_second_moment<O: ValueOracle + ?Sized>(
    oracle: &O,
    params: &SmoothingParams,
    dual_exponent: f64,
) -> Result<f64> {
    let n = oracle.dim();
    let nf = n as f64;
    let a = params.directions.norm_moment(n, dual_exponent);
    let b = params.directions.mixed_moment(n, dual_exponent);
    let m2 = oracle.lipschitz();
    let delta = oracle.noise_level();
    let two_point = |tau: f64, l2: f64| {
        0.75 * nf * nf * tau * tau * l2 * l2 * a
            + 3.0 * nf * nf * b * m2 * m2
            + 12.0 * delta * delta * nf * nf * a / (tau * tau)
    };
    Ok(match params.feedback {
        FeedbackKind::Directional => nf * nf * b * m2 * m2,
        FeedbackKind::TwoPoint => {
            let l2 = oracle.smoothness().ok_or_else(|| {
                Error::Config("two-point feedback needs an L2-smooth oracle".into())
            })?;
            two_point(params.tau, l2)
        }
        FeedbackKind::DoubleSmoothed => {
            let tau2 = params.tau_inner.unwrap_or(params.tau);
            two_point(tau2, nf.sqrt() * m2 / params.tau)
        }
        FeedbackKind::OnePoint => {
            let bnd = oracle.value_bound().ok_or_else(|| {
                Error::Config("one-point feedback needs a bound B on |f(x, xi)|".into())
            })?;
            nf * nf * bnd * bnd * a / (params.tau * params.tau)
        }
    })
}

/// Fixed-step mirror descent driven by a gradient-free surrogate.
pub fn run_zeroth_order<O: ValueOracle + ?Sized>(
    oracle: &O,
    geometry: &ProxGeometry,
    config: &SolverConfig,
    smoothing: &SmoothingParams,
) -> Result<RunRecord> {
    config.validate()?;
    smoothing.validate()?;
    if config.step_rule != StepRule::Fixed {
        return Err(Error::Config(
            "step_rule: gradient-free runs use the fixed step".into(),
        ));
    }
    let n = oracle.dim();
    if n != geometry.dim() {
        return Err(Error::Config(format!(
            "oracle dimension {n} does not match geometry dimension {}",
            geometry.dim()
        )));
    }
    let grad_oracle = match smoothing.feedback {
        FeedbackKind::Directional => Some(oracle.gradient_oracle().ok_or_else(|| {
            Error::Config("directional feedback needs an oracle with gradient access".into())
        })?),
        _ => None,
    };
    let m_eff = surrogate_second_moment(oracle, smoothing, geometry.dual_exponent())?.sqrt();
    check_positive(m_eff, "surrogate moment bound")?;
    let h = crate::smd::fixed_step(m_eff, config.radius, config.iterations);
    let value = |x: &[f64]| oracle.true_value(x);
    let probe = GapProbe {
        value: &value,
        optimum: oracle.optimal_value(),
    };
    let mut rng = seeded(config.seed);
    let directions = smoothing.directions;
    drive(
        geometry,
        config,
        Schedule::Fixed(h),
        smoothing.feedback.calls_per_step(),
        &probe,
        &mut rng,
        |x, rng| {
            let e = directions.sample(n, rng)?;
            match smoothing.feedback {
                FeedbackKind::OnePoint => one_point_gradient(oracle, x, smoothing.tau, &e, rng),
                FeedbackKind::TwoPoint => two_point_gradient(oracle, x, smoothing.tau, &e, rng),
                FeedbackKind::Directional => {
                    directional_gradient(grad_oracle.expect("checked above"), x, &e, rng)
                }
                FeedbackKind::DoubleSmoothed => {
                    let ball = sample_ball(n, rng)?;
                    double_smoothed_gradient(
                        oracle,
                        x,
                        smoothing.tau,
                        smoothing.tau_inner.expect("validated"),
                        &ball,
                        &e,
                        smoothing.second_probe,
                        rng,
                    )
                }
            }
        },
    )
}
