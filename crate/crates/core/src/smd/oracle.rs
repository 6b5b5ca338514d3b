//! Stochastic first-order oracles and the synthetic problems used to
//! exercise the solvers.

use rand::Rng;
use rand_distr::{Distribution, Pareto, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::rng::SimRng;
use crate::stats::{dot, norm2};

/// Tail regime of the gradient noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NoiseModel {
    Bounded,
    SubGaussian,
    HeavyTail { alpha: f64 },
}

impl NoiseModel {
    pub fn label(&self) -> &'static str {
        match self {
            NoiseModel::Bounded => "bounded",
            NoiseModel::SubGaussian => "subgaussian",
            NoiseModel::HeavyTail { .. } => "heavy-tail",
        }
    }
}

/// Zero-mean scalar noise of a given model and scale.
///
/// * bounded: uniform on `[-s, s]`;
/// * sub-Gaussian: `N(0, s^2)`;
/// * heavy-tail: `s * r * P` with `r` a random sign and `P` Pareto with
///   minimum 1 and tail index `alpha`, so `P(|xi| > t) ~ t^-alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSource {
    pub model: NoiseModel,
    pub scale: f64,
}

impl NoiseSource {
    pub fn new(model: NoiseModel, scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::Input(format!(
                "noise scale must be nonnegative, got {scale}"
            )));
        }
        if let NoiseModel::HeavyTail { alpha } = model {
            if alpha.is_nan() || alpha <= 2.0 {
                return Err(Error::Input(format!(
                    "heavy-tail index must exceed 2 for a finite second moment, got {alpha}"
                )));
            }
        }
        Ok(Self { model, scale })
    }

    pub fn none() -> Self {
        Self {
            model: NoiseModel::Bounded,
            scale: 0.0,
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        match self.model {
            NoiseModel::Bounded => self.scale * rng.gen_range(-1.0..=1.0),
            NoiseModel::SubGaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.scale * z
            }
            NoiseModel::HeavyTail { alpha } => {
                let p = Pareto::new(1.0, alpha)
                    .expect("validated tail index")
                    .sample(rng);
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                self.scale * sign * p
            }
        }
    }

    pub fn variance(&self) -> f64 {
        let s2 = self.scale * self.scale;
        match self.model {
            NoiseModel::Bounded => s2 / 3.0,
            NoiseModel::SubGaussian => s2,
            NoiseModel::HeavyTail { alpha } => s2 * alpha / (alpha - 2.0),
        }
    }

    /// Almost-sure bound on `|xi|`, when one exists.
    pub fn abs_bound(&self) -> Option<f64> {
        match self.model {
            NoiseModel::Bounded => Some(self.scale),
            _ if self.scale == 0.0 => Some(0.0),
            _ => None,
        }
    }

    /// Upper bound on `sqrt(E ||xi||_q^2)` for a vector of `n` i.i.d. draws.
    fn vector_rms_bound(&self, n: usize, q: f64) -> f64 {
        let l2 = (n as f64 * self.variance()).sqrt();
        match self.abs_bound() {
            Some(b) if q.is_infinite() => b.min(l2),
            Some(b) => (b * (n as f64).sqrt()).min(l2),
            None => l2,
        }
    }

    fn fill(&self, out: &mut [f64], rng: &mut SimRng) {
        for o in out {
            *o += self.sample(rng);
        }
    }
}

/// Source of stochastic subgradients `grad_x f(x, xi)`.
pub trait StochasticOracle: Send + Sync {
    fn dim(&self) -> usize;

    /// One realization of the stochastic subgradient at `x`.
    fn grad(&self, x: &[f64], rng: &mut SimRng) -> Vec<f64>;

    fn noise_model(&self) -> NoiseModel;

    /// `M` with `E ||grad||_q^2 <= M^2`.
    fn second_moment_bound(&self) -> f64;

    /// Systematic bias level `delta`.
    fn bias(&self) -> f64 {
        0.0
    }

    /// Strong-convexity modulus in the 2-norm, if the objective has one.
    fn strong_convexity(&self) -> Option<f64> {
        None
    }

    /// Exact objective, for gap measurement on synthetic problems.
    fn true_value(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Exact optimal value over the feasible set.
    fn optimal_value(&self) -> Option<f64> {
        None
    }
}

/// `f(x) = <c, x>` on the simplex observed through `c + xi`, `xi` i.i.d. per
/// coordinate.
#[derive(Debug, Clone)]
pub struct LinearOracle {
    costs: Vec<f64>,
    noise: NoiseSource,
    moment_bound: f64,
}

impl LinearOracle {
    /// `dual_exponent` selects the norm in which `M` is declared (`inf` for
    /// the entropic setup, 2 for Euclidean).
    pub fn new(costs: Vec<f64>, noise: NoiseSource, dual_exponent: f64) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::Input("cost vector is empty".into()));
        }
        crate::error::check_finite(&costs, "costs")?;
        let n = costs.len();
        let c_norm = if dual_exponent.is_infinite() {
            crate::stats::norm_inf(&costs)
        } else {
            norm2(&costs)
        };
        // Minkowski: sqrt(E||c + xi||^2) <= ||c|| + sqrt(E||xi||^2)
        let moment_bound =
            (c_norm + noise.vector_rms_bound(n, dual_exponent)).max(f64::MIN_POSITIVE);
        Ok(Self {
            costs,
            noise,
            moment_bound,
        })
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }
}

impl StochasticOracle for LinearOracle {
    fn dim(&self) -> usize {
        self.costs.len()
    }

    fn grad(&self, _x: &[f64], rng: &mut SimRng) -> Vec<f64> {
        let mut g = self.costs.clone();
        self.noise.fill(&mut g, rng);
        g
    }

    fn noise_model(&self) -> NoiseModel {
        self.noise.model
    }

    fn second_moment_bound(&self) -> f64 {
        self.moment_bound
    }

    fn true_value(&self, x: &[f64]) -> Option<f64> {
        Some(dot(&self.costs, x))
    }

    fn optimal_value(&self) -> Option<f64> {
        self.costs.iter().cloned().reduce(f64::min)
    }
}

/// `f(x) = mu/2 ||x - c||^2` on `R^n`, observed through
/// `mu (x - c) + b + xi` where `b` is a constant bias of norm `delta / diameter`.
///
/// `domain_radius` bounds `||x - c||` over the region the iterates are
/// expected to visit and enters the declared `M`.
#[derive(Debug, Clone)]
pub struct QuadraticOracle {
    center: Vec<f64>,
    curvature: f64,
    noise: NoiseSource,
    bias_vec: Vec<f64>,
    delta: f64,
    moment_bound: f64,
}

impl QuadraticOracle {
    pub fn new(
        center: Vec<f64>,
        curvature: f64,
        noise: NoiseSource,
        domain_radius: f64,
    ) -> Result<Self> {
        check_positive(curvature, "curvature")?;
        check_positive(domain_radius, "domain radius")?;
        crate::error::check_finite(&center, "center")?;
        let n = center.len();
        if n == 0 {
            return Err(Error::Input("center is empty".into()));
        }
        let moment_bound = curvature * domain_radius + noise.vector_rms_bound(n, 2.0);
        Ok(Self {
            center,
            curvature,
            noise,
            bias_vec: vec![0.0; n],
            delta: 0.0,
            moment_bound,
        })
    }

    /// Adds a systematic bias with `||E grad - grad f||_2 = delta / diameter`.
    pub fn with_bias(mut self, delta: f64, diameter: f64) -> Result<Self> {
        check_positive(diameter, "diameter")?;
        if delta.is_nan() || delta < 0.0 {
            return Err(Error::Input(format!(
                "bias must be nonnegative, got {delta}"
            )));
        }
        let n = self.center.len();
        let magnitude = delta / diameter;
        let unit = 1.0 / (n as f64).sqrt();
        self.bias_vec = vec![magnitude * unit; n];
        self.moment_bound += magnitude;
        self.delta = delta;
        Ok(self)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }
}

impl StochasticOracle for QuadraticOracle {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn grad(&self, x: &[f64], rng: &mut SimRng) -> Vec<f64> {
        let mut g: Vec<f64> = x
            .iter()
            .zip(&self.center)
            .zip(&self.bias_vec)
            .map(|((xi, ci), bi)| self.curvature * (xi - ci) + bi)
            .collect();
        self.noise.fill(&mut g, rng);
        g
    }

    fn noise_model(&self) -> NoiseModel {
        self.noise.model
    }

    fn second_moment_bound(&self) -> f64 {
        self.moment_bound
    }

    fn bias(&self) -> f64 {
        self.delta
    }

    fn strong_convexity(&self) -> Option<f64> {
        Some(self.curvature)
    }

    fn true_value(&self, x: &[f64]) -> Option<f64> {
        let d2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Some(0.5 * self.curvature * d2)
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn mc_second_moment(oracle: &dyn StochasticOracle, x: &[f64], q: f64, draws: usize) -> f64 {
        let mut rng = seeded(42);
        let mut acc = 0.0;
        for _ in 0..draws {
            let g = oracle.grad(x, &mut rng);
            let nrm = if q.is_infinite() {
                crate::stats::norm_inf(&g)
            } else {
                norm2(&g)
            };
            acc += nrm * nrm;
        }
        acc / draws as f64
    }

    #[test]
    fn declared_moment_bounds_hold() {
        let costs: Vec<f64> = (0..10).map(|i| 0.05 * i as f64).collect();
        let x = vec![0.1; 10];
        for model in [
            NoiseModel::Bounded,
            NoiseModel::SubGaussian,
            NoiseModel::HeavyTail { alpha: 3.0 },
        ] {
            let o = LinearOracle::new(
                costs.clone(),
                NoiseSource::new(model, 0.2).unwrap(),
                f64::INFINITY,
            )
            .unwrap();
            let m = o.second_moment_bound();
            let est = mc_second_moment(&o, &x, f64::INFINITY, 10_000);
            assert!(est <= 1.05 * m * m, "{model:?}: {est} vs {}", m * m);
        }
        let q = QuadraticOracle::new(
            vec![1.0, -1.0, 0.5],
            1.0,
            NoiseSource::new(NoiseModel::Bounded, 0.3).unwrap(),
            2.0,
        )
        .unwrap();
        let m = q.second_moment_bound();
        let est = mc_second_moment(&q, &[0.0, 0.0, 0.0], 2.0, 10_000);
        assert!(est <= 1.05 * m * m);
    }

    #[test]
    fn noise_is_centered() {
        let mut rng = seeded(5);
        for model in [
            NoiseModel::Bounded,
            NoiseModel::SubGaussian,
            NoiseModel::HeavyTail { alpha: 3.0 },
        ] {
            let src = NoiseSource::new(model, 1.0).unwrap();
            let draws: Vec<f64> = (0..200_000).map(|_| src.sample(&mut rng)).collect();
            let m = crate::stats::mean(&draws);
            let se = crate::stats::std_error(&draws);
            assert!(m.abs() <= 4.0 * se, "{model:?}: mean {m}, se {se}");
        }
    }

    #[test]
    fn heavy_tail_requires_alpha_above_two() {
        assert!(NoiseSource::new(NoiseModel::HeavyTail { alpha: 2.0 }, 1.0).is_err());
    }

    #[test]
    fn bias_shifts_expected_gradient() {
        let q = QuadraticOracle::new(vec![0.0; 4], 1.0, NoiseSource::none(), 1.0)
            .unwrap()
            .with_bias(0.05, 2.0)
            .unwrap();
        let g = q.grad(&[0.0; 4], &mut seeded(0));
        assert!((norm2(&g) - 0.025).abs() < 1e-15);
        assert_eq!(q.bias(), 0.05);
    }
}
