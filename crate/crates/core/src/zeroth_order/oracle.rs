//! Zeroth-order (function value) oracles.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::rng::SimRng;
use crate::smd::{NoiseModel, NoiseSource, StochasticOracle};
use crate::stats::{dot, norm2};

/// Noisy function values `f(x, xi)` with `|E f(x, xi) - f(x)| <= delta`.
///
/// Implementations must consume the random stream identically at every
/// query point so that two calls replayed from the same stream state share
/// one noise realization.
pub trait ValueOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64], rng: &mut SimRng) -> f64;

    /// Level `delta` of the non-random perturbation.
    fn noise_level(&self) -> f64 {
        0.0
    }

    /// `B` with `E |f(x, xi)|^2 <= B^2`.
    fn value_bound(&self) -> Option<f64> {
        None
    }

    /// `M_2`, the second-moment bound of stochastic gradients in the 2-norm.
    fn lipschitz(&self) -> f64;

    /// `L_2`, the Lipschitz constant of the gradient.
    fn smoothness(&self) -> Option<f64> {
        None
    }

    /// Membership in the (enlarged) domain on which the oracle is defined.
    fn contains(&self, _x: &[f64]) -> bool {
        true
    }

    /// Gradient access for directional feedback.
    fn gradient_oracle(&self) -> Option<&dyn StochasticOracle> {
        None
    }

    fn true_value(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    fn optimal_value(&self) -> Option<f64> {
        None
    }
}

/// Objectives with closed-form values, gradients and optima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Objective {
    /// `1/2 ||x - center||^2`.
    Quadratic { center: Vec<f64> },
    /// `||x - center||_2`.
    Distance { center: Vec<f64> },
    /// `<costs, x>`; its optimum is only meaningful on the simplex.
    Linear { costs: Vec<f64> },
}

impl Objective {
    pub fn dim(&self) -> usize {
        match self {
            Objective::Quadratic { center } | Objective::Distance { center } => center.len(),
            Objective::Linear { costs } => costs.len(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Objective::Quadratic { center } => {
                0.5 * x
                    .iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            }
            Objective::Distance { center } => x
                .iter()
                .zip(center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            Objective::Linear { costs } => dot(costs, x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Objective::Quadratic { center } => x.iter().zip(center).map(|(a, b)| a - b).collect(),
            Objective::Distance { center } => {
                let d: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let r = norm2(&d);
                if r > 0.0 {
                    d.into_iter().map(|v| v / r).collect()
                } else {
                    vec![0.0; d.len()]
                }
            }
            Objective::Linear { costs } => costs.clone(),
        }
    }

    /// Minimum over `R^n` (quadratic, distance) or over the simplex (linear).
    pub fn optimum(&self) -> f64 {
        match self {
            Objective::Linear { costs } => costs.iter().cloned().fold(f64::INFINITY, f64::min),
            _ => 0.0,
        }
    }
}

/// Deterministic perturbation of level `delta` added to every function value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Perturbation {
    None,
    /// `+delta` everywhere.
    Shift,
    /// `delta sin(frequency * sum x_i)`.
    Oscillating {
        frequency: f64,
    },
    /// An adversary that remembers the previous query point `z'` and returns
    /// `delta sign(<z' - z, z - x_*>)`, i.e. it reads the probe direction off
    /// consecutive queries and pushes finite differences away from the
    /// minimizer.
    Tracking,
}

/// A synthetic [`ValueOracle`] (and gradient oracle) around an [`Objective`].
///
/// Values are `f(x) + xi + p(x)` with `xi` zero-mean noise and `p` the
/// perturbation. Gradients are `grad f(x) + xi'` with independent noise.
#[derive(Debug)]
pub struct SyntheticOracle {
    objective: Objective,
    value_noise: NoiseSource,
    grad_noise: NoiseSource,
    perturbation: Perturbation,
    delta: f64,
    domain_radius: f64,
    last_query: Mutex<Option<Vec<f64>>>,
}

impl Clone for SyntheticOracle {
    fn clone(&self) -> Self {
        Self {
            objective: self.objective.clone(),
            value_noise: self.value_noise,
            grad_noise: self.grad_noise,
            perturbation: self.perturbation,
            delta: self.delta,
            domain_radius: self.domain_radius,
            last_query: Mutex::new(None),
        }
    }
}

impl SyntheticOracle {
    /// `domain_radius` bounds `||x - x_*||` over the region of interest; it
    /// enters `M_2` and `B`.
    pub fn new(objective: Objective, domain_radius: f64) -> Result<Self> {
        if objective.dim() == 0 {
            return Err(Error::Input("objective has dimension 0".into()));
        }
        check_positive(domain_radius, "domain radius")?;
        Ok(Self {
            objective,
            value_noise: NoiseSource::none(),
            grad_noise: NoiseSource::none(),
            perturbation: Perturbation::None,
            delta: 0.0,
            domain_radius,
            last_query: Mutex::new(None),
        })
    }

    pub fn with_value_noise(mut self, noise: NoiseSource) -> Self {
        self.value_noise = noise;
        self
    }

    pub fn with_gradient_noise(mut self, noise: NoiseSource) -> Self {
        self.grad_noise = noise;
        self
    }

    pub fn with_perturbation(mut self, perturbation: Perturbation, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Input(format!(
                "perturbation level must be nonnegative, got {delta}"
            )));
        }
        self.perturbation = perturbation;
        self.delta = if matches!(perturbation, Perturbation::None) {
            0.0
        } else {
            delta
        };
        Ok(self)
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    fn minimizer(&self) -> Option<&[f64]> {
        match &self.objective {
            Objective::Quadratic { center } | Objective::Distance { center } => Some(center),
            Objective::Linear { .. } => None,
        }
    }

    fn perturbation_at(&self, x: &[f64]) -> f64 {
        match self.perturbation {
            Perturbation::None => 0.0,
            Perturbation::Shift => self.delta,
            Perturbation::Oscillating { frequency } => {
                self.delta * (frequency * x.iter().sum::<f64>()).sin()
            }
            Perturbation::Tracking => {
                let mut last = self.last_query.lock().expect("query memory poisoned");
                let out = match (last.as_deref(), self.minimizer()) {
                    (Some(prev), Some(star)) => {
                        let s: f64 = prev
                            .iter()
                            .zip(x)
                            .zip(star)
                            .map(|((p, z), c)| (p - z) * (z - c))
                            .sum();
                        if s > 0.0 {
                            self.delta
                        } else if s < 0.0 {
                            -self.delta
                        } else {
                            0.0
                        }
                    }
                    _ => 0.0,
                };
                *last = Some(x.to_vec());
                out
            }
        }
    }
}

impl ValueOracle for SyntheticOracle {
    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn value(&self, x: &[f64], rng: &mut SimRng) -> f64 {
        self.objective.value(x) + self.value_noise.sample(rng) + self.perturbation_at(x)
    }

    fn noise_level(&self) -> f64 {
        self.delta
    }

    fn value_bound(&self) -> Option<f64> {
        let r = self.domain_radius;
        let fmax = match &self.objective {
            Objective::Quadratic { .. } => 0.5 * r * r,
            Objective::Distance { .. } => r,
            Objective::Linear { costs } => norm2(costs) * r + self.objective.optimum().abs(),
        };
        Some(fmax + self.delta + self.value_noise.variance().sqrt())
    }

    fn lipschitz(&self) -> f64 {
        let g = match &self.objective {
            Objective::Quadratic { .. } => self.domain_radius,
            Objective::Distance { .. } => 1.0,
            Objective::Linear { costs } => norm2(costs),
        };
        g + (ValueOracle::dim(self) as f64 * self.grad_noise.variance()).sqrt()
    }

    fn smoothness(&self) -> Option<f64> {
        match &self.objective {
            Objective::Quadratic { .. } => Some(1.0),
            Objective::Linear { .. } => Some(0.0),
            Objective::Distance { .. } => None,
        }
    }

    fn gradient_oracle(&self) -> Option<&dyn StochasticOracle> {
        Some(self)
    }

    fn true_value(&self, x: &[f64]) -> Option<f64> {
        Some(self.objective.value(x))
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(self.objective.optimum())
    }
}

impl StochasticOracle for SyntheticOracle {
    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn grad(&self, x: &[f64], rng: &mut SimRng) -> Vec<f64> {
        let mut g = self.objective.gradient(x);
        for gi in &mut g {
            *gi += self.grad_noise.sample(rng);
        }
        g
    }

    fn noise_model(&self) -> NoiseModel {
        self.grad_noise.model
    }

    fn second_moment_bound(&self) -> f64 {
        ValueOracle::lipschitz(self)
    }

    fn true_value(&self, x: &[f64]) -> Option<f64> {
        Some(self.objective.value(x))
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(self.objective.optimum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn value_bias_stays_within_delta() {
        let x = [0.3, -0.2];
        for p in [
            Perturbation::Shift,
            Perturbation::Oscillating { frequency: 7.0 },
        ] {
            let o = SyntheticOracle::new(
                Objective::Quadratic {
                    center: vec![0.0, 0.0],
                },
                1.0,
            )
            .unwrap()
            .with_value_noise(NoiseSource::new(NoiseModel::SubGaussian, 0.5).unwrap())
            .with_perturbation(p, 0.01)
            .unwrap();
            let mut rng = seeded(9);
            let draws: Vec<f64> = (0..100_000).map(|_| o.value(&x, &mut rng)).collect();
            let m = crate::stats::mean(&draws);
            let se = crate::stats::std_error(&draws);
            let f = o.objective().value(&x);
            assert!((m - f).abs() <= 0.01 + 3.0 * se, "{p:?}: {m} vs {f}");
        }
    }

    #[test]
    fn tracking_adversary_is_bounded() {
        let o = SyntheticOracle::new(
            Objective::Distance {
                center: vec![0.5, 0.5],
            },
            1.0,
        )
        .unwrap()
        .with_perturbation(Perturbation::Tracking, 0.1)
        .unwrap();
        let mut rng = seeded(1);
        for i in 0..100 {
            let x = [i as f64 * 0.01, 0.3];
            let v = o.value(&x, &mut rng);
            assert!((v - o.objective().value(&x)).abs() <= 0.1 + 1e-15);
        }
    }

    #[test]
    fn distance_gradient_is_unit() {
        let obj = Objective::Distance {
            center: vec![1.0, 1.0],
        };
        let g = obj.gradient(&[4.0, 5.0]);
        assert!((norm2(&g) - 1.0).abs() < 1e-15);
        assert_eq!(obj.gradient(&[1.0, 1.0]), vec![0.0, 0.0]);
    }
}
