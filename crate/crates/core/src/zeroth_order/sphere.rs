//! Random directions and the moment bounds of the uniform sphere measure.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// How smoothing directions are drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionSampler {
    /// Uniform on the Euclidean unit sphere.
    #[default]
    Sphere,
    /// A uniformly chosen standard basis vector.
    Coordinate,
}

impl DirectionSampler {
    pub fn sample(&self, n: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
        match self {
            DirectionSampler::Sphere => sample_sphere(n, rng),
            DirectionSampler::Coordinate => sample_coordinate(n, rng),
        }
    }

    /// Bound on `E ||e||_q^2`.
    pub fn norm_moment(&self, n: usize, q: f64) -> f64 {
        match self {
            DirectionSampler::Coordinate => 1.0,
            DirectionSampler::Sphere if n == 1 || q == 2.0 => 1.0,
            DirectionSampler::Sphere => sphere_norm_moment_bound(n, q),
        }
    }

    /// Bound on `E[<c, e>^2 ||e||_q^2] / ||c||_2^2`.
    pub fn mixed_moment(&self, n: usize, q: f64) -> f64 {
        match self {
            DirectionSampler::Coordinate => 1.0 / n as f64,
            DirectionSampler::Sphere if n == 1 || q == 2.0 => 1.0 / n as f64,
            DirectionSampler::Sphere => sphere_mixed_moment_bound(n, q),
        }
    }
}

/// Uniform point on the unit sphere of `R^n`, by normalizing a standard
/// Gaussian vector.
pub fn sample_sphere(n: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Input("sphere dimension must be at least 1".into()));
    }
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = crate::stats::norm2(&v);
        if norm > 1e-150 {
            for vi in &mut v {
                *vi /= norm;
            }
            return Ok(v);
        }
    }
}

/// Uniform point in the unit ball: a sphere point scaled by `U^{1/n}`.
pub fn sample_ball(n: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
    let mut v = sample_sphere(n, rng)?;
    let r = rng.gen::<f64>().powf(1.0 / n as f64);
    for vi in &mut v {
        *vi *= r;
    }
    Ok(v)
}

pub fn sample_coordinate(n: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Input("dimension must be at least 1".into()));
    }
    let mut v = vec![0.0; n];
    v[rng.gen_range(0..n)] = 1.0;
    Ok(v)
}

/// `||v||_q` for `q` in `[1, inf]`.
pub fn q_norm(v: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        crate::stats::norm_inf(v)
    } else if q == 2.0 {
        crate::stats::norm2(v)
    } else {
        v.iter().map(|x| x.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

fn log_branch(n: usize, a: f64, b: f64) -> f64 {
    a * (n as f64).ln() - b
}

/// `E ||e||_q^2 <= min{q - 1, 16 ln n - 8} n^{2/q - 1}`.
pub fn sphere_norm_moment_bound(n: usize, q: f64) -> f64 {
    let c = (q - 1.0).min(log_branch(n, 16.0, 8.0));
    c * (n as f64).powf(2.0 / q - 1.0)
}

/// `E[<c,e>^2 ||e||_q^2] <= sqrt(3) ||c||^2 min{2q - 1, 32 ln n - 8} n^{2/q - 2}`,
/// returned per unit `||c||_2^2`.
pub fn sphere_mixed_moment_bound(n: usize, q: f64) -> f64 {
    let c = (2.0 * q - 1.0).min(log_branch(n, 32.0, 8.0));
    3f64.sqrt() * c * (n as f64).powf(2.0 / q - 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn unit_norm() {
        let mut rng = seeded(1);
        for n in [1, 2, 5, 100] {
            for _ in 0..100 {
                let e = sample_sphere(n, &mut rng).unwrap();
                assert!((crate::stats::norm2(&e) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(sample_sphere(0, &mut seeded(0)).is_err());
    }

    #[test]
    fn one_dimensional_sphere_is_a_fair_sign() {
        let mut rng = seeded(2);
        let draws = 10_000;
        let plus = (0..draws)
            .filter(|_| {
                let e = sample_sphere(1, &mut rng).unwrap();
                assert!(e[0] == 1.0 || e[0] == -1.0);
                e[0] > 0.0
            })
            .count();
        assert!((plus as f64 / draws as f64 - 0.5).abs() <= 0.02);
    }

    #[test]
    fn directional_second_moment_is_norm_over_n() {
        let mut rng = seeded(3);
        let n = 100;
        let c: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
        let c2: f64 = c.iter().map(|x| x * x).sum();
        let draws: Vec<f64> = (0..20_000)
            .map(|_| {
                let e = sample_sphere(n, &mut rng).unwrap();
                crate::stats::dot(&c, &e).powi(2)
            })
            .collect();
        let m = crate::stats::mean(&draws);
        let se = crate::stats::std_error(&draws);
        assert!(m <= c2 / n as f64 + 3.0 * se, "{m} vs {}", c2 / n as f64);
    }

    #[test]
    fn sup_norm_moment_under_bound() {
        let mut rng = seeded(4);
        let n = 100;
        let m = crate::stats::mean(
            &(0..20_000)
                .map(|_| crate::stats::norm_inf(&sample_sphere(n, &mut rng).unwrap()).powi(2))
                .collect::<Vec<_>>(),
        );
        assert!(m <= (16.0 * (n as f64).ln() - 8.0) / n as f64);
    }

    #[test]
    fn ball_points_inside_unit_ball() {
        let mut rng = seeded(5);
        let mut radii = Vec::new();
        for _ in 0..20_000 {
            let b = sample_ball(3, &mut rng).unwrap();
            let r = crate::stats::norm2(&b);
            assert!(r <= 1.0);
            radii.push(r.powi(3));
        }
        // r^n is uniform on [0,1]
        assert!((crate::stats::mean(&radii) - 0.5).abs() < 0.01);
    }
}
