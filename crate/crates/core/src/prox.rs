//! Prox geometries, Bregman divergences and the mirror step.
//!
//! Two setups are supported, matching the two classical distance-generating
//! functions:
//!
//! * entropic on the probability simplex (`p = 1`):
//!   `d(x) = ln n + sum x_k ln x_k`, `V(x, y) = sum x_k ln(x_k / y_k)`;
//! * Euclidean (`p = 2`): `d(x) = 1/2 ||x - x0||^2`, `V(x, y) = 1/2 ||x - y||^2`,
//!   either on all of `R^n` or restricted to the simplex.
//!
//! All functions are pure.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

/// Absolute feasibility tolerance for simplex membership.
pub const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryKind {
    EntropicSimplex,
    EuclideanFree,
    EuclideanSimplex,
}

/// A prox setup: the feasible set, its norm and the prox-function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxGeometry {
    kind: GeometryKind,
    dim: usize,
}

impl ProxGeometry {
    pub fn new(kind: GeometryKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("geometry dimension must be positive".into()));
        }
        Ok(Self { kind, dim })
    }

    pub fn entropic(dim: usize) -> Result<Self> {
        Self::new(GeometryKind::EntropicSimplex, dim)
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(GeometryKind::EuclideanFree, dim)
    }

    pub fn euclidean_simplex(dim: usize) -> Result<Self> {
        Self::new(GeometryKind::EuclideanSimplex, dim)
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_euclidean(&self) -> bool {
        !matches!(self.kind, GeometryKind::EntropicSimplex)
    }

    pub fn is_simplex(&self) -> bool {
        !matches!(self.kind, GeometryKind::EuclideanFree)
    }

    /// Norm exponent `p` of the primal space.
    pub fn norm_exponent(&self) -> f64 {
        match self.kind {
            GeometryKind::EntropicSimplex => 1.0,
            _ => 2.0,
        }
    }

    /// Conjugate exponent `q`, `1/p + 1/q = 1`.
    pub fn dual_exponent(&self) -> f64 {
        match self.kind {
            GeometryKind::EntropicSimplex => f64::INFINITY,
            _ => 2.0,
        }
    }

    pub fn primal_norm(&self, v: &[f64]) -> f64 {
        match self.kind {
            GeometryKind::EntropicSimplex => v.iter().map(|x| x.abs()).sum(),
            _ => crate::stats::norm2(v),
        }
    }

    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        match self.kind {
            GeometryKind::EntropicSimplex => crate::stats::norm_inf(v),
            _ => crate::stats::norm2(v),
        }
    }

    /// The prox center `x0` where `d(x0) = 0`: the barycenter of the simplex
    /// or the origin of `R^n`.
    pub fn start_point(&self) -> Vec<f64> {
        match self.kind {
            GeometryKind::EuclideanFree => vec![0.0; self.dim],
            _ => vec![1.0 / self.dim as f64; self.dim],
        }
    }

    fn sum_tolerance(&self) -> f64 {
        FEASIBILITY_TOL.max(4.0 * self.dim as f64 * f64::EPSILON)
    }

    /// Membership test for the feasible set, naming the violated constraint.
    pub fn check_feasible(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Domain(format!(
                "point has length {} but the geometry has dimension {}",
                x.len(),
                self.dim
            )));
        }
        check_finite(x, "x")?;
        if self.is_simplex() {
            if let Some(i) = x.iter().position(|&xi| xi < 0.0) {
                return Err(Error::Domain(format!(
                    "nonnegativity violated: x[{i}] = {} < 0",
                    x[i]
                )));
            }
            let s: f64 = x.iter().sum();
            if (s - 1.0).abs() > self.sum_tolerance() {
                return Err(Error::Domain(format!(
                    "unit-sum violated: sum of coordinates is {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.check_feasible(x).is_ok()
    }

    /// The prox-function `d(x)`; zero at [`start_point`](Self::start_point).
    pub fn prox_value(&self, x: &[f64]) -> Result<f64> {
        self.check_feasible(x)?;
        let v = match self.kind {
            GeometryKind::EntropicSimplex => {
                (self.dim as f64).ln() + x.iter().map(|&xi| xlogx(xi)).sum::<f64>()
            }
            _ => {
                let c = self.start_point();
                0.5 * x
                    .iter()
                    .zip(&c)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            }
        };
        Ok(v.max(0.0))
    }

    /// Bregman divergence `V(x, y)` induced by the prox-function.
    pub fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_feasible(x)?;
        self.check_feasible(y)?;
        let v = match self.kind {
            GeometryKind::EntropicSimplex => {
                if let Some(i) = y.iter().position(|&yi| yi <= 0.0) {
                    return Err(Error::Domain(format!(
                        "entropic divergence needs a strictly positive second argument, y[{i}] = {}",
                        y[i]
                    )));
                }
                x.iter()
                    .zip(y)
                    .map(|(&a, &b)| if a > 0.0 { a * (a / b).ln() } else { 0.0 })
                    .sum::<f64>()
            }
            _ => 0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
        };
        Ok(v.max(0.0))
    }

    /// `Mirr_x(h v) = argmin_z { <h v, z - x> + V(z, x) }` over the feasible set.
    pub fn mirror_step(&self, x: &[f64], v: &[f64], h: f64) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::Input(format!(
                "direction has length {} but the geometry has dimension {}",
                v.len(),
                self.dim
            )));
        }
        if v.iter().any(|vi| vi.is_nan()) {
            return Err(Error::Input("direction contains NaN".into()));
        }
        check_finite(v, "v")?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Input(format!("step size must be positive, got {h}")));
        }
        self.check_feasible(x)?;
        Ok(match self.kind {
            GeometryKind::EntropicSimplex => entropic_step(x, v, h),
            GeometryKind::EuclideanFree => x.iter().zip(v).map(|(a, b)| a - h * b).collect(),
            GeometryKind::EuclideanSimplex => {
                let y: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - h * b).collect();
                project_simplex(&y)
            }
        })
    }
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Multiplicative update `z_i ∝ x_i exp(-h v_i)`, evaluated in the log domain
/// with the maximum exponent subtracted and a single renormalization.
pub(crate) fn entropic_step(x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    let logits: Vec<f64> = x
        .iter()
        .zip(v)
        .map(|(&xi, &vi)| {
            if xi > 0.0 {
                xi.ln() - h * vi
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z: Vec<f64> = logits.iter().map(|&a| (a - m).exp()).collect();
    let s: f64 = z.iter().sum();
    for zi in &mut z {
        *zi /= s;
    }
    z
}

/// Euclidean projection onto the probability simplex by sorting and
/// thresholding.
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    let mut z: Vec<f64> = y.iter().map(|&yi| (yi - theta).max(0.0)).collect();
    let s: f64 = z.iter().sum();
    if s > 0.0 {
        for zi in &mut z {
            *zi /= s;
        }
    }
    z
}
