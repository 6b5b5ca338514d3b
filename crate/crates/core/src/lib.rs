//! Stochastic mirror descent, gradient-free surrogates, online exp-weights and
//! a traffic-equilibrium layer built on the same prox machinery.

pub mod error;
pub mod experiments;
pub mod online;
pub mod prox;
pub mod rng;
pub mod smd;
pub mod stats;
pub mod traffic;
pub mod zeroth_order;

pub use error::{Error, Result};
pub use prox::{GeometryKind, ProxGeometry};
pub use rng::SimRng;
