//! The acceptance experiments: one function per criterion, each returning a
//! [`CriterionReport`] with the measured quantities in `detail`.
//!
//! Every experiment is seeded; rerunning gives the same report up to timing.

mod bandit;
mod smd;
mod traffic;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bandit::{casino_regret, gumbel_moments, CasinoSummary, GumbelSummary};
pub use smd::{
    calls_to_reach, directional_unbiasedness, double_smoothing_stall, median_gap,
    parallel_confidence, quadratic_oracle, reference_problem, reference_smoothing, simplex_oracle,
    simplex_rate, sphere_moments, strongly_convex_rate, zeroth_order_scaling,
    DoubleSmoothingSummary, RatePoint, ScalingSummary, ZoProblem,
};
pub use traffic::{duality_and_chain, reference_optimum, traffic_equilibria};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_secs: f64,
    pub time_limit_secs: f64,
}

impl CriterionReport {
    pub fn within_time(&self) -> bool {
        self.elapsed_secs <= self.time_limit_secs
    }

    /// One summary line, `PASS`/`FAIL` first.
    pub fn line(&self) -> String {
        let verdict = if self.passed && self.within_time() {
            "PASS"
        } else {
            "FAIL"
        };
        format!(
            "{verdict} [{:>2}] {:<28} {:>7.2}s (limit {:>4.0}s)  {}",
            self.id, self.name, self.elapsed_secs, self.time_limit_secs, self.detail
        )
    }
}

/// `(id, name, time limit in seconds)` of every criterion.
pub const CRITERIA: [(usize, &str, f64); 11] = [
    (1, "smd-simplex-rate", 10.0),
    (2, "smd-strongly-convex", 10.0),
    (3, "parallel-aggregation", 120.0),
    (4, "directional-unbiasedness", 5.0),
    (5, "sphere-moments", 30.0),
    (6, "zeroth-order-scaling", 120.0),
    (7, "double-smoothing", 60.0),
    (8, "exp-weights-regret", 10.0),
    (9, "traffic-equilibria", 60.0),
    (10, "duality-and-chain", 120.0),
    (11, "gumbel-sampler", 5.0),
];

/// Runs criterion `id` (1 to 11).
pub fn run_criterion(id: usize) -> Result<CriterionReport> {
    let (_, name, limit) = CRITERIA
        .iter()
        .find(|(i, _, _)| *i == id)
        .ok_or_else(|| Error::Config(format!("no criterion {id}; valid ids are 1 to 11")))?;
    let started = Instant::now();
    let (passed, detail) = match id {
        1 => smd::criterion_simplex_rate()?,
        2 => smd::criterion_strongly_convex()?,
        3 => smd::criterion_parallel()?,
        4 => smd::criterion_unbiasedness()?,
        5 => smd::criterion_sphere_moments()?,
        6 => smd::criterion_scaling()?,
        7 => smd::criterion_double_smoothing()?,
        8 => bandit::criterion_casino()?,
        9 => traffic::criterion_equilibria()?,
        10 => traffic::criterion_duality()?,
        _ => bandit::criterion_gumbel()?,
    };
    Ok(CriterionReport {
        id,
        name: name.to_string(),
        passed,
        detail,
        elapsed_secs: started.elapsed().as_secs_f64(),
        time_limit_secs: *limit,
    })
}

/// Runs every criterion in order; errors are reported as failures.
pub fn run_all() -> Vec<CriterionReport> {
    CRITERIA
        .iter()
        .map(|(id, name, limit)| {
            run_criterion(*id).unwrap_or_else(|e| CriterionReport {
                id: *id,
                name: name.to_string(),
                passed: false,
                detail: format!("error: {e}"),
                elapsed_secs: 0.0,
                time_limit_secs: *limit,
            })
        })
        .collect()
}
