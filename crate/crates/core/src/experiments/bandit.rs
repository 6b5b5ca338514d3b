use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::online::{regret_bound, run_exp_weights, CasinoAdversary, CasinoPolicy, PlayMode};
use crate::rng::substream;
use crate::stats::{mean, std_error, variance};
use crate::traffic::gumbel_sample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasinoSummary {
    pub policy: String,
    pub bound: f64,
    pub expected_regret: f64,
    pub sampled_mean: f64,
    pub sampled_se: f64,
}

/// Exp-weights with `M = 1` against one casino policy for `steps` rounds:
/// the expected-mode regret of one run and the sampled-mode mean regret and
/// its standard error over `seeds` runs.
pub fn casino_regret(
    policy: &CasinoPolicy,
    steps: usize,
    seeds: usize,
    seed: u64,
) -> Result<CasinoSummary> {
    let run = |mode: PlayMode, s: u64| -> Result<f64> {
        let policy = match policy {
            CasinoPolicy::FairCoin { seed: coin } => CasinoPolicy::FairCoin { seed: coin + s },
            p => p.clone(),
        };
        let mut casino = CasinoAdversary::new(policy)?;
        let rec = run_exp_weights(&mut casino, 2, steps, 1.0, mode, &mut substream(seed, s))?;
        Ok(rec.regret.expect("steps > 0"))
    };
    let expected = run(PlayMode::Expected, 0)?;
    let sampled: Result<Vec<f64>> = (0..seeds as u64)
        .into_par_iter()
        .map(|s| run(PlayMode::Sampled, s))
        .collect();
    let sampled = sampled?;
    Ok(CasinoSummary {
        policy: policy.label().to_string(),
        bound: regret_bound(1.0, 2, steps),
        expected_regret: expected,
        sampled_mean: mean(&sampled),
        sampled_se: std_error(&sampled),
    })
}

pub(super) fn criterion_casino() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for policy in [
        CasinoPolicy::all_heads(),
        CasinoPolicy::Majority,
        CasinoPolicy::FairCoin { seed: 800 },
    ] {
        let s = casino_regret(&policy, 10_000, 50, 800)?;
        ok &= s.expected_regret <= s.bound && s.sampled_mean <= s.bound + 3.0 * s.sampled_se;
        parts.push(format!(
            "{}: expected {:.2e}, sampled {:.2e} (se {:.1e})",
            s.policy, s.expected_regret, s.sampled_mean, s.sampled_se
        ));
    }
    Ok((
        ok,
        format!(
            "bound {:.4}; {}",
            regret_bound(1.0, 2, 10_000),
            parts.join(", ")
        ),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GumbelSummary {
    pub gamma: f64,
    pub mean: f64,
    pub std_error: f64,
    pub variance: f64,
    pub target_variance: f64,
}

pub fn gumbel_moments(gamma: f64, draws: usize, seed: u64) -> Result<GumbelSummary> {
    let mut rng = substream(seed, 0);
    let xs: Result<Vec<f64>> = (0..draws).map(|_| gumbel_sample(gamma, &mut rng)).collect();
    let xs = xs?;
    Ok(GumbelSummary {
        gamma,
        mean: mean(&xs),
        std_error: std_error(&xs),
        variance: variance(&xs),
        target_variance: gamma * gamma * std::f64::consts::PI.powi(2) / 6.0,
    })
}

pub(super) fn criterion_gumbel() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, gamma) in [0.1, 1.0, 5.0].into_iter().enumerate() {
        let s = gumbel_moments(gamma, 1_000_000, 1100 + i as u64)?;
        let rel = (s.variance / s.target_variance - 1.0).abs();
        ok &= s.mean.abs() <= 3.0 * s.std_error && rel <= 0.02;
        parts.push(format!(
            "gamma={gamma}: mean {:.1e} (se {:.1e}), var rel err {rel:.1e}",
            s.mean, s.std_error
        ));
    }
    Ok((ok, parts.join(", ")))
}
