//! Online linear optimization on the simplex with exponential weights.
//!
//! At step `k` the learner plays `x^k`, the stream reveals `l^k` with
//! `||l^k||_inf <= M`, and the learner moves to `x_i ∝ x_i exp(-h l_i)` with
//! `h = (R/M) sqrt(2/N)`, `R^2 = ln n`. The averaged regret is then at most
//! `M R sqrt(2/N)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prox::{entropic_step, ProxGeometry};
use crate::rng::{seeded, SimRng};
use crate::stats::norm_inf;

/// Multiplicative-weights update; identical to the entropic mirror step.
pub fn exp_weights_step(x: &[f64], l: &[f64], h: f64) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Domain("empty weight vector".into()));
    }
    ProxGeometry::entropic(x.len())?.check_feasible(x)?;
    if x.iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain(
            "exp-weights needs strictly positive weights".into(),
        ));
    }
    if l.len() != x.len() {
        return Err(Error::Input(format!(
            "loss has length {}, expected {}",
            l.len(),
            x.len()
        )));
    }
    crate::error::check_finite(l, "loss")?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Input(format!("step size must be positive, got {h}")));
    }
    Ok(entropic_step(x, l, h))
}

/// Draws index `i` with probability `x_i` by inverting the CDF in coordinate
/// order.
pub fn sample_action(x: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in x.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding slack above the last partial sum
    x.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// A (possibly adaptive) sequence of loss vectors.
pub trait LossStream {
    /// The loss for the next step. `past_bets` holds the learner's sampled
    /// actions at all earlier steps; the current action is not revealed.
    fn next_loss(&mut self, past_bets: &[usize]) -> Vec<f64>;
}

/// A fixed list of losses, cycled.
#[derive(Debug, Clone)]
pub struct FixedLosses(pub Vec<Vec<f64>>);

impl LossStream for FixedLosses {
    fn next_loss(&mut self, past_bets: &[usize]) -> Vec<f64> {
        self.0[past_bets.len() % self.0.len()].clone()
    }
}

/// Coin-flip betting: action 0 bets on `+1`, action 1 on `-1`. The announced
/// outcome `+1` gives losses `(-1, 1)`, outcome `-1` gives `(1, -1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum CasinoPolicy {
    /// A fixed outcome sequence, cycled.
    Fixed { outcomes: Vec<i8> },
    /// The outcome opposite to the learner's most frequent past bet.
    Majority,
    /// Independent fair coin flips.
    FairCoin { seed: u64 },
}

impl CasinoPolicy {
    pub fn all_heads() -> Self {
        CasinoPolicy::Fixed { outcomes: vec![1] }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CasinoPolicy::Fixed { .. } => "fixed",
            CasinoPolicy::Majority => "majority",
            CasinoPolicy::FairCoin { .. } => "fair-coin",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CasinoAdversary {
    policy: CasinoPolicy,
    coin: SimRng,
    outcomes: Vec<i8>,
}

impl CasinoAdversary {
    pub fn new(policy: CasinoPolicy) -> Result<Self> {
        let seed = match &policy {
            CasinoPolicy::Fixed { outcomes } => {
                if outcomes.is_empty() || outcomes.iter().any(|o| *o != 1 && *o != -1) {
                    return Err(Error::Config(
                        "fixed casino outcomes must be a non-empty list of +1/-1".into(),
                    ));
                }
                0
            }
            CasinoPolicy::FairCoin { seed } => *seed,
            CasinoPolicy::Majority => 0,
        };
        Ok(Self {
            policy,
            coin: seeded(seed),
            outcomes: Vec::new(),
        })
    }

    /// Outcomes announced so far.
    pub fn outcomes(&self) -> &[i8] {
        &self.outcomes
    }

    pub fn loss_for(outcome: i8) -> Vec<f64> {
        if outcome == 1 {
            vec![-1.0, 1.0]
        } else {
            vec![1.0, -1.0]
        }
    }

    fn announce(&mut self, past_bets: &[usize]) -> i8 {
        match &self.policy {
            CasinoPolicy::Fixed { outcomes } => outcomes[past_bets.len() % outcomes.len()],
            CasinoPolicy::Majority => {
                let heads = past_bets.iter().filter(|&&b| b == 0).count();
                let tails = past_bets.len() - heads;
                if heads > tails {
                    -1
                } else if tails > heads {
                    1
                } else {
                    match past_bets.last() {
                        Some(0) => -1,
                        _ => 1,
                    }
                }
            }
            CasinoPolicy::FairCoin { .. } => {
                if self.coin.gen_bool(0.5) {
                    1
                } else {
                    -1
                }
            }
        }
    }
}

impl LossStream for CasinoAdversary {
    fn next_loss(&mut self, past_bets: &[usize]) -> Vec<f64> {
        let o = self.announce(past_bets);
        self.outcomes.push(o);
        Self::loss_for(o)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlayMode {
    /// The learner is charged `<l, x>`.
    Expected,
    /// The learner is charged `l_i` for its sampled vertex `i`.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretStep {
    pub step: usize,
    pub loss: Vec<f64>,
    pub play: usize,
    /// Incurred loss minus the best vertex's loss, summed over steps so far.
    pub cumulative_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRecord {
    pub mode: PlayMode,
    pub steps: Vec<RegretStep>,
    /// Weights `x^1 .. x^N` before each step.
    pub weights: Vec<Vec<f64>>,
    /// Per-step incurred losses.
    pub incurred: Vec<f64>,
    /// Averaged regret; `None` when no step was played.
    pub regret: Option<f64>,
    /// `M R sqrt(2/N)`; `None` when no step was played.
    pub bound: Option<f64>,
}

impl RegretRecord {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// `M sqrt(2 ln n / N)`.
pub fn regret_bound(m: f64, n: usize, steps: usize) -> f64 {
    m * (n as f64).ln().sqrt() * (2.0 / steps as f64).sqrt()
}

/// Plays `steps` rounds of exp-weights against `stream`. An action is sampled
/// every step in both modes and revealed to the stream after its loss.
pub fn run_exp_weights<S: LossStream + ?Sized>(
    stream: &mut S,
    n: usize,
    steps: usize,
    m: f64,
    mode: PlayMode,
    rng: &mut SimRng,
) -> Result<RegretRecord> {
    if n < 2 {
        return Err(Error::Config(format!(
            "n: exp-weights needs at least 2 actions, got {n}"
        )));
    }
    crate::error::check_positive(m, "M")?;
    let mut record = RegretRecord {
        mode,
        steps: Vec::with_capacity(steps),
        weights: Vec::with_capacity(steps),
        incurred: Vec::with_capacity(steps),
        regret: None,
        bound: None,
    };
    if steps == 0 {
        return Ok(record);
    }
    let r = (n as f64).ln().sqrt();
    let h = (r / m) * (2.0 / steps as f64).sqrt();
    let mut x = vec![1.0 / n as f64; n];
    let mut totals = vec![0.0; n];
    let mut incurred_sum = 0.0;
    let mut bets = Vec::with_capacity(steps);
    for k in 0..steps {
        let play = sample_action(&x, rng);
        let l = stream.next_loss(&bets);
        if l.len() != n {
            return Err(Error::Input(format!(
                "stream emitted {} losses, expected {n}",
                l.len()
            )));
        }
        let norm = norm_inf(&l);
        if norm.is_nan() || norm > m {
            return Err(Error::Protocol {
                step: k + 1,
                norm,
                bound: m,
            });
        }
        let paid = match mode {
            PlayMode::Expected => crate::stats::dot(&l, &x),
            PlayMode::Sampled => l[play],
        };
        incurred_sum += paid;
        for (t, li) in totals.iter_mut().zip(&l) {
            *t += li;
        }
        let best = totals.iter().cloned().fold(f64::INFINITY, f64::min);
        let next = entropic_step(&x, &l, h);
        record.weights.push(std::mem::replace(&mut x, next));
        record.incurred.push(paid);
        record.steps.push(RegretStep {
            step: k + 1,
            loss: l,
            play,
            cumulative_regret: incurred_sum - best,
        });
        bets.push(play);
    }
    let best = totals.iter().cloned().fold(f64::INFINITY, f64::min);
    record.regret = Some((incurred_sum - best) / steps as f64);
    record.bound = Some(regret_bound(m, n, steps));
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{median, std_error};

    #[test]
    fn step_examples() {
        let x = [0.5, 0.5];
        assert_eq!(exp_weights_step(&x, &[0.0, 0.0], 1.0).unwrap(), x.to_vec());
        let y = exp_weights_step(&x, &[1.0, -1.0], 2f64.ln()).unwrap();
        assert!((y[0] - 0.2).abs() < 1e-15 && (y[1] - 0.8).abs() < 1e-15);
        let z = exp_weights_step(&[0.2, 0.3, 0.5], &[4.0, 4.0, 4.0], 0.7).unwrap();
        for (a, b) in z.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn step_rejects_bad_weights() {
        assert!(matches!(
            exp_weights_step(&[0.7, 0.7], &[0.0, 0.0], 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            exp_weights_step(&[1.0, 0.0], &[0.0, 0.0], 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn step_matches_mirror_step() {
        let geo = ProxGeometry::entropic(4).unwrap();
        let x = [0.1, 0.2, 0.3, 0.4];
        let l = [0.5, -0.3, 0.9, 0.0];
        assert_eq!(
            exp_weights_step(&x, &l, 0.3).unwrap(),
            geo.mirror_step(&x, &l, 0.3).unwrap()
        );
    }

    fn frequencies(x: &[f64], draws: usize, seed: u64) -> Vec<f64> {
        let mut rng = seeded(seed);
        let mut counts = vec![0usize; x.len()];
        for _ in 0..draws {
            counts[sample_action(x, &mut rng)] += 1;
        }
        counts.iter().map(|&c| c as f64 / draws as f64).collect()
    }

    #[test]
    fn sampling_examples() {
        assert!(frequencies(&[1.0, 0.0, 0.0], 1000, 1).eq(&vec![1.0, 0.0, 0.0]));
        for f in frequencies(&[0.25; 4], 10_000, 2) {
            assert!((f - 0.25).abs() <= 0.02);
        }
        assert!((frequencies(&[0.1, 0.9], 10_000, 3)[1] - 0.9).abs() <= 0.02);
    }

    #[test]
    fn constant_stream_concentrates() {
        let mut prev = f64::INFINITY;
        for steps in [10usize, 100, 1000, 10_000] {
            let mut stream = FixedLosses(vec![vec![0.0, 1.0]]);
            let rec = run_exp_weights(
                &mut stream,
                2,
                steps,
                1.0,
                PlayMode::Expected,
                &mut seeded(0),
            )
            .unwrap();
            let h = 2f64.ln().sqrt() * (2.0 / steps as f64).sqrt();
            // closed form: x_2^k = e^{-h(k-1)} / (1 + e^{-h(k-1)})
            let closed: f64 = (0..steps)
                .map(|k| {
                    let w = (-h * k as f64).exp();
                    w / (1.0 + w)
                })
                .sum::<f64>()
                / steps as f64;
            let regret = rec.regret.unwrap();
            assert!((regret - closed).abs() < 1e-12, "{regret} vs {closed}");
            assert!(regret <= rec.bound.unwrap());
            assert!(regret < prev);
            prev = regret;
        }
    }

    #[test]
    fn single_step_is_under_trivial_bound() {
        for n in [2usize, 5, 20] {
            let mut stream = FixedLosses(vec![(0..n)
                .map(|i| if i == 0 { 1.0 } else { -1.0 })
                .collect()]);
            let rec = run_exp_weights(&mut stream, n, 1, 1.0, PlayMode::Expected, &mut seeded(1))
                .unwrap();
            assert!(rec.regret.unwrap() <= 1.0 + 1e-12);
            assert!(rec.bound.unwrap() >= 1.0);
        }
    }

    #[test]
    fn zero_steps_give_empty_record() {
        let mut stream = FixedLosses(vec![vec![0.0, 1.0]]);
        let rec =
            run_exp_weights(&mut stream, 2, 0, 1.0, PlayMode::Sampled, &mut seeded(0)).unwrap();
        assert!(rec.is_empty());
        assert_eq!(rec.regret, None);
        assert_eq!(rec.bound, None);
    }

    #[test]
    fn oversized_loss_is_a_protocol_error() {
        let mut stream = FixedLosses(vec![vec![0.0, 0.5], vec![0.0, 1.5]]);
        let err = run_exp_weights(&mut stream, 2, 10, 1.0, PlayMode::Expected, &mut seeded(0))
            .unwrap_err();
        assert_eq!(
            err,
            Error::Protocol {
                step: 2,
                norm: 1.5,
                bound: 1.0
            }
        );
    }

    #[test]
    fn weights_match_repeated_mirror_steps() {
        let geo = ProxGeometry::entropic(2).unwrap();
        let mut casino = CasinoAdversary::new(CasinoPolicy::Majority).unwrap();
        let rec =
            run_exp_weights(&mut casino, 2, 500, 1.0, PlayMode::Expected, &mut seeded(4)).unwrap();
        let h = regret_bound(1.0, 2, 500);
        let mut x = geo.start_point();
        for (w, s) in rec.weights.iter().zip(&rec.steps) {
            assert_eq!(&x, w);
            assert!(x.iter().all(|&v| v > 0.0));
            x = geo.mirror_step(&x, &s.loss, h).unwrap();
        }
    }

    fn policies() -> Vec<CasinoPolicy> {
        vec![
            CasinoPolicy::all_heads(),
            CasinoPolicy::Fixed {
                outcomes: vec![1, 1, -1, 1, -1, -1, -1],
            },
            CasinoPolicy::Majority,
            CasinoPolicy::FairCoin { seed: 17 },
        ]
    }

    #[test]
    fn expected_regret_within_bound_for_every_policy() {
        for policy in policies() {
            for steps in [100usize, 1000, 10_000] {
                let mut casino = CasinoAdversary::new(policy.clone()).unwrap();
                let rec = run_exp_weights(
                    &mut casino,
                    2,
                    steps,
                    1.0,
                    PlayMode::Expected,
                    &mut seeded(9),
                )
                .unwrap();
                assert!(
                    rec.regret.unwrap() <= rec.bound.unwrap(),
                    "{policy:?} N={steps}"
                );
            }
        }
    }

    #[test]
    fn sampled_regret_median_within_bound() {
        for policy in policies() {
            let steps = 1000;
            let regrets: Vec<f64> = (0..50)
                .map(|s| {
                    let p = match &policy {
                        CasinoPolicy::FairCoin { .. } => CasinoPolicy::FairCoin { seed: 1000 + s },
                        other => other.clone(),
                    };
                    let mut casino = CasinoAdversary::new(p).unwrap();
                    run_exp_weights(
                        &mut casino,
                        2,
                        steps,
                        1.0,
                        PlayMode::Sampled,
                        &mut seeded(s),
                    )
                    .unwrap()
                    .regret
                    .unwrap()
                })
                .collect();
            let bound = regret_bound(1.0, 2, steps);
            assert!(
                median(&regrets) <= bound + 3.0 * std_error(&regrets),
                "{policy:?}"
            );
        }
    }

    #[test]
    fn all_heads_learner_wins() {
        let mut casino = CasinoAdversary::new(CasinoPolicy::all_heads()).unwrap();
        let rec =
            run_exp_weights(&mut casino, 2, 100, 1.0, PlayMode::Sampled, &mut seeded(3)).unwrap();
        let wins = rec.steps.iter().filter(|s| s.play == 0).count() as f64 / 100.0;
        assert!(wins >= 0.6, "{wins}");
        assert!(rec.regret.unwrap() <= rec.bound.unwrap());
    }

    #[test]
    fn fair_coin_frequencies_balance() {
        let mut casino = CasinoAdversary::new(CasinoPolicy::FairCoin { seed: 5 }).unwrap();
        let rec = run_exp_weights(
            &mut casino,
            2,
            10_000,
            1.0,
            PlayMode::Expected,
            &mut seeded(5),
        )
        .unwrap();
        let heads = casino.outcomes().iter().filter(|&&o| o == 1).count() as f64;
        let diff = (2.0 * heads - 10_000.0).abs() / 10_000.0;
        assert!(diff <= 3.0 / 100.0, "{diff}");
        assert!(rec.regret.unwrap() <= rec.bound.unwrap());
    }

    #[test]
    fn regret_may_be_negative() {
        let mut negative = 0;
        for seed in 0..50 {
            let mut casino = CasinoAdversary::new(CasinoPolicy::FairCoin { seed }).unwrap();
            let rec = run_exp_weights(
                &mut casino,
                2,
                100,
                1.0,
                PlayMode::Sampled,
                &mut seeded(seed),
            )
            .unwrap();
            let heads = casino.outcomes().iter().filter(|&&o| o == 1).count() as f64;
            let best = -(2.0 * heads - 100.0).abs();
            let want = (rec.incurred.iter().sum::<f64>() - best) / 100.0;
            assert!((rec.regret.unwrap() - want).abs() < 1e-12);
            negative += usize::from(want < 0.0);
        }
        assert!(negative > 0);
    }

    #[test]
    fn invalid_fixed_outcomes_rejected() {
        assert!(CasinoAdversary::new(CasinoPolicy::Fixed { outcomes: vec![] }).is_err());
        assert!(CasinoAdversary::new(CasinoPolicy::Fixed { outcomes: vec![2] }).is_err());
    }
}
