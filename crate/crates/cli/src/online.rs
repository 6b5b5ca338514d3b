use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use stochopt::online::{regret_bound, run_exp_weights, CasinoAdversary, CasinoPolicy, PlayMode};
use stochopt::rng::seeded;

use crate::config::{check, merge_fields, seed_list, ConfigFile};
use crate::output::{num, Output};
use crate::{CmdResult, Failure};

#[derive(Debug, Subcommand)]
pub enum OnlineCommand {
    /// Exp-weights betting on coin flips announced by an adversary.
    Casino(CasinoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Always `+1`.
    AllHeads,
    /// The cycled `--outcomes` list.
    Fixed,
    /// Opposite of the learner's most frequent bet so far.
    Majority,
    FairCoin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Expected,
    Sampled,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct CasinoArgs {
    #[arg(long, value_enum)]
    pub policy: Option<Policy>,
    /// Outcomes (+1/-1) for the fixed policy, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub outcomes: Option<Vec<i8>>,
    /// Seed of the fair coin; offset by the run index.
    #[arg(long)]
    pub coin_seed: Option<u64>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub steps: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
    #[arg(long)]
    pub trace_stride: Option<usize>,
    /// Exit with status 1 when the mean averaged regret exceeds the bound.
    #[arg(long)]
    #[serde(default)]
    pub check: bool,
}

impl CasinoArgs {
    fn merged(mut self, file: Option<CasinoArgs>) -> Self {
        if let Some(mut f) = file {
            merge_fields!(self, f; policy, outcomes, coin_seed, steps, mode, seeds, seed, seed_list, trace_stride; check);
        }
        self
    }
}

#[derive(Debug, Serialize)]
struct RunResult {
    seed: u64,
    regret: f64,
    heads: usize,
    tails: usize,
}

#[derive(Debug, Serialize)]
struct Summary {
    experiment: &'static str,
    policy: CasinoPolicy,
    mode: PlayMode,
    #[serde(rename = "N")]
    steps: usize,
    bound: f64,
    bound_formula: &'static str,
    runs: Vec<RunResult>,
    mean_regret: f64,
    within_bound: bool,
}

pub fn run(command: OnlineCommand, file: &mut ConfigFile, out: &Output) -> CmdResult {
    match command {
        OnlineCommand::Casino(args) => casino(args.merged(file.casino.take()), out),
    }
}

fn casino(args: CasinoArgs, out: &Output) -> CmdResult {
    let steps = args.steps.unwrap_or(1000);
    check(steps >= 1, "N", "must be at least 1")?;
    let policy_kind = args.policy.unwrap_or(Policy::AllHeads);
    check(
        args.outcomes.is_none() || policy_kind == Policy::Fixed,
        "outcomes",
        "only applies to --policy fixed",
    )?;
    let coin = args.coin_seed.unwrap_or(0);
    let mode = match args.mode.unwrap_or(Mode::Expected) {
        Mode::Expected => PlayMode::Expected,
        Mode::Sampled => PlayMode::Sampled,
    };
    let seeds = seed_list(args.seeds, args.seed, args.seed_list)?;
    let stride = args.trace_stride.unwrap_or((steps / 100).max(1));
    check(stride >= 1, "trace-stride", "must be at least 1")?;
    let base_policy = match policy_kind {
        Policy::AllHeads => CasinoPolicy::all_heads(),
        Policy::Fixed => CasinoPolicy::Fixed {
            outcomes: args.outcomes.clone().ok_or_else(|| {
                Failure::InvalidConfig("outcomes: --policy fixed needs --outcomes".into())
            })?,
        },
        Policy::Majority => CasinoPolicy::Majority,
        Policy::FairCoin => CasinoPolicy::FairCoin { seed: coin },
    };
    CasinoAdversary::new(base_policy.clone())?;

    let bound = regret_bound(1.0, 2, steps);
    let formula = "M sqrt(2 ln n / N) with M = 1, n = 2, for the averaged regret at step N";
    let experiment = "casino";
    let mut runs = Vec::new();
    for (i, &seed) in seeds.iter().enumerate() {
        let policy = match base_policy {
            CasinoPolicy::FairCoin { seed: c } => CasinoPolicy::FairCoin { seed: c + i as u64 },
            ref p => p.clone(),
        };
        let mut adversary = CasinoAdversary::new(policy)?;
        let rec = run_exp_weights(&mut adversary, 2, steps, 1.0, mode, &mut seeded(seed))?;
        let mut table = out.csv(
            &format!("{experiment}-{}-seed{seed}.csv", base_policy.label()),
            &[format!("bound: {formula}; N = {steps}")],
            &[
                "experiment",
                "seed",
                "step",
                "outcome",
                "loss0",
                "loss1",
                "play",
                "cumulative_regret",
                "average_regret",
                "bound",
            ],
        )?;
        for s in rec
            .steps
            .iter()
            .filter(|s| s.step % stride == 0 || s.step == steps)
        {
            table.row([
                experiment.to_string(),
                seed.to_string(),
                s.step.to_string(),
                adversary.outcomes()[s.step - 1].to_string(),
                num(s.loss[0]),
                num(s.loss[1]),
                s.play.to_string(),
                num(s.cumulative_regret),
                num(s.cumulative_regret / s.step as f64),
                num(bound),
            ])?;
        }
        table.finish()?;
        let heads = adversary.outcomes().iter().filter(|&&o| o == 1).count();
        runs.push(RunResult {
            seed,
            regret: rec.regret.expect("at least one step"),
            heads,
            tails: steps - heads,
        });
    }
    let mean_regret = runs.iter().map(|r| r.regret).sum::<f64>() / runs.len() as f64;
    let summary = Summary {
        experiment,
        policy: base_policy,
        mode,
        steps,
        bound,
        bound_formula: formula,
        runs,
        mean_regret,
        within_bound: mean_regret <= bound,
    };
    println!(
        "{}",
        out.json(
            &format!("{experiment}-{}-summary.json", summary.policy.label()),
            &summary
        )?
        .display()
    );
    println!("mean averaged regret {mean_regret:.6e}, bound {bound:.6e}");
    if args.check && !summary.within_bound {
        return Err(Failure::CheckFailed(format!(
            "mean regret {mean_regret} exceeds bound {bound}"
        )));
    }
    Ok(())
}
