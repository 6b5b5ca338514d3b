use clap::Args;
use serde::Deserialize;
use stochopt::experiments::{run_criterion, CriterionReport, CRITERIA};

use crate::config::merge_fields;
use crate::output::Output;
use crate::{CmdResult, Failure};

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BenchArgs {
    /// Criterion ids to run, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<usize>>,
}

impl BenchArgs {
    pub fn merged(mut self, file: Option<BenchArgs>) -> Self {
        if let Some(mut f) = file {
            merge_fields!(self, f; only;);
        }
        self
    }
}

pub fn run(args: BenchArgs, out: &Output) -> CmdResult {
    let ids: Vec<usize> = match args.only {
        Some(ids) => {
            if let Some(bad) = ids
                .iter()
                .find(|id| !CRITERIA.iter().any(|(i, _, _)| i == *id))
            {
                return Err(Failure::InvalidConfig(format!(
                    "only: no criterion {bad}; valid ids are 1 to 11"
                )));
            }
            ids
        }
        None => CRITERIA.iter().map(|(i, _, _)| *i).collect(),
    };
    let mut reports = Vec::new();
    for id in ids {
        let (_, name, limit) = CRITERIA[id - 1];
        let report = run_criterion(id).unwrap_or_else(|e| CriterionReport {
            id,
            name: name.to_string(),
            passed: false,
            detail: format!("error: {e}"),
            elapsed_secs: 0.0,
            time_limit_secs: limit,
        });
        println!("{}", report.line());
        reports.push(report);
    }
    let failed = reports
        .iter()
        .filter(|r| !(r.passed && r.within_time()))
        .count();
    println!(
        "{}/{} criteria passed",
        reports.len() - failed,
        reports.len()
    );
    println!("{}", out.json("bench.json", &reports)?.display());
    if failed > 0 {
        return Err(Failure::CheckFailed(format!("{failed} criteria failed")));
    }
    Ok(())
}
