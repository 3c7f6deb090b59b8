use baflow::verify::{run_criterion, CriterionResult, CRITERIA};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{finish, require, Outcome};
use crate::config::Global;
use crate::error::CliResult;
use crate::output::Output;

#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default)]
pub struct VerifyParams {
    /// Run only these criteria, e.g. `--criteria 1,4` [default: all 14].
    #[arg(long, value_delimiter = ',')]
    pub criteria: Option<Vec<u8>>,
}

pub fn verify_all(g: &Global, p: &VerifyParams) -> CliResult<Outcome> {
    let ids: Vec<u8> = p.criteria.clone().unwrap_or_else(|| CRITERIA.iter().map(|c| c.0).collect());
    require(ids.iter().all(|i| (1..=14).contains(i)), || "criteria are numbered 1 to 14".into())?;
    let results: Vec<CriterionResult> = ids.par_iter().map(|&id| run_criterion(id, g.seed)).collect();
    let lines: Vec<String> = results.iter().map(CriterionResult::line).collect();
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("C{:02} {}", r.id, r.name))
        .collect();
    let mut out = Output::new(g)?;
    out.write_json("verify.json", &results)?;
    out.write_bytes("verify.txt", (lines.join("\n") + "\n").as_bytes())?;
    let summary = json!({
        "passed": results.len() - failed.len(),
        "failed": failed,
    });
    finish(out, "verify-all", g, p, summary, lines, failed)
}
