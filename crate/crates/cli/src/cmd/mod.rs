pub mod dynamics;
pub mod ext;
pub mod gaussian;
pub mod models;
pub mod verify;

use std::path::PathBuf;

use baflow::models::{three_cluster_problem, two_point_problem, ThreeClusterSpec, TwoPointSpec};
use baflow::{samples, BaProblem, ProbVec};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{explicit, Global};
use crate::error::{CliError, CliResult};
use crate::output::Output;

pub struct Outcome {
    pub lines: Vec<String>,
    pub manifest: PathBuf,
    /// Names of checks that exceeded their tolerance; non-empty means exit 2.
    pub failed: Vec<String>,
}

pub fn finish<P: Serialize>(
    out: Output,
    command: &str,
    g: &Global,
    params: &P,
    summary: Value,
    lines: Vec<String>,
    failed: Vec<String>,
) -> CliResult<Outcome> {
    let manifest = out.finish(command, g, explicit(params), summary)?;
    Ok(Outcome { lines, manifest, failed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    TwoPoint,
    ThreeCluster,
    /// Square problem with a seeded random source and costs.
    Random,
}

/// Problem selection shared by the trajectory and spectrum commands.
#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default)]
pub struct ProblemArgs {
    /// BAProblem JSON file `{source, cost, beta}`; takes precedence over --model.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// Built-in model [default: two-point].
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Two-point source weight of the first symbol [default: 0.5].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Two-point product of beta and the off-diagonal cost [default: 2].
    #[arg(long)]
    pub beta_d: Option<f64>,
    /// Three-cluster outputs per cluster [default: 5].
    #[arg(long)]
    pub m: Option<usize>,
    /// Three-cluster cross-cluster cost [default: 3].
    #[arg(long)]
    pub delta: Option<f64>,
    /// Inverse temperature; rescales the cost of two-point models so beta*d is kept
    /// [defaults: file value, two-point 1, three-cluster 2, random 1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Three-cluster source weights [default: 0.5,0.3,0.2].
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Alphabet size of random problems [default: 4].
    #[arg(long)]
    pub size: Option<usize>,
    /// Cost scale of random problems [default: 2].
    #[arg(long)]
    pub cost_scale: Option<f64>,
}

impl ProblemArgs {
    pub fn build(&self, seed: u64) -> CliResult<BaProblem> {
        if let Some(path) = &self.problem {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
            let prob = BaProblem::from_json(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            return Ok(match self.beta {
                Some(b) => prob.with_beta(b)?,
                None => prob,
            });
        }
        match self.model.unwrap_or(ModelKind::TwoPoint) {
            ModelKind::TwoPoint => {
                let spec = TwoPointSpec::new(self.alpha.unwrap_or(0.5), self.beta_d.unwrap_or(2.0))?;
                let base = two_point_problem(&spec);
                match self.beta {
                    Some(b) if b > 0.0 => Ok(BaProblem::new(base.source().clone(), base.cost() / b, b)?),
                    Some(b) => Err(CliError::Validation(format!("two-point beta must be positive, got {b}"))),
                    None => Ok(base),
                }
            }
            ModelKind::ThreeCluster => Ok(three_cluster_problem(&self.cluster_spec()?)),
            ModelKind::Random => {
                let n = self.size.unwrap_or(4);
                if n < 2 {
                    return Err(CliError::Validation(format!("--size must be at least 2, got {n}")));
                }
                let scale = self.cost_scale.unwrap_or(2.0);
                if !(scale >= 0.0 && scale.is_finite()) {
                    return Err(CliError::Validation(format!("--cost-scale must be non-negative, got {scale}")));
                }
                let beta = self.beta.unwrap_or(1.0);
                let prob = samples::random_problem(&mut samples::rng(seed), n, n, 1.0, scale);
                Ok(prob.with_beta(beta)?)
            }
        }
    }

    pub fn cluster_spec(&self) -> CliResult<ThreeClusterSpec> {
        cluster_spec(self.m, self.delta, self.beta, self.weights.as_deref())
    }
}

pub fn cluster_spec(m: Option<usize>, delta: Option<f64>, beta: Option<f64>, weights: Option<&[f64]>) -> CliResult<ThreeClusterSpec> {
    let m = m.unwrap_or(5);
    if m < 3 {
        return Err(CliError::Validation(format!("cluster size m must be at least 3, got {m}")));
    }
    let w = ProbVec::new(weights.map_or_else(|| vec![0.5, 0.3, 0.2], <[f64]>::to_vec))?;
    Ok(ThreeClusterSpec::with_weights(m, delta.unwrap_or(3.0), beta.unwrap_or(2.0), w)?)
}

/// An explicit start, or a seeded interior draw.
pub fn initial_point(q0: Option<&[f64]>, n: usize, seed: u64) -> CliResult<ProbVec> {
    match q0 {
        Some(v) => {
            if v.len() != n {
                return Err(CliError::Validation(format!("--q0 has {} entries, problem has {n} outputs", v.len())));
            }
            Ok(ProbVec::new(v.to_vec())?)
        }
        None => Ok(samples::random_probvec(&mut samples::rng(seed ^ 0x9e37_79b9), n)),
    }
}

/// BA iteration from an interior start can drain an output whose optimal
/// weight is zero; that is a property of the problem, not of the input.
pub fn fixed_point_error(e: baflow::Error) -> CliError {
    match e {
        baflow::Error::NotInterior { index, value } => CliError::numerical(
            "fixed point in the interior",
            format!("output {index} decayed to {value:e}; the optimum lies on the simplex boundary"),
        ),
        other => other.into(),
    }
}

pub fn require(cond: bool, msg: impl FnOnce() -> String) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Validation(msg()))
    }
}
