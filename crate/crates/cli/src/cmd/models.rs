use baflow::models::{
    cluster_masses, gap_surface, linspace, three_cluster_fixed_point, three_cluster_reduced, three_cluster_uniform_mass_gap,
    two_point_gaps, two_scale_experiment, StartMode, TwoPointSpec,
};
use baflow::{IntegratorConfig, ProbVec, Table};
use clap::ValueEnum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{cluster_spec, finish, require, Outcome};
use crate::config::Global;
use crate::error::{CliError, CliResult};
use crate::output::Output;

#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default)]
pub struct TwoPointParams {
    /// Report a single point at this source weight (needs --beta-d).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Product beta*d of the single point.
    #[arg(long)]
    pub beta_d: Option<f64>,
    /// Alpha range of the surface [default: 0.25].
    #[arg(long)]
    pub alpha_min: Option<f64>,
    /// [default: 0.75]
    #[arg(long)]
    pub alpha_max: Option<f64>,
    /// [default: 10]
    #[arg(long)]
    pub alpha_n: Option<usize>,
    /// beta*d range of the surface [default: 1.5].
    #[arg(long)]
    pub beta_d_min: Option<f64>,
    /// [default: 6]
    #[arg(long)]
    pub beta_d_max: Option<f64>,
    /// [default: 10]
    #[arg(long)]
    pub beta_d_n: Option<usize>,
}

pub fn two_point(g: &Global, p: &TwoPointParams) -> CliResult<Outcome> {
    let alphas = linspace(p.alpha_min.unwrap_or(0.25), p.alpha_max.unwrap_or(0.75), p.alpha_n.unwrap_or(10));
    let bds = linspace(p.beta_d_min.unwrap_or(1.5), p.beta_d_max.unwrap_or(6.0), p.beta_d_n.unwrap_or(10));
    require(!alphas.is_empty() && !bds.is_empty(), || "empty parameter grid".into())?;
    let slices = alphas
        .par_iter()
        .map(|&a| Ok(gap_surface(&[a], &bds)?))
        .collect::<CliResult<Vec<Table>>>()?;
    let surface = Table::concat(slices).expect("non-empty grid");
    let lam = surface.column("lambda_star").expect("column");
    let closed = surface.column("closed_form").expect("column");
    let max_dev = lam.iter().zip(&closed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let point = match (p.alpha, p.beta_d) {
        (Some(a), Some(bd)) => Some(two_point_gaps(&TwoPointSpec::new(a, bd)?)?),
        (None, None) => None,
        _ => return Err(CliError::Validation("--alpha and --beta-d go together".into())),
    };
    let mut out = Output::new(g)?;
    out.write_table("gap_surface", &surface, &[])?;
    let summary = json!({
        "grid_points": surface.rows.len(),
        "max_abs_gap_minus_closed_form": max_dev,
        "point": point,
    });
    out.write_json("two_point.json", &summary)?;
    let mut lines = vec![format!("gap surface: {} points, max |lambda* - closed form| = {max_dev:.3e}", surface.rows.len())];
    if let Some(pt) = &point {
        lines.push(format!("theta* = {}, lambda* = {}, relaxation rate = {}", pt.theta_star, pt.lambda_star, pt.rate));
    }
    finish(out, "model two-point", g, p, summary, lines, vec![])
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default)]
pub struct ThreeClusterParams {
    /// Outputs per cluster [default: 5].
    #[arg(long)]
    pub m: Option<usize>,
    /// Cross-cluster cost [default: 3].
    #[arg(long)]
    pub delta: Option<f64>,
    /// Inverse temperature [default: 2].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Source weights [default: 0.5,0.3,0.2].
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
}

pub fn three_cluster(g: &Global, p: &ThreeClusterParams) -> CliResult<Outcome> {
    let spec = cluster_spec(p.m, p.delta, p.beta, p.weights.as_deref())?;
    let q_star = three_cluster_fixed_point(&spec, 1e-13)?;
    let reduced = three_cluster_reduced(&spec, &q_star)?;
    let report = json!({
        "masses": cluster_masses(&q_star, spec.m),
        "reduced": reduced,
        "uniform_mass_gap": three_cluster_uniform_mass_gap(spec.beta * spec.delta),
        "q_star": q_star,
    });
    let mut out = Output::new(g)?;
    out.write_json("three_cluster.json", &report)?;
    let lines = vec![format!(
        "three-cluster m = {}: mass gap {:.6}, per-entry gap {:.6}, zero modes {}",
        spec.m, reduced.reduced_gap_mass, reduced.reduced_gap_perentry, reduced.zero_modes
    )];
    finish(out, "model three-cluster", g, p, report, lines, vec![])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Start {
    /// Uniform over all outputs.
    Uniform,
    /// Cluster-uniform with masses (1.05, 1, 0.95)/3.
    Perturbed,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default)]
pub struct TwoScaleParams {
    #[command(flatten)]
    #[serde(flatten)]
    pub cluster: ThreeClusterParams,
    /// Initial condition [default: uniform].
    #[arg(long, value_enum)]
    pub start: Option<Start>,
    /// Step size [default: 0.05].
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time [default: 30].
    #[arg(long)]
    pub t_max: Option<f64>,
}

pub fn two_scale(g: &Global, p: &TwoScaleParams) -> CliResult<Outcome> {
    let c = &p.cluster;
    let spec = cluster_spec(c.m, c.delta, c.beta, c.weights.as_deref())?;
    let start = match p.start.unwrap_or(Start::Uniform) {
        Start::Uniform => StartMode::Custom(ProbVec::uniform(3 * spec.m)?),
        Start::Perturbed => StartMode::UniformPerturbed,
    };
    let cfg = IntegratorConfig::with_dt(p.dt.unwrap_or(0.05), p.t_max.unwrap_or(30.0));
    cfg.validate()?;
    let rep = two_scale_experiment(&spec, &start, &cfg)?;
    let mut out = Output::new(g)?;
    out.write_table("two_scale", &rep.to_table(), &["free_energy"])?;
    out.write_json("two_scale.json", &rep)?;
    let mut failed = Vec::new();
    if !rep.degenerate && rep.fitted_rate < rep.bound_rate {
        failed.push("two-scale rate bound".to_string());
    }
    let lines = vec![format!(
        "two-scale: fitted rate {:.6}, bound lambda*/4 = {:.6}, FD rate {:.6}, plateau detected = {}",
        rep.fitted_rate, rep.bound_rate, rep.fd_min_rate, rep.plateau_detected
    )];
    let summary = serde_json::to_value(&rep).map_err(|e| CliError::Validation(e.to_string()))?;
    finish(out, "model two-scale", g, p, summary, lines, failed)
}
