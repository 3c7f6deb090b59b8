use baflow::extensions::{
    gap_sweep, mimo_direction_gaps, water_filling, water_filling_sweep, wz_beta_ratio_sweep, wz_fixed_point,
    wz_phase_portraits, wz_rate_gap, wz_rate_gap_sweep, MimoSpec, WynerZivSpec,
};
use baflow::models::linspace;
use baflow::Table;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{finish, require, Outcome};
use crate::config::Global;
use crate::error::CliResult;
use crate::output::Output;

#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default)]
pub struct MimoParams {
    /// Squared singular values of the channel [default: 1,0.5,0.25].
    #[arg(long, value_delimiter = ',')]
    pub gains: Option<Vec<f64>>,
    /// Total power of the single-point report [default: 3].
    #[arg(long)]
    pub power: Option<f64>,
    /// Inverse temperature [default: 1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Sweep range of the total power [default: 0.1].
    #[arg(long)]
    pub p_min: Option<f64>,
    /// [default: 10]
    #[arg(long)]
    pub p_max: Option<f64>,
    /// [default: 100]
    #[arg(long)]
    pub p_n: Option<usize>,
}

pub fn mimo(g: &Global, p: &MimoParams) -> CliResult<Outcome> {
    let gains = p.gains.clone().unwrap_or_else(|| vec![1.0, 0.5, 0.25]);
    let beta = p.beta.unwrap_or(1.0);
    let spec = MimoSpec {
        channel_gains: gains.clone(),
        total_power: p.power.unwrap_or(3.0),
        beta,
    };
    let wf = water_filling(&spec)?;
    let gaps = mimo_direction_gaps(&spec, &wf.powers)?;
    let powers = linspace(p.p_min.unwrap_or(0.1), p.p_max.unwrap_or(10.0), p.p_n.unwrap_or(100));
    require(!powers.is_empty(), || "empty power sweep".into())?;
    let chunks: Vec<&[f64]> = powers.chunks(16).collect();
    let (alloc, gap): (Vec<Table>, Vec<Table>) = chunks
        .par_iter()
        .map(|c| Ok((water_filling_sweep(&gains, c, beta)?, gap_sweep(&gains, c, beta)?)))
        .collect::<CliResult<Vec<_>>>()?
        .into_iter()
        .unzip();
    let mut out = Output::new(g)?;
    out.write_table("water_filling", &Table::concat(alloc).expect("non-empty"), &[])?;
    out.write_table("mimo_gaps", &Table::concat(gap).expect("non-empty"), &[])?;
    let report = json!({ "water_filling": wf, "gaps": gaps });
    out.write_json("mimo.json", &report)?;
    let lines = vec![format!(
        "water level {:.6}, system gap {:.6}, stiffness ratio {:.6}",
        wf.level, gaps.system_gap, gaps.stiffness_ratio
    )];
    finish(out, "mimo", g, p, report, lines, vec![])
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default)]
pub struct WzParams {
    /// Source variance [default: 1].
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Inverse temperature for the phase portraits [default: 2].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Correlations for the phase portraits [default: 0,0.3,0.6,0.9].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub rhos: Option<Vec<f64>>,
    /// Variance at which beta_eff/beta is tabulated, in units of sigma2 [default: 0.5].
    #[arg(long)]
    pub s: Option<f64>,
    /// Right end of the phase-portrait axis, in units of sigma2 [default: 1].
    #[arg(long)]
    pub s_max: Option<f64>,
    /// Points per curve [default: 101].
    #[arg(long)]
    pub points: Option<usize>,
}

pub fn wz(g: &Global, p: &WzParams) -> CliResult<Outcome> {
    let sigma2 = p.sigma2.unwrap_or(1.0);
    let beta = p.beta.unwrap_or(2.0);
    let rhos = p.rhos.clone().unwrap_or_else(|| vec![0.0, 0.3, 0.6, 0.9]);
    let n = p.points.unwrap_or(101);
    require(n >= 2, || format!("--points must be at least 2, got {n}"))?;
    let s = p.s.unwrap_or(0.5) * sigma2;
    let s_max = p.s_max.unwrap_or(1.0) * sigma2;
    let portraits = rhos
        .par_iter()
        .map(|&r| Ok(wz_phase_portraits(sigma2, beta, &[r], s_max, n)?))
        .collect::<CliResult<Vec<Table>>>()?;
    let ratio = wz_beta_ratio_sweep(sigma2, s, &linspace(0.0, 0.99, n))?;
    let gap = wz_rate_gap_sweep(&linspace(-0.99, 0.99, n))?;
    let fixed = rhos
        .iter()
        .map(|&r| {
            let spec = WynerZivSpec::new(sigma2, r, beta)?;
            Ok(json!({ "rho": r, "fixed_point": wz_fixed_point(&spec), "rate_gap": wz_rate_gap(r)? }))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut out = Output::new(g)?;
    out.write_table("wz_phase", &Table::concat(portraits).expect("rhos validated"), &[])?;
    out.write_table("wz_beta_ratio", &ratio, &[])?;
    out.write_table("wz_rate_gap", &gap, &["rate_gap"])?;
    let report = json!({
        "sigma2": sigma2,
        "beta": beta,
        "units": out.units,
        "per_rho": fixed.iter().map(|v| {
            let mut v = v.clone();
            v["rate_gap"] = json!(out.nats(v["rate_gap"].as_f64().unwrap_or(f64::NAN)));
            v
        }).collect::<Vec<_>>(),
        "note": "the variance dynamics with beta_eff(s) substituted is a modelling choice, not a derived reduction",
    });
    out.write_json("wz.json", &report)?;
    let lines = vec![format!("wz: {} phase portraits, rate gap and beta_eff/beta sweeps written", rhos.len())];
    finish(out, "wz", g, p, report, lines, vec![])
}
