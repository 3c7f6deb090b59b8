use baflow::flow::{fit_decay_rate, verify_dissipation};
use baflow::spectral::fr_linearization_check;
use baflow::{ba_fixed_point, gram_kernel, integrate_flow, jacobian_spectrum, samples, tangent_spectrum};
use baflow::{BaProblem, IntegratorConfig, Method, ProbVec, Table};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{finish, fixed_point_error, initial_point, require, Outcome, ProblemArgs};
use crate::config::Global;
use crate::error::{CliError, CliResult};
use crate::output::Output;

const FIXED_POINT_TOL: f64 = 1e-13;
const FIXED_POINT_MAX_ITER: usize = 200_000;

#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default)]
pub struct FlowParams {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    /// Initial distribution, comma separated [default: seeded interior draw].
    #[arg(long, value_delimiter = ',')]
    pub q0: Option<Vec<f64>>,
    /// Step size [default: 0.05].
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time [default: 10].
    #[arg(long)]
    pub t_max: Option<f64>,
    /// rk4 or euler [default: rk4].
    #[arg(long)]
    pub method: Option<Method>,
    /// Record every k-th step [default: 1].
    #[arg(long)]
    pub sample_every: Option<usize>,
}

impl FlowParams {
    fn integrator(&self, dt: f64, t_max: f64) -> IntegratorConfig {
        IntegratorConfig {
            method: self.method.unwrap_or(Method::Rk4),
            sample_every: self.sample_every.unwrap_or(1),
            ..IntegratorConfig::with_dt(self.dt.unwrap_or(dt), self.t_max.unwrap_or(t_max))
        }
    }
}

/// Certified BA fixed point reached from `q0`.
fn reference_point(prob: &BaProblem, q0: &ProbVec) -> CliResult<ProbVec> {
    let fp = ba_fixed_point(prob, q0, FIXED_POINT_TOL, FIXED_POINT_MAX_ITER).map_err(fixed_point_error)?;
    if !fp.converged && fp.residual > 1e-9 {
        return Err(CliError::numerical(
            "fixed-point convergence",
            format!("residual {:e} after {} iterations", fp.residual, fp.iterations),
        ));
    }
    Ok(fp.q)
}

const NAT_COLUMNS: [&str; 2] = ["free_energy", "dissipation"];

pub fn flow(g: &Global, p: &FlowParams) -> CliResult<Outcome> {
    let prob = p.problem.build(g.seed)?;
    let q0 = initial_point(p.q0.as_deref(), prob.n(), g.seed)?;
    let cfg = p.integrator(0.05, 10.0);
    cfg.validate()?;
    let reference = reference_point(&prob, &q0)?;
    let traj = integrate_flow(&prob, &q0, &cfg, Some(&reference))?;
    let diss = verify_dissipation(&traj).ok().map(|r| r.max_abs_err);
    let fit = fit_decay_rate(&traj, &reference, 0.5);
    let mut out = Output::new(g)?;
    let data = out.write_table("trajectory", &traj.to_table(), &NAT_COLUMNS)?;
    let last = traj.last();
    let summary = json!({
        "samples": traj.len(),
        "final_free_energy": out.nats(last.free_energy),
        "final_residual_l1": last.residual_l1,
        "final_dist_l1": last.dist_l1,
        "dissipation_max_abs_err": diss.map(|v| out.nats(v)),
        "decay_rate": fit.as_ref().ok().map(|f| f.rate),
        "decay_fit_r_squared": fit.as_ref().ok().map(|f| f.r_squared),
        "decay_fit_error": fit.as_ref().err().map(ToString::to_string),
    });
    out.write_json(
        "trajectory.meta.json",
        &json!({
            "data": data,
            "units": out.units,
            "problem": prob,
            "config": cfg,
            "q0": q0,
            "reference": reference,
            "summary": summary,
        }),
    )?;
    let lines = vec![format!(
        "flow: {} samples, F(T) = {:.12}, |q_T - q*|_1 = {:.3e}",
        traj.len(),
        out.nats(last.free_energy),
        last.dist_l1.unwrap_or(f64::NAN)
    )];
    finish(out, "flow", g, p, summary, lines, vec![])
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default)]
pub struct FixedPointParams {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    /// Starting distribution [default: uniform].
    #[arg(long, value_delimiter = ',')]
    pub q0: Option<Vec<f64>>,
    /// Stop when the L1 change per iteration falls below this [default: 1e-12].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap [default: 100000].
    #[arg(long)]
    pub max_iter: Option<usize>,
}

pub fn fixed_point(g: &Global, p: &FixedPointParams) -> CliResult<Outcome> {
    let prob = p.problem.build(g.seed)?;
    let q0 = match &p.q0 {
        Some(v) => initial_point(Some(v), prob.n(), g.seed)?,
        None => ProbVec::uniform(prob.n())?,
    };
    let tol = p.tol.unwrap_or(1e-12);
    require(tol > 0.0, || format!("--tol must be positive, got {tol}"))?;
    let fp = ba_fixed_point(&prob, &q0, tol, p.max_iter.unwrap_or(100_000)).map_err(fixed_point_error)?;
    let mut out = Output::new(g)?;
    let report = json!({
        "q": fp.q,
        "iterations": fp.iterations,
        "residual": fp.residual,
        "converged": fp.converged,
        "dual_identity_residual": prob.dual_identity_residual(&fp.q)?,
        "free_energy": out.nats(prob.free_energy(&fp.q)?),
        "units": out.units,
    });
    out.write_json("fixed_point.json", &report)?;
    let failed = if fp.converged { vec![] } else { vec!["fixed-point convergence".to_string()] };
    let lines = vec![format!(
        "fixed point after {} iterations, residual {:.3e}, converged = {}",
        fp.iterations, fp.residual, fp.converged
    )];
    finish(out, "fixed-point", g, p, report, lines, failed)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default)]
pub struct DissipationParams {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    /// Initial distribution [default: seeded interior draw].
    #[arg(long, value_delimiter = ',')]
    pub q0: Option<Vec<f64>>,
    /// Step size; the check is repeated at dt/2 [default: 1e-3].
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time [default: 1].
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Allowed max |dF/dt + chi^2| [default: 1e-5].
    #[arg(long)]
    pub tol: Option<f64>,
}

pub fn dissipation_check(g: &Global, p: &DissipationParams) -> CliResult<Outcome> {
    let prob = p.problem.build(g.seed)?;
    let q0 = initial_point(p.q0.as_deref(), prob.n(), g.seed)?;
    let dt = p.dt.unwrap_or(1e-3);
    let t_max = p.t_max.unwrap_or(1.0);
    let tol = p.tol.unwrap_or(1e-5);
    let coarse_cfg = IntegratorConfig::with_dt(dt, t_max);
    let fine_cfg = IntegratorConfig::with_dt(dt / 2.0, t_max);
    coarse_cfg.validate()?;
    let coarse = verify_dissipation(&integrate_flow(&prob, &q0, &coarse_cfg, None)?)?;
    let fine = verify_dissipation(&integrate_flow(&prob, &q0, &fine_cfg, None)?)?;
    let mut table = Table::new(["t", "abs_err"]);
    for &(t, e) in &coarse.per_sample_err {
        table.push(vec![t, e]);
    }
    let mut out = Output::new(g)?;
    out.write_table("dissipation", &table, &["abs_err"])?;
    let ratio = coarse.max_abs_err / fine.max_abs_err;
    let passed = coarse.max_abs_err <= tol;
    let report = json!({
        "dt": dt,
        "max_abs_err": out.nats(coarse.max_abs_err),
        "max_abs_err_half_step": out.nats(fine.max_abs_err),
        "halving_ratio": ratio,
        "tol": out.nats(tol),
        "passed": passed,
        "units": out.units,
    });
    out.write_json("dissipation.json", &report)?;
    let lines = vec![format!(
        "dissipation: max err {:.3e} at dt = {dt}, {:.3e} at dt/2 (ratio {ratio:.3})",
        out.nats(coarse.max_abs_err),
        out.nats(fine.max_abs_err)
    )];
    let failed = if passed { vec![] } else { vec!["dissipation".to_string()] };
    finish(out, "dissipation-check", g, p, report, lines, failed)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default)]
pub struct SpectrumParams {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    /// Start of the fixed-point iteration [default: uniform].
    #[arg(long, value_delimiter = ',')]
    pub q0: Option<Vec<f64>>,
    /// Also write the Gram and relaxation matrices as CSV.
    #[arg(long)]
    pub dump_matrices: Option<bool>,
}

fn matrix_table(m: &DMatrix<f64>) -> Table {
    let mut t = Table::new((0..m.ncols()).map(|j| format!("c_{j}")));
    for i in 0..m.nrows() {
        t.push(m.row(i).iter().copied().collect());
    }
    t
}

pub fn spectrum(g: &Global, p: &SpectrumParams) -> CliResult<Outcome> {
    let prob = p.problem.build(g.seed)?;
    let q0 = match &p.q0 {
        Some(v) => initial_point(Some(v), prob.n(), g.seed)?,
        None => ProbVec::uniform(prob.n())?,
    };
    let q_star = reference_point(&prob, &q0)?;
    let kernel = gram_kernel(&prob, &q_star)?;
    let gram = tangent_spectrum(&kernel);
    let jac = jacobian_spectrum(&prob, &q_star)?;
    let row_sum_err = (0..q_star.dim())
        .map(|i| (kernel.matrix.row(i).sum() - q_star[i]).abs())
        .fold(0.0, f64::max);
    let mut out = Output::new(g)?;
    out.write_json("spectrum.json", &gram)?;
    out.write_json("jacobian_spectrum.json", &jac)?;
    if p.dump_matrices.unwrap_or(false) {
        let csv = crate::config::Format::Csv;
        let saved = std::mem::replace(&mut out.format, csv);
        out.write_table("gram", &matrix_table(&kernel.matrix), &[])?;
        out.write_table("relaxation", &matrix_table(&kernel.relaxation_operator()), &[])?;
        out.format = saved;
    }
    let summary = json!({
        "q_star": q_star,
        "gap": gram.gap,
        "zero_mode_count": gram.zero_mode_count,
        "relaxation_rates": jac.eigenvalues,
        "row_sum_err": row_sum_err,
    });
    let lines = vec![format!(
        "gram gap {:.10}, zero modes {}, slowest nonzero relaxation rate {:?}",
        gram.gap,
        gram.zero_mode_count,
        jac.smallest_nonzero()
    )];
    finish(out, "spectrum", g, p, summary, lines, vec![])
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default)]
pub struct FrCompareParams {
    /// Inverse temperatures; the cost is scaled as 1/beta [default: 1,10,100].
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// Product beta*d for the symmetric two-point case [default: 2].
    #[arg(long)]
    pub beta_d: Option<f64>,
    /// Random interior problems per beta [default: 2].
    #[arg(long)]
    pub random: Option<usize>,
    /// Alphabet size of the random problems [default: 4].
    #[arg(long)]
    pub size: Option<usize>,
    /// Allowed max |DG - DV - I/beta| [default: 1e-5].
    #[arg(long)]
    pub tol: Option<f64>,
}

pub fn fr_compare(g: &Global, p: &FrCompareParams) -> CliResult<Outcome> {
    let betas = p.betas.clone().unwrap_or_else(|| vec![1.0, 10.0, 100.0]);
    let bd = p.beta_d.unwrap_or(2.0);
    let n_random = p.random.unwrap_or(2);
    let size = p.size.unwrap_or(4);
    let tol = p.tol.unwrap_or(1e-5);
    require(betas.iter().all(|b| *b > 0.0), || "betas must be positive".into())?;
    require(size >= 2, || format!("--size must be at least 2, got {size}"))?;
    let rows = betas
        .par_iter()
        .enumerate()
        .map(|(k, &beta)| -> CliResult<Vec<[f64; 4]>> {
            let d = bd / beta;
            let sym = BaProblem::new(ProbVec::uniform(2)?, DMatrix::from_row_slice(2, 2, &[0.0, d, d, 0.0]), beta)?;
            let r = fr_linearization_check(&sym, &ProbVec::uniform(2)?)?;
            let mut rows = vec![[beta, 0.0, r.max_abs_err, r.expected_shift]];
            let mut rng = samples::rng(g.seed ^ (k as u64).wrapping_mul(0x5851_f42d));
            for c in 0..n_random {
                let (prob, q) = samples::random_interior_problem(&mut rng, size, beta, bd / beta)?;
                let r = fr_linearization_check(&prob, &q)?;
                rows.push([beta, (c + 1) as f64, r.max_abs_err, r.expected_shift]);
            }
            Ok(rows)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut table = Table::new(["beta", "case", "max_abs_err", "expected_shift"]);
    let mut failed = Vec::new();
    for row in rows.into_iter().flatten() {
        if !(row[2] <= tol) {
            let case = if row[1] == 0.0 { "two-point".to_string() } else { format!("random{}", row[1]) };
            failed.push(format!("fr-compare {case} beta={}", row[0]));
        }
        table.push(row.to_vec());
    }
    let mut out = Output::new(g)?;
    out.write_table("fr_compare", &table, &[])?;
    let summary = json!({
        "cases": table.rows.len(),
        "over_tolerance": failed.len(),
        "tol": tol,
        "note": "case 0 is the symmetric two-point model at uniform q*; cases >= 1 are random interior problems",
    });
    let lines = vec![format!("fr-compare: {} of {} cases within {tol:e}", table.rows.len() - failed.len(), table.rows.len())];
    finish(out, "fr-compare", g, p, summary, lines, failed)
}

