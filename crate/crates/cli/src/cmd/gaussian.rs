use baflow::gaussian::{
    discretize_gaussian, gaussian_gap, grid, grid_equilibrium, hermite_spectrum, initial_profile,
    integrate_variance_ode, moment_bound_constants, phase_portrait, second_moment, GaussianParams, Shape,
};
use baflow::spectral::{support_relaxation_spectrum, JACOBIAN_STEP};
use baflow::{integrate_flow, IntegratorConfig, Table};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{finish, require, Outcome};
use crate::config::Global;
use crate::error::{CliError, CliResult};
use crate::output::Output;

#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default)]
pub struct PhaseParams {
    /// Source variance [default: 1].
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// One portrait per beta [default: 0.3,0.5,0.6,1,2,5].
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// Right end of the variance axis, in units of sigma2 [default: 2].
    #[arg(long)]
    pub s_max: Option<f64>,
    /// Points per portrait [default: 201].
    #[arg(long)]
    pub points: Option<usize>,
}

pub fn phase(g: &Global, p: &PhaseParams) -> CliResult<Outcome> {
    let sigma2 = p.sigma2.unwrap_or(1.0);
    let betas = p.betas.clone().unwrap_or_else(|| vec![0.3, 0.5, 0.6, 1.0, 2.0, 5.0]);
    let s_max = p.s_max.unwrap_or(2.0) * sigma2;
    let n = p.points.unwrap_or(201);
    require(n >= 2, || format!("--points must be at least 2, got {n}"))?;
    require(s_max > 0.0, || "--s-max must be positive".into())?;
    let tables = betas
        .par_iter()
        .map(|&b| Ok(phase_portrait(&GaussianParams::new(sigma2, b)?, s_max, n)))
        .collect::<CliResult<Vec<Table>>>()?;
    let table = Table::concat(tables).ok_or_else(|| CliError::Validation("no betas given".into()))?;
    let fixed: Vec<_> = betas
        .iter()
        .map(|&b| {
            let gp = GaussianParams::new(sigma2, b).expect("validated above");
            json!({ "beta": b, "s_star": gp.s_star(), "degenerate": gp.is_degenerate() })
        })
        .collect();
    let mut out = Output::new(g)?;
    out.write_table("gaussian_phase", &table, &[])?;
    let summary = json!({ "sigma2": sigma2, "fixed_points": fixed });
    let lines = vec![format!("phase portraits for {} values of beta", betas.len())];
    finish(out, "gaussian phase", g, p, summary, lines, vec![])
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default)]
pub struct SpectrumParams {
    /// Source variance [default: 1].
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Inverse temperature [default: 1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Number of Hermite eigenvalues [default: 4].
    #[arg(long)]
    pub n: Option<usize>,
}

pub fn spectrum(g: &Global, p: &SpectrumParams) -> CliResult<Outcome> {
    let gp = GaussianParams::new(p.sigma2.unwrap_or(1.0), p.beta.unwrap_or(1.0))?;
    let n = p.n.unwrap_or(4);
    require(n >= 1, || "--n must be at least 1".into())?;
    let h = hermite_spectrum(&gp, n)?;
    let gap = gaussian_gap(&gp)?;
    let report = json!({
        "alpha": h.alpha,
        "eigenvalues": h.eigenvalues,
        "relaxation_eigenvalues": h.complements,
        "kernel_variance": h.kernel_variance,
        "s_star": gp.s_star(),
        "lambda_star": gap.lambda_star,
        "tau_relax": gap.tau_relax,
    });
    let mut out = Output::new(g)?;
    out.write_json("gaussian_spectrum.json", &report)?;
    let lines = vec![format!("alpha = {}, eigenvalues {:?}", h.alpha, h.eigenvalues)];
    finish(out, "gaussian spectrum", g, p, report, lines, vec![])
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default)]
pub struct GridCheckParams {
    /// Source variance [default: 1].
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Inverse temperature [default: 1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Grid half-width in standard deviations [default: 6].
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Odd number of grid points [default: 201].
    #[arg(long)]
    pub points: Option<usize>,
    /// BA iterations used to reach the grid equilibrium [default: 60].
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Leading eigenvalues compared with alpha^n [default: 3].
    #[arg(long)]
    pub k: Option<usize>,
    /// Tolerance on eigenvalues and their ratios [default: 1e-2].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Initial shapes for the variance comparison [default: gaussian,bimodal,uniform].
    #[arg(long, value_delimiter = ',')]
    pub shapes: Option<Vec<Shape>>,
    /// Initial second moment of the shapes [default: 1].
    #[arg(long)]
    pub s0: Option<f64>,
    /// Flow horizon for the variance comparison [default: 10].
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Tolerance on |grid moment - ODE variance| [default: 1e-3].
    #[arg(long)]
    pub moment_tol: Option<f64>,
}

pub fn grid_check(g: &Global, p: &GridCheckParams) -> CliResult<Outcome> {
    let gp = GaussianParams::new(p.sigma2.unwrap_or(1.0), p.beta.unwrap_or(1.0))?;
    let hw = p.half_width.unwrap_or(6.0);
    let npts = p.points.unwrap_or(201);
    let k = p.k.unwrap_or(3);
    let tol = p.tol.unwrap_or(1e-2);
    let moment_tol = p.moment_tol.unwrap_or(1e-3);
    let s0 = p.s0.unwrap_or(1.0) * gp.sigma2;
    let t_max = p.t_max.unwrap_or(10.0);
    let shapes = p.shapes.clone().unwrap_or_else(|| vec![Shape::Gaussian, Shape::Bimodal, Shape::Uniform]);
    let prob = discretize_gaussian(&gp, hw, npts)?;
    let x = grid(&gp, hw, npts);
    let q = grid_equilibrium(&gp, &prob, &x, p.iterations.unwrap_or(60))?;
    let m2 = second_moment(&q, &x);
    let spec = support_relaxation_spectrum(&prob, &q, JACOBIAN_STEP, 1e-10)?;
    let alpha = gp.alpha();
    let mut failed = Vec::new();
    let mut eig_table = Table::new(["n", "grid", "hermite"]);
    let mut eig_err: f64 = 0.0;
    for (i, ev) in spec.eigenvalues.iter().take(k).enumerate() {
        let target = alpha.powi(i as i32 + 1);
        eig_err = eig_err.max((ev - target).abs());
        eig_table.push(vec![(i + 1) as f64, *ev, target]);
    }
    let ratio_err = spec
        .eigenvalues
        .windows(2)
        .take(k.saturating_sub(1))
        .map(|w| (w[1] / w[0] - alpha).abs())
        .fold(0.0, f64::max);
    if spec.eigenvalues.len() < k {
        failed.push("grid spectrum size".to_string());
    }
    if !(eig_err <= tol) {
        failed.push("grid eigenvalues".to_string());
    }
    if !(ratio_err <= tol) {
        failed.push("grid eigenvalue ratios".to_string());
    }

    let cfg = IntegratorConfig::with_dt(0.05, t_max);
    let runs = shapes
        .par_iter()
        .map(|&shape| -> CliResult<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
            let q0 = initial_profile(shape, s0, &x)?;
            let traj = integrate_flow(&prob, &q0, &cfg, None)?;
            let grid_series: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, second_moment(&s.q, &x))).collect();
            let ode = integrate_variance_ode(&gp, grid_series[0].1, cfg.dt, t_max)?;
            Ok((grid_series, ode))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut cols = vec!["t".to_string()];
    for s in &shapes {
        let name = format!("{s:?}").to_lowercase();
        cols.push(format!("grid_{name}"));
        cols.push(format!("ode_{name}"));
    }
    let mut moments = Table::new(cols);
    let mut deviations = Vec::new();
    if let Some((first, _)) = runs.first() {
        for i in 0..first.len() {
            let mut row = vec![first[i].0];
            for (gs, ode) in &runs {
                row.push(gs[i].1);
                row.push(ode.get(i).map_or(f64::NAN, |v| v.1));
            }
            moments.push(row);
        }
    }
    for (shape, (gs, ode)) in shapes.iter().zip(&runs) {
        let dev = gs.iter().zip(ode).map(|(a, b)| (a.1 - b.1).abs()).fold(0.0, f64::max);
        if !(dev <= moment_tol) {
            failed.push(format!("variance reduction ({shape:?})").to_lowercase());
        }
        deviations.push(json!({ "shape": shape, "max_dev": dev }));
    }

    let mut out = Output::new(g)?;
    out.write_table("grid_spectrum", &eig_table, &[])?;
    out.write_table("grid_moments", &moments, &[])?;
    let report = json!({
        "alpha": alpha,
        "s_star": gp.s_star(),
        "equilibrium_second_moment": m2,
        "support_size": spec.support.len(),
        "eigenvalues": spec.eigenvalues.iter().take(k).collect::<Vec<_>>(),
        "max_eigenvalue_err": eig_err,
        "max_ratio_err": ratio_err,
        "moment_deviations": deviations,
        "passed": failed.is_empty(),
    });
    out.write_json("grid_check.json", &report)?;
    let lines = vec![format!(
        "grid: m2* = {m2:.6} (s* = {}), eigenvalue err {eig_err:.2e}, ratio err {ratio_err:.2e}",
        gp.s_star()
    )];
    finish(out, "gaussian grid-check", g, p, report, lines, failed)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default)]
pub struct MomentBoundParams {
    /// Source covariance, rows separated by ';' [default: 1].
    #[arg(long)]
    pub sigma_p: Option<String>,
    /// Quadratic cost matrix A, rows separated by ';' [default: identity].
    #[arg(long)]
    pub a: Option<String>,
    /// Inverse temperature [default: 1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Initial second moments to evaluate the bound at [default: 0.1,1,3].
    #[arg(long, value_delimiter = ',')]
    pub v0: Option<Vec<f64>>,
    /// Also run grid flows (scalar source with A = 1 only) [default: true].
    #[arg(long)]
    pub simulate: Option<bool>,
}

fn parse_matrix(s: &str) -> CliResult<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| CliError::Validation(format!("matrix entry '{v}': {e}"))))
                .collect()
        })
        .collect::<CliResult<_>>()?;
    let n = rows.len();
    require(rows.iter().all(|r| r.len() == rows[0].len()), || format!("ragged matrix '{s}'"))?;
    Ok(DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}

pub fn moment_bound(g: &Global, p: &MomentBoundParams) -> CliResult<Outcome> {
    let sigma_p = parse_matrix(p.sigma_p.as_deref().unwrap_or("1"))?;
    let a = match &p.a {
        Some(s) => parse_matrix(s)?,
        None => DMatrix::identity(sigma_p.nrows(), sigma_p.ncols()),
    };
    let beta = p.beta.unwrap_or(1.0);
    let mb = moment_bound_constants(&sigma_p, &a, beta)?;
    let v0s = p.v0.clone().unwrap_or_else(|| vec![0.1, 1.0, 3.0]);
    require(v0s.iter().all(|v| *v > 0.0), || "initial moments must be positive".into())?;
    let scalar_unit = sigma_p.nrows() == 1 && a[(0, 0)] == 1.0;
    let simulate = p.simulate.unwrap_or(true) && scalar_unit;
    let sups: Vec<Option<(f64, f64)>> = if simulate {
        let gp = GaussianParams::new(sigma_p[(0, 0)], beta)?;
        let prob = discretize_gaussian(&gp, 6.0, 201)?;
        let x = grid(&gp, 6.0, 201);
        let cfg = IntegratorConfig::with_dt(0.05, 10.0);
        v0s.par_iter()
            .map(|&v0| -> CliResult<Option<(f64, f64)>> {
                let q0 = initial_profile(Shape::Gaussian, v0, &x)?;
                let traj = integrate_flow(&prob, &q0, &cfg, None)?;
                let m: Vec<f64> = traj.samples.iter().map(|s| second_moment(&s.q, &x)).collect();
                Ok(Some((m[0], m.iter().copied().fold(0.0, f64::max))))
            })
            .collect::<CliResult<_>>()?
    } else {
        vec![None; v0s.len()]
    };
    let mut failed = Vec::new();
    let rows: Vec<_> = v0s
        .iter()
        .zip(&sups)
        .map(|(&v0, sim)| {
            let bound = mb.bound(sim.map_or(v0, |s| s.0));
            if let Some((_, sup)) = sim {
                if *sup > bound + 1e-3 {
                    failed.push(format!("moment bound v0={v0}"));
                }
            }
            json!({ "v0": v0, "bound": bound, "simulated_sup": sim.map(|s| s.1) })
        })
        .collect();
    let report = json!({
        "c1": mb.c1,
        "c2": mb.c2,
        "c": mb.c,
        "ceiling": mb.ceiling,
        "bounds": rows,
        "simulated": simulate,
    });
    let mut out = Output::new(g)?;
    out.write_json("moment_bound.json", &report)?;
    let lines = vec![format!("C1 = {}, C2 = {}, c = {}, ceiling = {}", mb.c1, mb.c2, mb.c, mb.ceiling)];
    finish(out, "gaussian moment-bound", g, p, report, lines, failed)
}
