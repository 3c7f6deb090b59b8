//! The acceptance suite: fourteen named checks, each with fixed inputs and
//! tolerances. A check that hits a numerical error fails with that error
//! recorded rather than aborting the run.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::ba::BaProblem;
use crate::error::Result;
use crate::extensions::{self, MimoSpec, WynerZivSpec};
use crate::flow::{ba_fixed_point, entry_time_report, integrate_flow, verify_dissipation, IntegratorConfig};
use crate::gaussian::{self, GaussianParams, Shape};
use crate::models::{self, linspace, StartMode, ThreeClusterSpec, TwoPointSpec};
use crate::samples;
use crate::simplex::{fr_inner, helmert_basis, ProbVec};
use crate::spectral::{self, gram_kernel, tangent_spectrum};

pub const CRITERIA: [(u8, &str); 14] = [
    (1, "exact chi-square dissipation"),
    (2, "dissipation equals Fisher-Rao norm of the velocity"),
    (3, "dual fixed-point identity and Gram row sums"),
    (4, "linearization ground truth"),
    (5, "two-point closed-form gaps"),
    (6, "high-temperature asymptotics"),
    (7, "Gaussian reduction on a grid"),
    (8, "Hermite spectrum on a grid"),
    (9, "critical slowing down"),
    (10, "uniform second-moment bound"),
    (11, "residual entry-time bound"),
    (12, "two-scale convergence"),
    (13, "Fisher-Rao gradient flow comparison"),
    (14, "MIMO and Wyner-Ziv formulas"),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!("{status} [{:02}] {}", self.id, self.name);
        if let Some(f) = self.failures.first() {
            s.push_str(&format!(": {f}"));
            if self.failures.len() > 1 {
                s.push_str(&format!(" (+{} more)", self.failures.len() - 1));
            }
        }
        s
    }
}

#[derive(Default)]
struct Rec {
    metrics: BTreeMap<String, f64>,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Rec {
    fn metric(&mut self, key: impl Into<String>, v: f64) {
        self.metrics.insert(key.into(), v);
    }

    fn le(&mut self, key: impl Into<String>, v: f64, limit: f64) {
        let key = key.into();
        if !(v <= limit) {
            self.failures.push(format!("{key} = {v:.6e} exceeds {limit:.3e}"));
        }
        self.metric(key, v);
    }

    fn ge(&mut self, key: impl Into<String>, v: f64, limit: f64) {
        let key = key.into();
        if !(v >= limit) {
            self.failures.push(format!("{key} = {v:.6e} is below {limit:.6e}"));
        }
        self.metric(key, v);
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

fn max_rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn pv(v: &[f64]) -> Result<ProbVec> {
    ProbVec::new(v.to_vec())
}

fn two_point(alpha: f64, bd: f64) -> Result<BaProblem> {
    Ok(models::two_point_problem(&TwoPointSpec::new(alpha, bd)?))
}

fn symmetric_two_point(beta: f64, d: f64) -> Result<BaProblem> {
    BaProblem::new(ProbVec::uniform(2)?, DMatrix::from_row_slice(2, 2, &[0.0, d, d, 0.0]), beta)
}

/// Runs one criterion.
pub fn run_criterion(id: u8, seed: u64) -> CriterionResult {
    let name = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map_or("unknown criterion", |c| c.1)
        .to_string();
    let mut rec = Rec::default();
    let outcome = match id {
        1 => c01(&mut rec, seed),
        2 => c02(&mut rec, seed),
        3 => c03(&mut rec, seed),
        4 => c04(&mut rec, seed),
        5 => c05(&mut rec),
        6 => c06(&mut rec, seed),
        7 => c07(&mut rec),
        8 => c08(&mut rec),
        9 => c09(&mut rec),
        10 => c10(&mut rec),
        11 => c11(&mut rec),
        12 => c12(&mut rec),
        13 => c13(&mut rec, seed),
        14 => c14(&mut rec, seed),
        _ => {
            rec.failures.push(format!("no criterion with id {id}"));
            Ok(())
        }
    };
    if let Err(e) = outcome {
        rec.failures.push(format!("numerical failure: {e}"));
    }
    CriterionResult {
        id,
        name,
        passed: rec.failures.is_empty(),
        metrics: rec.metrics,
        failures: rec.failures,
        notes: rec.notes,
    }
}

pub fn verify_all(seed: u64) -> Vec<CriterionResult> {
    CRITERIA.iter().map(|c| run_criterion(c.0, seed)).collect()
}

/// Below this the difference quotient is dominated by round-off
/// (`eps |F| / dt` is about 1e-12 at dt = 1e-3) and the halving ratio is noise.
const ORDER_TEST_FLOOR: f64 = 1e-10;

fn dissipation_error(prob: &BaProblem, q0: &ProbVec, dt: f64) -> Result<f64> {
    let traj = integrate_flow(prob, q0, &IntegratorConfig::with_dt(dt, 1.0), None)?;
    Ok(verify_dissipation(&traj)?.max_abs_err)
}

fn c01(rec: &mut Rec, seed: u64) -> Result<()> {
    let mut suite: Vec<(String, BaProblem, ProbVec)> = vec![
        ("two_point_sym".into(), two_point(0.5, 2.0)?, pv(&[0.9, 0.1])?),
        ("two_point_asym".into(), two_point(0.7, 2.0)?, pv(&[0.2, 0.8])?),
        (
            "three_cluster".into(),
            models::three_cluster_problem(&ThreeClusterSpec::experiment_default()),
            ProbVec::uniform(15)?,
        ),
    ];
    let mut rng = samples::rng(seed);
    for k in 0..5 {
        let prob = samples::random_problem(&mut rng, 5, 5, 1.0, 2.0);
        let q0 = samples::random_probvec(&mut rng, 5);
        suite.push((format!("random5_{k}"), prob, q0));
    }
    for (label, prob, q0) in &suite {
        let e1 = dissipation_error(prob, q0, 1e-3)?;
        let e2 = dissipation_error(prob, q0, 5e-4)?;
        rec.le(format!("{label}.max_err"), e1, 1e-5);
        if e1 >= ORDER_TEST_FLOOR {
            rec.ge(format!("{label}.halving_ratio"), e1 / e2, 3.5);
        } else {
            rec.metric(format!("{label}.halving_ratio"), e1 / e2);
            rec.note(format!("{label}: error {e1:.1e} is at round-off level, order test skipped"));
        }
    }
    Ok(())
}

fn c02(rec: &mut Rec, seed: u64) -> Result<()> {
    use rand::Rng;
    let mut rng = samples::rng(seed ^ 0x02);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = rng.random_range(2..=6);
        let n = rng.random_range(2..=6);
        let beta = rng.random_range(0.1..5.0);
        let prob = samples::random_problem(&mut rng, m, n, beta, 2.0);
        let q = samples::random_probvec(&mut rng, n);
        let d = prob.dissipation(&q)?;
        let v = prob.velocity(&q)?;
        let norm = fr_inner(&v, &v, &q)?;
        worst = worst.max((d - norm).abs() / d.abs().max(1.0));
    }
    rec.le("max_scaled_diff", worst, 1e-14);
    Ok(())
}

/// Fixed points used by several checks: label, problem, solver output.
fn certified_suite(seed: u64) -> Result<Vec<(String, BaProblem, ProbVec)>> {
    let mut out = Vec::new();
    for (a, bd) in [(0.5, 2.0), (0.6, 2.0), (0.7, 3.0), (0.4, 4.0), (0.3, 2.5)] {
        let prob = two_point(a, bd)?;
        let fp = ba_fixed_point(&prob, &ProbVec::uniform(2)?, 1e-12, 200_000)?;
        out.push((format!("two_point_{a}_{bd}"), prob, fp.q));
    }
    for m in [3, 5, 8] {
        let spec = ThreeClusterSpec::new(m, 3.0, 2.0)?;
        out.push((
            format!("three_cluster_m{m}"),
            models::three_cluster_problem(&spec),
            models::three_cluster_fixed_point(&spec, 1e-13)?,
        ));
    }
    let spec = ThreeClusterSpec::experiment_default();
    out.push((
        "three_cluster_asym".into(),
        models::three_cluster_problem(&spec),
        models::three_cluster_fixed_point(&spec, 1e-13)?,
    ));
    let mut rng = samples::rng(seed ^ 0x03);
    for k in 0..5 {
        let (prob, q) = samples::random_interior_problem(&mut rng, 4, 1.0, 2.0)?;
        out.push((format!("random4_{k}"), prob, q));
    }
    Ok(out)
}

fn c03(rec: &mut Rec, seed: u64) -> Result<()> {
    for (label, prob, q) in certified_suite(seed)? {
        rec.le(format!("{label}.dual_residual"), prob.dual_identity_residual(&q)?, 1e-10);
        let c = gram_kernel(&prob, &q)?;
        let rows = (0..q.dim())
            .map(|i| (c.matrix.row(i).sum() - q[i]).abs())
            .fold(0.0, f64::max);
        rec.le(format!("{label}.row_sum_err"), rows, 1e-10);
    }
    Ok(())
}

fn c04(rec: &mut Rec, seed: u64) -> Result<()> {
    let suite = certified_suite(seed)?;
    for (label, prob, q) in suite.iter().filter(|s| s.0.starts_with("two_point") || s.0.starts_with("random4")) {
        let dv = spectral::fd_velocity_jacobian(prob, q, spectral::JACOBIAN_STEP)?;
        let c = gram_kernel(prob, q)?;
        let predicted = spectral::tangent_block(&c.relaxation_operator());
        rec.le(format!("{label}.linearization_err"), (dv + predicted).amax(), 1e-6);
    }
    let prob = two_point(0.5, 2.0)?;
    let dv = spectral::fd_velocity_jacobian(&prob, &ProbVec::uniform(2)?, spectral::JACOBIAN_STEP)?;
    let target = -1.0f64.tanh().powi(2);
    rec.metric("symmetric.eigenvalue", dv[(0, 0)]);
    rec.le("symmetric.eigenvalue_err", (dv[(0, 0)] - target).abs(), 1e-6);
    Ok(())
}

fn c05(rec: &mut Rec) -> Result<()> {
    let mut worst: f64 = 0.0;
    let mut failing = 0usize;
    let mut total = 0usize;
    for a in linspace(0.25, 0.75, 10) {
        for bd in linspace(1.5, 6.0, 10) {
            let g = models::two_point_gaps(&TwoPointSpec::new(a, bd)?)?;
            let err = (g.lambda_star - g.closed_form).abs();
            worst = worst.max(err);
            total += 1;
            if err > 1e-9 {
                failing += 1;
            }
        }
    }
    rec.metric("grid.points", total as f64);
    rec.metric("grid.points_over_tol", failing as f64);
    rec.le("grid.max_err", worst, 1e-9);
    if failing > 0 {
        rec.note("the displayed formula evaluated at the exact theta* equals tanh^2(beta_d/2)/2 for every alpha");
    }
    for bd in [0.5, 1.0, 2.0, 4.0] {
        let g = models::two_point_gaps(&TwoPointSpec::new(0.5, bd)?)?;
        let t = 0.5 * (bd / 2.0f64).tanh().powi(2);
        rec.le(format!("symmetric_{bd}.err"), (g.lambda_star - t).abs(), 1e-12);
    }
    Ok(())
}

fn c06(rec: &mut Rec, seed: u64) -> Result<()> {
    let prob = symmetric_two_point(1.0, 0.1)?;
    let half = ProbVec::uniform(2)?;
    let lambda = tangent_spectrum(&gram_kernel(&prob, &half)?).gap;
    let mu = spectral::high_temperature_reference(&prob).mu_min;
    rec.metric("two_point.lambda_star", lambda);
    rec.metric("two_point.mu_min", mu);
    rec.le("two_point.rel_err", max_rel(lambda, mu), 0.05);
    // circulant problems at uniform q*: the relative error must be an O(beta) effect
    let mut rng = samples::rng(seed ^ 0x06);
    for k in 0..3 {
        let prob = samples::random_circulant_problem(&mut rng, 4, 1.0, 1.0);
        let u = ProbVec::uniform(4)?;
        let mu = spectral::high_temperature_reference(&prob).mu_min;
        let rel = |beta: f64| -> Result<f64> {
            let lambda = tangent_spectrum(&gram_kernel(&prob.with_beta(beta)?, &u)?).gap / (beta * beta);
            Ok(max_rel(lambda, mu))
        };
        let (r1, r2) = (rel(0.01)?, rel(0.005)?);
        rec.metric(format!("circulant_{k}.rel_err"), r1);
        rec.metric(format!("circulant_{k}.rel_err_half_beta"), r2);
        rec.check(
            r2 <= 0.6 * r1 + 1e-6,
            format!("circulant_{k}: relative error {r1:.3e} does not shrink with beta ({r2:.3e})"),
        );
    }
    Ok(())
}

struct GridSetup {
    gp: GaussianParams,
    prob: BaProblem,
    x: Vec<f64>,
}

fn grid_setup() -> Result<GridSetup> {
    let gp = GaussianParams::new(1.0, 1.0)?;
    Ok(GridSetup {
        prob: gaussian::discretize_gaussian(&gp, 6.0, 201)?,
        x: gaussian::grid(&gp, 6.0, 201),
        gp,
    })
}

/// Grid second-moment series of the flow from `q0`, dt = 0.05 on [0, 10].
fn grid_moment_series(g: &GridSetup, q0: &ProbVec) -> Result<Vec<(f64, f64)>> {
    let traj = integrate_flow(&g.prob, q0, &IntegratorConfig::with_dt(0.05, 10.0), None)?;
    Ok(traj
        .samples
        .iter()
        .map(|s| (s.t, gaussian::second_moment(&s.q, &g.x)))
        .collect())
}

fn c07(rec: &mut Rec) -> Result<()> {
    let g = grid_setup()?;
    let q = gaussian::grid_equilibrium(&g.gp, &g.prob, &g.x, 60)?;
    let m2 = gaussian::second_moment(&q, &g.x);
    rec.metric("equilibrium.second_moment", m2);
    rec.le("equilibrium.err", (m2 - g.gp.s_star()).abs(), 1e-3);
    for shape in [Shape::Gaussian, Shape::Bimodal, Shape::Uniform] {
        let q0 = gaussian::initial_profile(shape, 1.0, &g.x)?;
        let series = grid_moment_series(&g, &q0)?;
        let ode = gaussian::integrate_variance_ode(&g.gp, series[0].1, 0.05, 10.0)?;
        let dev = series
            .iter()
            .zip(&ode)
            .map(|(a, b)| (a.1 - b.1).abs())
            .fold(0.0, f64::max);
        rec.le(format!("{shape:?}.max_dev").to_lowercase(), dev, 1e-3);
    }
    Ok(())
}

fn c08(rec: &mut Rec) -> Result<()> {
    let g = grid_setup()?;
    let q = gaussian::grid_equilibrium(&g.gp, &g.prob, &g.x, 60)?;
    let spec = spectral::support_relaxation_spectrum(&g.prob, &q, spectral::JACOBIAN_STEP, 1e-10)?;
    rec.metric("support_size", spec.support.len() as f64);
    let alpha = g.gp.alpha();
    for (n, ev) in spec.eigenvalues.iter().take(3).enumerate() {
        let target = alpha.powi(n as i32 + 1);
        rec.metric(format!("lambda_{}", n + 1), *ev);
        rec.le(format!("lambda_{}.err", n + 1), (ev - target).abs(), 1e-2);
    }
    for n in 0..2 {
        let ratio = spec.eigenvalues[n + 1] / spec.eigenvalues[n];
        rec.le(format!("ratio_{}.err", n + 1), (ratio - alpha).abs(), 1e-2);
    }
    Ok(())
}

fn c09(rec: &mut Rec) -> Result<()> {
    for beta in [0.6, 1.0, 2.0, 5.0] {
        let gp = GaussianParams::new(1.0, beta)?;
        let a2 = gp.alpha().powi(2);
        let series = gaussian::integrate_variance_ode(&gp, gp.s_star() + 0.5, 0.05, 40.0 / a2)?;
        let rate = gaussian::fit_variance_decay(&gp, &series, 1e-3, 1e-10)?;
        let deriv = gaussian::field_derivative(&gp, gp.s_star(), 1e-6);
        rec.metric(format!("beta_{beta}.rate"), rate);
        rec.le(format!("beta_{beta}.rel_err"), max_rel(rate, -deriv), 0.02);
        let t1 = gaussian::gaussian_gap(&gp)?.tau_relax;
        let t2 = gaussian::gaussian_gap(&GaussianParams::new(1.0, 2.0 * beta)?)?.tau_relax;
        rec.check(t2 == 2.0 * t1, format!("tau_relax does not double at beta = {beta}"));
    }
    Ok(())
}

fn c10(rec: &mut Rec) -> Result<()> {
    let one = DMatrix::from_element(1, 1, 1.0);
    let mb = gaussian::moment_bound_constants(&one, &one, 1.0)?;
    rec.le("c1.err", (mb.c1 - 1.0 / 3.0).abs(), 1e-15);
    rec.le("c2.err", (mb.c2 - 4.0 / 9.0).abs(), 1e-15);
    rec.le("c.err", (mb.c - 5.0 / 9.0).abs(), 1e-15);
    let g = grid_setup()?;
    for v0 in [0.1, 1.0, 3.0] {
        let q0 = gaussian::initial_profile(Shape::Gaussian, v0, &g.x)?;
        let series = grid_moment_series(&g, &q0)?;
        let v_start = series[0].1;
        let sup = series.iter().map(|s| s.1).fold(0.0, f64::max);
        rec.metric(format!("v0_{v0}.sup"), sup);
        rec.le(format!("v0_{v0}.excess"), sup - mb.bound(v_start), 1e-3);
    }
    Ok(())
}

fn c11(rec: &mut Rec) -> Result<()> {
    let cluster = ThreeClusterSpec::experiment_default();
    let suite = [
        ("two_point_sym", two_point(0.5, 2.0)?, pv(&[0.99, 0.01])?),
        ("two_point_asym", two_point(0.7, 2.0)?, pv(&[0.01, 0.99])?),
        ("three_cluster_asym", models::three_cluster_problem(&cluster), ProbVec::uniform(15)?),
    ];
    for (label, prob, q0) in suite {
        let fp = ba_fixed_point(&prob, &q0, 1e-13, 200_000)?;
        let f_star = prob.free_energy(&fp.q)?;
        let traj = integrate_flow(&prob, &q0, &IntegratorConfig::with_dt(0.05, 30.0), None)?;
        for delta0 in [0.2, 0.05] {
            let r = entry_time_report(&traj, delta0, f_star)?;
            let key = format!("{label}.delta_{delta0}");
            match r.t_entry {
                Some(t) => {
                    rec.metric(format!("{key}.t_entry"), t);
                    rec.metric(format!("{key}.bound"), r.bound);
                    rec.check(r.holds, format!("{key}: t_entry {t} exceeds bound {}", r.bound));
                }
                None => rec.check(false, format!("{key}: residual never fell below delta0")),
            }
        }
    }
    Ok(())
}

fn c12(rec: &mut Rec) -> Result<()> {
    let spec = ThreeClusterSpec::experiment_default();
    let rep = models::two_scale_experiment(
        &spec,
        &StartMode::Custom(ProbVec::uniform(3 * spec.m)?),
        &IntegratorConfig::with_dt(0.05, 30.0),
    )?;
    rec.metric("fitted_rate", rep.fitted_rate);
    rec.metric("lambda_star_mass", rep.lambda_star);
    rec.metric("lambda_star_perentry", rep.lambda_star_perentry);
    rec.metric("fd_min_rate", rep.fd_min_rate);
    rec.metric("t_plateau_end", rep.t_plateau_end.unwrap_or(f64::NAN));
    rec.check(
        rep.plateau_detected,
        format!(
            "no plateau: local decay rate reaches half the tail rate at t = {:?}",
            rep.t_plateau_end
        ),
    );
    rec.ge("fitted_rate_over_bound", rep.fitted_rate / rep.bound_rate, 1.0);
    rec.le("fd_rate_rel_err", max_rel(rep.fitted_rate, rep.fd_min_rate), 0.10);
    rec.note(format!(
        "reference value 0.08 vs lambda* = {:.4} (mass) / {:.4} (per entry)",
        rep.lambda_star, rep.lambda_star_perentry
    ));
    Ok(())
}

fn c13(rec: &mut Rec, seed: u64) -> Result<()> {
    let mut rng = samples::rng(seed ^ 0x13);
    for beta in [1.0, 10.0, 100.0] {
        let prob = symmetric_two_point(beta, 2.0 / beta)?;
        let r = spectral::fr_linearization_check(&prob, &ProbVec::uniform(2)?)?;
        rec.le(format!("two_point_beta_{beta}.err"), r.max_abs_err, 1e-5);
        for k in 0..2 {
            let (prob, q) = samples::random_interior_problem(&mut rng, 4, beta, 2.0 / beta)?;
            let r = spectral::fr_linearization_check(&prob, &q)?;
            rec.le(format!("random4_{k}_beta_{beta}.err"), r.max_abs_err, 1e-5);
        }
    }
    Ok(())
}

fn c14(rec: &mut Rec, seed: u64) -> Result<()> {
    use rand::Rng;
    let mut rng = samples::rng(seed ^ 0x14);
    let mut kkt: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..=6);
        let gains: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..3.0)).collect();
        let p = rng.random_range(0.01..20.0);
        let spec = MimoSpec {
            channel_gains: gains.clone(),
            total_power: p,
            beta: 1.0,
        };
        let wf = extensions::water_filling(&spec)?;
        kkt = kkt.max((wf.powers.iter().sum::<f64>() - p).abs() / p.max(1.0));
        for (pi, gi) in wf.powers.iter().zip(&gains) {
            let e = if *pi > 0.0 {
                (wf.level - 1.0 / gi - pi).abs()
            } else {
                (wf.level - 1.0 / gi).max(0.0)
            };
            kkt = kkt.max(e);
        }
    }
    rec.le("water_filling.kkt_err", kkt, 1e-12);

    let mut beta_violation: f64 = 0.0;
    let mut equality_mismatch = 0usize;
    for rho in linspace(-0.9, 0.9, 19) {
        for s in linspace(0.0, 0.95, 20) {
            let spec = WynerZivSpec::new(1.0, rho, 1.0)?;
            let be = extensions::wz_effective_beta(&spec, s)?;
            beta_violation = beta_violation.max(be - 1.0);
            let equal = (be - 1.0).abs() < 1e-15;
            if equal != (rho.abs() < 1e-12) {
                equality_mismatch += 1;
            }
        }
    }
    rec.le("wz.beta_eff_excess", beta_violation, 0.0);
    rec.le("wz.equality_mismatches", equality_mismatch as f64, 0.0);
    rec.le(
        "wz.rate_gap_err",
        (extensions::wz_rate_gap(0.75f64.sqrt())? - 2f64.ln()).abs(),
        1e-12,
    );

    for (gains, p) in [(vec![1.0, 0.5], 3.0), (vec![2.0, 1.0, 0.25], 5.0), (vec![1.0, 1.0], 2.0)] {
        let spec = MimoSpec {
            channel_gains: gains.clone(),
            total_power: p,
            beta: 1.0,
        };
        let wf = extensions::water_filling(&spec)?;
        let g = extensions::mimo_direction_gaps(&spec, &wf.powers)?;
        let snr: Vec<f64> = g.active.iter().map(|&i| gains[i] * wf.powers[i]).collect();
        let (lo, hi) = snr
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
        let key = format!("mimo_{}x{p}", gains.len());
        rec.le(format!("{key}.ratio_err"), max_rel(g.stiffness_ratio, (1.0 + 2.0 * hi) / (1.0 + 2.0 * lo)), 1e-12);
        rec.le(format!("{key}.variance_ratio_err"), max_rel(g.variance_stiffness_ratio, hi / lo), 1e-12);
        rec.metric(format!("{key}.stiffness_ratio"), g.stiffness_ratio);
        rec.metric(format!("{key}.variance_stiffness_ratio"), g.variance_stiffness_ratio);
        rec.check(g.stiffness_ratio >= 1.0, format!("{key}: stiffness ratio below 1"));
    }
    Ok(())
}

/// Helmert-coordinate check that a matrix maps tangent vectors to tangent vectors.
pub fn preserves_tangent(m: &DMatrix<f64>) -> bool {
    let h = helmert_basis(m.nrows());
    let ones = DMatrix::from_element(1, m.nrows(), 1.0);
    (ones * m * h).amax() < 1e-10
}
