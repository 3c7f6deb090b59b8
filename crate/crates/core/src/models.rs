//! Exactly solvable finite models.
//!
//! *Two-point*: binary source `(alpha, 1 - alpha)`, Hamming cost `d`, with
//! `beta = 1` so that the single parameter is `beta_d`. Writing
//! `e = exp(-beta_d)`, the interior fixed point is
//! `theta* = (alpha (1 + e) - e) / (1 - e)`, interior iff
//! `e < alpha / (1 - alpha)` and `e < (1 - alpha) / alpha`.
//!
//! *Three-cluster*: three source letters, `3m` outputs split into clusters of
//! size `m`; cost 0 inside the source letter's cluster and `delta` elsewhere.
//! The flow preserves within-cluster ratios, so equilibria form a continuum
//! indexed by within-cluster shape, and the cluster masses follow the BA
//! dynamics of the collapsed `3 x 3` problem.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ba::BaProblem;
use crate::error::{Error, Result};
use crate::flow::{self, fit_decay_rate, integrate_flow, IntegratorConfig, Trajectory};
use crate::simplex::{l1_distance, ProbVec};
use crate::spectral::{self, gram_kernel, jacobian_spectrum, tangent_spectrum};
use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointSpec {
    pub alpha: f64,
    pub beta_d: f64,
}

impl TwoPointSpec {
    pub fn new(alpha: f64, beta_d: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(beta_d > 0.0 && beta_d.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta_d must be positive, got {beta_d}")));
        }
        Ok(Self { alpha, beta_d })
    }

    fn e(&self) -> f64 {
        (-self.beta_d).exp()
    }

    pub fn has_interior_fixed_point(&self) -> bool {
        let (a, e) = (self.alpha, self.e());
        e < a / (1.0 - a) && e < (1.0 - a) / a
    }
}

pub fn two_point_problem(spec: &TwoPointSpec) -> BaProblem {
    let cost = DMatrix::from_row_slice(2, 2, &[0.0, spec.beta_d, spec.beta_d, 0.0]);
    let source = ProbVec::new(vec![spec.alpha, 1.0 - spec.alpha]).expect("alpha validated");
    BaProblem::new(source, cost, 1.0).expect("finite two-point problem")
}

/// `theta* = q*(0)` in closed form.
pub fn two_point_fixed_point(spec: &TwoPointSpec) -> Result<f64> {
    if !spec.has_interior_fixed_point() {
        return Err(Error::Degenerate(format!(
            "alpha = {}, beta_d = {} has only boundary fixed points",
            spec.alpha, spec.beta_d
        )));
    }
    let e = spec.e();
    Ok((spec.alpha * (1.0 + e) - e) / (1.0 - e))
}

/// Residual of the scalar fixed-point equation
/// `theta = alpha K_0(0) + (1 - alpha) K_1(0)` with
/// `K_0(0) = theta / (theta + (1 - theta) e)` and
/// `K_1(0) = theta e / (theta e + 1 - theta)`.
pub fn two_point_equation_residual(spec: &TwoPointSpec, theta: f64) -> f64 {
    let e = spec.e();
    let k0 = theta / (theta + (1.0 - theta) * e);
    let k1 = theta * e / (theta * e + 1.0 - theta);
    theta - spec.alpha * k0 - (1.0 - spec.alpha) * k1
}

/// `(alpha (1 - alpha) / 2) (1 - e)^2 / ((theta + (1 - theta) e)(theta e + 1 - theta))`.
///
/// At the true `theta*` this collapses to `tanh^2(beta_d / 2) / 2` for every
/// `alpha`, so it equals the Gram-kernel gap only on the symmetric line.
pub fn two_point_gap_closed_form(spec: &TwoPointSpec, theta_star: f64) -> f64 {
    let e = spec.e();
    let a = spec.alpha;
    0.5 * a * (1.0 - a) * (1.0 - e).powi(2)
        / ((theta_star + (1.0 - theta_star) * e) * (theta_star * e + 1.0 - theta_star))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPointGaps {
    pub theta_star: f64,
    /// Gram-kernel gap from the spectral pipeline.
    pub lambda_star: f64,
    pub closed_form: f64,
    /// Relaxation rate, the eigenvalue of `-DV`.
    pub rate: f64,
}

pub fn two_point_gaps(spec: &TwoPointSpec) -> Result<TwoPointGaps> {
    let theta = two_point_fixed_point(spec)?;
    let prob = two_point_problem(spec);
    let q = ProbVec::new(vec![theta, 1.0 - theta])?;
    let lambda_star = tangent_spectrum(&gram_kernel(&prob, &q)?).gap;
    let rate = jacobian_spectrum(&prob, &q)?.gap;
    Ok(TwoPointGaps {
        theta_star: theta,
        lambda_star,
        closed_form: two_point_gap_closed_form(spec, theta),
        rate,
    })
}

/// Gap surface over a grid; pairs without an interior fixed point are skipped.
/// Columns `alpha, beta_d, lambda_star, closed_form, rate`.
pub fn gap_surface(alphas: &[f64], beta_ds: &[f64]) -> Result<Table> {
    let mut t = Table::new(["alpha", "beta_d", "lambda_star", "closed_form", "rate"]);
    for &a in alphas {
        for &bd in beta_ds {
            let spec = TwoPointSpec::new(a, bd)?;
            if !spec.has_interior_fixed_point() {
                continue;
            }
            let g = two_point_gaps(&spec)?;
            t.push(vec![a, bd, g.lambda_star, g.closed_form, g.rate]);
        }
    }
    Ok(t)
}

/// `n` evenly spaced points of `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeClusterSpec {
    pub m: usize,
    pub delta: f64,
    pub beta: f64,
    pub source_weights: ProbVec,
}

impl ThreeClusterSpec {
    pub fn new(m: usize, delta: f64, beta: f64) -> Result<Self> {
        Self::with_weights(m, delta, beta, ProbVec::uniform(3)?)
    }

    pub fn with_weights(m: usize, delta: f64, beta: f64, source_weights: ProbVec) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidParameter("cluster size must be positive".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be non-negative, got {beta}")));
        }
        if source_weights.dim() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                found: source_weights.dim(),
            });
        }
        Ok(Self {
            m,
            delta,
            beta,
            source_weights,
        })
    }

    /// `m = 5, delta = 3, beta = 2`, source `(0.5, 0.3, 0.2)`.
    pub fn experiment_default() -> Self {
        Self::with_weights(5, 3.0, 2.0, ProbVec::new(vec![0.5, 0.3, 0.2]).expect("valid"))
            .expect("valid spec")
    }

    fn e(&self) -> f64 {
        (-self.beta * self.delta).exp()
    }

    /// The same model with every cluster collapsed to a single output.
    pub fn collapsed(&self) -> Self {
        Self {
            m: 1,
            ..self.clone()
        }
    }
}

pub fn three_cluster_problem(spec: &ThreeClusterSpec) -> BaProblem {
    let n = 3 * spec.m;
    let cost = DMatrix::from_fn(3, n, |x, y| if y / spec.m == x { 0.0 } else { spec.delta });
    BaProblem::new(spec.source_weights.clone(), cost, spec.beta).expect("finite three-cluster problem")
}

pub fn cluster_masses(q: &ProbVec, m: usize) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (y, v) in q.as_slice().iter().enumerate() {
        out[y / m] += v;
    }
    out
}

/// Output distribution uniform within clusters with the given masses.
pub fn cluster_uniform(masses: &[f64; 3], m: usize) -> Result<ProbVec> {
    ProbVec::renormalized((0..3 * m).map(|y| masses[y / m] / m as f64).collect())
}

/// Equilibrium reached by BA iteration from the cluster-uniform state with
/// equal masses.
pub fn three_cluster_fixed_point(spec: &ThreeClusterSpec, tol: f64) -> Result<ProbVec> {
    let prob = three_cluster_problem(spec);
    let fp = flow::ba_fixed_point(&prob, &ProbVec::uniform(3 * spec.m)?, tol, 100_000)?;
    if !fp.converged {
        return Err(Error::NotFixedPoint {
            residual: fp.residual,
            tol,
        });
    }
    Ok(fp.q)
}

/// Residual of the reduced mass equation
/// `pi_k = sum_j p_j pi_k e^{-beta d(j,k)} / (pi_j + e (1 - pi_j))`.
pub fn three_cluster_mass_equation_residual(spec: &ThreeClusterSpec, pi: &[f64; 3]) -> f64 {
    let e = spec.e();
    let p = spec.source_weights.as_slice();
    (0..3)
        .map(|k| {
            let rhs: f64 = (0..3)
                .map(|j| {
                    let w = if j == k { 1.0 } else { e };
                    p[j] * pi[k] * w / (pi[j] + e * (1.0 - pi[j]))
                })
                .sum();
            (pi[k] - rhs).abs()
        })
        .fold(0.0, f64::max)
}

/// Equilibrium Gibbs kernel entries for a cluster-uniform `q` with masses
/// `pi`: `own[x]` is `K_x(y)` for `y` in cluster `x`, `leak[x][k]` is
/// `K_x(y)` for `y` in cluster `k != x`.
pub fn three_cluster_kernel_entries(spec: &ThreeClusterSpec, pi: &[f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let e = spec.e();
    let m = spec.m as f64;
    let mut own = [0.0; 3];
    let mut leak = [[0.0; 3]; 3];
    for x in 0..3 {
        let z = pi[x] + e * (1.0 - pi[x]);
        own[x] = pi[x] / (m * z);
        for k in 0..3 {
            if k != x {
                leak[x][k] = pi[k] * e / (m * z);
            }
        }
    }
    (own, leak)
}

/// Mass gap at equal masses, `(1 - e)^2 / (3 (1 + 2e)^2)` with `e = exp(-beta delta)`.
pub fn three_cluster_uniform_mass_gap(beta_delta: f64) -> f64 {
    let e = (-beta_delta).exp();
    (1.0 - e).powi(2) / (3.0 * (1.0 + 2.0 * e).powi(2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedReport {
    pub masses: [f64; 3],
    /// `sum_x p(x) kappa_x kappa_x^T`, `kappa_x(k)` the kernel mass on cluster `k`.
    pub reduced_gram: [[f64; 3]; 3],
    /// Smallest tangent eigenvalue of the reduced Gram matrix (Euclidean on masses).
    pub reduced_gap_mass: f64,
    /// Smallest nonzero Gram eigenvalue on cluster-constant vectors of the
    /// full simplex (Euclidean per entry), `reduced_gap_mass / m`.
    pub reduced_gap_perentry: f64,
    pub zero_modes: usize,
    /// Gram-kernel gap of the full problem (zero when `m > 1`).
    pub full_gap: f64,
    /// Smallest nonzero relaxation rate of the full problem.
    pub min_rate: f64,
    /// Relaxation rates of the collapsed 3-output problem.
    pub mass_rates: Vec<f64>,
}

pub fn three_cluster_reduced(spec: &ThreeClusterSpec, q_star: &ProbVec) -> Result<ReducedReport> {
    let prob = three_cluster_problem(spec);
    let kernel = gram_kernel(&prob, q_star)?;
    let masses = cluster_masses(q_star, spec.m);
    let g = prob.gibbs_state(q_star)?;
    let p = spec.source_weights.as_slice();
    let mut kappa = [[0.0; 3]; 3];
    for (x, row) in kappa.iter_mut().enumerate() {
        for y in 0..3 * spec.m {
            row[y / spec.m] += g.kernels[(x, y)];
        }
    }
    let mut reduced = [[0.0; 3]; 3];
    for (i, row) in reduced.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|x| p[x] * kappa[x][i] * kappa[x][j]).sum();
        }
    }
    let rk = spectral::GramKernel {
        matrix: DMatrix::from_fn(3, 3, |i, j| reduced[i][j]),
        q_star: ProbVec::renormalized(masses.to_vec())?,
    };
    let reduced_gap_mass = tangent_spectrum(&rk).gap;
    let full = tangent_spectrum(&kernel);
    let rates = jacobian_spectrum(&prob, q_star)?;
    let collapsed = three_cluster_problem(&spec.collapsed());
    let mass_q = ProbVec::renormalized(masses.to_vec())?;
    let mass_rates = jacobian_spectrum(&collapsed, &mass_q)?.eigenvalues;
    Ok(ReducedReport {
        masses,
        reduced_gram: reduced,
        reduced_gap_mass,
        reduced_gap_perentry: reduced_gap_mass / spec.m as f64,
        zero_modes: full.zero_mode_count,
        full_gap: full.gap,
        min_rate: rates.smallest_nonzero().unwrap_or(0.0),
        mass_rates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    /// Cluster-uniform start with masses `(1 + 0.05, 1, 1 - 0.05) / 3`.
    UniformPerturbed,
    Custom(ProbVec),
}

/// A plateau is reported when the local decay rate of the distance stays
/// below half its tail value for at least this long.
pub const PLATEAU_MIN_DURATION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoScaleReport {
    #[serde(skip)]
    pub trajectory: Trajectory,
    pub reference: ProbVec,
    /// `None` when the start already sits at the equilibrium.
    pub t_plateau_end: Option<f64>,
    pub plateau_detected: bool,
    pub degenerate: bool,
    pub fitted_rate: f64,
    pub r_squared: f64,
    /// Mass-coordinate gap used for the `lambda* / 4` bound line.
    pub lambda_star: f64,
    pub lambda_star_perentry: f64,
    pub bound_rate: f64,
    /// Smallest nonzero eigenvalue magnitude of the FD Jacobian of `V`.
    pub fd_min_rate: f64,
}

impl TwoScaleReport {
    /// Columns `t, dist_l1, residual_l1, free_energy, bound_line` where the
    /// bound line is `dist_0 exp(-lambda* t / 4)`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["t", "dist_l1", "residual_l1", "free_energy", "bound_line"]);
        let d0 = self.trajectory.samples[0].dist_l1.unwrap_or(f64::NAN);
        for s in &self.trajectory.samples {
            t.push(vec![
                s.t,
                s.dist_l1.unwrap_or(f64::NAN),
                s.residual_l1,
                s.free_energy,
                d0 * (-self.bound_rate * s.t).exp(),
            ]);
        }
        t
    }
}

fn fd_min_rate(prob: &BaProblem, q: &ProbVec) -> Result<f64> {
    let dv = spectral::fd_velocity_jacobian(prob, q, spectral::JACOBIAN_STEP)?;
    Ok(spectral::sorted_eigenvalues(-dv)
        .iter()
        .map(|c| c.re)
        .filter(|v| *v > 1e-6)
        .fold(f64::INFINITY, f64::min))
}

/// Integrates the three-cluster flow and summarizes its convergence.
///
/// The equilibrium is computed by BA iteration from the same start, so it is
/// the member of the fixed-point continuum that the start flows to. The
/// plateau ends at the first time the local rate `-d ln dist / dt` reaches
/// half the fitted tail rate.
pub fn two_scale_experiment(spec: &ThreeClusterSpec, start: &StartMode, cfg: &IntegratorConfig) -> Result<TwoScaleReport> {
    let prob = three_cluster_problem(spec);
    let q0 = match start {
        StartMode::UniformPerturbed => cluster_uniform(&[1.05 / 3.0, 1.0 / 3.0, 0.95 / 3.0], spec.m)?,
        StartMode::Custom(q) => q.clone(),
    };
    let fp = flow::ba_fixed_point(&prob, &q0, 1e-14, 200_000)?;
    if fp.residual > 1e-10 {
        return Err(Error::NotFixedPoint {
            residual: fp.residual,
            tol: 1e-10,
        });
    }
    let q_star = fp.q;
    let reduced = three_cluster_reduced(spec, &q_star)?;
    let trajectory = integrate_flow(&prob, &q0, cfg, Some(&q_star))?;
    let bound_rate = reduced.reduced_gap_mass / 4.0;
    let fd_rate = fd_min_rate(&prob, &q_star)?;
    let start_dist = l1_distance(q0.as_slice(), q_star.as_slice());
    let fit = match fit_decay_rate(&trajectory, &q_star, 0.5) {
        Ok(f) => f,
        Err(Error::FitRejected(_)) if start_dist < flow::NOISE_FLOOR => {
            return Ok(TwoScaleReport {
                trajectory,
                reference: q_star,
                t_plateau_end: None,
                plateau_detected: false,
                degenerate: true,
                fitted_rate: f64::NAN,
                r_squared: f64::NAN,
                lambda_star: reduced.reduced_gap_mass,
                lambda_star_perentry: reduced.reduced_gap_perentry,
                bound_rate,
                fd_min_rate: fd_rate,
            })
        }
        Err(e) => return Err(e),
    };
    let s = &trajectory.samples;
    let mut t_plateau_end = None;
    for w in s.windows(2) {
        let (d0, d1) = (w[0].dist_l1.unwrap_or(0.0), w[1].dist_l1.unwrap_or(0.0));
        if d1 < flow::NOISE_FLOOR {
            break;
        }
        let local = -(d1.ln() - d0.ln()) / (w[1].t - w[0].t);
        if local >= 0.5 * fit.rate {
            t_plateau_end = Some(w[0].t);
            break;
        }
    }
    Ok(TwoScaleReport {
        plateau_detected: t_plateau_end.is_some_and(|t| t >= PLATEAU_MIN_DURATION),
        t_plateau_end,
        reference: q_star,
        trajectory,
        degenerate: false,
        fitted_rate: fit.rate,
        r_squared: fit.r_squared,
        lambda_star: reduced.reduced_gap_mass,
        lambda_star_perentry: reduced.reduced_gap_perentry,
        bound_rate,
        fd_min_rate: fd_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_point_fixed_point_is_exact() {
        let spec = TwoPointSpec::new(0.7, 2.0).unwrap();
        let theta = two_point_fixed_point(&spec).unwrap();
        assert!(two_point_equation_residual(&spec, theta).abs() < 1e-14);
        let prob = two_point_problem(&spec);
        let q = ProbVec::new(vec![theta, 1.0 - theta]).unwrap();
        assert!(prob.dual_identity_residual(&q).unwrap() < 1e-14);
        let fp = flow::ba_fixed_point(&prob, &ProbVec::uniform(2).unwrap(), 1e-12, 100_000).unwrap();
        assert!((fp.q[0] - theta).abs() < 1e-10);
        assert!(TwoPointSpec::new(0.9, 0.5).unwrap().has_interior_fixed_point() == false);
        assert!(two_point_fixed_point(&TwoPointSpec::new(0.9, 0.5).unwrap()).is_err());
    }

    #[test]
    fn symmetric_closed_form() {
        for bd in [0.5, 1.0, 2.0, 4.0] {
            let spec = TwoPointSpec::new(0.5, bd).unwrap();
            let g = two_point_gaps(&spec).unwrap();
            let t = (bd / 2.0f64).tanh().powi(2);
            assert_abs_diff_eq!(g.lambda_star, 0.5 * t, epsilon = 1e-12);
            assert_abs_diff_eq!(g.closed_form, 0.5 * t, epsilon = 1e-12);
            assert_abs_diff_eq!(g.rate, t, epsilon = 1e-12);
        }
        let g = two_point_gaps(&TwoPointSpec::new(0.5, 0.1).unwrap()).unwrap();
        assert_abs_diff_eq!(g.lambda_star, 0.5 * 0.05f64.tanh().powi(2), epsilon = 1e-15);
        assert!((g.lambda_star - 0.001_25).abs() < 0.002 * 0.001_25);
    }

    #[test]
    fn closed_form_is_alpha_independent_at_theta_star() {
        let bd = 2.0;
        let sym = 0.5 * (bd / 2.0f64).tanh().powi(2);
        for a in [0.3, 0.6, 0.7] {
            let spec = TwoPointSpec::new(a, bd).unwrap();
            let theta = two_point_fixed_point(&spec).unwrap();
            assert_abs_diff_eq!(two_point_gap_closed_form(&spec, theta), sym, epsilon = 1e-14);
        }
    }

    #[test]
    fn three_cluster_uniform_source() {
        for m in [3, 5, 8] {
            let spec = ThreeClusterSpec::new(m, 3.0, 2.0).unwrap();
            let prob = three_cluster_problem(&spec);
            let u = ProbVec::uniform(3 * m).unwrap();
            assert!(prob.dual_identity_residual(&u).unwrap() <= 1e-12);
            let fp = three_cluster_fixed_point(&spec, 1e-13).unwrap();
            for v in cluster_masses(&fp, m) {
                assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
            }
            let rep = three_cluster_reduced(&spec, &u).unwrap();
            assert_eq!(rep.zero_modes, 3 * (m - 1));
            assert_abs_diff_eq!(rep.reduced_gap_mass, three_cluster_uniform_mass_gap(6.0), epsilon = 1e-14);
            assert_abs_diff_eq!(rep.reduced_gap_perentry, rep.reduced_gap_mass / m as f64, epsilon = 1e-15);
        }
    }

    #[test]
    fn within_cluster_shapes_are_fixed() {
        let spec = ThreeClusterSpec::new(5, 3.0, 2.0).unwrap();
        let prob = three_cluster_problem(&spec);
        for seed in 0..3u32 {
            let raw: Vec<f64> = (0..15)
                .map(|y| 1.0 + 0.5 * (((y as u32 + 1) * (seed + 3)) % 7) as f64)
                .collect();
            // rescale each cluster to mass 1/3
            let mut q = raw.clone();
            for k in 0..3 {
                let s: f64 = raw[5 * k..5 * k + 5].iter().sum();
                for v in &mut q[5 * k..5 * k + 5] {
                    *v /= 3.0 * s;
                }
            }
            let q = ProbVec::renormalized(q).unwrap();
            assert!(prob.dual_identity_residual(&q).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn kernel_entries_match_gibbs_state() {
        let spec = ThreeClusterSpec::experiment_default();
        let q = three_cluster_fixed_point(&spec, 1e-14).unwrap();
        let pi = cluster_masses(&q, spec.m);
        assert!(three_cluster_mass_equation_residual(&spec, &pi) < 1e-12);
        let (own, leak) = three_cluster_kernel_entries(&spec, &pi);
        let g = three_cluster_problem(&spec).gibbs_state(&q).unwrap();
        for x in 0..3 {
            for y in 0..15 {
                let k = y / 5;
                let expected = if k == x { own[x] } else { leak[x][k] };
                assert_abs_diff_eq!(g.kernels[(x, y)], expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_start_is_degenerate() {
        let spec = ThreeClusterSpec::new(5, 3.0, 2.0).unwrap();
        let rep = two_scale_experiment(
            &spec,
            &StartMode::Custom(ProbVec::uniform(15).unwrap()),
            &IntegratorConfig::with_dt(0.05, 2.0),
        )
        .unwrap();
        assert!(rep.degenerate);
        assert!(rep.t_plateau_end.is_none());
        assert!(rep.trajectory.samples.iter().all(|s| s.residual_l1 < 1e-12));
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    }
}
