//! Gaussian source with quadratic cost.
//!
//! For `X ~ N(0, sigma^2)`, `d(x, y) = (x - y)^2` and a centred Gaussian
//! reproduction density of variance `s`, one BA step returns a centred
//! Gaussian of variance `s~(s) = s / (1 + 2 beta s) + (2 beta s)^2 sigma^2 / (1 + 2 beta s)^2`,
//! whose non-trivial fixed point is `s* = sigma^2 - 1 / (2 beta)`. The
//! linearized BA map at `N(0, s*)` acts on Hermite modes with eigenvalues
//! `alpha^n`, `alpha = 1 - 1 / (2 beta sigma^2)`.
//!
//! A uniform grid discretization feeds the same problem to the finite
//! machinery.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::ba::BaProblem;
use crate::error::{Error, Result};
use crate::flow::log_linear_fit;
use crate::simplex::ProbVec;
use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub sigma2: f64,
    pub beta: f64,
}

impl GaussianParams {
    pub fn new(sigma2: f64, beta: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {sigma2}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { sigma2, beta })
    }

    /// `2 beta sigma^2 <= 1`: the only fixed point is the point mass.
    pub fn is_degenerate(&self) -> bool {
        2.0 * self.beta * self.sigma2 <= 1.0
    }

    pub fn s_star(&self) -> f64 {
        self.sigma2 - 1.0 / (2.0 * self.beta)
    }

    pub fn alpha(&self) -> f64 {
        1.0 - 1.0 / (2.0 * self.beta * self.sigma2)
    }

    fn require_nondegenerate(&self) -> Result<()> {
        if self.is_degenerate() {
            return Err(Error::Degenerate(format!(
                "2 beta sigma^2 = {} <= 1 has no interior Gaussian fixed point",
                2.0 * self.beta * self.sigma2
            )));
        }
        Ok(())
    }

    /// `s~(s) - s`, defined for `s > -1/(2 beta)`.
    pub(crate) fn field(&self, s: f64) -> f64 {
        s_tilde_raw(s, self.sigma2, self.beta) - s
    }
}

pub(crate) fn s_tilde_raw(s: f64, sigma2: f64, beta: f64) -> f64 {
    let u = 2.0 * beta * s;
    s / (1.0 + u) + u * u * sigma2 / ((1.0 + u) * (1.0 + u))
}

/// Variance after one BA step from a centred Gaussian of variance `s`.
pub fn s_tilde(s: f64, gp: &GaussianParams) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter(format!("variance must be non-negative, got {s}")));
    }
    Ok(s_tilde_raw(s, gp.sigma2, gp.beta))
}

/// RK4 solution `(t, s)` of a scalar autonomous ODE.
pub(crate) fn rk4_scalar(f: impl Fn(f64) -> f64, s0: f64, dt: f64, t_max: f64) -> Vec<(f64, f64)> {
    let steps = (t_max / dt).round() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = s0;
    out.push((0.0, s));
    for k in 1..=steps {
        let k1 = f(s);
        let k2 = f(s + 0.5 * dt * k1);
        let k3 = f(s + 0.5 * dt * k2);
        let k4 = f(s + dt * k3);
        s += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push((k as f64 * dt, s));
    }
    out
}

fn check_horizon(dt: f64, t_max: f64) -> Result<()> {
    if !(dt > 0.0 && t_max >= dt && t_max.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < dt <= t_max, got dt={dt}, t_max={t_max}")));
    }
    Ok(())
}

/// `ds/dt = s~(s) - s` by RK4.
pub fn integrate_variance_ode(gp: &GaussianParams, s0: f64, dt: f64, t_max: f64) -> Result<Vec<(f64, f64)>> {
    if !(s0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("s0 must be non-negative, got {s0}")));
    }
    check_horizon(dt, t_max)?;
    Ok(rk4_scalar(|s| gp.field(s), s0, dt, t_max))
}

/// Central difference of the variance field at `s`.
pub fn field_derivative(gp: &GaussianParams, s: f64, h: f64) -> f64 {
    (gp.field(s + h) - gp.field(s - h)) / (2.0 * h)
}

/// Decay rate of `|s - s*|` fitted on the portion of the series between
/// `upper` and `lower` distance levels.
pub fn fit_variance_decay(gp: &GaussianParams, series: &[(f64, f64)], upper: f64, lower: f64) -> Result<f64> {
    let s_star = gp.s_star();
    let (t, d): (Vec<f64>, Vec<f64>) = series
        .iter()
        .map(|&(t, s)| (t, (s - s_star).abs()))
        .filter(|&(_, d)| d <= upper && d >= lower)
        .unzip();
    if t.len() < 3 {
        return Err(Error::FitRejected(format!("only {} samples in the fit window", t.len())));
    }
    Ok(log_linear_fit(&t, &d).0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermiteSpectrum {
    pub alpha: f64,
    /// `alpha^n`, n = 1..n_max.
    pub eigenvalues: Vec<f64>,
    /// `1 - alpha^n`.
    pub complements: Vec<f64>,
    /// Variance of the Mehler kernel, `s*(1 - alpha^2) + alpha^2 / (2 beta)`.
    pub kernel_variance: f64,
}

pub fn hermite_spectrum(gp: &GaussianParams, n_max: usize) -> Result<HermiteSpectrum> {
    gp.require_nondegenerate()?;
    let a = gp.alpha();
    let eigenvalues: Vec<f64> = (1..=n_max as i32).map(|n| a.powi(n)).collect();
    Ok(HermiteSpectrum {
        alpha: a,
        complements: eigenvalues.iter().map(|v| 1.0 - v).collect(),
        eigenvalues,
        kernel_variance: gp.s_star() * (1.0 - a * a) + a * a / (2.0 * gp.beta),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianGap {
    /// `1 / (2 beta sigma^2)`.
    pub lambda_star: f64,
    pub tau_relax: f64,
}

pub fn gaussian_gap(gp: &GaussianParams) -> Result<GaussianGap> {
    gp.require_nondegenerate()?;
    let tau_relax = 2.0 * gp.beta * gp.sigma2;
    Ok(GaussianGap {
        lambda_star: 1.0 / tau_relax,
        tau_relax,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultivariateGaussianParams {
    pub sigma2s: Vec<f64>,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultivariateGap {
    pub lambda_sys: f64,
    pub per_direction: Vec<f64>,
    pub stiffness_ratio: f64,
}

pub fn multivariate_gap(mgp: &MultivariateGaussianParams) -> Result<MultivariateGap> {
    if mgp.sigma2s.is_empty() {
        return Err(Error::InvalidParameter("no directions given".into()));
    }
    let per_direction = mgp
        .sigma2s
        .iter()
        .map(|&s2| gaussian_gap(&GaussianParams::new(s2, mgp.beta)?).map(|g| g.lambda_star))
        .collect::<Result<Vec<f64>>>()?;
    let lo = per_direction.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = per_direction.iter().copied().fold(0.0, f64::max);
    Ok(MultivariateGap {
        lambda_sys: lo,
        stiffness_ratio: hi / lo,
        per_direction,
    })
}

/// `2 (F0 - F*) / delta0^2 + 2 beta sigma^2 ln(C0 dist_entry / eps)`, with the
/// logarithmic term clamped at zero when `eps >= C0 dist_entry`.
pub fn convergence_time_bound(
    gp: &GaussianParams,
    f0_minus_fstar: f64,
    delta0: f64,
    c0: f64,
    dist_entry: f64,
    eps: f64,
) -> Result<f64> {
    for (name, v) in [("delta0", delta0), ("c0", c0), ("dist_entry", dist_entry), ("eps", eps)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    if !(f0_minus_fstar >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "free-energy excess must be non-negative, got {f0_minus_fstar}"
        )));
    }
    let entry = 2.0 * f0_minus_fstar / (delta0 * delta0);
    let tail = 2.0 * gp.beta * gp.sigma2 * (c0 * dist_entry / eps).ln();
    Ok(entry + tail.max(0.0))
}

/// Uniform grid on `[-L, L]` with `L = half_width_sigmas * sigma`.
pub fn grid(gp: &GaussianParams, half_width_sigmas: f64, n_points: usize) -> Vec<f64> {
    let l = half_width_sigmas * gp.sigma2.sqrt();
    (0..n_points)
        .map(|i| -l + 2.0 * l * i as f64 / (n_points - 1) as f64)
        .collect()
}

/// Grid problem: source weights proportional to the Gaussian density at the
/// grid points, cost `(x - y)^2`, shared grid for source and reproduction.
pub fn discretize_gaussian(gp: &GaussianParams, half_width_sigmas: f64, n_points: usize) -> Result<BaProblem> {
    if n_points < 51 || n_points % 2 == 0 {
        return Err(Error::InvalidParameter(format!("n_points must be odd and >= 51, got {n_points}")));
    }
    if !(half_width_sigmas >= 5.0) {
        return Err(Error::InvalidParameter(format!(
            "half_width_sigmas must be >= 5, got {half_width_sigmas}"
        )));
    }
    let x = grid(gp, half_width_sigmas, n_points);
    let source = ProbVec::renormalized(x.iter().map(|v| (-v * v / (2.0 * gp.sigma2)).exp()).collect())?;
    let cost = DMatrix::from_fn(n_points, n_points, |i, j| (x[i] - x[j]).powi(2));
    BaProblem::new(source, cost, gp.beta)
}

pub fn second_moment(q: &ProbVec, x: &[f64]) -> f64 {
    q.as_slice().iter().zip(x).map(|(w, v)| w * v * v).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Gaussian,
    Bimodal,
    Uniform,
}

impl std::str::FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "bimodal" => Ok(Self::Bimodal),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::InvalidParameter(format!("unknown shape `{other}`"))),
        }
    }
}

/// Unnormalized profile of the given shape and scale parameter `v` (the
/// nominal variance), floored at `1e-12` of its peak so that every grid
/// entry stays strictly positive.
fn profile(shape: Shape, v: f64, x: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = match shape {
        Shape::Gaussian => x.iter().map(|t| (-t * t / (2.0 * v)).exp()).collect(),
        Shape::Bimodal => {
            let (a, w) = ((0.75 * v).sqrt(), 0.25 * v);
            x.iter()
                .map(|t| (-(t - a).powi(2) / (2.0 * w)).exp() + (-(t + a).powi(2) / (2.0 * w)).exp())
                .collect()
        }
        Shape::Uniform => {
            let c = (3.0 * v).sqrt();
            x.iter().map(|t| if t.abs() <= c { 1.0 } else { 0.0 }).collect()
        }
    };
    let peak = raw.iter().copied().fold(0.0, f64::max);
    raw.into_iter().map(|r| r.max(1e-12 * peak)).collect()
}

/// Initial grid distribution of the given shape whose grid second moment
/// equals `s0` (bisection on the scale parameter; accurate to 1e-12 for
/// Gaussian and bimodal, up to grid resolution for uniform).
pub fn initial_profile(shape: Shape, s0: f64, x: &[f64]) -> Result<ProbVec> {
    let l2 = x.iter().map(|v| v * v).fold(0.0, f64::max);
    if !(s0 > 0.0 && s0 < l2 / 3.0) {
        return Err(Error::InvalidParameter(format!(
            "target second moment {s0} is outside (0, {})",
            l2 / 3.0
        )));
    }
    let build = |v: f64| ProbVec::renormalized(profile(shape, v, x));
    let (mut lo, mut hi) = (1e-6 * s0, 10.0 * s0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if second_moment(&build(mid)?, x) < s0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    build(0.5 * (lo + hi))
}

/// Near-equilibrium state of the grid problem: `iterations` BA steps from the
/// discretized `N(0, s*)` profile.
///
/// The truncated grid has no interior fixed point with a certified residual:
/// at the edges `T q / q` falls below 1, so the outermost entries drain
/// geometrically while the bulk converges. A bounded number of iterations
/// settles the bulk and leaves the tails numerically negligible.
pub fn grid_equilibrium(gp: &GaussianParams, prob: &BaProblem, x: &[f64], iterations: usize) -> Result<ProbVec> {
    gp.require_nondegenerate()?;
    let mut q = ProbVec::renormalized(profile(Shape::Gaussian, gp.s_star(), x))?;
    for _ in 0..iterations {
        q = prob.ba_map(&q)?;
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentBound {
    pub c1: f64,
    pub c2: f64,
    pub c: f64,
    /// `C1 / c`.
    pub ceiling: f64,
}

impl MomentBound {
    /// `max(V0, C1 / c)`.
    pub fn bound(&self, v0: f64) -> f64 {
        v0.max(self.ceiling)
    }
}

fn require_spd(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if !m.is_square() || (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(Error::InvalidParameter(format!("{name} must be symmetric")));
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::InvalidParameter(format!("{name} must be positive definite")));
    }
    Ok(())
}

/// Constants of the uniform second-moment bound:
/// `Lambda = Sigma^{-1} + 2 beta A`, `H = 2 beta A Lambda^{-1}`,
/// `C1 = tr Lambda^{-1}`, `C2 = ||H||_op^2`, `c = 1 - C2`.
pub fn moment_bound_constants(sigma_p: &DMatrix<f64>, a: &DMatrix<f64>, beta: f64) -> Result<MomentBound> {
    require_spd(sigma_p, "source covariance")?;
    require_spd(a, "cost matrix A")?;
    if sigma_p.shape() != a.shape() {
        return Err(Error::DimensionMismatch {
            expected: sigma_p.nrows(),
            found: a.nrows(),
        });
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let sigma_inv = sigma_p.clone().try_inverse().ok_or(Error::Degenerate("singular covariance".into()))?;
    let lambda = sigma_inv + a * (2.0 * beta);
    let lambda_inv = lambda.try_inverse().ok_or(Error::Degenerate("singular Lambda".into()))?;
    let h = a * (2.0 * beta) * &lambda_inv;
    let c1 = lambda_inv.trace();
    let op = SymmetricEigen::new(h.transpose() * &h)
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let c2 = op;
    let c = 1.0 - c2;
    if !(c > 0.0) {
        return Err(Error::Degenerate(format!("||H||^2 = {c2} is not below 1")));
    }
    Ok(MomentBound {
        c1,
        c2,
        c,
        ceiling: c1 / c,
    })
}

/// `(s, s~(s) - s)` on `n` evenly spaced points of `[0, s_max]`.
pub fn phase_portrait(gp: &GaussianParams, s_max: f64, n: usize) -> Table {
    let mut t = Table::new(["beta", "s", "field"]);
    for i in 0..n {
        let s = s_max * i as f64 / (n.max(2) - 1) as f64;
        t.push(vec![gp.beta, s, gp.field(s)]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gp(s2: f64, b: f64) -> GaussianParams {
        GaussianParams::new(s2, b).unwrap()
    }

    #[test]
    fn s_tilde_examples() {
        let g = gp(1.0, 1.0);
        assert_eq!(s_tilde(0.0, &g).unwrap(), 0.0);
        assert_abs_diff_eq!(s_tilde(0.5, &g).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s_tilde(1.0, &g).unwrap(), 7.0 / 9.0, epsilon = 1e-15);
        assert!(s_tilde(-0.1, &g).is_err());
    }

    #[test]
    fn variance_ode_converges() {
        let g = gp(1.0, 1.0);
        let flat = integrate_variance_ode(&g, 0.5, 0.05, 5.0).unwrap();
        assert!(flat.iter().all(|&(_, s)| (s - 0.5).abs() < 1e-15));
        let up = integrate_variance_ode(&g, 0.1, 0.05, 80.0).unwrap();
        assert!(up.windows(2).all(|w| w[1].1 >= w[0].1));
        assert!((up.last().unwrap().1 - 0.5).abs() < 1e-6);
        let down = integrate_variance_ode(&g, 1.0, 0.05, 80.0).unwrap();
        assert!(down.iter().all(|&(_, s)| s >= 0.5));
        let rate = fit_variance_decay(&g, &down, 1e-3, 1e-10).unwrap();
        let deriv = field_derivative(&g, 0.5, 1e-5);
        assert!((rate + deriv).abs() < 0.02 * deriv.abs());
    }

    #[test]
    fn hermite_and_gaps() {
        let h = hermite_spectrum(&gp(1.0, 1.0), 4).unwrap();
        assert_eq!(h.alpha, 0.5);
        assert_eq!(h.eigenvalues, vec![0.5, 0.25, 0.125, 0.0625]);
        let g = gaussian_gap(&gp(1.0, 2.0)).unwrap();
        assert_eq!((g.lambda_star, g.tau_relax), (0.25, 4.0));
        assert_eq!(gaussian_gap(&gp(1.0, 4.0)).unwrap().tau_relax, 8.0);
        assert!(gaussian_gap(&gp(1.0, 0.5)).is_err());
        assert!(gaussian_gap(&gp(1.0, 0.5 + 1e-9)).unwrap().lambda_star > 0.999_999);
    }

    #[test]
    fn multivariate_examples() {
        let m = multivariate_gap(&MultivariateGaussianParams {
            sigma2s: vec![1.0, 4.0],
            beta: 1.0,
        })
        .unwrap();
        assert_eq!(m.lambda_sys, 0.125);
        assert_eq!(m.stiffness_ratio, 4.0);
    }

    #[test]
    fn convergence_bound_log_law() {
        let g = gp(1.0, 2.0);
        let first = 2.0 * 0.3 / 0.01;
        let at_edge = convergence_time_bound(&g, 0.3, 0.1, 2.0, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(at_edge, first, epsilon = 1e-12);
        let a = convergence_time_bound(&g, 0.3, 0.1, 2.0, 0.5, 1e-3).unwrap();
        let b = convergence_time_bound(&g, 0.3, 0.1, 2.0, 0.5, 5e-4).unwrap();
        assert_abs_diff_eq!(b - a, 4.0 * 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn scalar_moment_constants() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let m = moment_bound_constants(&one, &one, 1.0).unwrap();
        assert_abs_diff_eq!(m.c1, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.c2, 4.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.c, 5.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.ceiling, 0.6, epsilon = 1e-15);
        let tiny = moment_bound_constants(&one, &one, 1e-9).unwrap();
        assert!((tiny.c - 1.0).abs() < 1e-8 && (tiny.c1 - 1.0).abs() < 1e-8);
        assert!(moment_bound_constants(&-one.clone(), &one, 1.0).is_err());
    }

    #[test]
    fn initial_profiles_hit_target_moment() {
        let g = gp(1.0, 1.0);
        let x = grid(&g, 6.0, 201);
        for shape in [Shape::Gaussian, Shape::Bimodal] {
            let q = initial_profile(shape, 1.0, &x).unwrap();
            assert_abs_diff_eq!(second_moment(&q, &x), 1.0, epsilon = 1e-12);
        }
        let q = initial_profile(Shape::Uniform, 1.0, &x).unwrap();
        assert_abs_diff_eq!(second_moment(&q, &x), 1.0, epsilon = 0.05);
    }

    #[test]
    fn discretization_validates() {
        let g = gp(1.0, 1.0);
        assert!(discretize_gaussian(&g, 6.0, 50).is_err());
        assert!(discretize_gaussian(&g, 4.0, 201).is_err());
        let p = discretize_gaussian(&g, 6.0, 51).unwrap();
        assert_eq!((p.m(), p.n()), (51, 51));
    }
}
