//! Time integration of `dq/dt = T(q) - q`, the discrete BA fixed-point
//! iteration, and trajectory diagnostics.

use serde::{Deserialize, Serialize};

use crate::ba::BaProblem;
use crate::error::{Error, Result};
use crate::simplex::{l1_distance, ProbVec, NORMALIZATION_TOL};
use crate::table::Table;

/// Distances below this are treated as round-off when fitting decay rates.
pub const NOISE_FLOOR: f64 = 1e-13;

const MAX_HALVINGS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Euler,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Self::Rk4),
            "euler" => Ok(Self::Euler),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_max: f64,
    pub method: Method,
    pub sample_every: usize,
    pub renormalize: bool,
    pub positivity_floor: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            t_max: 10.0,
            method: Method::Rk4,
            sample_every: 1,
            renormalize: true,
            positivity_floor: 1e-14,
        }
    }
}

impl IntegratorConfig {
    pub fn with_dt(dt: f64, t_max: f64) -> Self {
        Self {
            dt,
            t_max,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= self.dt && self.t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_max ({}) must be finite and at least dt ({})",
                self.t_max, self.dt
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidParameter("sample_every must be at least 1".into()));
        }
        if !(self.positivity_floor >= 0.0) {
            return Err(Error::InvalidParameter("positivity_floor must be non-negative".into()));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub q: ProbVec,
    pub free_energy: f64,
    pub dissipation: f64,
    /// `||T q - q||_1`.
    pub residual_l1: f64,
    pub dist_l1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn free_energies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.free_energy).collect()
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories hold at least one sample")
    }

    /// Columns `t, q_0..q_{N-1}, free_energy, dissipation, residual_l1, dist_l1`;
    /// `dist_l1` is NaN when no reference was supplied.
    pub fn to_table(&self) -> Table {
        let n = self.samples.first().map_or(0, |s| s.q.dim());
        let mut cols = vec!["t".to_string()];
        cols.extend((0..n).map(|i| format!("q_{i}")));
        cols.extend(["free_energy", "dissipation", "residual_l1", "dist_l1"].map(String::from));
        let mut table = Table::new(cols);
        for s in &self.samples {
            let mut row = Vec::with_capacity(n + 5);
            row.push(s.t);
            row.extend_from_slice(s.q.as_slice());
            row.extend([s.free_energy, s.dissipation, s.residual_l1, s.dist_l1.unwrap_or(f64::NAN)]);
            table.push(row);
        }
        table
    }
}

fn sample(prob: &BaProblem, t: f64, q: ProbVec, reference: Option<&ProbVec>) -> Sample {
    let qs = q.as_slice();
    let tq = prob.apply_raw(qs);
    let dissipation = tq.iter().zip(qs).map(|(a, b)| (a - b) * (a - b) / b).sum();
    Sample {
        t,
        free_energy: prob.free_energy_raw(qs),
        dissipation,
        residual_l1: l1_distance(&tq, qs),
        dist_l1: reference.map(|r| l1_distance(qs, r.as_slice())),
        q,
    }
}

fn velocity_raw(prob: &BaProblem, q: &[f64]) -> Vec<f64> {
    prob.apply_raw(q).iter().zip(q).map(|(a, b)| a - b).collect()
}

fn axpy(q: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    q.iter().zip(k).map(|(x, v)| x + a * v).collect()
}

fn positive(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite() && *x > 0.0)
}

/// One explicit step; `None` if a stage leaves the open orthant.
fn raw_step(prob: &BaProblem, q: &[f64], h: f64, method: Method) -> Option<Vec<f64>> {
    let k1 = velocity_raw(prob, q);
    match method {
        Method::Euler => Some(axpy(q, h, &k1)),
        Method::Rk4 => {
            let s2 = axpy(q, 0.5 * h, &k1);
            if !positive(&s2) {
                return None;
            }
            let k2 = velocity_raw(prob, &s2);
            let s3 = axpy(q, 0.5 * h, &k2);
            if !positive(&s3) {
                return None;
            }
            let k3 = velocity_raw(prob, &s3);
            let s4 = axpy(q, h, &k3);
            if !positive(&s4) {
                return None;
            }
            let k4 = velocity_raw(prob, &s4);
            Some(
                (0..q.len())
                    .map(|i| q[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                    .collect(),
            )
        }
    }
}

/// Since `dq/dt >= -q`, an exact step keeps `q(y) >= q_old(y) e^{-h}`. A step
/// is rejected when an entry is non-positive, or when it falls below the
/// floor while also losing more than half of that guaranteed lower bound.
fn acceptable(old: &[f64], new: &[f64], h: f64, floor: f64) -> bool {
    let shrink = 0.5 * (-h).exp();
    positive(new)
        && old
            .iter()
            .zip(new)
            .all(|(o, n)| *n >= floor || *n >= shrink * o)
}

/// Advances `q` over one interval of length `dt`, subdividing it into
/// `2^k` equal steps when a step would lose positivity.
fn advance(prob: &BaProblem, q: &[f64], cfg: &IntegratorConfig, step: usize) -> Result<Vec<f64>> {
    'halving: for k in 0..=MAX_HALVINGS {
        let pieces = 1usize << k;
        let h = cfg.dt / pieces as f64;
        let mut cur = q.to_vec();
        for _ in 0..pieces {
            match raw_step(prob, &cur, h, cfg.method) {
                Some(next) if acceptable(&cur, &next, h, cfg.positivity_floor) => cur = next,
                _ => continue 'halving,
            }
        }
        return Ok(cur);
    }
    Err(Error::PositivityLoss {
        step,
        time: step as f64 * cfg.dt,
    })
}

fn to_probvec(mut v: Vec<f64>, renormalize: bool) -> Result<ProbVec> {
    if renormalize {
        return ProbVec::renormalized(v);
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { sum });
    }
    // absorb sub-tolerance drift so the invariant holds exactly at construction
    v.iter_mut().for_each(|x| *x /= sum);
    ProbVec::new(v)
}

/// Integrates the flow on `[0, t_max]` with fixed step `dt`, sampling every
/// `sample_every` steps (the final state is always sampled).
///
/// Fails with [`Error::LyapunovViolation`] if the free energy rises by more
/// than `10 dt^2` between consecutive samples.
pub fn integrate_flow(
    prob: &BaProblem,
    q0: &ProbVec,
    cfg: &IntegratorConfig,
    reference: Option<&ProbVec>,
) -> Result<Trajectory> {
    cfg.validate()?;
    if q0.dim() != prob.n() {
        return Err(Error::DimensionMismatch {
            expected: prob.n(),
            found: q0.dim(),
        });
    }
    if let Some(r) = reference {
        if r.dim() != prob.n() {
            return Err(Error::DimensionMismatch {
                expected: prob.n(),
                found: r.dim(),
            });
        }
    }
    let steps = cfg.steps();
    let slack = 10.0 * cfg.dt * cfg.dt;
    let mut samples = vec![sample(prob, 0.0, q0.clone(), reference)];
    let mut q = q0.as_slice().to_vec();
    for step in 1..=steps {
        let next = advance(prob, &q, cfg, step)?;
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("vector field"));
        }
        let qv = to_probvec(next, cfg.renormalize).map_err(|e| match e {
            Error::NotInterior { .. } => Error::PositivityLoss {
                step,
                time: step as f64 * cfg.dt,
            },
            other => other,
        })?;
        q = qv.as_slice().to_vec();
        if step % cfg.sample_every == 0 || step == steps {
            let s = sample(prob, step as f64 * cfg.dt, qv, reference);
            let prev = samples.last().expect("initial sample").free_energy;
            if s.free_energy - prev > slack {
                return Err(Error::LyapunovViolation {
                    time: s.t,
                    increase: s.free_energy - prev,
                    allowed: slack,
                });
            }
            samples.push(s);
        }
    }
    Ok(Trajectory { samples })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPoint {
    pub q: ProbVec,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Discrete BA iteration `q <- T q` until the dual residual
/// `max |T q / q - 1|` is at most `tol`. When `max_iter` is exhausted the
/// best iterate is returned with `converged = false`.
pub fn ba_fixed_point(prob: &BaProblem, q0: &ProbVec, tol: f64, max_iter: usize) -> Result<FixedPoint> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let mut q = q0.clone();
    let mut best = (prob.dual_identity_residual(&q)?, q.clone(), 0);
    for it in 0..max_iter {
        let r = prob.dual_identity_residual(&q)?;
        if r < best.0 {
            best = (r, q.clone(), it);
        }
        if r <= tol {
            return Ok(FixedPoint {
                q,
                iterations: it,
                residual: r,
                converged: true,
            });
        }
        q = prob.ba_map(&q)?;
    }
    let r = prob.dual_identity_residual(&q)?;
    if r < best.0 {
        best = (r, q, max_iter);
    }
    Ok(FixedPoint {
        converged: best.0 <= tol,
        residual: best.0,
        q: best.1,
        iterations: best.2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationReport {
    pub max_abs_err: f64,
    /// `(t, |dF/dt + D|)` at each interior sample.
    pub per_sample_err: Vec<(f64, f64)>,
}

/// Compares centred differences of the free-energy series with `-D(q)` at
/// interior samples.
pub fn verify_dissipation(traj: &Trajectory) -> Result<DissipationReport> {
    let s = &traj.samples;
    if s.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: s.len(),
        });
    }
    let per_sample_err: Vec<(f64, f64)> = (1..s.len() - 1)
        .map(|k| {
            let dfdt = (s[k + 1].free_energy - s[k - 1].free_energy) / (s[k + 1].t - s[k - 1].t);
            (s[k].t, (dfdt + s[k].dissipation).abs())
        })
        .collect();
    let max_abs_err = per_sample_err.iter().map(|e| e.1).fold(0.0, f64::max);
    Ok(DissipationReport {
        max_abs_err,
        per_sample_err,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    /// Positive exponential rate of `||q_t - q*||_1`.
    pub rate: f64,
    pub r_squared: f64,
    pub samples_used: usize,
    /// Whether the distance is non-increasing over the fit window.
    pub monotone: bool,
    pub window: (f64, f64),
}

/// Least-squares slope of `ln y` against `t`, returned as `(-slope, r^2)`.
pub fn log_linear_fit(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let tm = t.iter().sum::<f64>() / n;
    let lm = ly.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(&ly).map(|(a, b)| (a - tm) * (b - lm)).sum();
    let sxx: f64 = t.iter().map(|a| (a - tm) * (a - tm)).sum();
    let syy: f64 = ly.iter().map(|b| (b - lm) * (b - lm)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (-slope, r2)
}

/// Fits the exponential decay rate of `||q_t - reference||_1` over the final
/// `tail_fraction` of the samples that lie above [`NOISE_FLOOR`].
pub fn fit_decay_rate(traj: &Trajectory, reference: &ProbVec, tail_fraction: f64) -> Result<DecayFit> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail_fraction must lie in (0, 1), got {tail_fraction}"
        )));
    }
    let mut t = Vec::new();
    let mut dist = Vec::new();
    for s in &traj.samples {
        let d = l1_distance(s.q.as_slice(), reference.as_slice());
        if d < NOISE_FLOOR {
            break;
        }
        t.push(s.t);
        dist.push(d);
    }
    let take = ((t.len() as f64) * tail_fraction).ceil() as usize;
    if take < 3 {
        return Err(Error::FitRejected(format!(
            "only {} samples above the noise floor {NOISE_FLOOR:e}",
            t.len()
        )));
    }
    let start = t.len() - take;
    let (t, dist) = (&t[start..], &dist[start..]);
    let (rate, r_squared) = log_linear_fit(t, dist);
    Ok(DecayFit {
        rate,
        r_squared,
        samples_used: take,
        monotone: dist.windows(2).all(|w| w[1] <= w[0]),
        window: (t[0], t[take - 1]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryReport {
    /// First sampled time with `||T q - q||_1 < delta0`.
    pub t_entry: Option<f64>,
    /// `2 (F(q_0) - F*) / delta0^2`.
    pub bound: f64,
    pub holds: bool,
}

pub fn entry_time_report(traj: &Trajectory, delta0: f64, f_star: f64) -> Result<EntryReport> {
    if !(delta0 > 0.0) {
        return Err(Error::InvalidParameter(format!("delta0 must be positive, got {delta0}")));
    }
    let first = traj
        .samples
        .first()
        .ok_or(Error::TooFewSamples { needed: 1, got: 0 })?;
    let bound = 2.0 * (first.free_energy - f_star) / (delta0 * delta0);
    let t_entry = traj
        .samples
        .iter()
        .find(|s| s.residual_l1 < delta0)
        .map(|s| s.t);
    Ok(EntryReport {
        t_entry,
        bound,
        holds: t_entry.is_none_or(|t| t <= bound.max(0.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn two_point(alpha: f64, bd: f64) -> BaProblem {
        let cost = DMatrix::from_row_slice(2, 2, &[0.0, bd, bd, 0.0]);
        BaProblem::new(ProbVec::new(vec![alpha, 1.0 - alpha]).unwrap(), cost, 1.0).unwrap()
    }

    fn pv(v: &[f64]) -> ProbVec {
        ProbVec::new(v.to_vec()).unwrap()
    }

    #[test]
    fn fixed_point_start_is_stationary() {
        let prob = two_point(0.5, 2.0);
        let half = ProbVec::uniform(2).unwrap();
        let traj = integrate_flow(&prob, &half, &IntegratorConfig::with_dt(0.05, 2.0), Some(&half)).unwrap();
        assert_eq!(traj.len(), 41);
        assert!(traj.samples.iter().all(|s| s.residual_l1 <= 1e-12));
        let rep = verify_dissipation(&traj).unwrap();
        assert!(rep.max_abs_err < 1e-30);
        assert!(matches!(fit_decay_rate(&traj, &half, 0.5), Err(Error::FitRejected(_))));
    }

    #[test]
    fn zero_beta_trajectory_is_constant() {
        let prob = two_point(0.3, 2.0).with_beta(0.0).unwrap();
        let q0 = pv(&[0.8, 0.2]);
        let traj = integrate_flow(&prob, &q0, &IntegratorConfig::with_dt(0.1, 1.0), None).unwrap();
        assert!(traj.samples.iter().all(|s| s.q == q0));
    }

    #[test]
    fn fixed_point_iteration_symmetric() {
        let prob = two_point(0.5, 2.0);
        let fp = ba_fixed_point(&prob, &pv(&[0.6, 0.4]), 1e-12, 10_000).unwrap();
        assert!(fp.converged);
        assert!((fp.q[0] - 0.5).abs() < 1e-12);
        let fp0 = ba_fixed_point(&prob.with_beta(0.0).unwrap(), &pv(&[0.6, 0.4]), 1e-12, 10).unwrap();
        assert_eq!(fp0.iterations, 0);
        assert_eq!(fp0.q, pv(&[0.6, 0.4]));
    }

    #[test]
    fn exhausted_iteration_reports_best() {
        let prob = two_point(0.5, 2.0);
        let fp = ba_fixed_point(&prob, &pv(&[0.99, 0.01]), 1e-15, 3).unwrap();
        assert!(!fp.converged);
        assert!(fp.residual > 0.0);
    }

    #[test]
    fn symmetric_decay_rate_is_tanh_squared() {
        let prob = two_point(0.5, 2.0);
        let half = ProbVec::uniform(2).unwrap();
        let traj = integrate_flow(&prob, &pv(&[0.9, 0.1]), &IntegratorConfig::with_dt(0.05, 30.0), Some(&half)).unwrap();
        let fit = fit_decay_rate(&traj, &half, 0.5).unwrap();
        let expected = 1.0f64.tanh().powi(2);
        assert!((fit.rate - expected).abs() < 0.1 * expected, "rate {}", fit.rate);
        assert!(fit.monotone);
    }

    #[test]
    fn dissipation_identity_two_point() {
        let prob = two_point(0.5, 2.0);
        let traj = integrate_flow(&prob, &pv(&[0.9, 0.1]), &IntegratorConfig::with_dt(1e-3, 1.0), None).unwrap();
        let rep = verify_dissipation(&traj).unwrap();
        assert!(rep.max_abs_err <= 1e-5, "{}", rep.max_abs_err);
        let f = traj.free_energies();
        assert!(f.windows(2).all(|w| w[1] <= w[0] + 1e-14));
    }

    #[test]
    fn entry_time_trivial_cases() {
        let prob = two_point(0.5, 2.0);
        let half = ProbVec::uniform(2).unwrap();
        let traj = integrate_flow(&prob, &half, &IntegratorConfig::with_dt(0.05, 1.0), None).unwrap();
        let f_star = traj.samples[0].free_energy;
        let rep = entry_time_report(&traj, 0.1, f_star).unwrap();
        assert_eq!(rep.t_entry, Some(0.0));
        assert!(rep.holds);

        let traj = integrate_flow(&prob, &pv(&[0.99, 0.01]), &IntegratorConfig::with_dt(0.05, 20.0), None).unwrap();
        let rep = entry_time_report(&traj, 0.05, f_star).unwrap();
        assert!(rep.t_entry.unwrap() > 0.0);
        assert!(rep.holds);
        let big = entry_time_report(&traj, 10.0, f_star).unwrap();
        assert_eq!(big.t_entry, Some(0.0));
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::with_dt(0.0, 1.0).validate().is_err());
        assert!(IntegratorConfig::with_dt(0.5, 0.1).validate().is_err());
        let cfg: IntegratorConfig = serde_json::from_str(r#"{"dt":0.01,"method":"euler"}"#).unwrap();
        assert_eq!(cfg.method, Method::Euler);
        assert_eq!(cfg.t_max, 10.0);
    }

    #[test]
    fn euler_large_step_triggers_halving_not_failure() {
        let prob = two_point(0.5, 30.0);
        let q0 = pv(&[1.0 - 1e-9, 1e-9]);
        let cfg = IntegratorConfig {
            dt: 1.5,
            t_max: 3.0,
            method: Method::Euler,
            ..IntegratorConfig::default()
        };
        let traj = integrate_flow(&prob, &q0, &cfg, None).unwrap();
        assert!(traj.last().q.min_entry() > 0.0);
    }

    #[test]
    fn table_columns() {
        let prob = two_point(0.5, 1.0);
        let traj = integrate_flow(&prob, &pv(&[0.7, 0.3]), &IntegratorConfig::with_dt(0.5, 1.0), None).unwrap();
        let t = traj.to_table();
        assert_eq!(
            t.columns,
            ["t", "q_0", "q_1", "free_energy", "dissipation", "residual_l1", "dist_l1"]
        );
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows[0][6].is_nan());
    }
}
