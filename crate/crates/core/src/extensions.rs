//! Gap formulas for parallel Gaussian channels (water-filling) and for
//! Gaussian coding with decoder side information (Wyner-Ziv).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{rk4_scalar, s_tilde_raw};
use crate::table::Table;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MimoSpec {
    /// Squared singular values of the channel.
    pub channel_gains: Vec<f64>,
    pub total_power: f64,
    pub beta: f64,
}

impl MimoSpec {
    pub fn validate(&self) -> Result<()> {
        if self.channel_gains.is_empty() || self.channel_gains.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidParameter("channel gains must be positive and finite".into()));
        }
        if !(self.total_power > 0.0 && self.total_power.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "total power must be positive, got {}",
                self.total_power
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaterFilling {
    pub powers: Vec<f64>,
    pub level: f64,
}

/// `P_i = (mu - 1/lambda_i)_+` with `sum P_i = P`. The water level is found
/// by scanning thresholds in order of decreasing gain.
pub fn water_filling(spec: &MimoSpec) -> Result<WaterFilling> {
    spec.validate()?;
    let g = &spec.channel_gains;
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&a, &b| g[b].total_cmp(&g[a]));
    let mut inv_sum = 0.0;
    let mut level = 0.0;
    for (k, &i) in order.iter().enumerate() {
        inv_sum += 1.0 / g[i];
        let mu = (spec.total_power + inv_sum) / (k + 1) as f64;
        let next_ok = order.get(k + 1).is_none_or(|&j| mu <= 1.0 / g[j]);
        if next_ok {
            level = mu;
            break;
        }
    }
    let powers = g.iter().map(|gi| (level - 1.0 / gi).max(0.0)).collect();
    Ok(WaterFilling { powers, level })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MimoGaps {
    /// Indices with positive power.
    pub active: Vec<usize>,
    /// `1 / (1 + 2 beta lambda_i P_i)` on active directions.
    pub per_direction: Vec<f64>,
    pub system_gap: f64,
    pub stiffness_ratio: f64,
    /// `1 / (2 beta sigma_i^2)` with `sigma_i^2 = lambda_i P_i`.
    pub variance_per_direction: Vec<f64>,
    pub variance_system_gap: f64,
    pub variance_stiffness_ratio: f64,
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}

/// Both displayed gap expressions over the active directions.
pub fn mimo_direction_gaps(spec: &MimoSpec, powers: &[f64]) -> Result<MimoGaps> {
    spec.validate()?;
    if powers.len() != spec.channel_gains.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.channel_gains.len(),
            found: powers.len(),
        });
    }
    let active: Vec<usize> = (0..powers.len()).filter(|&i| powers[i] > 0.0).collect();
    if active.is_empty() {
        return Err(Error::Degenerate("no direction carries power".into()));
    }
    let snr: Vec<f64> = active.iter().map(|&i| spec.channel_gains[i] * powers[i]).collect();
    let b = spec.beta;
    let per_direction: Vec<f64> = snr.iter().map(|s| 1.0 / (1.0 + 2.0 * b * s)).collect();
    let variance_per_direction: Vec<f64> = snr.iter().map(|s| 1.0 / (2.0 * b * s)).collect();
    let (lo, hi) = min_max(&per_direction);
    let (vlo, vhi) = min_max(&variance_per_direction);
    Ok(MimoGaps {
        active,
        system_gap: lo,
        stiffness_ratio: hi / lo,
        variance_system_gap: vlo,
        variance_stiffness_ratio: vhi / vlo,
        per_direction,
        variance_per_direction,
    })
}

/// Columns `P, P_0..P_{n-1}, level` over the given total powers.
pub fn water_filling_sweep(gains: &[f64], powers: &[f64], beta: f64) -> Result<Table> {
    let mut cols = vec!["total_power".to_string()];
    cols.extend((0..gains.len()).map(|i| format!("p_{i}")));
    cols.push("level".into());
    let mut t = Table::new(cols);
    for &p in powers {
        let wf = water_filling(&MimoSpec {
            channel_gains: gains.to_vec(),
            total_power: p,
            beta,
        })?;
        let mut row = vec![p];
        row.extend(&wf.powers);
        row.push(wf.level);
        t.push(row);
    }
    Ok(t)
}

/// Columns `total_power, g_0..g_{n-1}, system_gap, stiffness_ratio,
/// variance_system_gap, variance_stiffness_ratio`; inactive directions are NaN.
pub fn gap_sweep(gains: &[f64], powers: &[f64], beta: f64) -> Result<Table> {
    let mut cols = vec!["total_power".to_string()];
    cols.extend((0..gains.len()).map(|i| format!("g_{i}")));
    cols.extend(["system_gap", "stiffness_ratio", "variance_system_gap", "variance_stiffness_ratio"].map(String::from));
    let mut t = Table::new(cols);
    for &p in powers {
        let spec = MimoSpec {
            channel_gains: gains.to_vec(),
            total_power: p,
            beta,
        };
        let wf = water_filling(&spec)?;
        let gaps = mimo_direction_gaps(&spec, &wf.powers)?;
        let mut per = vec![f64::NAN; gains.len()];
        for (k, &i) in gaps.active.iter().enumerate() {
            per[i] = gaps.per_direction[k];
        }
        let mut row = vec![p];
        row.extend(per);
        row.extend([
            gaps.system_gap,
            gaps.stiffness_ratio,
            gaps.variance_system_gap,
            gaps.variance_stiffness_ratio,
        ]);
        t.push(row);
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WynerZivSpec {
    pub sigma2: f64,
    pub rho: f64,
    pub beta: f64,
}

impl WynerZivSpec {
    pub fn new(sigma2: f64, rho: f64, beta: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {sigma2}")));
        }
        if !(rho.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!("|rho| must be below 1, got {rho}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { sigma2, rho, beta })
    }

    fn effective_beta_raw(&self, s: f64) -> f64 {
        let r2 = self.rho * self.rho;
        let num = self.sigma2 * self.sigma2 * (1.0 - r2).powi(2);
        self.beta * num / (self.sigma2 - r2 * s).powi(2)
    }

    /// `s~(s, beta_eff(s)) - s`.
    pub fn field(&self, s: f64) -> f64 {
        s_tilde_raw(s, self.sigma2, self.effective_beta_raw(s)) - s
    }
}

/// `beta sigma^4 (1 - rho^2)^2 / (sigma^2 - rho^2 s)^2`.
pub fn wz_effective_beta(spec: &WynerZivSpec, s: f64) -> Result<f64> {
    if !(spec.sigma2 - spec.rho * spec.rho * s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rho^2 s = {} must stay below sigma^2 = {}",
            spec.rho * spec.rho * s,
            spec.sigma2
        )));
    }
    Ok(spec.effective_beta_raw(s))
}

/// `I(X; Y) = ln(1 / (1 - rho^2)) / 2` nats.
pub fn wz_rate_gap(rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("|rho| must be below 1, got {rho}")));
    }
    Ok(-0.5 * (-rho * rho).ln_1p())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WzSeries {
    pub series: Vec<(f64, f64)>,
    /// Largest positive root of the composed field, if any.
    pub fixed_point: Option<f64>,
    /// The ODE `ds/dt = s~(s, beta_eff(s, rho)) - s` is a modelling choice,
    /// not a derived reduction.
    pub interpreted: bool,
}

/// Largest positive root of the composed field on `(0, sigma^2]` (and below
/// `sigma^2 / rho^2`), located by a sign scan and bisection.
pub fn wz_fixed_point(spec: &WynerZivSpec) -> Option<f64> {
    let r2 = spec.rho * spec.rho;
    let hi = if r2 > 0.0 { spec.sigma2.min(spec.sigma2 / r2 * (1.0 - 1e-9)) } else { spec.sigma2 };
    let n = 4000;
    let pts: Vec<f64> = (1..=n).map(|i| hi * i as f64 / n as f64).collect();
    let mut bracket = None;
    for w in pts.windows(2) {
        if spec.field(w[0]) > 0.0 && spec.field(w[1]) <= 0.0 {
            bracket = Some((w[0], w[1]));
        }
    }
    let (mut a, mut b) = bracket?;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if spec.field(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

pub fn wz_variance_ode(spec: &WynerZivSpec, s0: f64, dt: f64, t_max: f64) -> Result<WzSeries> {
    if !(s0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("s0 must be non-negative, got {s0}")));
    }
    wz_effective_beta(spec, s0)?;
    if !(dt > 0.0 && t_max >= dt) {
        return Err(Error::InvalidParameter(format!("need 0 < dt <= t_max, got dt={dt}, t_max={t_max}")));
    }
    let series = rk4_scalar(|s| spec.field(s), s0, dt, t_max);
    let r2 = spec.rho * spec.rho;
    if let Some(&(t, s)) = series.iter().find(|(_, s)| !(spec.sigma2 - r2 * s > 0.0) || !s.is_finite()) {
        return Err(Error::Degenerate(format!("series left rho^2 s < sigma^2 at t = {t} (s = {s})")));
    }
    Ok(WzSeries {
        series,
        fixed_point: wz_fixed_point(spec),
        interpreted: true,
    })
}

/// Columns `rho, s, field` on `n` points of `[0, s_max]` for each `rho`.
pub fn wz_phase_portraits(sigma2: f64, beta: f64, rhos: &[f64], s_max: f64, n: usize) -> Result<Table> {
    let mut t = Table::new(["rho", "s", "field"]);
    for &rho in rhos {
        let spec = WynerZivSpec::new(sigma2, rho, beta)?;
        for i in 0..n {
            let s = s_max * i as f64 / (n.max(2) - 1) as f64;
            wz_effective_beta(&spec, s)?;
            t.push(vec![rho, s, spec.field(s)]);
        }
    }
    Ok(t)
}

/// Columns `rho, beta_eff_ratio` at fixed `s`.
pub fn wz_beta_ratio_sweep(sigma2: f64, s: f64, rhos: &[f64]) -> Result<Table> {
    let mut t = Table::new(["rho", "beta_eff_ratio"]);
    for &rho in rhos {
        let spec = WynerZivSpec::new(sigma2, rho, 1.0)?;
        t.push(vec![rho, wz_effective_beta(&spec, s)?]);
    }
    Ok(t)
}

/// Columns `rho, rate_gap`.
pub fn wz_rate_gap_sweep(rhos: &[f64]) -> Result<Table> {
    let mut t = Table::new(["rho", "rate_gap"]);
    for &rho in rhos {
        t.push(vec![rho, wz_rate_gap(rho)?]);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{integrate_variance_ode, GaussianParams};
    use approx::assert_abs_diff_eq;

    fn spec(g: &[f64], p: f64) -> MimoSpec {
        MimoSpec {
            channel_gains: g.to_vec(),
            total_power: p,
            beta: 1.0,
        }
    }

    #[test]
    fn water_filling_examples() {
        assert_eq!(water_filling(&spec(&[1.0, 1.0], 2.0)).unwrap().powers, vec![1.0, 1.0]);
        let wf = water_filling(&spec(&[1.0, 0.5], 3.0)).unwrap();
        assert_eq!(wf.level, 3.0);
        assert_eq!(wf.powers, vec![2.0, 1.0]);
        let tiny = water_filling(&spec(&[0.3, 2.0, 1.0], 1e-6)).unwrap();
        assert_eq!(tiny.powers[0], 0.0);
        assert_eq!(tiny.powers[2], 0.0);
        assert_abs_diff_eq!(tiny.powers[1], 1e-6, epsilon = 1e-15);
    }

    #[test]
    fn mimo_gap_examples() {
        let s = spec(&[1.0, 1.0], 2.0);
        let g = mimo_direction_gaps(&s, &[1.0, 1.0]).unwrap();
        assert_eq!(g.per_direction, vec![1.0 / 3.0; 2]);
        assert_eq!(g.stiffness_ratio, 1.0);
        let s = spec(&[1.0, 0.5], 3.0);
        let g = mimo_direction_gaps(&s, &[2.0, 1.0]).unwrap();
        assert_abs_diff_eq!(g.per_direction[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(g.per_direction[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g.system_gap, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(g.stiffness_ratio, 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(g.variance_stiffness_ratio, 4.0, epsilon = 1e-14);
        assert!(mimo_direction_gaps(&s, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn wz_examples() {
        let s = WynerZivSpec::new(1.0, 0.0, 1.7).unwrap();
        assert_eq!(wz_effective_beta(&s, 0.4).unwrap(), 1.7);
        let s = WynerZivSpec::new(1.0, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(wz_effective_beta(&s, 0.5).unwrap(), 0.5625 / 0.765625, epsilon = 1e-15);
        let big = WynerZivSpec::new(4.0, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(wz_effective_beta(&big, 2.0).unwrap(), wz_effective_beta(&s, 0.5).unwrap(), epsilon = 1e-15);
        assert_eq!(wz_rate_gap(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(wz_rate_gap(0.75f64.sqrt()).unwrap(), 2f64.ln(), epsilon = 1e-12);
        assert_eq!(wz_rate_gap(0.3).unwrap(), wz_rate_gap(-0.3).unwrap());
        assert!(wz_rate_gap(1.0).is_err());
    }

    #[test]
    fn wz_reduces_to_plain_variance_ode() {
        let wz = wz_variance_ode(&WynerZivSpec::new(1.0, 0.0, 2.0).unwrap(), 1.0, 0.05, 5.0).unwrap();
        let plain = integrate_variance_ode(&GaussianParams::new(1.0, 2.0).unwrap(), 1.0, 0.05, 5.0).unwrap();
        assert_eq!(wz.series, plain);
        assert!(wz.interpreted);
        assert_abs_diff_eq!(wz.fixed_point.unwrap(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn wz_fixed_point_shifts_down() {
        let fps: Vec<f64> = [0.0, 0.3, 0.6]
            .iter()
            .map(|&r| wz_fixed_point(&WynerZivSpec::new(1.0, r, 2.0).unwrap()).unwrap())
            .collect();
        assert!(fps[0] > fps[1] && fps[1] > fps[2], "{fps:?}");
    }
}
