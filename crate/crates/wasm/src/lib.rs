//! Browser bindings for the demo page. Every export returns a flat
//! `Float64Array`; the row layout is given on each function.

use baflow::gaussian::GaussianParams;
use baflow::models::{linspace, two_point_gaps, two_point_problem, TwoPointSpec};
use baflow::{integrate_flow, IntegratorConfig, ProbVec};
use wasm_bindgen::prelude::*;

fn js(e: String) -> JsValue {
    JsValue::from_str(&e)
}

/// Row-major `na x nb` grid of the two-point gap over
/// `alpha in [a_lo, a_hi]` (rows) and `beta_d in [b_lo, b_hi]` (columns).
/// NaN where the optimum sits on the boundary.
pub fn gap_grid(a_lo: f64, a_hi: f64, na: usize, b_lo: f64, b_hi: f64, nb: usize) -> Result<Vec<f64>, String> {
    if na == 0 || nb == 0 || na * nb > 250_000 {
        return Err(format!("grid size {na} x {nb} out of range"));
    }
    let mut out = Vec::with_capacity(na * nb);
    for a in linspace(a_lo, a_hi, na) {
        for bd in linspace(b_lo, b_hi, nb) {
            let gap = TwoPointSpec::new(a, bd)
                .ok()
                .filter(TwoPointSpec::has_interior_fixed_point)
                .and_then(|s| two_point_gaps(&s).ok())
                .map_or(f64::NAN, |g| g.lambda_star);
            out.push(gap);
        }
    }
    Ok(out)
}

/// Pairs `(s, s~(s) - s)` on `n` points of `[0, s_max]`, followed by the
/// fixed point `s*` (0 in the degenerate regime) as the last entry.
pub fn phase_curve(sigma2: f64, beta: f64, s_max: f64, n: usize) -> Result<Vec<f64>, String> {
    let gp = GaussianParams::new(sigma2, beta).map_err(|e| e.to_string())?;
    if n < 2 || !(s_max > 0.0) {
        return Err("need n >= 2 and s_max > 0".into());
    }
    let t = baflow::gaussian::phase_portrait(&gp, s_max, n);
    let mut out: Vec<f64> = t.rows.iter().flat_map(|r| [r[1], r[2]]).collect();
    out.push(if gp.is_degenerate() { 0.0 } else { gp.s_star() });
    Ok(out)
}

/// Quadruples `(t, q_0, free_energy, dissipation)` of the two-point flow.
pub fn two_point_trajectory(alpha: f64, beta_d: f64, q0: f64, dt: f64, t_max: f64) -> Result<Vec<f64>, String> {
    let spec = TwoPointSpec::new(alpha, beta_d).map_err(|e| e.to_string())?;
    let prob = two_point_problem(&spec);
    let start = ProbVec::new(vec![q0, 1.0 - q0]).map_err(|e| e.to_string())?;
    if !(dt > 0.0) || t_max / dt > 20_000.0 {
        return Err("need dt > 0 and at most 20000 steps".into());
    }
    let cfg = IntegratorConfig::with_dt(dt, t_max);
    let traj = integrate_flow(&prob, &start, &cfg, None).map_err(|e| e.to_string())?;
    Ok(traj
        .samples
        .iter()
        .flat_map(|s| [s.t, s.q[0], s.free_energy, s.dissipation])
        .collect())
}

#[wasm_bindgen(js_name = gapGrid)]
pub fn gap_grid_js(a_lo: f64, a_hi: f64, na: usize, b_lo: f64, b_hi: f64, nb: usize) -> Result<Vec<f64>, JsValue> {
    gap_grid(a_lo, a_hi, na, b_lo, b_hi, nb).map_err(js)
}

#[wasm_bindgen(js_name = phaseCurve)]
pub fn phase_curve_js(sigma2: f64, beta: f64, s_max: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    phase_curve(sigma2, beta, s_max, n).map_err(js)
}

#[wasm_bindgen(js_name = twoPointTrajectory)]
pub fn two_point_trajectory_js(alpha: f64, beta_d: f64, q0: f64, dt: f64, t_max: f64) -> Result<Vec<f64>, JsValue> {
    two_point_trajectory(alpha, beta_d, q0, dt, t_max).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_column_matches_closed_form() {
        let g = gap_grid(0.5, 0.5, 1, 2.0, 2.0, 1).unwrap();
        assert!((g[0] - 0.5 * 1f64.tanh().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn phase_curve_ends_with_fixed_point() {
        let v = phase_curve(1.0, 1.0, 2.0, 11).unwrap();
        assert_eq!(v.len(), 23);
        assert!((v[22] - 0.5).abs() < 1e-15);
        assert!(v[3] > 0.0 && v[21] < 0.0);
    }

    #[test]
    fn trajectory_layout() {
        let v = two_point_trajectory(0.5, 2.0, 0.9, 0.1, 1.0).unwrap();
        assert_eq!(v.len(), 4 * 11);
        assert!(v[4 * 10 + 2] <= v[2]);
        assert!(two_point_trajectory(0.5, 2.0, 1.0, 0.1, 1.0).is_err());
    }
}
