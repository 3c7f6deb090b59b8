//! End-to-end runs through the public API.

use approx::assert_abs_diff_eq;
use baflow::flow::{fit_decay_rate, verify_dissipation};
use baflow::models::{self, two_point_fixed_point, two_point_problem, TwoPointSpec};
use baflow::{ba_fixed_point, gram_kernel, integrate_flow, jacobian_spectrum, tangent_spectrum};
use baflow::{BaProblem, IntegratorConfig, ProbVec};

#[test]
fn two_point_flow_reaches_closed_form_fixed_point() {
    let spec = TwoPointSpec::new(0.7, 3.0).unwrap();
    let prob = two_point_problem(&spec);
    let theta = two_point_fixed_point(&spec).unwrap();
    let q0 = ProbVec::new(vec![0.1, 0.9]).unwrap();
    let traj = integrate_flow(&prob, &q0, &IntegratorConfig::with_dt(0.05, 40.0), None).unwrap();
    assert_abs_diff_eq!(traj.last().q[0], theta, epsilon = 1e-9);
    let fe = traj.free_energies();
    assert!(fe.windows(2).all(|w| w[1] <= w[0] + 1e-14));
}

#[test]
fn symmetric_decay_rate_matches_linearization() {
    let prob = two_point_problem(&TwoPointSpec::new(0.5, 2.0).unwrap());
    let half = ProbVec::uniform(2).unwrap();
    let q0 = ProbVec::new(vec![0.8, 0.2]).unwrap();
    let traj = integrate_flow(&prob, &q0, &IntegratorConfig::with_dt(0.02, 40.0), Some(&half)).unwrap();
    let fit = fit_decay_rate(&traj, &half, 0.5).unwrap();
    let rate = 1f64.tanh().powi(2);
    assert!((fit.rate - rate).abs() / rate < 0.10, "fitted {}", fit.rate);
    let jac = jacobian_spectrum(&prob, &half).unwrap();
    assert_abs_diff_eq!(jac.eigenvalues[0], rate, epsilon = 1e-8);
    let gram = tangent_spectrum(&gram_kernel(&prob, &half).unwrap());
    assert_abs_diff_eq!(gram.gap, 0.5 * rate, epsilon = 1e-12);
}

#[test]
fn three_cluster_run_matches_fd_rate() {
    let spec = models::ThreeClusterSpec::experiment_default();
    let rep = models::two_scale_experiment(
        &spec,
        &models::StartMode::UniformPerturbed,
        &IntegratorConfig::with_dt(0.05, 30.0),
    )
    .unwrap();
    assert!((rep.fitted_rate - rep.fd_min_rate).abs() / rep.fd_min_rate < 0.10);
    assert!(rep.fitted_rate >= rep.bound_rate);
    assert_eq!(rep.to_table().columns.last().unwrap(), "bound_line");
}

#[test]
fn dissipation_identity_on_a_file_problem() {
    let json = r#"{"source": [0.5, 0.3, 0.2], "cost": [[0, 1, 2], [1, 0, 1], [2, 1, 0]], "beta": 1.5}"#;
    let prob = BaProblem::from_json(json).unwrap();
    assert_eq!((prob.m(), prob.n()), (3, 3));
    let q0 = ProbVec::new(vec![0.6, 0.3, 0.1]).unwrap();
    let traj = integrate_flow(&prob, &q0, &IntegratorConfig::with_dt(1e-3, 1.0), None).unwrap();
    assert!(verify_dissipation(&traj).unwrap().max_abs_err < 1e-5);
    let again = BaProblem::from_json(&prob.to_json()).unwrap();
    assert_eq!(again.cost(), prob.cost());
}

#[test]
fn fixed_point_iteration_agrees_with_flow_limit() {
    let json = r#"{"source": [0.4, 0.6], "cost": [[0, 2], [1.5, 0]], "beta": 1.0}"#;
    let prob = BaProblem::from_json(json).unwrap();
    let u = ProbVec::uniform(2).unwrap();
    let fp = ba_fixed_point(&prob, &u, 1e-14, 100_000).unwrap();
    assert!(fp.converged);
    let traj = integrate_flow(&prob, &u, &IntegratorConfig::with_dt(0.05, 60.0), None).unwrap();
    assert_abs_diff_eq!(traj.last().q[0], fp.q[0], epsilon = 1e-10);
}

#[test]
fn invalid_problem_json_is_rejected() {
    assert!(BaProblem::from_json(r#"{"source": [0.5, 0.6], "cost": [[0, 1], [1, 0]], "beta": 1}"#).is_err());
    assert!(BaProblem::from_json(r#"{"source": [0.5, 0.5], "cost": [[0, 1]], "beta": 1}"#).is_err());
    assert!(BaProblem::from_json(r#"{"source": [0.5, 0.5], "cost": [[0, 1], [1, 0]], "beta": -1}"#).is_err());
}
