//! Property tests over random problems and points of the simplex.

use baflow::samples::{random_probvec, rng};
use baflow::simplex::{divergence, fr_inner, project_tangent, DivergenceKind, ProbVec, TangentVec};
use baflow::BaProblem;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn probvec(n: usize) -> impl Strategy<Value = ProbVec> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|v| ProbVec::renormalized(v).unwrap())
}

fn problem() -> impl Strategy<Value = (BaProblem, ProbVec)> {
    (2usize..6, 2usize..6).prop_flat_map(|(m, n)| {
        (
            probvec(m),
            prop::collection::vec(0.0f64..3.0, m * n),
            0.05f64..5.0,
            probvec(n),
        )
            .prop_map(move |(p, c, beta, q)| {
                let cost = DMatrix::from_row_slice(m, n, &c);
                (BaProblem::new(p, cost, beta).unwrap(), q)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ba_map_stays_on_simplex((prob, q) in problem()) {
        let next = prob.ba_map(&q).unwrap();
        let sum: f64 = next.as_slice().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(next.min_entry() > 0.0);
    }

    #[test]
    fn velocity_is_tangent((prob, q) in problem()) {
        let v = prob.velocity(&q).unwrap();
        let s: f64 = v.as_slice().iter().sum();
        prop_assert!(s.abs() < 1e-12);
    }

    #[test]
    fn dissipation_is_fr_norm_of_velocity((prob, q) in problem()) {
        let d = prob.dissipation(&q).unwrap();
        let v = prob.velocity(&q).unwrap();
        let n = fr_inner(&v, &v, &q).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!((d - n).abs() <= 1e-14 * d.max(1.0));
    }

    #[test]
    fn free_energy_does_not_increase_under_ba_map((prob, q) in problem()) {
        let f0 = prob.free_energy(&q).unwrap();
        let f1 = prob.free_energy(&prob.ba_map(&q).unwrap()).unwrap();
        prop_assert!(f1 <= f0 + 1e-12 * f0.abs().max(1.0));
    }

    #[test]
    fn gradient_pairs_with_velocity_to_minus_dissipation((prob, q) in problem()) {
        // dF/dt along the flow is <grad F, V> = -chi^2
        let g = prob.free_energy_gradient(&q).unwrap();
        let v = prob.velocity(&q).unwrap();
        let pairing: f64 = g.iter().zip(v.as_slice()).map(|(a, b)| a * b).sum();
        let d = prob.dissipation(&q).unwrap();
        prop_assert!((pairing + d).abs() <= 1e-12 * d.max(1.0));
    }

    #[test]
    fn divergences_are_nonnegative(r in probvec(5), q in probvec(5)) {
        for kind in [DivergenceKind::Chi2, DivergenceKind::Kl, DivergenceKind::Jeffreys, DivergenceKind::L1, DivergenceKind::L2] {
            prop_assert!(divergence(kind, &r, &q).unwrap() >= 0.0);
            prop_assert!(divergence(kind, &q, &q).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn projection_is_idempotent(v in prop::collection::vec(-5.0f64..5.0, 2..8)) {
        let once = project_tangent(&v);
        let twice = project_tangent(once.as_slice());
        for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
            prop_assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn fr_inner_is_symmetric_and_positive(q in probvec(4), a in prop::collection::vec(-1.0f64..1.0, 4), b in prop::collection::vec(-1.0f64..1.0, 4)) {
        let u = project_tangent(&a);
        let w = project_tangent(&b);
        let uw = fr_inner(&u, &w, &q).unwrap();
        let wu = fr_inner(&w, &u, &q).unwrap();
        prop_assert!((uw - wu).abs() < 1e-13);
        prop_assert!(fr_inner(&u, &u, &q).unwrap() >= 0.0);
    }
}

#[test]
fn seeded_draws_depend_only_on_seed() {
    let a = random_probvec(&mut rng(5), 6);
    let b = random_probvec(&mut rng(5), 6);
    assert_eq!(a, b);
    assert!(TangentVec::new(vec![1.0, 1.0]).is_err());
}
