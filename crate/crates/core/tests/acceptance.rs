//! One test per acceptance criterion. Each prints a PASS/FAIL line with the
//! first failing check and the recorded metrics.

use baflow::verify::{run_criterion, CriterionResult};

const SEED: u64 = 20240917;

fn run(id: u8) -> CriterionResult {
    let r = run_criterion(id, SEED);
    println!("{}", r.line());
    for (k, v) in &r.metrics {
        println!("    {k} = {v:.6e}");
    }
    for f in r.failures.iter().skip(1) {
        println!("    also: {f}");
    }
    for n in &r.notes {
        println!("    note: {n}");
    }
    r
}

macro_rules! criterion {
    ($name:ident, $id:expr) => {
        #[test]
        fn $name() {
            let r = run($id);
            assert!(r.passed, "{}", r.line());
        }
    };
}

criterion!(c01_chi_square_dissipation, 1);
criterion!(c02_dissipation_is_fisher_rao_norm, 2);
criterion!(c03_fixed_point_identity_and_row_sums, 3);
criterion!(c04_linearization_ground_truth, 4);
criterion!(c05_two_point_closed_form, 5);
criterion!(c06_high_temperature, 6);
criterion!(c07_gaussian_reduction, 7);
criterion!(c08_hermite_spectrum, 8);
criterion!(c09_critical_slowing_down, 9);
criterion!(c10_second_moment_bound, 10);
criterion!(c11_entry_time_bound, 11);
criterion!(c12_two_scale_convergence, 12);
criterion!(c13_fisher_rao_comparison, 13);
criterion!(c14_mimo_and_wyner_ziv, 14);
