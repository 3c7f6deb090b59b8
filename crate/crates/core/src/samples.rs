//! Seeded random problems for test suites and the verification runner.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ba::BaProblem;
use crate::error::{Error, Result};
use crate::flow::ba_fixed_point;
use crate::simplex::ProbVec;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Normalized exponential draws (a flat Dirichlet sample), bounded away from
/// zero by mixing with the uniform vector.
pub fn random_probvec<R: Rng>(rng: &mut R, n: usize) -> ProbVec {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln() + 0.05).collect();
    ProbVec::renormalized(raw).expect("positive draws")
}

/// Source from [`random_probvec`], costs uniform on `[0, cost_scale)`.
pub fn random_problem<R: Rng>(rng: &mut R, m: usize, n: usize, beta: f64, cost_scale: f64) -> BaProblem {
    let source = random_probvec(rng, m);
    let cost = DMatrix::from_fn(m, n, |_, _| cost_scale * rng.random::<f64>());
    BaProblem::new(source, cost, beta).expect("finite random problem")
}

/// Uniform source on `n` letters with circulant cost `d(x, y) = c[(y - x) mod n]`,
/// `c[0] = 0`. The uniform output distribution is an exact fixed point.
pub fn random_circulant_problem<R: Rng>(rng: &mut R, n: usize, beta: f64, cost_scale: f64) -> BaProblem {
    let mut c = vec![0.0; n];
    for v in c.iter_mut().skip(1) {
        *v = cost_scale * (0.2 + rng.random::<f64>());
    }
    let cost = DMatrix::from_fn(n, n, |x, y| c[(y + n - x) % n]);
    BaProblem::new(ProbVec::uniform(n).expect("n >= 2"), cost, beta).expect("finite circulant problem")
}

/// Square problem whose cost favours the diagonal,
/// `d(x, y) = cost_scale (1 - [x = y]) + 0.5 cost_scale u` with `u ~ U(0, 1)`,
/// redrawn until the BA iteration certifies an interior fixed point
/// (residual `<= 1e-13`, all entries `>= 1e-3`).
pub fn random_interior_problem<R: Rng>(rng: &mut R, n: usize, beta: f64, cost_scale: f64) -> Result<(BaProblem, ProbVec)> {
    for _ in 0..200 {
        let source = random_probvec(rng, n);
        let cost = DMatrix::from_fn(n, n, |x, y| {
            let base = if x == y { 0.0 } else { cost_scale };
            base + 0.5 * cost_scale * rng.random::<f64>()
        });
        let prob = BaProblem::new(source, cost, beta)?;
        // boundary optima drain an entry to underflow, which surfaces as an error
        if let Ok(fp) = ba_fixed_point(&prob, &ProbVec::uniform(n)?, 1e-13, 20_000) {
            if fp.converged && fp.q.min_entry() >= 1e-3 {
                return Ok((prob, fp.q));
            }
        }
    }
    Err(Error::Degenerate(format!(
        "no interior fixed point found for {n}-letter problems at beta = {beta}"
    )))
}
