//! The Blahut-Arimoto operator on a finite problem.
//!
//! For a source `p` on `X`, a cost `d(x, y)` and inverse temperature `beta`,
//! the Gibbs kernel of a reproduction distribution `q` is
//! `K_q(x, y) = exp(-beta d(x, y)) q(y) / Z_q(x)` (row-stochastic), and the BA
//! operator is `T q = sum_x p(x) K_q(x, .)`.
//!
//! Boltzmann weights are stored with each row shifted by its minimum cost, so
//! `exp(-beta (d - min_y d))` lies in `(0, 1]` and `beta * d` up to several
//! hundred does not overflow. Log-partitions add the shift back.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{ProbVec, TangentVec};

#[derive(Debug, Clone)]
pub struct BaProblem {
    source: ProbVec,
    cost: DMatrix<f64>,
    beta: f64,
    weights: DMatrix<f64>,
    row_min: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BaProblemRepr {
    source: Vec<f64>,
    cost: Vec<Vec<f64>>,
    beta: f64,
}

impl BaProblem {
    /// `cost` is `|X| x |Y|`. `beta = 0` is accepted and makes `T` the identity.
    pub fn new(source: ProbVec, cost: DMatrix<f64>, beta: f64) -> Result<Self> {
        if cost.nrows() != source.dim() {
            return Err(Error::DimensionMismatch {
                expected: source.dim(),
                found: cost.nrows(),
            });
        }
        if cost.ncols() < 2 {
            return Err(Error::TooSmall(cost.ncols()));
        }
        if cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("cost matrix"));
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta must be finite and non-negative, got {beta}"
            )));
        }
        let row_min: Vec<f64> = cost
            .row_iter()
            .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        let weights = DMatrix::from_fn(cost.nrows(), cost.ncols(), |x, y| {
            (-beta * (cost[(x, y)] - row_min[x])).exp()
        });
        Ok(Self {
            source,
            cost,
            beta,
            weights,
            row_min,
        })
    }

    pub fn source(&self) -> &ProbVec {
        &self.source
    }

    pub fn cost(&self) -> &DMatrix<f64> {
        &self.cost
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Size of the source alphabet.
    pub fn m(&self) -> usize {
        self.cost.nrows()
    }

    /// Size of the output alphabet.
    pub fn n(&self) -> usize {
        self.cost.ncols()
    }

    /// Same source and cost at a different inverse temperature.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.source.clone(), self.cost.clone(), beta)
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem serializes")
    }

    fn check(&self, q: &ProbVec) -> Result<()> {
        if q.dim() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: q.dim(),
            });
        }
        Ok(())
    }

    /// Shifted partitions `sum_y w(x, y) q(y)` for a positive (not necessarily
    /// normalized) `q`.
    fn shifted_partitions(&self, q: &[f64]) -> Vec<f64> {
        self.weights
            .row_iter()
            .map(|row| row.iter().zip(q).map(|(w, v)| w * v).sum())
            .collect()
    }

    /// `Psi(y) = T q(y) / q(y) = sum_x p(x) exp(-beta d(x, y)) / Z_q(x)`.
    pub(crate) fn tilt_raw(&self, q: &[f64]) -> Vec<f64> {
        let z = self.shifted_partitions(q);
        let p = self.source.as_slice();
        let mut psi = vec![0.0; self.n()];
        for x in 0..self.m() {
            let c = p[x] / z[x];
            for (y, slot) in psi.iter_mut().enumerate() {
                *slot += c * self.weights[(x, y)];
            }
        }
        psi
    }

    /// `T q` for any strictly positive vector. The output always has unit mass.
    pub(crate) fn apply_raw(&self, q: &[f64]) -> Vec<f64> {
        self.tilt_raw(q)
            .into_iter()
            .zip(q)
            .map(|(psi, v)| psi * v)
            .collect()
    }

    pub fn gibbs_state(&self, q: &ProbVec) -> Result<GibbsState> {
        self.check(q)?;
        let qs = q.as_slice();
        let z = self.shifted_partitions(qs);
        let kernels = DMatrix::from_fn(self.m(), self.n(), |x, y| self.weights[(x, y)] * qs[y] / z[x]);
        let log_partition = z
            .iter()
            .zip(&self.row_min)
            .map(|(zs, dmin)| zs.ln() - self.beta * dmin)
            .collect();
        Ok(GibbsState {
            kernels,
            log_partition,
        })
    }

    pub fn ba_map(&self, q: &ProbVec) -> Result<ProbVec> {
        self.check(q)?;
        ProbVec::renormalized(self.apply_raw(q.as_slice()))
    }

    /// Variational marginal free energy `-sum_x p(x) log Z_q(x)` in nats.
    ///
    /// This is the value of `min_r KL(r || q) + beta E_r[d(x, .)]` averaged over
    /// the source; along the flow it decreases at exactly the rate
    /// `chi^2(T q || q)`.
    pub fn free_energy(&self, q: &ProbVec) -> Result<f64> {
        self.check(q)?;
        Ok(self.free_energy_raw(q.as_slice()))
    }

    pub(crate) fn free_energy_raw(&self, q: &[f64]) -> f64 {
        let z = self.shifted_partitions(q);
        -self
            .source
            .as_slice()
            .iter()
            .zip(z.iter().zip(&self.row_min))
            .map(|(p, (zs, dmin))| p * (zs.ln() - self.beta * dmin))
            .sum::<f64>()
    }

    /// `sum_x p(x) log Z_q(x) + beta^{-1} sum_y q log q`.
    ///
    /// Kept as a diagnostic only: it is not monotone along the flow, since its
    /// time derivative is `+chi^2(T q || q)` plus an entropy-production term.
    pub fn entropic_free_energy(&self, q: &ProbVec) -> Result<f64> {
        self.check(q)?;
        if self.beta == 0.0 {
            return Err(Error::InvalidParameter("entropic free energy needs beta > 0".into()));
        }
        let neg_entropy: f64 = q.as_slice().iter().map(|v| v * v.ln()).sum();
        Ok(-self.free_energy_raw(q.as_slice()) + neg_entropy / self.beta)
    }

    /// Euclidean gradient `-T q(y) / q(y)` of [`free_energy`](Self::free_energy).
    pub fn free_energy_gradient(&self, q: &ProbVec) -> Result<Vec<f64>> {
        self.check(q)?;
        Ok(self.tilt_raw(q.as_slice()).into_iter().map(|v| -v).collect())
    }

    /// Velocity of the flow, `T q - q`.
    pub fn velocity(&self, q: &ProbVec) -> Result<TangentVec> {
        self.check(q)?;
        let t = self.apply_raw(q.as_slice());
        TangentVec::new(t.iter().zip(q.as_slice()).map(|(a, b)| a - b).collect())
    }

    /// Pearson `chi^2(T q || q)`.
    pub fn dissipation(&self, q: &ProbVec) -> Result<f64> {
        self.check(q)?;
        let t = self.apply_raw(q.as_slice());
        Ok(t.iter()
            .zip(q.as_slice())
            .map(|(a, b)| (a - b) * (a - b) / b)
            .sum())
    }

    /// `max_y |T q(y) / q(y) - 1|`; zero exactly at fixed points.
    pub fn dual_identity_residual(&self, q: &ProbVec) -> Result<f64> {
        self.check(q)?;
        Ok(self
            .tilt_raw(q.as_slice())
            .into_iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0, f64::max))
    }

    /// Replicator form `q (Psi - E_q[Psi])` of the velocity.
    pub fn replicator_field(&self, q: &ProbVec) -> Result<Vec<f64>> {
        self.check(q)?;
        let psi = self.tilt_raw(q.as_slice());
        let mean = q.expectation(&psi);
        Ok(q.as_slice()
            .iter()
            .zip(&psi)
            .map(|(v, s)| v * (s - mean))
            .collect())
    }
}

impl Serialize for BaProblem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BaProblemRepr {
            source: self.source.as_slice().to_vec(),
            cost: self
                .cost
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            beta: self.beta,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BaProblem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = BaProblemRepr::deserialize(d)?;
        let ncols = repr.cost.first().map_or(0, Vec::len);
        if repr.cost.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("cost rows have unequal lengths"));
        }
        let cost = DMatrix::from_fn(repr.cost.len(), ncols, |i, j| repr.cost[i][j]);
        let source = ProbVec::new(repr.source).map_err(D::Error::custom)?;
        BaProblem::new(source, cost, repr.beta).map_err(D::Error::custom)
    }
}

/// Gibbs kernels of a reproduction distribution.
#[derive(Debug, Clone)]
pub struct GibbsState {
    /// Row-stochastic `|X| x |Y|` matrix `K_q(x, y)`.
    pub kernels: DMatrix<f64>,
    pub log_partition: Vec<f64>,
}

impl GibbsState {
    pub fn partition(&self) -> Vec<f64> {
        self.log_partition.iter().map(|l| l.exp()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_point(alpha: f64, d: f64, beta: f64) -> BaProblem {
        let cost = DMatrix::from_row_slice(2, 2, &[0.0, d, d, 0.0]);
        BaProblem::new(ProbVec::new(vec![alpha, 1.0 - alpha]).unwrap(), cost, beta).unwrap()
    }

    #[test]
    fn zero_beta_kernels_equal_q() {
        let prob = two_point(0.3, 5.0, 0.0);
        let q = ProbVec::new(vec![0.2, 0.8]).unwrap();
        let g = prob.gibbs_state(&q).unwrap();
        for x in 0..2 {
            assert_abs_diff_eq!(g.kernels[(x, 0)], 0.2, epsilon = 1e-15);
            assert_abs_diff_eq!(g.kernels[(x, 1)], 0.8, epsilon = 1e-15);
        }
        assert_eq!(prob.ba_map(&q).unwrap().as_slice(), q.as_slice());
        assert_eq!(prob.dissipation(&q).unwrap(), 0.0);
        assert_eq!(prob.dual_identity_residual(&q).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_two_point_kernel() {
        let bd = 2.0;
        let prob = two_point(0.5, bd, 1.0);
        let half = ProbVec::uniform(2).unwrap();
        let g = prob.gibbs_state(&half).unwrap();
        let e = (-bd).exp();
        assert_abs_diff_eq!(g.kernels[(0, 0)], 1.0 / (1.0 + e), epsilon = 1e-15);
        assert_abs_diff_eq!(g.kernels[(0, 1)], e / (1.0 + e), epsilon = 1e-15);
        assert_abs_diff_eq!(g.partition()[0], 0.5 * (1.0 + e), epsilon = 1e-15);
        let t = prob.ba_map(&half).unwrap();
        assert_abs_diff_eq!(t[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn constant_cost_rows_give_q() {
        let cost = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 4.0, 4.0, 4.0]);
        let prob = BaProblem::new(ProbVec::new(vec![0.4, 0.6]).unwrap(), cost, 3.0).unwrap();
        let q = ProbVec::new(vec![0.2, 0.3, 0.5]).unwrap();
        let g = prob.gibbs_state(&q).unwrap();
        for x in 0..2 {
            for y in 0..3 {
                assert_abs_diff_eq!(g.kernels[(x, y)], q[y], epsilon = 1e-15);
            }
        }
        // log Z = -beta c, so F = beta * E_p[c]
        assert_abs_diff_eq!(prob.free_energy(&q).unwrap(), 3.0 * (0.4 + 0.6 * 4.0), epsilon = 1e-13);
    }

    #[test]
    fn free_energy_of_zero_cost_vanishes() {
        let prob = BaProblem::new(ProbVec::uniform(3).unwrap(), DMatrix::zeros(3, 4), 2.0).unwrap();
        let q = ProbVec::uniform(4).unwrap();
        assert_eq!(prob.free_energy(&q).unwrap(), 0.0);
        assert_abs_diff_eq!(
            prob.entropic_free_energy(&q).unwrap(),
            -(4.0f64).ln() / 2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn asymmetric_two_point_matches_double_sum() {
        let (alpha, bd) = (0.7, 1.0);
        let prob = two_point(alpha, bd, 1.0);
        let q = [0.5, 0.5];
        let p = [alpha, 1.0 - alpha];
        let d = [[0.0, bd], [bd, 0.0]];
        let mut t = [0.0; 2];
        for x in 0..2 {
            let z: f64 = (0..2).map(|y| (-d[x][y] as f64).exp() * q[y]).sum();
            for y in 0..2 {
                t[y] += p[x] * (-d[x][y] as f64).exp() * q[y] / z;
            }
        }
        let qv = ProbVec::new(q.to_vec()).unwrap();
        let got = prob.ba_map(&qv).unwrap();
        assert_abs_diff_eq!(got[0], t[0], epsilon = 1e-15);
        assert_abs_diff_eq!(got[1], t[1], epsilon = 1e-15);
        let chi2: f64 = (0..2).map(|y| (t[y] - q[y]).powi(2) / q[y]).sum();
        assert!((prob.dissipation(&qv).unwrap() - chi2).abs() <= 1e-14);
        let resid = (0..2).map(|y| (t[y] / q[y] - 1.0).abs()).fold(0.0, f64::max);
        assert_abs_diff_eq!(prob.dual_identity_residual(&qv).unwrap(), resid, epsilon = 1e-14);
    }

    #[test]
    fn residual_far_from_fixed_point() {
        let prob = two_point(0.5, 2.0, 1.0);
        let q = ProbVec::new(vec![0.9, 0.1]).unwrap();
        let e = (-2.0f64).exp();
        let z0 = 0.9 + 0.1 * e;
        let z1 = 0.9 * e + 0.1;
        let psi0 = 0.5 / z0 + 0.5 * e / z1;
        let psi1 = 0.5 * e / z0 + 0.5 / z1;
        let expected = (psi0 - 1.0).abs().max((psi1 - 1.0).abs());
        let got = prob.dual_identity_residual(&q).unwrap();
        assert!(got > 0.0);
        assert_abs_diff_eq!(got, expected, epsilon = 1e-14);
    }

    #[test]
    fn replicator_identity() {
        let cost = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 2.5, 1.5, 0.3, 0.0]);
        let prob = BaProblem::new(ProbVec::new(vec![0.35, 0.65]).unwrap(), cost, 1.3).unwrap();
        let q = ProbVec::new(vec![0.2, 0.5, 0.3]).unwrap();
        let v = prob.velocity(&q).unwrap();
        let r = prob.replicator_field(&q).unwrap();
        for (a, b) in v.as_slice().iter().zip(&r) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cost = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0]);
        let prob = BaProblem::new(ProbVec::new(vec![0.2, 0.5, 0.3]).unwrap(), cost, 1.7).unwrap();
        let q = ProbVec::new(vec![0.3, 0.3, 0.4]).unwrap();
        let g = prob.free_energy_gradient(&q).unwrap();
        let h = [0.5, -0.2, -0.3];
        let step = 1e-5;
        let shift = |s: f64| -> Vec<f64> { q.as_slice().iter().zip(&h).map(|(a, b)| a + s * b).collect() };
        let fd = (prob.free_energy_raw(&shift(step)) - prob.free_energy_raw(&shift(-step))) / (2.0 * step);
        let an: f64 = g.iter().zip(&h).map(|(a, b)| a * b).sum();
        assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-12));
    }

    #[test]
    fn large_beta_d_does_not_overflow() {
        let prob = two_point(0.5, 700.0, 1.0);
        let q = ProbVec::new(vec![0.3, 0.7]).unwrap();
        let t = prob.ba_map(&q).unwrap();
        assert!(t.as_slice().iter().all(|v| v.is_finite()));
        assert!(prob.free_energy(&q).unwrap().is_finite());
    }

    #[test]
    fn rejects_bad_inputs() {
        let cost = DMatrix::from_row_slice(2, 2, &[0.0, f64::INFINITY, 1.0, 0.0]);
        assert!(BaProblem::new(ProbVec::uniform(2).unwrap(), cost, 1.0).is_err());
        let prob = two_point(0.5, 1.0, 1.0);
        assert!(prob.ba_map(&ProbVec::uniform(3).unwrap()).is_err());
        assert!(BaProblem::new(ProbVec::uniform(2).unwrap(), DMatrix::zeros(2, 2), -1.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let prob = two_point(0.7, 2.0, 1.5);
        let back = BaProblem::from_json(&prob.to_json()).unwrap();
        assert_eq!(back.source(), prob.source());
        assert_eq!(back.cost(), prob.cost());
        assert_eq!(back.beta(), 1.5);
        let parsed = BaProblem::from_json(r#"{"source":[0.5,0.5],"cost":[[0,1],[1,0]],"beta":2}"#).unwrap();
        assert_eq!(parsed.n(), 2);
        assert!(BaProblem::from_json(r#"{"source":[0.5,0.6],"cost":[[0,1],[1,0]],"beta":2}"#).is_err());
    }
}
