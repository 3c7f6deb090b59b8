//! Points and tangent vectors of the open probability simplex.
//!
//! A [`ProbVec`] is a strictly positive distribution on a finite alphabet of
//! size `N >= 2`; a [`TangentVec`] is a zero-sum direction of motion. The
//! Fisher-Rao inner product `<u, v>_q = sum u v / q` and the divergences used by
//! the flow diagnostics live here too.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries at or below this value are treated as having left the interior.
pub const POSITIVITY_EPS: f64 = 1e-300;

/// Allowed deviation of `sum q` from 1.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Strictly positive probability vector on the output alphabet.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbVec {
    values: Vec<f64>,
}

impl ProbVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooSmall(values.len()));
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite("probability vector"));
            }
            if value <= POSITIVITY_EPS {
                return Err(Error::NotInterior { index, value });
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { values })
    }

    /// Divides by the total mass before validating.
    pub fn renormalized(mut values: Vec<f64>) -> Result<Self> {
        let sum: f64 = values.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(Error::NonFinite("probability vector mass"));
        }
        values.iter_mut().for_each(|v| *v /= sum);
        Self::new(values)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooSmall(n));
        }
        Ok(Self {
            values: vec![1.0 / n as f64; n],
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn min_entry(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `E_q[f]` for a function given by its values on the alphabet.
    pub fn expectation(&self, f: &[f64]) -> f64 {
        self.values.iter().zip(f).map(|(q, v)| q * v).sum()
    }
}

impl<'de> Deserialize<'de> for ProbVec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        ProbVec::new(values).map_err(serde::de::Error::custom)
    }
}

impl std::ops::Index<usize> for ProbVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Zero-sum direction in the tangent space of the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVec {
    values: Vec<f64>,
}

impl TangentVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tangent vector"));
        }
        let sum: f64 = values.iter().sum();
        let scale = values.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        if sum.abs() > NORMALIZATION_TOL * scale {
            return Err(Error::NotTangent { sum });
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Orthogonal projection onto the zero-sum hyperplane: `v - mean(v) 1`.
pub fn project_tangent(v: &[f64]) -> TangentVec {
    if v.is_empty() {
        return TangentVec { values: Vec::new() };
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    TangentVec {
        values: v.iter().map(|x| x - mean).collect(),
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Fisher-Rao inner product `sum_y u(y) v(y) / q(y)`.
pub fn fr_inner(u: &TangentVec, v: &TangentVec, q: &ProbVec) -> Result<f64> {
    check_dims(q.dim(), u.dim())?;
    check_dims(q.dim(), v.dim())?;
    Ok(weighted_inner(u.as_slice(), v.as_slice(), q.as_slice()))
}

pub(crate) fn weighted_inner(u: &[f64], v: &[f64], q: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .zip(q)
        .map(|((a, b), w)| a * b / w)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DivergenceKind {
    Chi2,
    Kl,
    Jeffreys,
    L1,
    L2,
}

impl std::str::FromStr for DivergenceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chi2" => Ok(Self::Chi2),
            "kl" => Ok(Self::Kl),
            "jeffreys" => Ok(Self::Jeffreys),
            "l1" => Ok(Self::L1),
            "l2" => Ok(Self::L2),
            other => Err(Error::InvalidParameter(format!("unknown divergence `{other}`"))),
        }
    }
}

fn kl(r: &[f64], q: &[f64]) -> f64 {
    r.iter()
        .zip(q)
        .map(|(&a, &b)| if a == 0.0 { 0.0 } else { a * (a / b).ln() })
        .sum()
}

/// Divergence of `r` from `q`. `chi2` is `chi^2(r || q)`, `kl` is `KL(r || q)`.
pub fn divergence(kind: DivergenceKind, r: &ProbVec, q: &ProbVec) -> Result<f64> {
    check_dims(q.dim(), r.dim())?;
    let (r, q) = (r.as_slice(), q.as_slice());
    let value = match kind {
        DivergenceKind::Chi2 => r.iter().zip(q).map(|(a, b)| (a - b).powi(2) / b).sum(),
        DivergenceKind::Kl => kl(r, q),
        DivergenceKind::Jeffreys => kl(r, q) + kl(q, r),
        DivergenceKind::L1 => l1_distance(r, q),
        DivergenceKind::L2 => r
            .iter()
            .zip(q)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt(),
    };
    Ok(value)
}

pub(crate) fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Deterministic Helmert basis of the zero-sum hyperplane in `R^n`, as the
/// `n x (n-1)` matrix of orthonormal columns.
///
/// Column `k` (0-based) is `(1, ..., 1, -(k+1), 0, ..., 0) / sqrt((k+1)(k+2))`
/// with `k+1` leading ones.
pub fn helmert_basis(n: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(n, n.saturating_sub(1));
    for k in 0..n.saturating_sub(1) {
        let m = (k + 1) as f64;
        let scale = 1.0 / (m * (m + 1.0)).sqrt();
        for i in 0..=k {
            h[(i, k)] = scale;
        }
        h[(k + 1, k)] = -m * scale;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pv(v: &[f64]) -> ProbVec {
        ProbVec::new(v.to_vec()).unwrap()
    }

    fn tv(v: &[f64]) -> TangentVec {
        TangentVec::new(v.to_vec()).unwrap()
    }

    #[test]
    fn fr_inner_examples() {
        let half = pv(&[0.5, 0.5]);
        assert_eq!(fr_inner(&tv(&[0.0, 0.0]), &tv(&[0.0, 0.0]), &half).unwrap(), 0.0);
        assert_eq!(fr_inner(&tv(&[1.0, -1.0]), &tv(&[1.0, -1.0]), &half).unwrap(), 4.0);
        assert_eq!(fr_inner(&tv(&[1.0, -1.0]), &tv(&[-1.0, 1.0]), &half).unwrap(), -4.0);
    }

    #[test]
    fn fr_inner_rejects_dimension_mismatch() {
        let err = fr_inner(&tv(&[1.0, -1.0]), &tv(&[1.0, 0.0, -1.0]), &pv(&[0.5, 0.5]));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn constructor_rejects_boundary_and_bad_mass() {
        assert!(matches!(
            ProbVec::new(vec![1.0, 0.0]),
            Err(Error::NotInterior { index: 1, .. })
        ));
        assert!(matches!(
            ProbVec::new(vec![0.5, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(ProbVec::new(vec![1.0]), Err(Error::TooSmall(1))));
        assert!(ProbVec::new(vec![0.5, f64::NAN]).is_err());
        assert!(TangentVec::new(vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn divergence_examples() {
        let q = pv(&[0.5, 0.5]);
        let r = pv(&[0.6, 0.4]);
        assert_eq!(divergence(DivergenceKind::Chi2, &q, &q).unwrap(), 0.0);
        assert_abs_diff_eq!(divergence(DivergenceKind::Chi2, &r, &q).unwrap(), 0.04, epsilon = 1e-15);
        let l1 = divergence(DivergenceKind::L1, &r, &q).unwrap();
        assert_abs_diff_eq!(l1, 0.2, epsilon = 1e-15);
        assert!(0.04 >= 0.5 * l1 * l1);
        assert_abs_diff_eq!(
            divergence(DivergenceKind::L2, &r, &q).unwrap(),
            0.02f64.sqrt(),
            epsilon = 1e-15
        );
        let j = divergence(DivergenceKind::Jeffreys, &r, &q).unwrap();
        let expected = 0.6 * (1.2f64).ln() + 0.4 * (0.8f64).ln() + 0.5 * (0.5f64 / 0.6).ln() + 0.5 * (0.5f64 / 0.4).ln();
        assert_abs_diff_eq!(j, expected, epsilon = 1e-15);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_tangent(&[1.0, 2.0, 3.0]).as_slice(), &[-1.0, 0.0, 1.0]);
        assert_eq!(project_tangent(&[0.0, 0.0]).as_slice(), &[0.0, 0.0]);
        assert_eq!(project_tangent(&[5.0; 4]).as_slice(), &[0.0; 4]);
    }

    #[test]
    fn helmert_is_orthonormal_and_tangent() {
        for n in 2..8 {
            let h = helmert_basis(n);
            let gram = h.transpose() * &h;
            assert!((gram - DMatrix::identity(n - 1, n - 1)).amax() < 1e-14);
            for col in h.column_iter() {
                assert!(col.sum().abs() < 1e-14);
            }
        }
    }
}
