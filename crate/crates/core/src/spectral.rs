//! Equilibrium analysis of the flow.
//!
//! At a fixed point `q*` with row-stochastic kernels `K*_x`, the Gram kernel is
//! `C = sum_x p(x) K*_x K*_x^T`. The linearization of the velocity field on the
//! tangent space `T` is `DV(q*) = -C diag(1/q*)`; it is self-adjoint in the
//! Fisher-Rao inner product and similar to `-D^{-1/2} C D^{-1/2}`. The
//! Euclidean minimum of `u^T C u` over unit tangent vectors is reported as the
//! spectral gap `lambda*`; the relaxation rates are the eigenvalues of
//! `-DV`, which coincide with `lambda*`-type quantities only at uniform `q*`.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::ba::BaProblem;
use crate::error::{Error, Result};
use crate::simplex::{helmert_basis, ProbVec, TangentVec};

/// Dual residual required of a fixed point before equilibrium analysis.
pub const CERTIFY_TOL: f64 = 1e-8;

/// Eigenvalues with magnitude below this count as zero modes.
pub const ZERO_MODE_TOL: f64 = 1e-10;

pub const JACOBIAN_STEP: f64 = 1e-6;
pub const HESSIAN_STEP: f64 = 1e-4;

fn certify(prob: &BaProblem, q: &ProbVec) -> Result<()> {
    let residual = prob.dual_identity_residual(q)?;
    if residual > CERTIFY_TOL || residual.is_nan() {
        return Err(Error::NotFixedPoint {
            residual,
            tol: CERTIFY_TOL,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramKernel {
    pub matrix: DMatrix<f64>,
    pub q_star: ProbVec,
}

impl GramKernel {
    /// `sum_x p(x) <K*_x, u>^2`, the quadratic form evaluated row by row.
    pub fn kernel_quadratic_form(&self, prob: &BaProblem, u: &[f64]) -> Result<f64> {
        let g = prob.gibbs_state(&self.q_star)?;
        let p = prob.source().as_slice();
        Ok(g.kernels
            .row_iter()
            .zip(p)
            .map(|(row, px)| {
                let s: f64 = row.iter().zip(u).map(|(k, v)| k * v).sum();
                px * s * s
            })
            .sum())
    }

    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        let v = DVector::from_column_slice(u);
        v.dot(&(&self.matrix * &v))
    }

    /// `C diag(1/q*)`, the negated linearization on `T`.
    pub fn relaxation_operator(&self) -> DMatrix<f64> {
        let q = self.q_star.as_slice();
        let mut m = self.matrix.clone();
        for (j, mut col) in m.column_iter_mut().enumerate() {
            col /= q[j];
        }
        m
    }
}

/// Gram kernel at a certified fixed point.
pub fn gram_kernel(prob: &BaProblem, q_star: &ProbVec) -> Result<GramKernel> {
    certify(prob, q_star)?;
    let g = prob.gibbs_state(q_star)?;
    let p = prob.source().as_slice();
    let n = prob.n();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..prob.m()).map(|x| p[x] * g.kernels[(x, i)] * g.kernels[(x, j)]).sum();
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(GramKernel {
        matrix: c,
        q_star: q_star.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Ambient (zero-sum) coordinates, one per eigenvalue.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    pub gap: f64,
    pub zero_mode_count: usize,
}

impl SpectrumReport {
    fn from_symmetric(a: DMatrix<f64>, embed: impl Fn(&DVector<f64>) -> Vec<f64>) -> Self {
        let eig = SymmetricEigen::new(a);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = order
            .iter()
            .map(|&i| embed(&eig.eigenvectors.column(i).into_owned()))
            .collect();
        Self {
            gap: eigenvalues.first().copied().unwrap_or(0.0),
            zero_mode_count: eigenvalues.iter().filter(|v| v.abs() < ZERO_MODE_TOL).count(),
            eigenvalues,
            eigenvectors,
        }
    }

    /// Smallest eigenvalue above the zero-mode threshold.
    pub fn smallest_nonzero(&self) -> Option<f64> {
        self.eigenvalues.iter().copied().find(|v| *v >= ZERO_MODE_TOL)
    }

    pub fn largest(&self) -> Option<f64> {
        self.eigenvalues.last().copied()
    }
}

/// Spectrum of `C` restricted to the zero-sum hyperplane (Helmert basis).
pub fn tangent_spectrum(kernel: &GramKernel) -> SpectrumReport {
    let h = helmert_basis(kernel.matrix.nrows());
    let a = h.transpose() * &kernel.matrix * &h;
    let a = (&a + a.transpose()) * 0.5;
    SpectrumReport::from_symmetric(a, |v| (&h * v).as_slice().to_vec())
}

/// Orthonormal basis (as columns) of the complement of the unit vector `u`,
/// from the Householder reflection that sends `e_0` to `u`.
fn complement_basis(u: &DVector<f64>) -> DMatrix<f64> {
    let n = u.len();
    let mut v = -u.clone();
    v[0] += 1.0;
    let vv = v.dot(&v);
    let mut r = DMatrix::identity(n, n);
    if vv > 1e-30 {
        r -= (&v * v.transpose()) * (2.0 / vv);
    }
    r.columns(1, n - 1).into_owned()
}

/// Relaxation rates: eigenvalues of `-DV(q*) = C diag(1/q*)` on `T`, computed
/// through the symmetric form `W = D^{-1/2} C D^{-1/2}` on the complement of
/// `sqrt(q*)`. Eigenvectors are returned as tangent vectors `D^{1/2} w`.
///
/// Self-test: `W sqrt(q*) = sqrt(q*)` must hold to `1e-8`; it fails when
/// `q*` is not an equilibrium of the kernel actually used.
pub fn jacobian_spectrum(prob: &BaProblem, q_star: &ProbVec) -> Result<SpectrumReport> {
    certify(prob, q_star)?;
    let g = prob.gibbs_state(q_star)?;
    let p = prob.source().as_slice();
    let n = prob.n();
    let sq: Vec<f64> = q_star.as_slice().iter().map(|v| v.sqrt()).collect();
    let mut w = DMatrix::zeros(n, n);
    for x in 0..prob.m() {
        let k = DVector::from_fn(n, |y, _| g.kernels[(x, y)] / sq[y]);
        w.ger(p[x], &k, &k, 1.0);
    }
    let asym = (&w - w.transpose()).amax();
    let s = DVector::from_column_slice(&sq);
    let drift = (&w * &s - &s).amax();
    if asym > 1e-8 || drift > 1e-8 {
        return Err(Error::SelfTest(format!(
            "W sqrt(q*) deviates from sqrt(q*) by {drift:e} (asymmetry {asym:e})"
        )));
    }
    let basis = complement_basis(&s);
    let a = basis.transpose() * &w * &basis;
    let a = (&a + a.transpose()) * 0.5;
    Ok(SpectrumReport::from_symmetric(a, |v| {
        let wv = &basis * v;
        wv.iter().zip(&sq).map(|(a, b)| a * b).collect()
    }))
}

/// Central-difference Jacobian of `T` at `q` along the Helmert basis of `T`,
/// assembled as the ambient matrix `D T . P_T` (it annihilates constants).
pub fn fd_jacobian(prob: &BaProblem, q: &ProbVec, h: f64) -> Result<DMatrix<f64>> {
    let basis = helmert_basis(q.dim());
    let cols = fd_directional(q, &basis, h, |v| Ok(prob.apply_raw(v)))?;
    Ok(cols * basis.transpose())
}

/// Columns `(F(q + h b_k) - F(q - h b_k)) / 2h` for each basis column.
fn fd_directional(
    q: &ProbVec,
    basis: &DMatrix<f64>,
    h: f64,
    f: impl Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<DMatrix<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let n = q.dim();
    let qs = q.as_slice();
    let mut out = DMatrix::zeros(n, basis.ncols());
    for k in 0..basis.ncols() {
        let plus: Vec<f64> = (0..n).map(|i| qs[i] + h * basis[(i, k)]).collect();
        let minus: Vec<f64> = (0..n).map(|i| qs[i] - h * basis[(i, k)]).collect();
        if let Some(i) = plus.iter().chain(&minus).position(|v| *v <= 0.0) {
            return Err(Error::NotInterior {
                index: i % n,
                value: qs[i % n],
            });
        }
        let (fp, fm) = (f(&plus)?, f(&minus)?);
        for i in 0..n {
            out[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(out)
}

/// `H^T M H` for the Helmert basis `H`: the matrix of `M` acting on `T`.
pub fn tangent_block(m: &DMatrix<f64>) -> DMatrix<f64> {
    let h = helmert_basis(m.nrows());
    h.transpose() * m * h
}

/// FD linearization of the velocity field on `T`, in Helmert coordinates.
pub fn fd_velocity_jacobian(prob: &BaProblem, q: &ProbVec, h: f64) -> Result<DMatrix<f64>> {
    let j = tangent_block(&fd_jacobian(prob, q, h)?);
    Ok(j - DMatrix::identity(q.dim() - 1, q.dim() - 1))
}

/// Complex eigenvalues sorted by descending real part.
pub fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re));
    ev
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportSpectrum {
    /// Indices with `q > support_tol * max q`.
    pub support: Vec<usize>,
    /// Real parts of the eigenvalues of `-DV` on the support, descending.
    pub eigenvalues: Vec<f64>,
    pub max_imag: f64,
}

/// Relaxation rates from an FD Jacobian restricted to the numerically active
/// support of `q`, for large discretized problems where many entries are
/// vanishingly small.
///
/// Directions are multiplicative, `v_j = q_j (e_j - q)`, so every perturbed
/// point stays positive. The assembled matrix is `-DV = P_q - D T . P_q` with
/// `P_q = I - q 1^T`; its active block is diagonalized. Besides the tangent
/// modes the block carries one eigenvalue near zero for the direction of `q`.
pub fn support_relaxation_spectrum(
    prob: &BaProblem,
    q: &ProbVec,
    h: f64,
    support_tol: f64,
) -> Result<SupportSpectrum> {
    let qs = q.as_slice();
    let qmax = qs.iter().copied().fold(0.0, f64::max);
    let support: Vec<usize> = (0..qs.len()).filter(|&j| qs[j] > support_tol * qmax).collect();
    if support.len() < 2 {
        return Err(Error::TooSmall(support.len()));
    }
    let k = support.len();
    let mut block = DMatrix::zeros(k, k);
    for (cj, &j) in support.iter().enumerate() {
        let shift = |s: f64| -> Vec<f64> {
            qs.iter()
                .enumerate()
                .map(|(i, v)| {
                    let e = if i == j { 1.0 } else { 0.0 };
                    v + s * qs[j] * (e - v)
                })
                .collect()
        };
        let tp = prob.apply_raw(&shift(h));
        let tm = prob.apply_raw(&shift(-h));
        for (ci, &i) in support.iter().enumerate() {
            let b = (tp[i] - tm[i]) / (2.0 * h * qs[j]);
            let p = if i == j { 1.0 } else { 0.0 } - qs[i];
            block[(ci, cj)] = p - b;
        }
    }
    let ev = sorted_eigenvalues(block);
    Ok(SupportSpectrum {
        support,
        max_imag: ev.iter().map(|c| c.im.abs()).fold(0.0, f64::max),
        eigenvalues: ev.iter().map(|c| c.re).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HessianReport {
    /// Max over frame pairs of `|fd - analytic|`, relative to the largest
    /// analytic entry.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// Largest `|A(h1,h2) - A(h2,h1)|` of the analytic form.
    pub symmetry_err: f64,
    pub step: f64,
    pub analytic: Vec<Vec<f64>>,
    pub finite_difference: Vec<Vec<f64>>,
}

/// Compares mixed second differences of the free energy along Helmert
/// directions with `<h1, (I - DT) h2>_FR` at a certified fixed point.
///
/// The nominal step is [`HESSIAN_STEP`], shrunk so that every probe stays
/// inside the simplex; the report records the step actually used.
pub fn fr_hessian_check(prob: &BaProblem, q_star: &ProbVec) -> Result<HessianReport> {
    certify(prob, q_star)?;
    let n = q_star.dim();
    let qs = q_star.as_slice();
    let basis = helmert_basis(n);
    let dt = fd_jacobian(prob, q_star, JACOBIAN_STEP)?;
    let relax = DMatrix::identity(n, n) - dt;
    let step = HESSIAN_STEP * (q_star.min_entry() / 0.5).min(1.0);
    let k = n - 1;
    let mut analytic = vec![vec![0.0; k]; k];
    let mut fd = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in 0..k {
            let h1 = basis.column(a);
            let rh2 = &relax * basis.column(b);
            analytic[a][b] = (0..n).map(|i| h1[i] * rh2[i] / qs[i]).sum();
            let f = |sa: f64, sb: f64| {
                let v: Vec<f64> = (0..n)
                    .map(|i| qs[i] + sa * basis[(i, a)] + sb * basis[(i, b)])
                    .collect();
                prob.free_energy_raw(&v)
            };
            fd[a][b] = (f(step, step) - f(step, -step) - f(-step, step) + f(-step, -step)) / (4.0 * step * step);
        }
    }
    let scale = analytic.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    let mut max_abs_err: f64 = 0.0;
    let mut symmetry_err: f64 = 0.0;
    for a in 0..k {
        for b in 0..k {
            max_abs_err = max_abs_err.max((fd[a][b] - analytic[a][b]).abs());
            symmetry_err = symmetry_err.max((analytic[a][b] - analytic[b][a]).abs());
        }
    }
    Ok(HessianReport {
        max_rel_err: if scale > 0.0 { max_abs_err / scale } else { max_abs_err },
        max_abs_err,
        symmetry_err,
        step,
        analytic,
        finite_difference: fd,
    })
}

fn fr_field_raw(prob: &BaProblem, q: &[f64]) -> Vec<f64> {
    let tq = prob.apply_raw(q);
    let mass: f64 = q.iter().sum();
    let mean_log: f64 = q.iter().map(|v| v * v.ln()).sum::<f64>() / mass;
    let inv_beta = 1.0 / prob.beta();
    (0..q.len())
        .map(|i| (tq[i] - q[i]) + inv_beta * q[i] * (q[i].ln() - mean_log))
        .collect()
}

/// `(T q - q) + beta^{-1} q (log q - E_q[log q])`.
pub fn fr_gradient_field(prob: &BaProblem, q: &ProbVec) -> Result<TangentVec> {
    if prob.beta() == 0.0 {
        return Err(Error::InvalidParameter("the gradient field needs beta > 0".into()));
    }
    if q.dim() != prob.n() {
        return Err(Error::DimensionMismatch {
            expected: prob.n(),
            found: q.dim(),
        });
    }
    TangentVec::new(fr_field_raw(prob, q.as_slice()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrLinearizationReport {
    /// `max |(DG - DV) - beta^{-1} I|` over Helmert-coordinate entries.
    pub max_abs_err: f64,
    pub expected_shift: f64,
    /// `DG - DV` on `T` in Helmert coordinates.
    pub difference: Vec<Vec<f64>>,
}

/// FD linearizations of the gradient field `G` and the BA velocity `V` at a
/// certified fixed point, compared against a pure `beta^{-1}` shift on `T`.
pub fn fr_linearization_check(prob: &BaProblem, q_star: &ProbVec) -> Result<FrLinearizationReport> {
    certify(prob, q_star)?;
    if prob.beta() == 0.0 {
        return Err(Error::InvalidParameter("the gradient field needs beta > 0".into()));
    }
    let n = q_star.dim();
    let basis = helmert_basis(n);
    let dg = basis.transpose() * fd_directional(q_star, &basis, JACOBIAN_STEP, |v| Ok(fr_field_raw(prob, v)))?;
    let dv = fd_velocity_jacobian(prob, q_star, JACOBIAN_STEP)?;
    let diff = dg - dv;
    let shift = 1.0 / prob.beta();
    let err = (&diff - DMatrix::identity(n - 1, n - 1) * shift).amax();
    Ok(FrLinearizationReport {
        max_abs_err: err,
        expected_shift: shift,
        difference: diff.row_iter().map(|r| r.iter().copied().collect()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HighTemperatureReference {
    pub mu_min: f64,
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
}

/// Small-`beta` reference `lambda* ~ beta^2 mu_min(M)` with
/// `M = sum_x p(x) (d~_x / N)(d~_x / N)^T` and `d~_x = d(x, .) - mean_y d(x, .)`.
///
/// The expansion is about the uniform output distribution, so it describes
/// problems whose fixed point stays near uniform as `beta -> 0`.
pub fn high_temperature_reference(prob: &BaProblem) -> HighTemperatureReference {
    let n = prob.n();
    let p = prob.source().as_slice();
    let mut m = DMatrix::zeros(n, n);
    for (x, row) in prob.cost().row_iter().enumerate() {
        let mean = row.sum() / n as f64;
        let v = DVector::from_fn(n, |y, _| (row[y] - mean) / n as f64);
        m.ger(p[x], &v, &v, 1.0);
    }
    let h = helmert_basis(n);
    let a = h.transpose() * &m * &h;
    let mu_min = SymmetricEigen::new((&a + a.transpose()) * 0.5)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    HighTemperatureReference { mu_min, matrix: m }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_point(alpha: f64, bd: f64) -> BaProblem {
        let cost = DMatrix::from_row_slice(2, 2, &[0.0, bd, bd, 0.0]);
        BaProblem::new(ProbVec::new(vec![alpha, 1.0 - alpha]).unwrap(), cost, 1.0).unwrap()
    }

    #[test]
    fn symmetric_two_point_gap_and_rate() {
        let prob = two_point(0.5, 2.0);
        let half = ProbVec::uniform(2).unwrap();
        let c = gram_kernel(&prob, &half).unwrap();
        let spec = tangent_spectrum(&c);
        let t2 = 1.0f64.tanh().powi(2);
        assert_abs_diff_eq!(spec.gap, 0.5 * t2, epsilon = 1e-14);
        assert_eq!(spec.zero_mode_count, 0);
        let js = jacobian_spectrum(&prob, &half).unwrap();
        assert_abs_diff_eq!(js.eigenvalues[0], t2, epsilon = 1e-14);
        let dv = fd_velocity_jacobian(&prob, &half, JACOBIAN_STEP).unwrap();
        assert_abs_diff_eq!(dv[(0, 0)], -t2, epsilon = 1e-8);
    }

    #[test]
    fn zero_beta_is_fully_degenerate() {
        let prob = two_point(0.5, 2.0).with_beta(0.0).unwrap();
        let q = ProbVec::new(vec![0.2, 0.3, 0.5]).unwrap();
        let prob3 = BaProblem::new(
            ProbVec::uniform(2).unwrap(),
            DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 2.0, 2.0, 1.0, 0.0]),
            0.0,
        )
        .unwrap();
        let c = gram_kernel(&prob3, &q).unwrap();
        let qq = DVector::from_column_slice(q.as_slice());
        assert!((&c.matrix - &qq * qq.transpose()).amax() < 1e-15);
        // C = q q^T is not null on T unless q is uniform; C diag(1/q) always is
        assert_eq!(tangent_spectrum(&c).zero_mode_count, 1);
        let rates = jacobian_spectrum(&prob3, &q).unwrap();
        assert_eq!(rates.zero_mode_count, 2);
        let uniform = gram_kernel(&prob3, &ProbVec::uniform(3).unwrap()).unwrap();
        let spec = tangent_spectrum(&uniform);
        assert_eq!(spec.zero_mode_count, 2);
        assert!(spec.gap.abs() < 1e-15);
        let j = fd_jacobian(&prob3, &q, JACOBIAN_STEP).unwrap();
        assert!((tangent_block(&j) - DMatrix::identity(2, 2)).amax() < 1e-9);
        let js = jacobian_spectrum(&prob, &ProbVec::uniform(2).unwrap()).unwrap();
        assert!(js.eigenvalues[0].abs() < 1e-15);
    }

    #[test]
    fn rejects_non_fixed_points() {
        let prob = two_point(0.5, 2.0);
        let q = ProbVec::new(vec![0.9, 0.1]).unwrap();
        assert!(matches!(gram_kernel(&prob, &q), Err(Error::NotFixedPoint { .. })));
        assert!(jacobian_spectrum(&prob, &q).is_err());
    }

    #[test]
    fn complement_basis_is_orthonormal() {
        let u = DVector::from_vec(vec![0.6, 0.0, 0.8]);
        let b = complement_basis(&u);
        assert!((b.transpose() * &b - DMatrix::identity(2, 2)).amax() < 1e-15);
        assert!((b.transpose() * &u).amax() < 1e-15);
        let e0 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let b = complement_basis(&e0);
        assert!((b.transpose() * &e0).amax() < 1e-15);
    }

    #[test]
    fn hessian_symmetric_two_point() {
        let prob = two_point(0.5, 2.0);
        let rep = fr_hessian_check(&prob, &ProbVec::uniform(2).unwrap()).unwrap();
        assert!(rep.max_rel_err < 1e-4, "{rep:?}");
        // h = (1,-1)/sqrt2 has ||h||^2_FR = 2
        assert_abs_diff_eq!(rep.analytic[0][0], 2.0 * 1.0f64.tanh().powi(2), epsilon = 1e-8);
    }

    #[test]
    fn fr_field_vanishes_at_uniform_fixed_point() {
        let prob = two_point(0.5, 2.0);
        let f = fr_gradient_field(&prob, &ProbVec::uniform(2).unwrap()).unwrap();
        assert!(f.as_slice().iter().all(|v| v.abs() < 1e-16));
        let rep = fr_linearization_check(&prob, &ProbVec::uniform(2).unwrap()).unwrap();
        assert!(rep.max_abs_err < 1e-5, "{rep:?}");
    }

    #[test]
    fn high_temperature_two_point() {
        let d = 0.1;
        let prob = two_point(0.5, d);
        let r = high_temperature_reference(&prob);
        assert_abs_diff_eq!(r.mu_min, d * d / 8.0, epsilon = 1e-16);
        let flat = BaProblem::new(
            ProbVec::uniform(2).unwrap(),
            DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 3.0, 3.0, 3.0]),
            1.0,
        )
        .unwrap();
        let r = high_temperature_reference(&flat);
        assert_eq!(r.matrix.amax(), 0.0);
        assert_eq!(r.mu_min, 0.0);
    }
}
