//! Complex Hermitian matrices and the spectral helpers used by the
//! beamforming solvers.
//!
//! Eigen-decompositions run on the real embedding
//! `[[Re H, −Im H], [Im H, Re H]]`, whose spectrum is that of `H` with every
//! eigenvalue doubled.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::Error;

pub type ComplexVector = DVector<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;

/// `λ_min ≥ −PSD_TOL · (1 + λ_max)` counts as positive semidefinite.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermitianMatrix {
    m: DMatrix<Complex64>,
}

impl HermitianMatrix {
    /// Validates that `m` is square and equal to its conjugate transpose
    /// within `1e-12` (relative to the largest entry when that exceeds one),
    /// then stores its exact Hermitian part.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self, Error> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Contract(format!("expected a nonempty square matrix, got {}x{}", m.nrows(), m.ncols())));
        }
        let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let asym = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !(asym <= HERMITIAN_TOL * scale) {
            return Err(Error::Contract(format!("matrix is not Hermitian (asymmetry {asym:.3e})")));
        }
        Ok(Self::hermitian_part(m))
    }

    /// `(M + Mᴴ)/2`, with no validation.
    pub fn hermitian_part(m: DMatrix<Complex64>) -> Self {
        let adj = m.adjoint();
        HermitianMatrix { m: (m + adj).scale(0.5) }
    }

    pub fn zeros(n: usize) -> Self {
        HermitianMatrix { m: DMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix { m: DMatrix::identity(n, n) }
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let v = DVector::from_iterator(d.len(), d.iter().map(|&x| Complex64::new(x, 0.0)));
        HermitianMatrix { m: DMatrix::from_diagonal(&v) }
    }

    /// `v vᴴ`.
    pub fn outer(v: &ComplexVector) -> Self {
        Self::hermitian_part(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.diagonal().iter().map(|z| z.re).sum()
    }

    /// `vᴴ H v`, real for Hermitian `H`.
    pub fn quad_form(&self, v: &ComplexVector) -> f64 {
        v.dotc(&(&self.m * v)).re
    }

    /// `Tr(self · other)`, real for Hermitian arguments.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        // Tr(AB) = Σ_ij A_ij B_ji = Σ_ij A_ij conj(B_ij).
        self.m.iter().zip(other.m.iter()).map(|(a, b)| (a * b.conj()).re).sum()
    }

    pub fn scaled(&self, a: f64) -> Self {
        HermitianMatrix { m: self.m.scale(a) }
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix { m: &self.m + &other.m }
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix { m: &self.m - &other.m }
    }

    pub fn frobenius(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn sum<'a>(n: usize, items: impl IntoIterator<Item = &'a HermitianMatrix>) -> Self {
        let mut acc = DMatrix::zeros(n, n);
        for h in items {
            acc += &h.m;
        }
        HermitianMatrix { m: acc }
    }
}

/// `[[Re H, −Im H], [Im H, Re H]]`.
pub fn real_embed(h: &HermitianMatrix) -> DMatrix<f64> {
    let n = h.dim();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h.m[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Inverse of [`real_embed`] on its range; for a general symmetric `X` it
/// returns the Hermitian matrix whose embedding is the orthogonal projection
/// of `X` onto embedded matrices.
pub fn from_real_embedding(x: &DMatrix<f64>) -> HermitianMatrix {
    let n = x.nrows() / 2;
    let m = DMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (x[(i, j)] + x[(n + i, n + j)]);
        let im = 0.5 * (x[(n + i, j)] - x[(i, n + j)]);
        Complex64::new(re, im)
    });
    HermitianMatrix::hermitian_part(m)
}

fn vector_from_embedding(col: nalgebra::DVectorView<f64>, n: usize) -> ComplexVector {
    let mut v = DVector::from_fn(n, |i, _| Complex64::new(col[i], col[n + i]));
    let norm = v.norm();
    if norm > 0.0 {
        v /= Complex64::new(norm, 0.0);
    }
    phase_normalize(&mut v);
    v
}

/// Rotates `v` so that its first non-negligible entry is real positive.
pub fn phase_normalize(v: &mut ComplexVector) {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-8 * scale).copied() {
        let rot = z.conj() / z.norm();
        for e in v.iter_mut() {
            *e *= rot;
        }
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
pub fn eigen(h: &HermitianMatrix) -> (Vec<f64>, Vec<ComplexVector>) {
    let n = h.dim();
    let eig = SymmetricEigen::new(real_embed(h));
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let mut values = Vec::with_capacity(n);
    let mut vectors: Vec<ComplexVector> = Vec::with_capacity(n);
    for &k in &order {
        if values.len() == n {
            break;
        }
        let mut v = vector_from_embedding(eig.eigenvectors.column(k), n);
        // Each eigenvalue appears twice (v and jv); Gram-Schmidt against the
        // vectors kept so far and skip the duplicate copy.
        for u in &vectors {
            let c = u.dotc(&v);
            v -= u * c;
        }
        let norm = v.norm();
        if norm < 1e-6 {
            continue;
        }
        v /= Complex64::new(norm, 0.0);
        phase_normalize(&mut v);
        values.push(0.5 * (eig.eigenvalues[k] + h.quad_form(&v)));
        vectors.push(v);
    }
    (values, vectors)
}

/// Largest eigenvalue and a unit eigenvector whose first non-negligible
/// entry is real positive.
pub fn eigen_max(h: &HermitianMatrix) -> (f64, ComplexVector) {
    let n = h.dim();
    let eig = SymmetricEigen::new(real_embed(h));
    let mut best = 0;
    for k in 1..2 * n {
        if eig.eigenvalues[k] > eig.eigenvalues[best] {
            best = k;
        }
    }
    let v = vector_from_embedding(eig.eigenvectors.column(best), n);
    (h.quad_form(&v), v)
}

pub fn lambda_min(h: &HermitianMatrix) -> f64 {
    real_embed(h).symmetric_eigenvalues().min()
}

pub fn spectral_norm(h: &HermitianMatrix) -> f64 {
    let e = real_embed(h).symmetric_eigenvalues();
    e.max().abs().max(e.min().abs())
}

/// Sum of absolute eigenvalues.
pub fn nuclear_norm(h: &HermitianMatrix) -> f64 {
    0.5 * real_embed(h).symmetric_eigenvalues().iter().map(|x| x.abs()).sum::<f64>()
}

pub fn is_psd(h: &HermitianMatrix) -> bool {
    let e = real_embed(h).symmetric_eigenvalues();
    e.min() >= -PSD_TOL * (1.0 + e.max())
}

/// `‖W‖_* − ‖W‖₂`, computed as `Tr(W) − λ_max(W)` for PSD `W`.
pub fn rank_one_residual(w: &HermitianMatrix) -> Result<f64, Error> {
    let e = real_embed(w).symmetric_eigenvalues();
    let (lo, hi) = (e.min(), e.max());
    if lo < -PSD_TOL * (1.0 + hi) {
        return Err(Error::NotPsd(lo));
    }
    Ok((w.trace() - hi).max(0.0))
}

/// `√λ_max · v_max`, provided the rank-one residual is at most `eps`.
pub fn extract_rank_one(w: &HermitianMatrix, eps: f64) -> Result<ComplexVector, Error> {
    let res = rank_one_residual(w)?;
    if res > eps {
        return Err(Error::RankOneExtractionFailed { residual: res, threshold: eps });
    }
    let (lambda, v) = eigen_max(w);
    Ok(v * Complex64::new(lambda.max(0.0).sqrt(), 0.0))
}

/// Zeroes negative eigenvalues, warning when they exceed the PSD tolerance.
pub fn clip_psd(h: &HermitianMatrix) -> HermitianMatrix {
    let eig = SymmetricEigen::new(real_embed(h));
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if lo >= 0.0 {
        return h.clone();
    }
    if lo < -PSD_TOL * (1.0 + hi) {
        warn!("clipping eigenvalue {lo:.3e} of a matrix expected to be PSD");
    }
    let d = eig.eigenvalues.map(|x| x.max(0.0));
    let x = &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose();
    from_real_embedding(&x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn herm(n: usize, vals: &[f64]) -> HermitianMatrix {
        let a = DMatrix::from_fn(n, n, |i, j| c(vals[(i * n + j) % vals.len()], vals[(i * 7 + j * 3 + 1) % vals.len()]));
        HermitianMatrix::hermitian_part(a)
    }

    fn psd(n: usize, vals: &[f64]) -> HermitianMatrix {
        let a = DMatrix::from_fn(n, n, |i, j| c(vals[(i * n + j) % vals.len()], vals[(i * 5 + j * 2 + 3) % vals.len()]));
        HermitianMatrix::hermitian_part(&a * a.adjoint())
    }

    #[test]
    fn eigen_max_of_diagonal() {
        let (l, v) = eigen_max(&HermitianMatrix::from_real_diagonal(&[3.0, 1.0]));
        assert!((l - 3.0).abs() < 1e-12);
        assert!((v[0] - c(1.0, 0.0)).norm() < 1e-12 && v[1].norm() < 1e-12);
    }

    #[test]
    fn eigen_max_of_outer_product() {
        let w = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let (l, v) = eigen_max(&HermitianMatrix::outer(&w));
        assert!((l - 2.0).abs() < 1e-12);
        let expect = &w / c(2f64.sqrt(), 0.0);
        assert!((v - expect).norm() < 1e-12);
    }

    #[test]
    fn eigen_max_matches_quadratic_formula() {
        // Independent oracle: λ = (a+d)/2 ± sqrt(((a−d)/2)² + |b|²).
        let cases = [(1.0, 2.0, c(0.3, -0.7)), (-1.0, 0.5, c(2.0, 1.0)), (4.0, 4.0, c(0.0, 1e-3))];
        for (a, d, b) in cases {
            let m = DMatrix::from_row_slice(2, 2, &[c(a, 0.0), b, b.conj(), c(d, 0.0)]);
            let h = HermitianMatrix::new(m).unwrap();
            let lmax = 0.5 * (a + d) + ((0.5 * (a - d)).powi(2) + b.norm_sqr()).sqrt();
            let (l, v) = eigen_max(&h);
            assert!((l - lmax).abs() < 1e-12);
            let r = h.matrix() * &v - &v * c(l, 0.0);
            assert!(r.norm() < 1e-9 * l.abs().max(1.0));
            assert!(v[0].im.abs() < 1e-12 && v[0].re > 0.0);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(HermitianMatrix::new(m), Err(Error::Contract(_))));
    }

    #[test]
    fn rank_one_residual_examples() {
        let w = DVector::from_vec(vec![c(1.0, 0.5), c(-2.0, 0.0)]);
        assert!(rank_one_residual(&HermitianMatrix::outer(&w)).unwrap() < 1e-12);
        assert!((rank_one_residual(&HermitianMatrix::identity(2)).unwrap() - 1.0).abs() < 1e-12);
        let d = HermitianMatrix::from_real_diagonal(&[3.0, 1.0]);
        assert!((rank_one_residual(&d).unwrap() - 1.0).abs() < 1e-12);
        let neg = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]);
        assert!(matches!(rank_one_residual(&neg), Err(Error::NotPsd(_))));
    }

    #[test]
    fn extract_rank_one_examples() {
        let w = HermitianMatrix::from_real_diagonal(&[4.0, 0.0]);
        let v = extract_rank_one(&w, 1e-5).unwrap();
        assert!((v[0] - c(2.0, 0.0)).norm() < 1e-12 && v[1].norm() < 1e-12);
        assert!(matches!(
            extract_rank_one(&HermitianMatrix::identity(2), 1e-5),
            Err(Error::RankOneExtractionFailed { .. })
        ));
    }

    #[test]
    fn extraction_error_within_bound() {
        // W = w wᴴ + 1e-6 · u uᴴ with u ⟂ w.
        let w = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0), c(0.5, 0.5)]);
        let u = DVector::from_vec(vec![c(0.0, 1.0), c(1.0, 0.0), c(0.0, 0.0)]) / c(2f64.sqrt(), 0.0);
        let wm = HermitianMatrix::outer(&w).add(&HermitianMatrix::outer(&u).scaled(1e-6));
        let eps = 1e-5;
        let res = rank_one_residual(&wm).unwrap();
        assert!((res - 1e-6).abs() < 1e-12);
        let x = extract_rank_one(&wm, eps).unwrap();
        let err = wm.sub(&HermitianMatrix::outer(&x)).frobenius();
        assert!(err <= (2.0 * eps * wm.trace()).sqrt());
    }

    #[test]
    fn embedding_examples() {
        assert_eq!(real_embed(&HermitianMatrix::identity(2)), DMatrix::identity(4, 4));
        let h = HermitianMatrix::new(DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)])).unwrap();
        let mut e: Vec<f64> = real_embed(&h).symmetric_eigenvalues().iter().cloned().collect();
        e.sort_by(f64::total_cmp);
        for (x, y) in e.iter().zip([0.0, 0.0, 2.0, 2.0]) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(from_real_embedding(&real_embed(&h)), h);
    }

    #[test]
    fn full_eigendecomposition_reconstructs() {
        let h = herm(4, &[0.3, -1.2, 0.8, 2.0, -0.4, 1.1, 0.05]);
        let (vals, vecs) = eigen(&h);
        assert_eq!(vals.len(), 4);
        let mut acc = DMatrix::<Complex64>::zeros(4, 4);
        for (l, v) in vals.iter().zip(&vecs) {
            acc += v * v.adjoint() * c(*l, 0.0);
        }
        assert!((acc - h.matrix()).norm() < 1e-10);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn clip_zeroes_negative_part() {
        let h = HermitianMatrix::from_real_diagonal(&[2.0, -1e-3]);
        let c = clip_psd(&h);
        assert!((c.matrix()[(1, 1)].re).abs() < 1e-14);
        assert!((c.matrix()[(0, 0)].re - 2.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn psd_nuclear_norm_is_trace(vals in prop::collection::vec(-2.0f64..2.0, 16)) {
            let w = psd(3, &vals);
            prop_assert!((nuclear_norm(&w) - w.trace()).abs() <= 1e-9 * (1.0 + w.trace()));
        }

        #[test]
        fn embedding_is_linear(v1 in prop::collection::vec(-2.0f64..2.0, 9), v2 in prop::collection::vec(-2.0f64..2.0, 9), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let (h1, h2) = (herm(3, &v1), herm(3, &v2));
            let lhs = real_embed(&h1.scaled(a).add(&h2.scaled(b)));
            let rhs = real_embed(&h1) * a + real_embed(&h2) * b;
            prop_assert!((lhs - rhs).amax() < 1e-12);
            prop_assert!((real_embed(&h1).trace() - 2.0 * h1.trace()).abs() < 1e-12);
        }

        #[test]
        fn weyl_perturbation_bound(vals in prop::collection::vec(-2.0f64..2.0, 9), pv in prop::collection::vec(-1.0f64..1.0, 9)) {
            let h = herm(3, &vals);
            let p = herm(3, &pv);
            let delta = 1e-8;
            let p = p.scaled(delta / spectral_norm(&p).max(1e-300));
            let (l0, _) = eigen_max(&h);
            let (l1, _) = eigen_max(&h.add(&p));
            prop_assert!((l1 - l0).abs() <= delta * (1.0 + 1e-6) + 1e-14);
        }

        #[test]
        fn extract_inverts_outer_product(re in prop::collection::vec(-2.0f64..2.0, 4), im in prop::collection::vec(-2.0f64..2.0, 4)) {
            let w: ComplexVector = DVector::from_fn(4, |i, _| c(re[i], im[i]));
            prop_assume!(w.norm() > 1e-3);
            let x = extract_rank_one(&HermitianMatrix::outer(&w), 1e-9).unwrap();
            // Equal up to a global phase.
            let phase = x.dotc(&w);
            let aligned = &x * (phase / phase.norm());
            prop_assert!((aligned - &w).norm() <= 1e-8 * (1.0 + w.norm()));
        }
    }
}
