//! Symmetric-cone algebra: Jordan products, Nesterov–Todd scalings and
//! step-to-boundary computations for the product of a nonnegative orthant,
//! second-order cones and PSD cones.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::vecs::ConeVec;

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    /// Number of nonnegative rows.
    pub l: usize,
    /// Second-order cone dimensions, stacked after the nonnegative rows.
    pub soc: Vec<usize>,
    pub psd: Vec<usize>,
}

impl Layout {
    pub fn m_o(&self) -> usize {
        self.l + self.soc.iter().sum::<usize>()
    }

    pub fn soc_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = self.l;
        self.soc
            .iter()
            .map(|&q| {
                let r = start..start + q;
                start += q;
                r
            })
            .collect()
    }

    /// Barrier degree of the product cone.
    pub fn degree(&self) -> f64 {
        (self.l + self.soc.len() + self.psd.iter().sum::<usize>()) as f64
    }

    pub fn identity(&self) -> ConeVec {
        let mut e = ConeVec::zeros(self.m_o(), &self.psd);
        for i in 0..self.l {
            e.o[i] = 1.0;
        }
        for r in self.soc_ranges() {
            e.o[r.start] = 1.0;
        }
        for (m, &d) in e.p.iter_mut().zip(&self.psd) {
            *m = DMatrix::identity(d, d);
        }
        e
    }

    /// Jordan product `u ∘ v`.
    pub fn prod(&self, u: &ConeVec, v: &ConeVec) -> ConeVec {
        let mut out = ConeVec::zeros(self.m_o(), &self.psd);
        for i in 0..self.l {
            out.o[i] = u.o[i] * v.o[i];
        }
        for r in self.soc_ranges() {
            let (u0, v0) = (u.o[r.start], v.o[r.start]);
            out.o[r.start] = u.o.rows_range(r.clone()).dot(&v.o.rows_range(r.clone()));
            for i in r.start + 1..r.end {
                out.o[i] = u0 * v.o[i] + v0 * u.o[i];
            }
        }
        for ((o, a), b) in out.p.iter_mut().zip(&u.p).zip(&v.p) {
            let ab = a * b;
            *o = (&ab + ab.transpose()) * 0.5;
        }
        out
    }

    /// Solves `lambda ∘ x = w` for `x`; PSD parts of `lambda` must be diagonal.
    pub fn inv_prod(&self, lambda: &ConeVec, w: &ConeVec) -> ConeVec {
        let mut out = ConeVec::zeros(self.m_o(), &self.psd);
        for i in 0..self.l {
            out.o[i] = w.o[i] / lambda.o[i];
        }
        for r in self.soc_ranges() {
            let l0 = lambda.o[r.start];
            let w0 = w.o[r.start];
            let l1 = lambda.o.rows_range(r.start + 1..r.end);
            let w1 = w.o.rows_range(r.start + 1..r.end);
            let det = l0 * l0 - l1.norm_squared();
            let x0 = (l0 * w0 - l1.dot(&w1)) / det;
            out.o[r.start] = x0;
            for (k, i) in (r.start + 1..r.end).enumerate() {
                out.o[i] = (w1[k] - x0 * l1[k]) / l0;
            }
        }
        for ((o, l), wm) in out.p.iter_mut().zip(&lambda.p).zip(&w.p) {
            let d = l.nrows();
            *o = DMatrix::from_fn(d, d, |i, j| 2.0 * wm[(i, j)] / (l[(i, i)] + l[(j, j)]));
        }
        out
    }

    /// Largest `alpha` in `[0, cap]` keeping `lambda + alpha * d` in the cone.
    /// PSD parts of `lambda` must be diagonal.
    pub fn step(&self, lambda: &ConeVec, d: &ConeVec, cap: f64) -> f64 {
        let mut alpha = cap;
        for i in 0..self.l {
            if d.o[i] < 0.0 {
                alpha = alpha.min(-lambda.o[i] / d.o[i]);
            }
        }
        for r in self.soc_ranges() {
            let x = lambda.o.rows_range(r.clone()).clone_owned();
            let dd = d.o.rows_range(r.clone()).clone_owned();
            alpha = alpha.min(soc_step(&x, &dd));
        }
        for (l, dm) in lambda.p.iter().zip(&d.p) {
            let n = l.nrows();
            let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / l[(i, i)].sqrt()).collect();
            let m = DMatrix::from_fn(n, n, |i, j| {
                0.5 * (dm[(i, j)] + dm[(j, i)]) * inv_sqrt[i] * inv_sqrt[j]
            });
            let emin = m.symmetric_eigenvalues().min();
            if emin < 0.0 {
                alpha = alpha.min(-1.0 / emin);
            }
        }
        alpha.max(0.0)
    }

    /// Smallest "eigenvalue" of `v` with respect to the cone; positive iff
    /// `v` is interior.
    pub fn min_eig(&self, v: &ConeVec) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.l {
            m = m.min(v.o[i]);
        }
        for r in self.soc_ranges() {
            let x0 = v.o[r.start];
            let x1 = v.o.rows_range(r.start + 1..r.end).norm();
            m = m.min(x0 - x1);
        }
        for p in &v.p {
            m = m.min(p.symmetric_eigenvalues().min());
        }
        m
    }
}

/// Largest step keeping `x + alpha d` in the second-order cone, `x` interior.
pub(crate) fn soc_step(x: &DVector<f64>, d: &DVector<f64>) -> f64 {
    let n = x.len();
    let x1 = x.rows_range(1..n);
    let d1 = d.rows_range(1..n);
    let a = d[0] * d[0] - d1.norm_squared();
    let b = x[0] * d[0] - x1.dot(&d1);
    let c = (x[0] * x[0] - x1.norm_squared()).max(0.0);
    let disc = b * b - a * c;
    if a >= 0.0 && d[0] >= 0.0 {
        // d lies in the cone: never leaves.
        return f64::INFINITY;
    }
    if a == 0.0 {
        return if b < 0.0 { -c / (2.0 * b) } else { f64::INFINITY };
    }
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    // Smallest positive root of a α² + 2bα + c, computed without cancellation.
    let q = if b >= 0.0 { -(b + sq) } else { -(b - sq) };
    let r1 = q / a;
    let r2 = if q != 0.0 { c / q } else { f64::INFINITY };
    [r1, r2]
        .into_iter()
        .filter(|&r| r > 0.0)
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone)]
pub(crate) struct SocScale {
    pub eta: f64,
    pub w: DVector<f64>,
}

impl SocScale {
    /// `W̄ v` for the normalized hyperbolic scaling matrix.
    fn wbar(&self, v: &[f64], out: &mut [f64]) {
        let n = v.len();
        let w0 = self.w[0];
        let w1v: f64 = (1..n).map(|i| self.w[i] * v[i]).sum();
        out[0] = w0 * v[0] + w1v;
        let coef = v[0] + w1v / (1.0 + w0);
        for i in 1..n {
            out[i] = v[i] + coef * self.w[i];
        }
    }

    /// `J W̄ J v`, the inverse of `W̄`.
    fn wbar_inv(&self, v: &[f64], out: &mut [f64]) {
        let n = v.len();
        let w0 = self.w[0];
        let w1v: f64 = (1..n).map(|i| self.w[i] * v[i]).sum();
        out[0] = w0 * v[0] - w1v;
        let coef = v[0] - w1v / (1.0 + w0);
        for i in 1..n {
            out[i] = v[i] - coef * self.w[i];
        }
    }

    /// Dense `W² = η² W̄²`.
    pub fn w_squared(&self) -> DMatrix<f64> {
        let n = self.w.len();
        let mut wb = DMatrix::zeros(n, n);
        let mut col = vec![0.0; n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            self.wbar(&e, &mut col);
            for i in 0..n {
                wb[(i, j)] = col[i];
            }
        }
        (&wb * &wb) * (self.eta * self.eta)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct PsdScale {
    pub r: DMatrix<f64>,
    pub rinv: DMatrix<f64>,
    /// `R Rᵀ`, the matrix appearing in `WᵀW(U) = P U P`.
    pub p: DMatrix<f64>,
}

/// Nesterov–Todd scaling `W` at a primal-dual pair with `W⁻ᵀ s = W z = λ`.
#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    pub lin: DVector<f64>,
    pub soc: Vec<SocScale>,
    pub psd: Vec<PsdScale>,
    pub lambda: ConeVec,
}

impl Scaling {
    pub fn identity(layout: &Layout) -> Self {
        Scaling {
            lin: DVector::from_element(layout.l, 1.0),
            soc: layout
                .soc
                .iter()
                .map(|&q| {
                    let mut w = DVector::zeros(q);
                    w[0] = 1.0;
                    SocScale { eta: 1.0, w }
                })
                .collect(),
            psd: layout
                .psd
                .iter()
                .map(|&d| PsdScale {
                    r: DMatrix::identity(d, d),
                    rinv: DMatrix::identity(d, d),
                    p: DMatrix::identity(d, d),
                })
                .collect(),
            lambda: layout.identity(),
        }
    }

    /// Returns `None` when `s` or `z` is not strictly interior.
    pub fn nt(layout: &Layout, s: &ConeVec, z: &ConeVec) -> Option<Self> {
        let mut lin = DVector::zeros(layout.l);
        let mut lambda = ConeVec::zeros(layout.m_o(), &layout.psd);
        for i in 0..layout.l {
            if !(s.o[i] > 0.0 && z.o[i] > 0.0) {
                return None;
            }
            lin[i] = (s.o[i] / z.o[i]).sqrt();
            lambda.o[i] = (s.o[i] * z.o[i]).sqrt();
        }
        let mut soc = Vec::with_capacity(layout.soc.len());
        for r in layout.soc_ranges() {
            let sv = s.o.rows_range(r.clone());
            let zv = z.o.rows_range(r.clone());
            let s_res = sv[0] * sv[0] - sv.rows_range(1..).norm_squared();
            let z_res = zv[0] * zv[0] - zv.rows_range(1..).norm_squared();
            if !(s_res > 0.0 && z_res > 0.0 && sv[0] > 0.0 && zv[0] > 0.0) {
                return None;
            }
            let (sn, zn) = (s_res.sqrt(), z_res.sqrt());
            let sb = sv / sn;
            let zb = zv / zn;
            let gamma = ((1.0 + sb.dot(&zb)) / 2.0).sqrt();
            let mut w = DVector::zeros(r.len());
            w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
            for i in 1..r.len() {
                w[i] = (sb[i] - zb[i]) / (2.0 * gamma);
            }
            let sc = SocScale { eta: (sn / zn).sqrt(), w };
            let mut out = vec![0.0; r.len()];
            sc.wbar(zv.as_slice(), &mut out);
            for (k, i) in r.clone().enumerate() {
                lambda.o[i] = sc.eta * out[k];
            }
            soc.push(sc);
        }
        let mut psd = Vec::with_capacity(layout.psd.len());
        for (j, (sm, zm)) in s.p.iter().zip(&z.p).enumerate() {
            let ls = Cholesky::new(sm.clone())?.l();
            let lz = Cholesky::new(zm.clone())?.l();
            let svd = (lz.transpose() * &ls).svd(true, true);
            let u = svd.u?;
            let sv = svd.singular_values;
            if sv.iter().any(|&x| !(x > 0.0)) {
                return None;
            }
            let d = sv.len();
            // R = L_z⁻ᵀ U Λ^{1/2}, R⁻¹ = Λ^{-1/2} Uᵀ L_zᵀ.
            let lz_t = lz.transpose();
            let mut r = lz_t.clone().solve_upper_triangular(&u)?;
            for k in 0..d {
                let f = sv[k].sqrt();
                r.column_mut(k).scale_mut(f);
            }
            let mut rinv = u.transpose() * &lz_t;
            for k in 0..d {
                let f = 1.0 / sv[k].sqrt();
                rinv.row_mut(k).scale_mut(f);
            }
            let p = &r * r.transpose();
            lambda.p[j] = DMatrix::from_diagonal(&sv);
            psd.push(PsdScale { r, rinv, p });
        }
        Some(Scaling { lin, soc, psd, lambda })
    }

    /// `W v`.
    pub fn apply_w(&self, layout: &Layout, v: &ConeVec) -> ConeVec {
        let mut out = ConeVec::zeros(layout.m_o(), &layout.psd);
        for i in 0..layout.l {
            out.o[i] = self.lin[i] * v.o[i];
        }
        for (sc, r) in self.soc.iter().zip(layout.soc_ranges()) {
            let mut buf = vec![0.0; r.len()];
            sc.wbar(&v.o.as_slice()[r.clone()], &mut buf);
            for (k, i) in r.enumerate() {
                out.o[i] = sc.eta * buf[k];
            }
        }
        for ((o, sc), vm) in out.p.iter_mut().zip(&self.psd).zip(&v.p) {
            *o = sc.r.transpose() * vm * &sc.r;
        }
        out
    }

    /// `Wᵀ v`.
    pub fn apply_wt(&self, layout: &Layout, v: &ConeVec) -> ConeVec {
        let mut out = self.apply_w_sym(layout, v);
        for ((o, sc), vm) in out.p.iter_mut().zip(&self.psd).zip(&v.p) {
            *o = &sc.r * vm * sc.r.transpose();
        }
        out
    }

    /// `W⁻ᵀ v`.
    pub fn apply_winv_t(&self, layout: &Layout, v: &ConeVec) -> ConeVec {
        let mut out = ConeVec::zeros(layout.m_o(), &layout.psd);
        for i in 0..layout.l {
            out.o[i] = v.o[i] / self.lin[i];
        }
        for (sc, r) in self.soc.iter().zip(layout.soc_ranges()) {
            let mut buf = vec![0.0; r.len()];
            sc.wbar_inv(&v.o.as_slice()[r.clone()], &mut buf);
            for (k, i) in r.enumerate() {
                out.o[i] = buf[k] / sc.eta;
            }
        }
        for ((o, sc), vm) in out.p.iter_mut().zip(&self.psd).zip(&v.p) {
            *o = &sc.rinv * vm * sc.rinv.transpose();
        }
        out
    }

    /// `WᵀW v`.
    pub fn apply_wtw(&self, layout: &Layout, v: &ConeVec) -> ConeVec {
        let w = self.apply_w(layout, v);
        self.apply_wt(layout, &w)
    }

    /// Nonnegative and SOC parts of `W v` (those blocks are symmetric).
    fn apply_w_sym(&self, layout: &Layout, v: &ConeVec) -> ConeVec {
        let mut out = ConeVec::zeros(layout.m_o(), &layout.psd);
        for i in 0..layout.l {
            out.o[i] = self.lin[i] * v.o[i];
        }
        for (sc, r) in self.soc.iter().zip(layout.soc_ranges()) {
            let mut buf = vec![0.0; r.len()];
            sc.wbar(&v.o.as_slice()[r.clone()], &mut buf);
            for (k, i) in r.enumerate() {
                out.o[i] = sc.eta * buf[k];
            }
        }
        out
    }
}

/// Minimum eigenvalue of a symmetric matrix.
pub(crate) fn lambda_min(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}
