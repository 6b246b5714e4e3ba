//! Lowering of a [`ConeProgram`] to the standard form
//! `min cᵀx  s.t.  Ax = b,  Gx + s = h,  s ∈ K`, plus Ruiz equilibration.

use nalgebra::{DMatrix, DVector};

use crate::cones::Layout;
use crate::program::{ConeProgram, LinExpr};
use crate::vecs::{ConeVec, XVec};
use crate::ProgramError;

/// One row of `A` or of the non-PSD part of `G`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Row {
    pub s: Vec<(usize, f64)>,
    pub b: Vec<(usize, DMatrix<f64>)>,
}

impl Row {
    pub fn dot(&self, x: &XVec) -> f64 {
        let mut v = 0.0;
        for &(i, c) in &self.s {
            v += c * x.s[i];
        }
        for (j, m) in &self.b {
            v += m.dot(&x.b[*j]);
        }
        v
    }

    /// `out += a * rowᵀ`.
    pub fn add_to(&self, a: f64, out: &mut XVec) {
        if a == 0.0 {
            return;
        }
        for &(i, c) in &self.s {
            out.s[i] += a * c;
        }
        for (j, m) in &self.b {
            crate::vecs::mat_axpy(&mut out.b[*j], a, m);
        }
    }

    fn max_abs(&self) -> f64 {
        let s = self.s.iter().map(|(_, c)| c.abs()).fold(0.0, f64::max);
        self.b.iter().map(|(_, m)| m.amax()).fold(s, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum VarMap {
    Free(usize),
    Fixed(f64),
}

/// Diagonal scalings applied by equilibration: `x = D x̃`, `y = E_a ỹ`,
/// `z = E z̃`. PSD cone rows use `1/d` of their block.
#[derive(Debug, Clone)]
pub(crate) struct Equil {
    pub d_s: DVector<f64>,
    pub d_b: Vec<f64>,
    pub e_a: DVector<f64>,
    pub e_o: DVector<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    pub n_s: usize,
    pub dims: Vec<usize>,
    pub c: XVec,
    pub c0: f64,
    pub a: Vec<Row>,
    pub b: DVector<f64>,
    /// Nonnegative rows first, then second-order cones.
    pub g: Vec<Row>,
    pub h: DVector<f64>,
    pub layout: Layout,
    pub map: Vec<VarMap>,
}

impl Compiled {
    pub fn from_program(p: &ConeProgram) -> Result<Self, ProgramError> {
        p.check()?;
        let mut map = Vec::with_capacity(p.n_scalars());
        let mut n_s = 0;
        for b in &p.scalar_bounds {
            match (b.lower, b.upper) {
                (Some(lo), Some(hi)) if lo == hi => map.push(VarMap::Fixed(lo)),
                _ => {
                    map.push(VarMap::Free(n_s));
                    n_s += 1;
                }
            }
        }
        let dims = p.psd_blocks.clone();
        let lower = |e: &LinExpr| -> (Row, f64) {
            let mut row = Row::default();
            let mut k = e.constant;
            for &(i, c) in &e.scalars {
                match map[i] {
                    VarMap::Fixed(v) => k += c * v,
                    VarMap::Free(f) => {
                        if let Some(entry) = row.s.iter_mut().find(|(x, _)| *x == f) {
                            entry.1 += c;
                        } else {
                            row.s.push((f, c));
                        }
                    }
                }
            }
            for (j, m) in &e.blocks {
                let sym = (m + m.transpose()) * 0.5;
                if let Some(entry) = row.b.iter_mut().find(|(x, _)| x == j) {
                    entry.1 += sym;
                } else {
                    row.b.push((*j, sym));
                }
            }
            row.s.retain(|(_, c)| *c != 0.0);
            (row, k)
        };

        let (obj, c0) = lower(&p.objective);
        let mut c = XVec::zeros(n_s, &dims);
        obj.add_to(1.0, &mut c);

        let mut a = Vec::new();
        let mut b = Vec::new();
        for e in &p.eq {
            let (row, k) = lower(e);
            a.push(row);
            b.push(-k);
        }

        // Cone rows encode `s = expr(x) = a·x + k`, i.e. G = -a, h = k.
        let mut g = Vec::new();
        let mut h = Vec::new();
        let push_cone_row = |row: Row, k: f64, g: &mut Vec<Row>, h: &mut Vec<f64>| {
            let neg = Row {
                s: row.s.iter().map(|&(i, c)| (i, -c)).collect(),
                b: row.b.into_iter().map(|(j, m)| (j, -m)).collect(),
            };
            g.push(neg);
            h.push(k);
        };
        for e in &p.ineq {
            let (row, k) = lower(e);
            push_cone_row(row, k, &mut g, &mut h);
        }
        for (i, bnd) in p.scalar_bounds.iter().enumerate() {
            let VarMap::Free(f) = map[i] else { continue };
            if let Some(lo) = bnd.lower {
                push_cone_row(Row { s: vec![(f, 1.0)], b: vec![] }, -lo, &mut g, &mut h);
            }
            if let Some(hi) = bnd.upper {
                push_cone_row(Row { s: vec![(f, -1.0)], b: vec![] }, hi, &mut g, &mut h);
            }
        }
        let l = g.len();
        let mut soc_dims = Vec::new();
        for con in &p.soc {
            let (row, k) = lower(&con.t);
            push_cone_row(row, k, &mut g, &mut h);
            for e in &con.v {
                let (row, k) = lower(e);
                push_cone_row(row, k, &mut g, &mut h);
            }
            soc_dims.push(1 + con.v.len());
        }
        for con in &p.rsoc {
            // u·t ≥ ‖w‖² with u, t ≥ 0  ⇔  ‖(u − t, 2w)‖ ≤ u + t.
            let sum = con.u.clone().plus(1.0, &con.t);
            let diff = con.u.clone().plus(-1.0, &con.t);
            let (row, k) = lower(&sum);
            push_cone_row(row, k, &mut g, &mut h);
            let (row, k) = lower(&diff);
            push_cone_row(row, k, &mut g, &mut h);
            for e in &con.w {
                let (row, k) = lower(&e.clone().scaled(2.0));
                push_cone_row(row, k, &mut g, &mut h);
            }
            soc_dims.push(2 + con.w.len());
        }

        Ok(Compiled {
            n_s,
            layout: Layout { l, soc: soc_dims, psd: dims.clone() },
            dims,
            c,
            c0,
            a,
            b: DVector::from_vec(b),
            g,
            h: DVector::from_vec(h),
            map,
        })
    }

    pub fn m_a(&self) -> usize {
        self.a.len()
    }

    pub fn m_o(&self) -> usize {
        self.g.len()
    }

    pub fn apply_a(&self, x: &XVec) -> DVector<f64> {
        DVector::from_iterator(self.a.len(), self.a.iter().map(|r| r.dot(x)))
    }

    pub fn apply_at(&self, y: &DVector<f64>) -> XVec {
        let mut out = XVec::zeros(self.n_s, &self.dims);
        for (r, &v) in self.a.iter().zip(y.iter()) {
            r.add_to(v, &mut out);
        }
        out
    }

    /// `G x`, including the `-X` rows of the PSD cones.
    pub fn apply_g(&self, x: &XVec) -> ConeVec {
        ConeVec {
            o: DVector::from_iterator(self.g.len(), self.g.iter().map(|r| r.dot(x))),
            p: x.b.iter().map(|m| -m).collect(),
        }
    }

    pub fn apply_gt(&self, z: &ConeVec) -> XVec {
        let mut out = XVec::zeros(self.n_s, &self.dims);
        for (r, &v) in self.g.iter().zip(z.o.iter()) {
            r.add_to(v, &mut out);
        }
        for (o, zm) in out.b.iter_mut().zip(&z.p) {
            *o -= zm;
        }
        out
    }

    pub fn h_cone(&self) -> ConeVec {
        ConeVec { o: self.h.clone(), p: self.dims.iter().map(|&d| DMatrix::zeros(d, d)).collect() }
    }

    /// Ruiz equilibration in place; returns the applied scalings.
    pub fn equilibrate(&mut self, passes: usize) -> Equil {
        let mut eq = Equil {
            d_s: DVector::from_element(self.n_s, 1.0),
            d_b: vec![1.0; self.dims.len()],
            e_a: DVector::from_element(self.m_a(), 1.0),
            e_o: DVector::from_element(self.m_o(), 1.0),
        };
        let soc_ranges = self.layout.soc_ranges();
        let clamp = |v: f64| v.clamp(1e-4, 1e4);
        for _ in 0..passes {
            let mut col_s = vec![0.0f64; self.n_s];
            let mut col_b = vec![0.0f64; self.dims.len()];
            for r in self.a.iter().chain(self.g.iter()) {
                for &(i, c) in &r.s {
                    col_s[i] = col_s[i].max(c.abs());
                }
                for (j, m) in &r.b {
                    col_b[*j] = col_b[*j].max(m.amax());
                }
            }
            let row_a: Vec<f64> = self.a.iter().map(Row::max_abs).collect();
            let mut row_o: Vec<f64> = self.g.iter().map(Row::max_abs).collect();
            for r in &soc_ranges {
                let m = row_o[r.clone()].iter().cloned().fold(0.0, f64::max);
                row_o[r.clone()].iter_mut().for_each(|v| *v = m);
            }
            let inv_sqrt = |v: f64| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 };
            let fs: Vec<f64> = col_s.iter().map(|&v| inv_sqrt(v)).collect();
            let fb: Vec<f64> = col_b.iter().map(|&v| inv_sqrt(v)).collect();
            let fa: Vec<f64> = row_a.iter().map(|&v| inv_sqrt(v)).collect();
            let fo: Vec<f64> = row_o.iter().map(|&v| inv_sqrt(v)).collect();
            // Keep cumulative factors inside the clamp range.
            let fs: Vec<f64> = fs.iter().enumerate().map(|(i, &f)| clamp(eq.d_s[i] * f) / eq.d_s[i]).collect();
            let fb: Vec<f64> = fb.iter().enumerate().map(|(j, &f)| clamp(eq.d_b[j] * f) / eq.d_b[j]).collect();
            let fa: Vec<f64> = fa.iter().enumerate().map(|(i, &f)| clamp(eq.e_a[i] * f) / eq.e_a[i]).collect();
            let fo: Vec<f64> = fo.iter().enumerate().map(|(i, &f)| clamp(eq.e_o[i] * f) / eq.e_o[i]).collect();
            self.apply_scaling(&fs, &fb, &fa, &fo);
            for i in 0..self.n_s {
                eq.d_s[i] *= fs[i];
            }
            for j in 0..self.dims.len() {
                eq.d_b[j] *= fb[j];
            }
            for i in 0..self.m_a() {
                eq.e_a[i] *= fa[i];
            }
            for i in 0..self.m_o() {
                eq.e_o[i] *= fo[i];
            }
        }
        eq
    }

    fn apply_scaling(&mut self, fs: &[f64], fb: &[f64], fa: &[f64], fo: &[f64]) {
        let scale_row = |r: &mut Row, e: f64| {
            for (i, c) in r.s.iter_mut() {
                *c *= e * fs[*i];
            }
            for (j, m) in r.b.iter_mut() {
                *m *= e * fb[*j];
            }
        };
        for (r, &e) in self.a.iter_mut().zip(fa) {
            scale_row(r, e);
        }
        for (r, &e) in self.g.iter_mut().zip(fo) {
            scale_row(r, e);
        }
        for (i, v) in self.c.s.iter_mut().enumerate() {
            *v *= fs[i];
        }
        for (j, m) in self.c.b.iter_mut().enumerate() {
            *m *= fb[j];
        }
        for (i, v) in self.b.iter_mut().enumerate() {
            *v *= fa[i];
        }
        for (i, v) in self.h.iter_mut().enumerate() {
            *v *= fo[i];
        }
    }
}

impl Equil {
    pub fn identity(c: &Compiled) -> Self {
        Equil {
            d_s: DVector::from_element(c.n_s, 1.0),
            d_b: vec![1.0; c.dims.len()],
            e_a: DVector::from_element(c.m_a(), 1.0),
            e_o: DVector::from_element(c.m_o(), 1.0),
        }
    }

    /// Maps a scaled dual residual `D(Aᵀy + Gᵀz + cτ)` back to original units.
    pub fn unscale_dual_res(&self, r: &XVec) -> XVec {
        let mut out = r.clone();
        for i in 0..out.s.len() {
            out.s[i] /= self.d_s[i];
        }
        for (m, &d) in out.b.iter_mut().zip(&self.d_b) {
            *m /= d;
        }
        out
    }

    pub fn unscale_eq_res(&self, r: &DVector<f64>) -> DVector<f64> {
        r.component_div(&self.e_a)
    }

    /// Original-unit cone residual; PSD rows were scaled by `1/d`.
    pub fn unscale_cone_res(&self, r: &ConeVec) -> ConeVec {
        ConeVec {
            o: r.o.component_div(&self.e_o),
            p: r.p.iter().zip(&self.d_b).map(|(m, &d)| m * d).collect(),
        }
    }

    pub fn unscale_x(&self, x: &XVec) -> XVec {
        let mut out = x.clone();
        for i in 0..out.s.len() {
            out.s[i] *= self.d_s[i];
        }
        for (m, &d) in out.b.iter_mut().zip(&self.d_b) {
            *m *= d;
        }
        out
    }
}
