//! Newton system of the interior-point method.
//!
//! Solves
//! ```text
//! [ 0  Aᵀ  Gᵀ  ] [dx]   [rx]
//! [ A  0   0   ] [dy] = [ry]
//! [ G  0  -WᵀW ] [dz]   [rz]
//! ```
//! The PSD cone rows of `G` are `-X`, so the block variables and their
//! duals are eliminated in closed form. What remains is a dense system in
//! the free scalars and the stacked equality / non-PSD cone rows:
//! `[[0, C_sᵀ], [C_s, -(C_b Q C_bᵀ + V)]]` with `Q(U) = P U P`.

use nalgebra::{DMatrix, DVector, LU};

use crate::compile::Compiled;
use crate::cones::Scaling;
use crate::vecs::{ConeVec, XVec};

type Factor = LU<f64, nalgebra::Dyn, nalgebra::Dyn>;

/// Static regularization of the lower block. The diagonal-relative shift
/// is the robust default; the absolute one resolves some near-degenerate
/// cone rows to higher accuracy but loses others entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Shift {
    Relative,
    Absolute,
}

pub(crate) struct Kkt {
    lu: Factor,
    n_s: usize,
    m_a: usize,
    m: usize,
}

const STATIC_REG: f64 = 1e-13;
const MAX_REFINE: usize = 10;

impl Kkt {
    pub fn factor(prob: &Compiled, sc: &Scaling, shift: Shift) -> Option<Kkt> {
        let n_s = prob.n_s;
        let m_a = prob.m_a();
        let m = m_a + prob.m_o();
        let n = n_s + m;
        let mut k = DMatrix::<f64>::zeros(n, n);

        // V: scaling of the nonnegative and SOC rows.
        for i in 0..prob.layout.l {
            k[(n_s + m_a + i, n_s + m_a + i)] -= sc.lin[i] * sc.lin[i];
        }
        for (s, r) in sc.soc.iter().zip(prob.layout.soc_ranges()) {
            let w2 = s.w_squared();
            for (a, i) in r.clone().enumerate() {
                for (b, j) in r.clone().enumerate() {
                    k[(n_s + m_a + i, n_s + m_a + j)] -= w2[(a, b)];
                }
            }
        }

        // C_b Q C_bᵀ, one PSD block at a time.
        let rows: Vec<_> = prob.a.iter().chain(prob.g.iter()).collect();
        let mut touching: Vec<Vec<(usize, &DMatrix<f64>)>> = vec![Vec::new(); prob.dims.len()];
        for (i, r) in rows.iter().enumerate() {
            for (j, mat) in &r.b {
                touching[*j].push((i, mat));
            }
        }
        for (j, list) in touching.iter().enumerate() {
            let p = &sc.psd[j].p;
            let pm: Vec<DMatrix<f64>> = list.iter().map(|(_, mat)| p * *mat * p).collect();
            for (a, (ia, _)) in list.iter().enumerate() {
                for (ib, mb) in list.iter().skip(a) {
                    let v = pm[a].dot(mb);
                    k[(n_s + ia, n_s + ib)] -= v;
                    if ia != ib {
                        k[(n_s + ib, n_s + ia)] -= v;
                    }
                }
            }
        }

        // C_s couplings.
        for (i, r) in rows.iter().enumerate() {
            for &(f, c) in &r.s {
                k[(n_s + i, f)] += c;
                k[(f, n_s + i)] += c;
            }
        }

        // Small static regularization; refinement against the exact operator
        // removes its effect.
        for i in 0..n_s {
            k[(i, i)] += STATIC_REG;
        }
        if k.iter().any(|v| !v.is_finite()) {
            return None;
        }
        for i in n_s..n {
            k[(i, i)] -= match shift {
                Shift::Relative => STATIC_REG * (1.0 + k[(i, i)].abs()),
                Shift::Absolute => STATIC_REG,
            };
        }
        let lu = k.lu();
        if !lu.is_invertible() {
            return None;
        }
        Some(Kkt { lu, n_s, m_a, m })
    }

    fn solve_reduced(
        &self,
        prob: &Compiled,
        sc: &Scaling,
        rx: &XVec,
        ry: &DVector<f64>,
        rz: &ConeVec,
    ) -> Option<(XVec, DVector<f64>, ConeVec)> {
        let (n_s, m_a, m) = (self.n_s, self.m_a, self.m);
        // tmp = Q r_xb - r_zp.
        let tmp: Vec<DMatrix<f64>> = sc
            .psd
            .iter()
            .zip(rx.b.iter().zip(&rz.p))
            .map(|(s, (xb, zp))| &s.p * xb * &s.p - zp)
            .collect();
        let tmp_x = XVec { s: DVector::zeros(n_s), b: tmp };
        let mut rhs = DVector::zeros(n_s + m);
        rhs.rows_mut(0, n_s).copy_from(&rx.s);
        for i in 0..m_a {
            rhs[n_s + i] = ry[i] - blocks_dot(&prob.a[i], &tmp_x);
        }
        for (i, r) in prob.g.iter().enumerate() {
            rhs[n_s + m_a + i] = rz.o[i] - blocks_dot(r, &tmp_x);
        }
        let sol = self.lu.solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let dx_s = sol.rows(0, n_s).clone_owned();
        let mu = sol.rows(n_s, m).clone_owned();
        let dy = mu.rows(0, m_a).clone_owned();
        let dz_o = mu.rows(m_a, m - m_a).clone_owned();

        // C_bᵀ μ restricted to blocks.
        let mut ct_mu = XVec::zeros(n_s, &prob.dims);
        for (r, &v) in prob.a.iter().chain(prob.g.iter()).zip(mu.iter()) {
            for (j, mat) in &r.b {
                crate::vecs::mat_axpy(&mut ct_mu.b[*j], v, mat);
            }
        }
        let mut dx = XVec { s: dx_s, b: Vec::with_capacity(prob.dims.len()) };
        let mut dz_p = Vec::with_capacity(prob.dims.len());
        for (j, s) in sc.psd.iter().enumerate() {
            let diff = &rx.b[j] - &ct_mu.b[j];
            dx.b.push(&s.p * &diff * &s.p - &rz.p[j]);
            dz_p.push(-diff);
        }
        Some((dx, dy, ConeVec { o: dz_o, p: dz_p }))
    }

    /// Solves the full Newton system, refining against the exact operator
    /// until the residual stops halving.
    pub fn solve(
        &self,
        prob: &Compiled,
        sc: &Scaling,
        rx: &XVec,
        ry: &DVector<f64>,
        rz: &ConeVec,
    ) -> Option<(XVec, DVector<f64>, ConeVec)> {
        let mut d = self.solve_reduced(prob, sc, rx, ry, rz)?;
        let target = 1e-14 * (1.0 + (rx.norm().powi(2) + ry.norm_squared() + rz.norm().powi(2)).sqrt());
        let mut best: Option<((XVec, DVector<f64>, ConeVec), f64)> = None;
        for _ in 0..MAX_REFINE {
            let (ex, ey, ez) = residual(prob, sc, &d.0, &d.1, &d.2, rx, ry, rz);
            let err = (ex.norm().powi(2) + ey.norm_squared() + ez.norm().powi(2)).sqrt();
            if let Some((prev, prev_err)) = best.take() {
                if err > 0.5 * prev_err {
                    return Some(if err < prev_err { d } else { prev });
                }
            }
            if err <= target {
                return Some(d);
            }
            let (cx, cy, cz) = self.solve_reduced(prob, sc, &ex, &ey, &ez)?;
            let mut next = d.clone();
            next.0.axpy(1.0, &cx);
            next.1 += cy;
            next.2.axpy(1.0, &cz);
            best = Some((std::mem::replace(&mut d, next), err));
        }
        // `d` is unverified here, so fall back to the last measured iterate.
        Some(best.map_or(d, |b| b.0))
    }
}

fn blocks_dot(r: &crate::compile::Row, x: &XVec) -> f64 {
    r.b.iter().map(|(j, m)| m.dot(&x.b[*j])).sum()
}

#[allow(clippy::too_many_arguments)]
fn residual(
    prob: &Compiled,
    sc: &Scaling,
    dx: &XVec,
    dy: &DVector<f64>,
    dz: &ConeVec,
    rx: &XVec,
    ry: &DVector<f64>,
    rz: &ConeVec,
) -> (XVec, DVector<f64>, ConeVec) {
    let mut ex = rx.clone();
    ex.axpy(-1.0, &prob.apply_at(dy));
    ex.axpy(-1.0, &prob.apply_gt(dz));
    let ey = ry - prob.apply_a(dx);
    let mut ez = rz.clone();
    ez.axpy(-1.0, &prob.apply_g(dx));
    ez.axpy(1.0, &sc.apply_wtw(&prob.layout, dz));
    (ex, ey, ez)
}
