//! Homogeneous self-dual interior-point method with Nesterov–Todd scaling
//! and Mehrotra predictor-corrector steps.

use std::path::PathBuf;

use log::{debug, trace};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::compile::{Compiled, Equil, VarMap};
use crate::cones::Scaling;
use crate::kkt::{Kkt, Shift};
use crate::program::ConeProgram;
use crate::vecs::{symmetrize, ConeVec, XVec};
use crate::ProgramError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    /// A certificate of primal infeasibility was found.
    Infeasible,
    /// A certificate of dual infeasibility (unbounded objective) was found.
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub equilibrate: bool,
    /// When set, the program is written here as JSON before solving.
    pub dump_path: Option<PathBuf>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_iter: 200, equilibrate: true, dump_path: None }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct SolverSolution {
    pub status: Status,
    pub scalars: Vec<f64>,
    pub blocks: Vec<DMatrix<f64>>,
    pub objective: f64,
    pub dual_objective: f64,
    /// Relative primal residual `‖(Ax − b, Gx + s − h)‖ / (1 + ‖(b, h)‖)`.
    pub primal_residual: f64,
    /// Dual residual `‖Aᵀy + Gᵀz + c‖ / (1 + max(‖c‖, ‖Aᵀy + Gᵀz‖))`.
    pub dual_residual: f64,
    /// Complementarity `sᵀz` relative to `max(1, |objective|)`.
    pub gap: f64,
    pub iterations: usize,
}

impl SolverSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Solves `p` to tolerance `tol` with default options.
pub fn solve(p: &ConeProgram, tol: f64) -> Result<SolverSolution, ProgramError> {
    solve_with(p, &SolverOptions::with_tol(tol))
}

#[derive(Clone, Copy)]
struct Metrics {
    pres: f64,
    dres: f64,
    gap: f64,
    pcost: f64,
    dcost: f64,
}

impl Metrics {
    fn worst(&self) -> f64 {
        self.pres.max(self.dres).max(self.gap)
    }
}

/// Slack allowed on a best iterate when the method stops early.
const INACCURATE_FACTOR: f64 = 100.0;

pub fn solve_with(p: &ConeProgram, opts: &SolverOptions) -> Result<SolverSolution, ProgramError> {
    if !(1e-10..=1e-4).contains(&opts.tol) {
        return Err(ProgramError::BadTolerance(opts.tol));
    }
    if let Some(path) = &opts.dump_path {
        p.dump(path)?;
    }
    let mut prob = Compiled::from_program(p)?;
    let norm_b = prob.b.norm();
    let norm_h = prob.h.norm();
    let norm_c = prob.c.norm();
    let eq = if opts.equilibrate { prob.equilibrate(12) } else { Equil::identity(&prob) };
    let ipm = |shift| Ipm { prob: &prob, eq: &eq, opts, norm_bh: norm_b.max(norm_h), norm_c, shift }.run();
    let first = ipm(Shift::Relative);
    if settled(&first, opts.tol) {
        return Ok(first);
    }
    let second = ipm(Shift::Absolute);
    debug!(
        "ipm: retried with absolute shift: {:?} {:.2e} -> {:?} {:.2e}",
        first.status,
        accuracy(&first),
        second.status,
        accuracy(&second)
    );
    Ok(if settled(&second, opts.tol) || rank(&second) < rank(&first) { second } else { first })
}

fn accuracy(s: &SolverSolution) -> f64 {
    s.primal_residual.max(s.dual_residual).max(s.gap)
}

/// Converged to `tol` or certified infeasible or unbounded.
fn settled(s: &SolverSolution, tol: f64) -> bool {
    match s.status {
        Status::Optimal => accuracy(s) <= tol,
        Status::Infeasible | Status::Unbounded => true,
        Status::MaxIterations | Status::NumericalFailure => false,
    }
}

/// Orders unsettled runs: accepted iterates first, then by accuracy.
fn rank(s: &SolverSolution) -> (bool, f64) {
    let acc = accuracy(s);
    (s.status != Status::Optimal, if acc.is_nan() { f64::INFINITY } else { acc })
}

struct Ipm<'a> {
    prob: &'a Compiled,
    eq: &'a Equil,
    opts: &'a SolverOptions,
    norm_bh: f64,
    norm_c: f64,
    shift: Shift,
}

#[derive(Clone)]
struct Iterate {
    x: XVec,
    y: DVector<f64>,
    z: ConeVec,
    s: ConeVec,
    tau: f64,
    kappa: f64,
}

struct Direction {
    x: XVec,
    y: DVector<f64>,
    z: ConeVec,
    s: ConeVec,
    tau: f64,
    kappa: f64,
}

struct Residuals {
    rx: XVec,
    ry: DVector<f64>,
    rz: ConeVec,
    rt: f64,
}

impl Ipm<'_> {
    fn failure(&self, status: Status, iters: usize) -> SolverSolution {
        let n = self.prob.map.len();
        SolverSolution {
            status,
            scalars: vec![f64::NAN; n],
            blocks: self.prob.dims.iter().map(|&d| DMatrix::from_element(d, d, f64::NAN)).collect(),
            objective: f64::NAN,
            dual_objective: f64::NAN,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            gap: f64::INFINITY,
            iterations: iters,
        }
    }

    fn shift_into_cone(&self, v: &mut ConeVec) {
        let layout = &self.prob.layout;
        let alpha = -layout.min_eig(v);
        if alpha >= -1e-8 || !alpha.is_finite() {
            let e = layout.identity();
            v.axpy(1.0 + alpha.max(0.0), &e);
        }
    }

    fn initial(&self) -> Option<Iterate> {
        let prob = self.prob;
        let sc = Scaling::identity(&prob.layout);
        let kkt = Kkt::factor(prob, &sc, self.shift)?;
        let zero_x = XVec::zeros(prob.n_s, &prob.dims);
        let (x, _, zt) = kkt.solve(prob, &sc, &zero_x, &prob.b, &prob.h_cone())?;
        let mut s = zt.neg();
        self.shift_into_cone(&mut s);
        let zero_y = DVector::zeros(prob.m_a());
        let zero_z = ConeVec::zeros(prob.m_o(), &prob.dims);
        let (_, y, mut z) = kkt.solve(prob, &sc, &prob.c.scaled(-1.0), &zero_y, &zero_z)?;
        self.shift_into_cone(&mut z);
        Some(Iterate { x, y, z, s, tau: 1.0, kappa: 1.0 })
    }

    fn residuals(&self, it: &Iterate) -> Residuals {
        let prob = self.prob;
        let mut rx = prob.apply_at(&it.y);
        rx.axpy(1.0, &prob.apply_gt(&it.z));
        rx.axpy(it.tau, &prob.c);
        let ry = prob.apply_a(&it.x) - &prob.b * it.tau;
        let mut rz = it.s.clone();
        rz.axpy(1.0, &prob.apply_g(&it.x));
        rz.axpy(-it.tau, &prob.h_cone());
        let rt = it.kappa + prob.c.dot(&it.x) + prob.b.dot(&it.y) + prob.h_cone().dot(&it.z);
        Residuals { rx, ry, rz, rt }
    }

    fn metrics(&self, it: &Iterate, r: &Residuals) -> Metrics {
        let prob = self.prob;
        let tau = it.tau;
        // Relative to the larger of c and Aᵀy + Gᵀz, so that problems with
        // large multipliers are judged on the same footing as small ones.
        let mut dual_part = r.rx.clone();
        dual_part.axpy(-tau, &prob.c);
        let dual_norm = self.eq.unscale_dual_res(&dual_part).norm() / tau;
        let dres = self.eq.unscale_dual_res(&r.rx).norm() / tau / (1.0 + self.norm_c.max(dual_norm));
        let ry = self.eq.unscale_eq_res(&r.ry).norm();
        let rz = self.eq.unscale_cone_res(&r.rz).norm();
        let pres = ry.max(rz) / tau / (1.0 + self.norm_bh);
        let pcost = prob.c.dot(&it.x) / tau + prob.c0;
        let dcost = -(prob.b.dot(&it.y) + prob.h_cone().dot(&it.z)) / tau + prob.c0;
        let gap_abs = it.s.dot(&it.z) / (tau * tau);
        let gap = gap_abs / pcost.abs().max(1.0);
        Metrics { pres, dres, gap, pcost, dcost }
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        kkt: &Kkt,
        sc: &Scaling,
        it: &Iterate,
        r: &Residuals,
        sol1: &(XVec, DVector<f64>, ConeVec),
        sigma: f64,
        d_s: &ConeVec,
        d_k: f64,
    ) -> Option<Direction> {
        let prob = self.prob;
        let layout = &prob.layout;
        let f = -(1.0 - sigma);
        let lam_ds = layout.inv_prod(&sc.lambda, d_s);
        let wt_lam_ds = sc.apply_wt(layout, &lam_ds);
        let mut rz = r.rz.scaled(f);
        rz.axpy(-1.0, &wt_lam_ds);
        let (x2, y2, z2) = kkt.solve(prob, sc, &r.rx.scaled(f), &(&r.ry * f), &rz)?;
        let (x1, y1, z1) = sol1;
        let h = prob.h_cone();
        let num = f * r.rt - d_k / it.tau - (prob.c.dot(&x2) + prob.b.dot(&y2) + h.dot(&z2));
        let den = prob.c.dot(x1) + prob.b.dot(y1) + h.dot(z1) - it.kappa / it.tau;
        let dtau = num / den;
        let mut dx = x2;
        dx.axpy(dtau, x1);
        let dy = y2 + y1 * dtau;
        let mut dz = z2;
        dz.axpy(dtau, z1);
        // ds = Wᵀ(λ \ d_s − W dz).
        let mut inner = lam_ds;
        inner.axpy(-1.0, &sc.apply_w(layout, &dz));
        let ds = sc.apply_wt(layout, &inner);
        let dkappa = (d_k - it.kappa * dtau) / it.tau;
        if !dtau.is_finite() || !dkappa.is_finite() {
            return None;
        }
        Some(Direction { x: dx, y: dy, z: dz, s: ds, tau: dtau, kappa: dkappa })
    }

    fn max_step(&self, sc: &Scaling, it: &Iterate, d: &Direction) -> f64 {
        let layout = &self.prob.layout;
        let ds_scaled = sc.apply_winv_t(layout, &d.s);
        let dz_scaled = sc.apply_w(layout, &d.z);
        let mut a = layout.step(&sc.lambda, &ds_scaled, f64::INFINITY);
        a = layout.step(&sc.lambda, &dz_scaled, a);
        if d.tau < 0.0 {
            a = a.min(-it.tau / d.tau);
        }
        if d.kappa < 0.0 {
            a = a.min(-it.kappa / d.kappa);
        }
        a
    }

    fn run(&self) -> SolverSolution {
        let prob = self.prob;
        let layout = &prob.layout;
        let tol = self.opts.tol;
        let nu = layout.degree();
        let Some(mut it) = self.initial() else {
            return self.failure(Status::NumericalFailure, 0);
        };
        let mut stalls = 0;
        let mut best: Option<(Iterate, Metrics, usize)> = None;
        for k in 0..=self.opts.max_iter {
            let r = self.residuals(&it);
            let m = self.metrics(&it, &r);
            if best.as_ref().is_none_or(|(_, b, _)| m.worst() < b.worst()) {
                best = Some((it.clone(), m, k));
            }
            trace!(
                "ipm {k}: pcost {:.6e} dcost {:.6e} pres {:.2e} dres {:.2e} gap {:.2e} tau {:.2e} kappa {:.2e}",
                m.pcost, m.dcost, m.pres, m.dres, m.gap, it.tau, it.kappa
            );
            if m.pres <= tol && m.dres <= tol && m.gap <= tol {
                return self.finish(Status::Optimal, &it, &m, k);
            }
            if let Some(status) = self.certificate(&it, &r) {
                debug!("ipm {k}: {status:?} certificate");
                return self.finish(status, &it, &m, k);
            }
            if k == self.opts.max_iter {
                return self.stop(Status::MaxIterations, best, k);
            }

            let Some(sc) = Scaling::nt(layout, &it.s, &it.z) else {
                return self.stop(Status::NumericalFailure, best, k);
            };
            let Some(kkt) = Kkt::factor(prob, &sc, self.shift) else {
                return self.stop(Status::NumericalFailure, best, k);
            };
            let Some(sol1) = kkt.solve(prob, &sc, &prob.c.scaled(-1.0), &prob.b, &prob.h_cone()) else {
                return self.stop(Status::NumericalFailure, best, k);
            };

            let lam_sq = layout.prod(&sc.lambda, &sc.lambda);
            let d_s_aff = lam_sq.neg();
            let d_k_aff = -it.tau * it.kappa;
            let Some(aff) = self.direction(&kkt, &sc, &it, &r, &sol1, 0.0, &d_s_aff, d_k_aff) else {
                return self.stop(Status::NumericalFailure, best, k);
            };
            let alpha_aff = self.max_step(&sc, &it, &aff).min(1.0);
            let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);
            let mu = (it.s.dot(&it.z) + it.tau * it.kappa) / (nu + 1.0);

            let ws = sc.apply_winv_t(layout, &aff.s);
            let wz = sc.apply_w(layout, &aff.z);
            let mut d_s = lam_sq.neg();
            d_s.axpy(-1.0, &layout.prod(&ws, &wz));
            d_s.axpy(sigma * mu, &layout.identity());
            let d_k = -it.tau * it.kappa - aff.tau * aff.kappa + sigma * mu;
            let Some(dir) = self.direction(&kkt, &sc, &it, &r, &sol1, sigma, &d_s, d_k) else {
                return self.stop(Status::NumericalFailure, best, k);
            };
            let alpha = (0.99 * self.max_step(&sc, &it, &dir)).min(1.0);
            if alpha < 1e-10 {
                stalls += 1;
                if stalls >= 3 {
                    return self.stop(Status::NumericalFailure, best, k);
                }
            } else {
                stalls = 0;
            }
            it.x.axpy(alpha, &dir.x);
            it.y.axpy(alpha, &dir.y, 1.0);
            it.z.axpy(alpha, &dir.z);
            it.s.axpy(alpha, &dir.s);
            it.tau += alpha * dir.tau;
            it.kappa += alpha * dir.kappa;
            for mtx in it.x.b.iter_mut().chain(it.z.p.iter_mut()).chain(it.s.p.iter_mut()) {
                symmetrize(mtx);
            }
            // Keep the homogenizing pair away from zero in floating point.
            if it.tau < 1e-300 || it.kappa < 1e-300 {
                return self.stop(Status::NumericalFailure, best, k + 1);
            }
        }
        unreachable!("loop returns at max_iter")
    }

    /// Detects primal or dual infeasibility certificates.
    fn certificate(&self, it: &Iterate, r: &Residuals) -> Option<Status> {
        let prob = self.prob;
        let tol = self.opts.tol;
        if it.tau >= it.kappa {
            return None;
        }
        let by_hz = prob.b.dot(&it.y) + prob.h_cone().dot(&it.z);
        if by_hz < 0.0 {
            let mut atz = r.rx.clone();
            atz.axpy(-it.tau, &prob.c);
            let res = self.eq.unscale_dual_res(&atz).norm() / -by_hz;
            if res <= tol {
                return Some(Status::Infeasible);
            }
        }
        let cx = prob.c.dot(&it.x);
        if cx < 0.0 {
            let ax = self.eq.unscale_eq_res(&prob.apply_a(&it.x)).norm();
            let mut gs = prob.apply_g(&it.x);
            gs.axpy(1.0, &it.s);
            let gs = self.eq.unscale_cone_res(&gs).norm();
            if ax.max(gs) / -cx <= tol {
                return Some(Status::Unbounded);
            }
        }
        None
    }

    /// Ends a run that could not reach `tol`. The best iterate seen is
    /// reported as optimal when all its measures are within
    /// [`INACCURATE_FACTOR`] times the tolerance.
    fn stop(&self, status: Status, best: Option<(Iterate, Metrics, usize)>, iters: usize) -> SolverSolution {
        let Some((it, m, k)) = best else {
            return self.failure(status, iters);
        };
        if m.worst() <= INACCURATE_FACTOR * self.opts.tol && it.tau > it.kappa {
            debug!("ipm: {status:?} at {iters}; accepting iterate {k} with accuracy {:.2e}", m.worst());
            return self.finish(Status::Optimal, &it, &m, iters);
        }
        self.finish(status, &it, &m, iters)
    }

    fn finish(&self, status: Status, it: &Iterate, m: &Metrics, iters: usize) -> SolverSolution {
        if status == Status::Infeasible || status == Status::Unbounded {
            let mut sol = self.failure(status, iters);
            sol.primal_residual = m.pres;
            sol.dual_residual = m.dres;
            return sol;
        }
        let x = self.eq.unscale_x(&it.x.scaled(1.0 / it.tau));
        let scalars = self
            .prob
            .map
            .iter()
            .map(|v| match *v {
                VarMap::Fixed(val) => val,
                VarMap::Free(i) => x.s[i],
            })
            .collect();
        let mut blocks = x.b;
        for b in &mut blocks {
            symmetrize(b);
        }
        SolverSolution {
            status,
            scalars,
            blocks,
            objective: m.pcost,
            dual_objective: m.dcost,
            primal_residual: m.pres,
            dual_residual: m.dres,
            gap: m.gap,
            iterations: iters,
        }
    }
}
