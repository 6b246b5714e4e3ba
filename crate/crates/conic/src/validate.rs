//! Independent feasibility checker working only from the program text and
//! candidate primal values.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cones::lambda_min;
use crate::program::ConeProgram;

/// Worst violation per constraint class. All entries are nonnegative.
///
/// Rotated cones report `max(0, ‖w‖² − u·t) / (1 + u·t)` together with any
/// negativity of `u` or `t`; every other class reports absolute violations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub bounds: f64,
    pub eq: f64,
    pub ineq: f64,
    pub soc: f64,
    pub rsoc: f64,
    pub psd: f64,
}

impl ResidualReport {
    pub fn worst(&self) -> f64 {
        [self.bounds, self.eq, self.ineq, self.soc, self.rsoc, self.psd]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

/// Recomputes every constraint of `p` at the given point.
pub fn validate_solution(p: &ConeProgram, scalars: &[f64], blocks: &[DMatrix<f64>]) -> ResidualReport {
    let mut rep = ResidualReport::default();
    let nan_guard = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    for (b, &x) in p.scalar_bounds.iter().zip(scalars) {
        if let Some(lo) = b.lower {
            rep.bounds = rep.bounds.max(nan_guard(lo - x));
        }
        if let Some(hi) = b.upper {
            rep.bounds = rep.bounds.max(nan_guard(x - hi));
        }
    }
    for e in &p.eq {
        rep.eq = rep.eq.max(nan_guard(e.eval(scalars, blocks).abs()));
    }
    for e in &p.ineq {
        rep.ineq = rep.ineq.max(nan_guard(-e.eval(scalars, blocks)));
    }
    for c in &p.soc {
        let t = c.t.eval(scalars, blocks);
        let n = c.v.iter().map(|e| e.eval(scalars, blocks).powi(2)).sum::<f64>().sqrt();
        rep.soc = rep.soc.max(nan_guard(n - t));
    }
    for c in &p.rsoc {
        let u = c.u.eval(scalars, blocks);
        let t = c.t.eval(scalars, blocks);
        let w2 = c.w.iter().map(|e| e.eval(scalars, blocks).powi(2)).sum::<f64>();
        let rel = (w2 - u * t) / (1.0 + (u * t).abs());
        rep.rsoc = rep.rsoc.max(nan_guard(rel)).max(nan_guard(-u)).max(nan_guard(-t));
    }
    for b in blocks {
        let asym = (b - b.transpose()).amax();
        let sym = (b + b.transpose()) * 0.5;
        rep.psd = rep.psd.max(nan_guard(-lambda_min(&sym))).max(nan_guard(asym));
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{Bounds, LinExpr};

    fn lp() -> ConeProgram {
        let mut p = ConeProgram::new();
        let x = p.add_scalar(Bounds::FREE);
        p.minimize(LinExpr::var(x));
        p.add_ineq(LinExpr::var(x).with_constant(-1.0));
        p
    }

    #[test]
    fn exact_solution_has_zero_residuals() {
        let rep = validate_solution(&lp(), &[1.0], &[]);
        assert_eq!(rep.worst(), 0.0);
    }

    #[test]
    fn perturbation_is_reported() {
        let rep = validate_solution(&lp(), &[1.0 - 1e-3], &[]);
        assert!((rep.ineq - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn psd_violation_detected() {
        let mut p = ConeProgram::new();
        p.add_psd_block(2);
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let rep = validate_solution(&p, &[], &[x]);
        assert!((rep.psd - 1.0).abs() < 1e-12);
    }
}
