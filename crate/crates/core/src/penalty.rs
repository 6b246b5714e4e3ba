//! Double-layer rank-one penalty method shared by every beamforming scheme.
//!
//! The inner layer repeatedly solves a convex subproblem built around the
//! current iterate (successive convex approximation); the outer layer
//! tightens the penalty weight `1/η` on `Σ_i (Tr W_i − ‖W_i‖₂)` until every
//! beam matrix is numerically rank one.
//!
//! All schemes work in normalized units: beam matrices are divided by the
//! power budget, so their traces sum to one, and channel matrices are
//! multiplied by it.

use log::{debug, warn};
use nalgebra::DMatrix;
use radcom_conic::{solve_with, ConeProgram, LinExpr, SolverOptions, SolverSolution, Status};
use serde::{Deserialize, Serialize};

use crate::hermitian::{eigen_max, rank_one_residual, ComplexVector, HermitianMatrix};
use crate::lift::{coef, trace_coef};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyConfig {
    pub eta0: f64,
    /// Factor applied to `η` after each outer iteration.
    pub eps_scale: f64,
    /// Inner loop stops once the fractional objective reduction drops below this.
    pub eps_inner: f64,
    /// Outer loop stops once every rank-one residual is at most this.
    pub eps_outer: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub solver_tol: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            eta0: 1e4,
            eps_scale: 0.5,
            eps_inner: 1e-2,
            eps_outer: 1e-5,
            max_inner: 50,
            max_outer: 40,
            solver_tol: 1e-10,
        }
    }
}

/// Smallest penalty parameter tried before giving up.
pub const ETA_FLOOR: f64 = 1e-12;

impl PenaltyConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return bad(format!("eta0 must be positive, got {}", self.eta0));
        }
        if !(self.eps_scale > 0.0 && self.eps_scale < 1.0) {
            return bad(format!("eps_scale must lie in (0, 1), got {}", self.eps_scale));
        }
        if !(self.eps_inner > 0.0 && self.eps_outer > 0.0) {
            return bad("eps_inner and eps_outer must be positive".into());
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return bad("iteration caps must be positive".into());
        }
        if !(1e-10..=1e-4).contains(&self.solver_tol) {
            return bad(format!("solver_tol must lie in [1e-10, 1e-4], got {}", self.solver_tol));
        }
        Ok(())
    }
}

/// The affine map `W ↦ −‖W_n‖₂ − Tr[v vᴴ (W − W_n)]`, an upper bound on
/// `−‖W‖₂` that is tight at `W_n`.
#[derive(Debug, Clone)]
pub struct SpectralLinearization {
    pub lambda: f64,
    pub v: ComplexVector,
}

pub fn spectral_linearization(w_n: &HermitianMatrix) -> SpectralLinearization {
    let (lambda, v) = eigen_max(w_n);
    SpectralLinearization { lambda, v }
}

impl SpectralLinearization {
    pub fn eval(&self, w: &HermitianMatrix) -> f64 {
        -self.lambda - (w.quad_form(&self.v) - self.lambda)
    }

    /// Block coefficient of `Tr W + eval(W)` (the constant part cancels).
    fn penalty_coef(&self, n: usize) -> DMatrix<f64> {
        trace_coef(n) - coef(&HermitianMatrix::outer(&self.v))
    }
}

/// Penalized objective values of one outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterLog {
    pub eta: f64,
    /// Penalized objective at the starting point followed by its value at
    /// every subproblem solution of this outer iteration, including steps
    /// that were rejected because they did not decrease it.
    pub objective: Vec<f64>,
    pub rejected: usize,
    pub rank_residual: f64,
}

/// One scheme plugged into the penalty driver.
pub(crate) trait PenaltyProblem {
    type State: Clone;

    /// Normalized beam matrices that must become rank one.
    fn beams<'a>(&self, s: &'a Self::State) -> &'a [HermitianMatrix];

    /// Total trace of the normalized beams; penalties and residuals are
    /// measured relative to it so that the iterates do not depend on the
    /// normalization.
    fn budget(&self) -> f64 {
        1.0
    }

    /// Objective to minimize, without the penalty, at a given state.
    fn objective(&self, s: &Self::State) -> f64;

    /// Convex subproblem around `s`, with the block index of every beam.
    fn build(&self, s: &Self::State) -> (ConeProgram, Vec<usize>);

    fn decode(&self, s: &Self::State, sol: &SolverSolution) -> Self::State;

    /// Whether the rank-one beams extracted from `s` meet the scheme's
    /// constraints. The outer loop keeps tightening the penalty until they
    /// do, since the eigenvalues discarded by extraction shift every
    /// quadratic form by up to the rank-one residual.
    fn extraction_feasible(&self, _s: &Self::State) -> bool {
        true
    }
}

/// Margin by which extracted beams must satisfy rate and mismatch
/// constraints before the loop stops.
pub(crate) const EXTRACTION_MARGIN: f64 = 1e-7;

pub(crate) struct PenaltyOutcome<S> {
    pub state: S,
    pub history: Vec<OuterLog>,
    pub inner_iters: usize,
    pub outer_iters: usize,
    /// The last subproblem whose solution was accepted, for certification.
    pub program: Option<(ConeProgram, SolverSolution)>,
}

fn rank_penalty(beams: &[HermitianMatrix]) -> f64 {
    beams.iter().map(|w| w.trace() - eigen_max(w).0).sum()
}

pub(crate) fn max_rank_residual(beams: &[HermitianMatrix]) -> f64 {
    beams
        .iter()
        .map(|w| rank_one_residual(w).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
}

fn penalized<P: PenaltyProblem>(p: &P, s: &P::State, eta: f64) -> f64 {
    p.objective(s) + rank_penalty(p.beams(s)) / (eta * p.budget())
}

fn relative_residual<P: PenaltyProblem>(p: &P, s: &P::State) -> f64 {
    max_rank_residual(p.beams(s)) / p.budget()
}

/// Adds `(1/η) Σ_i (Tr W_i − linearized ‖W_i‖₂)/budget` to the objective.
pub(crate) fn add_rank_penalty(prog: &mut ConeProgram, beams: &[HermitianMatrix], blocks: &[usize], eta: f64, budget: f64) {
    let mut obj = prog.objective.clone();
    for (w, &j) in beams.iter().zip(blocks) {
        obj.add_block(j, spectral_linearization(w).penalty_coef(w.dim()) / (eta * budget));
    }
    prog.minimize(obj);
}

pub(crate) fn run_penalty<P: PenaltyProblem>(p: &P, init: P::State, cfg: &PenaltyConfig, label: &str) -> Result<PenaltyOutcome<P::State>, Error> {
    cfg.validate()?;
    let opts = SolverOptions::with_tol(cfg.solver_tol);
    let mut state = init;
    let mut eta = cfg.eta0;
    let mut out = PenaltyOutcome { state: state.clone(), history: Vec::new(), inner_iters: 0, outer_iters: 0, program: None };
    let mut failures_in_a_row = 0;

    for outer in 0..cfg.max_outer {
        let mut log = OuterLog { eta, objective: Vec::new(), rejected: 0, rank_residual: 0.0 };
        let mut f_prev = penalized(p, &state, eta);
        log.objective.push(f_prev);
        let mut failed = false;
        for _ in 0..cfg.max_inner {
            let (mut prog, blocks) = p.build(&state);
            add_rank_penalty(&mut prog, p.beams(&state), &blocks, eta, p.budget());
            let sol = solve_with(&prog, &opts)?;
            out.inner_iters += 1;
            if sol.status != Status::Optimal {
                if out.program.is_none() {
                    return Err(match sol.status {
                        Status::Infeasible => Error::Infeasible(format!("{label}: constraints cannot be met jointly")),
                        status => Error::Solver { status, context: format!("{label} first subproblem") },
                    });
                }
                warn!("{label}: subproblem returned {:?} at eta {eta:.3e}; keeping the previous iterate", sol.status);
                failed = true;
                break;
            }
            let next = p.decode(&state, &sol);
            let f = penalized(p, &next, eta);
            log.objective.push(f);
            if out.program.is_some() && f > f_prev {
                log.rejected += 1;
                debug!("{label}: rejected step {f_prev:.12e} -> {f:.12e}");
                break;
            }
            state = next;
            out.program = Some((prog, sol));
            let reduction = (f_prev - f) / f_prev.abs().max(1e-12);
            f_prev = f;
            if reduction < cfg.eps_inner {
                break;
            }
        }
        failures_in_a_row = if failed { failures_in_a_row + 1 } else { 0 };
        log.rank_residual = relative_residual(p, &state);
        debug!("{label}: outer {outer} eta {eta:.3e} residual {:.3e} objective {f_prev:.9e}", log.rank_residual);
        let done = log.rank_residual <= cfg.eps_outer && p.extraction_feasible(&state);
        out.history.push(log);
        out.outer_iters = outer + 1;
        if done {
            out.state = state;
            return Ok(out);
        }
        if failures_in_a_row >= 3 {
            return Err(Error::Solver { status: Status::NumericalFailure, context: format!("{label} inner loop") });
        }
        eta *= cfg.eps_scale;
        if eta < ETA_FLOOR {
            break;
        }
    }
    Err(Error::MaxIterations { outer: out.outer_iters, inner: out.inner_iters, residual: relative_residual(p, &state) })
}

/// `Tr(C W_j)` summed over `blocks`, for a normalized channel matrix `c`.
pub(crate) fn channel_expr(c: &HermitianMatrix, blocks: &[usize]) -> LinExpr {
    crate::lift::tr_expr(&coef(c), blocks, 1.0)
}

pub(crate) fn trace_expr(n: usize, blocks: &[usize]) -> LinExpr {
    crate::lift::tr_expr(&trace_coef(n), blocks, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn psd(n: usize, vals: &[f64]) -> HermitianMatrix {
        let a = DMatrix::from_fn(n, n, |i, j| Complex64::new(vals[(i * n + j) % vals.len()], vals[(2 * i + 3 * j + 1) % vals.len()]));
        HermitianMatrix::hermitian_part(&a * a.adjoint())
    }

    #[test]
    fn linearization_examples() {
        let w_n = HermitianMatrix::from_real_diagonal(&[3.0, 1.0]);
        let lin = spectral_linearization(&w_n);
        assert!((lin.eval(&w_n) + 3.0).abs() < 1e-12);
        let lin = spectral_linearization(&HermitianMatrix::identity(2));
        let w = HermitianMatrix::from_real_diagonal(&[2.0, 0.0]);
        assert!((lin.eval(&w) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_coefficient_matches_definition() {
        let w_n = psd(3, &[0.2, -0.5, 1.0, 0.7, 0.3]);
        let w = psd(3, &[1.1, 0.4, -0.2, 0.9]);
        let lin = spectral_linearization(&w_n);
        let x = crate::hermitian::real_embed(&w);
        assert!((lin.penalty_coef(3).dot(&x) - (w.trace() + lin.eval(&w))).abs() < 1e-10);
    }

    #[test]
    fn config_validation() {
        assert!(PenaltyConfig::default().validate().is_ok());
        assert!(PenaltyConfig { eps_scale: 1.0, ..Default::default() }.validate().is_err());
        assert!(PenaltyConfig { eta0: 0.0, ..Default::default() }.validate().is_err());
        assert!(PenaltyConfig { solver_tol: 1e-2, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn linearization_bounds_spectral_norm(a in prop::collection::vec(-1.0f64..1.0, 9), b in prop::collection::vec(-1.0f64..1.0, 9)) {
            let (w_n, w) = (psd(3, &a), psd(3, &b));
            let lin = spectral_linearization(&w_n);
            let norm = eigen_max(&w).0;
            prop_assert!(lin.eval(&w) >= -norm - 1e-12 * (1.0 + norm));
            prop_assert!((lin.eval(&w_n) + eigen_max(&w_n).0).abs() <= 1e-9 * (1.0 + w_n.trace()));
        }
    }
}
