//! Beamformer-based NOMA for one radar/communication user pair.
//!
//! The base station superimposes a multicast beam `w_m` (decoded by both
//! users, first by the C-user before SIC) and a unicast beam `w_u` for the
//! C-user. The unicast rate is maximized subject to a multicast rate floor
//! at both users, a beam pattern mismatch budget and the power budget.

use radcom_conic::{ConeProgram, LinExpr, SolverSolution};
use serde::{Deserialize, Serialize};

use crate::beampattern::RadarReference;
use crate::channel::ChannelSet;
use crate::hermitian::{extract_rank_one, ComplexVector, HermitianMatrix};
use crate::lift::{block_to_hermitian, Frame};
use crate::penalty::{add_rank_penalty, channel_expr, run_penalty, trace_expr, OuterLog, PenaltyConfig, PenaltyProblem, EXTRACTION_MARGIN};
use crate::Error;

#[derive(Debug, Clone)]
pub struct BBInstance {
    pub channels: ChannelSet,
    pub rbar_m: f64,
    /// Linear mismatch tolerance.
    pub gamma_b: f64,
    pub radar: RadarReference,
}

pub(crate) fn check_common(channels: &ChannelSet, rbar: &[f64], gamma_b: f64, radar: &RadarReference) -> Result<(), Error> {
    if !(gamma_b > -1.0) {
        return Err(Error::Contract(format!("mismatch tolerance must exceed -1, got {gamma_b}")));
    }
    if let Some(r) = rbar.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
        return Err(Error::Contract(format!("rate requirement must be finite and nonnegative, got {r}")));
    }
    if channels.n_antennas() != radar.n_antennas() {
        return Err(Error::Contract("channel and radar reference disagree on the antenna count".into()));
    }
    let p = channels.p_max_linear;
    if (radar.p_max() - p).abs() > 1e-9 * p {
        return Err(Error::Contract("radar reference was designed for a different power budget".into()));
    }
    Ok(())
}

impl BBInstance {
    pub fn new(channels: ChannelSet, rbar_m: f64, gamma_b: f64, radar: RadarReference) -> Result<Self, Error> {
        if channels.k_pairs() != 1 {
            return Err(Error::Contract(format!("beamformer-based NOMA serves one pair, got {}", channels.k_pairs())));
        }
        check_common(&channels, &[rbar_m], gamma_b, &radar)?;
        Ok(BBInstance { channels, rbar_m, gamma_b, radar })
    }

    /// SINR threshold `2^R̄ − 1`.
    pub fn gamma_m(&self) -> f64 {
        2f64.powf(self.rbar_m) - 1.0
    }

    pub fn p_max(&self) -> f64 {
        self.channels.p_max_linear
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBRates {
    /// Multicast rate at the C-user, unicast treated as interference.
    pub r_mc: f64,
    pub r_u: f64,
    pub r_mr: f64,
    pub r_m: f64,
}

fn gain(h: &ComplexVector, w: &ComplexVector) -> f64 {
    h.dotc(w).norm_sqr()
}

pub fn rates_bb(channels: &ChannelSet, w_m: &ComplexVector, w_u: &ComplexVector) -> BBRates {
    let (hr, hc) = (&channels.h_r[0], &channels.h_c[0]);
    let r_mc = (1.0 + gain(hc, w_m) / (gain(hc, w_u) + 1.0)).log2();
    let r_u = (1.0 + gain(hc, w_u)).log2();
    let r_mr = (1.0 + gain(hr, w_m) / (gain(hr, w_u) + 1.0)).log2();
    BBRates { r_mc, r_u, r_mr, r_m: r_mc.min(r_mr) }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BBSolution {
    pub w_m_cov: HermitianMatrix,
    pub w_u_cov: HermitianMatrix,
    pub w_m: ComplexVector,
    pub w_u: ComplexVector,
    pub rates: BBRates,
    pub mismatch_ratio: f64,
    pub inner_iters: usize,
    pub outer_iters: usize,
    pub history: Vec<OuterLog>,
    /// Worst constraint violation of the last accepted subproblem.
    pub certificate: f64,
}

pub(crate) struct BbProblem<'a> {
    inst: &'a BBInstance,
    frame: Frame,
    hc: HermitianMatrix,
    hr: HermitianMatrix,
}

impl<'a> BbProblem<'a> {
    pub fn new(inst: &'a BBInstance, unit: f64) -> Self {
        let frame = Frame::new(inst.radar.n_antennas(), inst.p_max(), unit);
        let hc = frame.channel(&inst.channels.h_c[0]);
        let hr = frame.channel(&inst.channels.h_r[0]);
        BbProblem { inst, frame, hc, hr }
    }
}

impl PenaltyProblem for BbProblem<'_> {
    type State = [HermitianMatrix; 2];

    fn beams<'s>(&self, s: &'s Self::State) -> &'s [HermitianMatrix] {
        s
    }

    fn budget(&self) -> f64 {
        self.frame.budget
    }

    fn objective(&self, s: &Self::State) -> f64 {
        -self.hc.inner(&s[1])
    }

    fn build(&self, _: &Self::State) -> (ConeProgram, Vec<usize>) {
        let n = self.frame.n;
        let g = self.inst.gamma_m();
        let mut prog = ConeProgram::new();
        let xm = prog.add_psd_block(2 * n);
        let xu = prog.add_psd_block(2 * n);
        for h in [&self.hc, &self.hr] {
            prog.add_ineq(sinr_row(h, &[xm], &[xu], g));
        }
        self.inst.radar.constrain(&mut prog, &[xm, xu], self.inst.gamma_b, self.frame.unit);
        prog.add_eq(trace_expr(n, &[xm, xu]).with_constant(-self.frame.budget));
        prog.minimize(channel_expr(&self.hc, &[xu]).scaled(-1.0));
        (prog, vec![xm, xu])
    }

    fn decode(&self, _: &Self::State, sol: &SolverSolution) -> Self::State {
        [block_to_hermitian(&sol.blocks[0], 1.0), block_to_hermitian(&sol.blocks[1], 1.0)]
    }

    fn extraction_feasible(&self, s: &Self::State) -> bool {
        let w: Vec<ComplexVector> = s.iter().map(|w| principal(w, self.frame.unit)).collect();
        let rates = rates_bb(&self.inst.channels, &w[0], &w[1]);
        rates.r_m >= self.inst.rbar_m - EXTRACTION_MARGIN
            && self.inst.radar.mismatch_ratio(&covariance(&w)) <= self.inst.gamma_b + EXTRACTION_MARGIN
    }
}

/// Physical rank-one beam `√λ_max · v_max` of a normalized matrix.
pub(crate) fn principal(w: &HermitianMatrix, unit: f64) -> ComplexVector {
    let (l, v) = crate::hermitian::eigen_max(w);
    v * num_complex::Complex64::new((l.max(0.0) * unit).sqrt(), 0.0)
}

pub(crate) fn covariance(beams: &[ComplexVector]) -> HermitianMatrix {
    HermitianMatrix::sum(beams[0].len(), beams.iter().map(HermitianMatrix::outer).collect::<Vec<_>>().iter())
}

/// Convex subproblem around the physical expansion points `(W_m, W_u)`.
/// Its two PSD blocks hold `embed(W)/p_max`.
pub fn build_subproblem(inst: &BBInstance, w_m_n: &HermitianMatrix, w_u_n: &HermitianMatrix, eta: f64) -> ConeProgram {
    let p = BbProblem::new(inst, inst.p_max());
    let state = [w_m_n.scaled(1.0 / inst.p_max()), w_u_n.scaled(1.0 / inst.p_max())];
    let (mut prog, blocks) = p.build(&state);
    add_rank_penalty(&mut prog, &state, &blocks, eta, 1.0);
    prog
}

/// Equal split of the budget over identity covariances.
pub(crate) fn isotropic_start(n: usize, beams: usize, budget: f64) -> HermitianMatrix {
    HermitianMatrix::identity(n).scaled(budget / (beams * n) as f64)
}

pub(crate) fn extract(w: &HermitianMatrix, frame: &Frame, eps_outer: f64) -> Result<ComplexVector, Error> {
    let v = extract_rank_one(w, eps_outer * frame.budget)?;
    Ok(v * num_complex::Complex64::new(frame.unit.sqrt(), 0.0))
}

pub(crate) fn certificate(program: &Option<(ConeProgram, SolverSolution)>) -> f64 {
    program
        .as_ref()
        .map(|(p, s)| radcom_conic::validate_solution(p, &s.scalars, &s.blocks).worst())
        .unwrap_or(f64::INFINITY)
}

pub fn solve_bb(inst: &BBInstance, cfg: &PenaltyConfig) -> Result<BBSolution, Error> {
    solve_bb_scaled(inst, cfg, inst.p_max())
}

/// [`solve_bb`] with an explicit normalization unit for the beam matrices.
pub fn solve_bb_scaled(inst: &BBInstance, cfg: &PenaltyConfig, unit: f64) -> Result<BBSolution, Error> {
    let p = BbProblem::new(inst, unit);
    let n = p.frame.n;
    let start = isotropic_start(n, 2, p.frame.budget);
    let out = run_penalty(&p, [start.clone(), start], cfg, "bb_noma")?;
    let [wm, wu] = out.state;
    let w_m = extract(&wm, &p.frame, cfg.eps_outer)?;
    let w_u = extract(&wu, &p.frame, cfg.eps_outer)?;
    let rates = rates_bb(&inst.channels, &w_m, &w_u);
    let r = covariance(&[w_m.clone(), w_u.clone()]);
    Ok(BBSolution {
        w_m_cov: p.frame.to_physical(&wm),
        w_u_cov: p.frame.to_physical(&wu),
        mismatch_ratio: inst.radar.mismatch_ratio(&r),
        w_m,
        w_u,
        rates,
        inner_iters: out.inner_iters,
        outer_iters: out.outer_iters,
        history: out.history,
        certificate: certificate(&out.program),
    })
}

/// `(Σ_j Tr(H W_j) − γ (Σ_i Tr(H W_i) + 1)) / (1 + γ)` over signal blocks
/// `j` and interference blocks `i`; nonnegative iff the SINR is at least `γ`.
pub(crate) fn sinr_row(h: &HermitianMatrix, signal: &[usize], interference: &[usize], gamma: f64) -> LinExpr {
    channel_expr(h, signal).plus(-gamma, &channel_expr(h, interference)).with_constant(-gamma).scaled(1.0 / (1.0 + gamma))
}
