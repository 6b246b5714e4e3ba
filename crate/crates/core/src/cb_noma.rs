//! Cluster-based NOMA for `K` radar/communication user pairs.
//!
//! Pair `k` gets a single beam `w_k` carrying the superposition
//! `√α_{m,k} s_m + √α_{u,k} s_u`. Both users of a pair decode the multicast
//! stream first; the C-user then cancels it and decodes its unicast stream.
//! Beams and power splits are optimized jointly to maximize the sum of the
//! unicast rates.

use radcom_conic::{solve_with, Bounds, ConeProgram, LinExpr, SolverOptions, SolverSolution, Status};
use serde::{Deserialize, Serialize};

use crate::bb_noma::{certificate, check_common, covariance, extract, principal};
use crate::beampattern::RadarReference;
use crate::channel::ChannelSet;
use crate::hermitian::{ComplexVector, HermitianMatrix};
use crate::lift::{block_to_hermitian, Frame};
use crate::penalty::{add_rank_penalty, channel_expr, run_penalty, trace_expr, OuterLog, PenaltyConfig, PenaltyProblem, EXTRACTION_MARGIN};
use crate::sca::{add_interference_bound, add_unicast, interference_aux, log_objective, LinkAux, UnicastVars};
use crate::Error;

#[derive(Debug, Clone)]
pub struct CBInstance {
    pub channels: ChannelSet,
    /// Multicast rate requirement of every pair.
    pub rbar: Vec<f64>,
    pub gamma_b: f64,
    pub radar: RadarReference,
}

impl CBInstance {
    pub fn new(channels: ChannelSet, rbar: Vec<f64>, gamma_b: f64, radar: RadarReference) -> Result<Self, Error> {
        if rbar.len() != channels.k_pairs() {
            return Err(Error::Contract(format!("{} rate requirements for {} pairs", rbar.len(), channels.k_pairs())));
        }
        check_common(&channels, &rbar, gamma_b, &radar)?;
        Ok(CBInstance { channels, rbar, gamma_b, radar })
    }

    /// Same requirement for every pair.
    pub fn uniform(channels: ChannelSet, rbar: f64, gamma_b: f64, radar: RadarReference) -> Result<Self, Error> {
        let k = channels.k_pairs();
        Self::new(channels, vec![rbar; k], gamma_b, radar)
    }

    pub fn k_pairs(&self) -> usize {
        self.channels.k_pairs()
    }

    pub fn gamma_m(&self, k: usize) -> f64 {
        2f64.powf(self.rbar[k]) - 1.0
    }

    pub fn p_max(&self) -> f64 {
        self.channels.p_max_linear
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRates {
    pub r_mc: f64,
    pub r_mr: f64,
    pub r_m: f64,
    pub r_u: f64,
}

fn gain(h: &ComplexVector, w: &ComplexVector) -> f64 {
    h.dotc(w).norm_sqr()
}

fn others(h: &ComplexVector, w: &[ComplexVector], k: usize) -> f64 {
    w.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, wi)| gain(h, wi)).sum()
}

pub fn rates_cb(channels: &ChannelSet, w: &[ComplexVector], alpha_m: &[f64], alpha_u: &[f64]) -> Vec<PairRates> {
    (0..w.len())
        .map(|k| {
            let (hr, hc) = (&channels.h_r[k], &channels.h_c[k]);
            let (gc, gr) = (gain(hc, &w[k]), gain(hr, &w[k]));
            let (ic, ir) = (others(hc, w, k), others(hr, w, k));
            let r_mc = (1.0 + alpha_m[k] * gc / (alpha_u[k] * gc + ic + 1.0)).log2();
            let r_mr = (1.0 + alpha_m[k] * gr / (alpha_u[k] * gr + ir + 1.0)).log2();
            let r_u = (1.0 + alpha_u[k] * gc / (ic + 1.0)).log2();
            PairRates { r_mc, r_mr, r_m: r_mc.min(r_mr), r_u }
        })
        .collect()
}

/// Iterate of the cluster-based solver. Beam matrices are normalized by
/// the power budget; the auxiliaries are dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CBState {
    pub w: Vec<HermitianMatrix>,
    pub alpha_m: Vec<f64>,
    pub alpha_u: Vec<f64>,
    pub varpi: Vec<f64>,
    pub a_r: Vec<f64>,
    pub a_c: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Auxiliaries {
    pub varpi: Vec<f64>,
    pub a_r: Vec<f64>,
    pub a_c: Vec<f64>,
    pub b: Vec<f64>,
}

/// Channel matrices `H_{l,k}` in the units of the beam matrices.
struct PairChannels {
    hr: Vec<HermitianMatrix>,
    hc: Vec<HermitianMatrix>,
}

impl PairChannels {
    fn new(channels: &ChannelSet, frame: &Frame) -> Self {
        PairChannels {
            hr: channels.h_r.iter().map(|h| frame.channel(h)).collect(),
            hc: channels.h_c.iter().map(|h| frame.channel(h)).collect(),
        }
    }

    fn interference(h: &HermitianMatrix, w: &[HermitianMatrix], k: usize) -> f64 {
        w.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, wi)| h.inner(wi)).sum()
    }

    fn aux(&self, w: &[HermitianMatrix], alpha_u: &[f64]) -> Auxiliaries {
        let k = w.len();
        let mut aux = Auxiliaries { varpi: vec![0.0; k], a_r: vec![0.0; k], a_c: vec![0.0; k], b: vec![0.0; k] };
        for j in 0..k {
            let ic = Self::interference(&self.hc[j], w, j);
            let link = LinkAux::new(alpha_u[j] * self.hc[j].inner(&w[j]), ic);
            aux.varpi[j] = link.varpi;
            aux.b[j] = link.b;
            aux.a_c[j] = interference_aux(ic);
            aux.a_r[j] = interference_aux(Self::interference(&self.hr[j], w, j));
        }
        aux
    }
}

/// Auxiliary values at a physical state: `ϖ` is the unicast SINR,
/// `A_l = √(I_l + 1)` and `B = √(α_u Tr(H_c W))`, with `ϖ` and `B` floored
/// at [`crate::sca::EPS_AUX`].
pub fn auxiliary_from_state(w: &[HermitianMatrix], alpha_u: &[f64], channels: &ChannelSet) -> Auxiliaries {
    PairChannels::new(channels, &Frame::new(w[0].dim(), 1.0, 1.0)).aux(w, alpha_u)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CBSolution {
    pub w: Vec<ComplexVector>,
    pub w_cov: Vec<HermitianMatrix>,
    pub alpha_m: Vec<f64>,
    pub alpha_u: Vec<f64>,
    pub rates: Vec<PairRates>,
    pub sum_rate: f64,
    /// Unicast SINR of each pair at the final beam matrices.
    pub varpi: Vec<f64>,
    /// `Σ_k log₂(1 + ϖ_k)`.
    pub aux_sum_rate: f64,
    pub mismatch_ratio: f64,
    pub inner_iters: usize,
    pub outer_iters: usize,
    pub history: Vec<OuterLog>,
    pub certificate: f64,
}

pub(crate) struct CbProblem<'a> {
    inst: &'a CBInstance,
    frame: Frame,
    ch: PairChannels,
}

/// Variable indices of one subproblem.
#[cfg_attr(not(test), allow(dead_code))]
struct Layout {
    blocks: Vec<usize>,
    alpha_u: Vec<usize>,
    a_r: Vec<usize>,
    a_c: Vec<usize>,
    links: Vec<UnicastVars>,
}

impl<'a> CbProblem<'a> {
    fn new(inst: &'a CBInstance) -> Self {
        let frame = Frame::new(inst.radar.n_antennas(), inst.p_max(), inst.p_max());
        CbProblem { inst, ch: PairChannels::new(&inst.channels, &frame), frame }
    }

    fn interference_expr(blocks: &[usize], h: &HermitianMatrix, k: usize) -> LinExpr {
        let others: Vec<usize> = blocks.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, &b)| b).collect();
        channel_expr(h, &others)
    }

    fn build_with_layout(&self, s: &CBState) -> (ConeProgram, Layout) {
        let (n, kk) = (self.frame.n, self.inst.k_pairs());
        let mut prog = ConeProgram::new();
        let blocks: Vec<usize> = (0..kk).map(|_| prog.add_psd_block(2 * n)).collect();
        let alpha_u: Vec<usize> = (0..kk).map(|_| prog.add_scalar(Bounds::range(0.0, 1.0))).collect();
        let (mut links, mut a_r, mut a_c) = (Vec::with_capacity(kk), Vec::with_capacity(kk), Vec::with_capacity(kk));
        for k in 0..kk {
            let g = self.inst.gamma_m(k);
            // α_m − γ α_u with α_m = 1 − α_u.
            let split = LinExpr::constant(1.0).with_scalar(alpha_u[k], -(1.0 + g));
            for (h, a_n, out) in [(&self.ch.hr[k], s.a_r[k], &mut a_r), (&self.ch.hc[k], s.a_c[k], &mut a_c)] {
                let interference = Self::interference_expr(&blocks, h, k);
                let a = add_interference_bound(&mut prog, &interference, a_n);
                prog.add_rsoc(split.clone(), channel_expr(h, &[blocks[k]]), vec![LinExpr::new().with_scalar(a, g.sqrt())]);
                out.push(a);
            }
            let ic = Self::interference_expr(&blocks, &self.ch.hc[k], k);
            let aux = LinkAux { varpi: s.varpi[k], b: s.b[k] };
            links.push(add_unicast(&mut prog, LinExpr::var(alpha_u[k]), channel_expr(&self.ch.hc[k], &[blocks[k]]), &ic, aux));
        }
        self.inst.radar.constrain(&mut prog, &blocks, self.inst.gamma_b, self.frame.unit);
        prog.add_eq(trace_expr(n, &blocks).with_constant(-self.frame.budget));
        prog.minimize(log_objective(&links));
        (prog, Layout { blocks, alpha_u, a_r, a_c, links })
    }

    fn state(&self, w: Vec<HermitianMatrix>, alpha_u: Vec<f64>) -> CBState {
        let aux = self.ch.aux(&w, &alpha_u);
        CBState {
            alpha_m: alpha_u.iter().map(|a| 1.0 - a).collect(),
            alpha_u,
            w,
            varpi: aux.varpi,
            a_r: aux.a_r,
            a_c: aux.a_c,
            b: aux.b,
        }
    }

    fn sum_rate(&self, s: &CBState) -> f64 {
        (0..s.w.len())
            .map(|k| {
                let ic = PairChannels::interference(&self.ch.hc[k], &s.w, k);
                (1.0 + s.alpha_u[k] * self.ch.hc[k].inner(&s.w[k]).max(0.0) / (ic + 1.0)).log2()
            })
            .sum()
    }
}

impl PenaltyProblem for CbProblem<'_> {
    type State = CBState;

    fn beams<'s>(&self, s: &'s CBState) -> &'s [HermitianMatrix] {
        &s.w
    }

    fn budget(&self) -> f64 {
        self.frame.budget
    }

    fn objective(&self, s: &CBState) -> f64 {
        -self.sum_rate(s)
    }

    fn build(&self, s: &CBState) -> (ConeProgram, Vec<usize>) {
        let (prog, layout) = self.build_with_layout(s);
        (prog, layout.blocks)
    }

    fn decode(&self, _: &CBState, sol: &SolverSolution) -> CBState {
        let kk = self.inst.k_pairs();
        let w = (0..kk).map(|k| block_to_hermitian(&sol.blocks[k], 1.0)).collect();
        // The split scalars are the first K scalars of every subproblem.
        let alpha_u = (0..kk).map(|k| sol.scalars[k].clamp(0.0, 1.0)).collect();
        self.state(w, alpha_u)
    }

    fn extraction_feasible(&self, s: &CBState) -> bool {
        let w: Vec<ComplexVector> = s.w.iter().map(|w| principal(w, self.frame.unit)).collect();
        let rates = rates_cb(&self.inst.channels, &w, &s.alpha_m, &s.alpha_u);
        rates.iter().zip(&self.inst.rbar).all(|(r, rbar)| r.r_m >= rbar - EXTRACTION_MARGIN)
            && self.inst.radar.mismatch_ratio(&covariance(&w)) <= self.inst.gamma_b + EXTRACTION_MARGIN
    }
}

/// SCA subproblem around a physical state, with the rank-one penalty at
/// weight `1/eta`. PSD blocks hold `embed(W_k)/p_max`.
pub fn build_subproblem(inst: &CBInstance, state: &CBState, eta: f64) -> ConeProgram {
    let p = CbProblem::new(inst);
    let normalized = CBState { w: state.w.iter().map(|w| w.scaled(1.0 / inst.p_max())).collect(), ..state.clone() };
    let (mut prog, blocks) = p.build(&normalized);
    add_rank_penalty(&mut prog, &normalized.w, &blocks, eta, 1.0);
    prog
}

/// Max-min multicast slack with every split fixed: maximizes `s` subject to
/// `((α_m − γ α_u) Tr(H_{l,k} W_k) − γ (I_{l,k} + 1)) / (1 + γ) ≥ s`, the mismatch
/// budget and the power budget. Returns the beams and the optimal slack.
fn slack_program(p: &CbProblem, alpha_u: f64, opts: &SolverOptions) -> Result<Option<(Vec<HermitianMatrix>, f64)>, Error> {
    let (n, kk) = (p.frame.n, p.inst.k_pairs());
    let mut prog = ConeProgram::new();
    let blocks: Vec<usize> = (0..kk).map(|_| prog.add_psd_block(2 * n)).collect();
    let s = prog.add_scalar(Bounds::FREE);
    for k in 0..kk {
        let g = p.inst.gamma_m(k);
        let split = (1.0 - alpha_u) - g * alpha_u;
        for h in [&p.ch.hr[k], &p.ch.hc[k]] {
            let row = channel_expr(h, &[blocks[k]])
                .scaled(split)
                .plus(-g, &CbProblem::interference_expr(&blocks, h, k))
                .with_constant(-g)
                .scaled(1.0 / (1.0 + g))
                .with_scalar(s, -1.0);
            prog.add_ineq(row);
        }
    }
    p.inst.radar.constrain(&mut prog, &blocks, p.inst.gamma_b, p.frame.unit);
    prog.add_eq(trace_expr(n, &blocks).with_constant(-p.frame.budget));
    prog.minimize(LinExpr::var(s).scaled(-1.0));
    let sol = solve_with(&prog, opts)?;
    match sol.status {
        Status::Optimal => Ok(Some((blocks.iter().map(|&b| block_to_hermitian(&sol.blocks[b], 1.0)).collect(), sol.scalars[s]))),
        Status::Infeasible => Ok(None),
        status => Err(Error::Solver { status, context: "cb_noma initialization".into() }),
    }
}

fn initial_state(p: &CbProblem, opts: &SolverOptions) -> Result<CBState, Error> {
    let tol = 1e-9;
    match slack_program(p, 0.5, opts)? {
        Some((w, s)) if s >= -tol => return Ok(p.state(w, vec![0.5; p.inst.k_pairs()])),
        None => return Err(Error::Infeasible("cb_noma: mismatch and power budgets are incompatible".into())),
        Some(_) => {}
    }
    // The multicast constraints are loosest with all power on the multicast
    // stream. If that split has positive slack, back the unicast share off
    // from zero to half of what keeps every pair feasible.
    let Some((w, s)) = slack_program(p, 0.0, opts)? else {
        return Err(Error::Infeasible("cb_noma: mismatch and power budgets are incompatible".into()));
    };
    if s <= tol {
        return Err(Error::Infeasible("cb_noma: multicast requirements cannot be met".into()));
    }
    let alpha_u = (0..p.inst.k_pairs())
        .map(|k| {
            let g = p.inst.gamma_m(k);
            let limit = [&p.ch.hr[k], &p.ch.hc[k]]
                .iter()
                .map(|h| {
                    let signal = h.inner(&w[k]);
                    let need = g * (PairChannels::interference(h, &w, k) + 1.0);
                    (1.0 - need / signal) / (1.0 + g)
                })
                .fold(1.0, f64::min);
            (0.5 * limit).clamp(0.0, 0.5)
        })
        .collect();
    Ok(p.state(w, alpha_u))
}

/// A feasible starting point, normalized by the power budget.
pub fn initialize_feasible(inst: &CBInstance, cfg: &PenaltyConfig) -> Result<CBState, Error> {
    cfg.validate()?;
    initial_state(&CbProblem::new(inst), &SolverOptions::with_tol(cfg.solver_tol))
}

pub fn solve_cb(inst: &CBInstance, cfg: &PenaltyConfig) -> Result<CBSolution, Error> {
    cfg.validate()?;
    let p = CbProblem::new(inst);
    let init = initial_state(&p, &SolverOptions::with_tol(cfg.solver_tol))?;
    let out = run_penalty(&p, init, cfg, "cb_noma")?;
    let s = out.state;
    let w = s.w.iter().map(|w| extract(w, &p.frame, cfg.eps_outer)).collect::<Result<Vec<_>, _>>()?;
    let rates = rates_cb(&inst.channels, &w, &s.alpha_m, &s.alpha_u);
    let aux_sum_rate = s.varpi.iter().map(|v| (1.0 + v).log2()).sum();
    Ok(CBSolution {
        mismatch_ratio: inst.radar.mismatch_ratio(&covariance(&w)),
        sum_rate: rates.iter().map(|r| r.r_u).sum(),
        w_cov: s.w.iter().map(|x| p.frame.to_physical(x)).collect(),
        alpha_m: s.alpha_m,
        alpha_u: s.alpha_u,
        varpi: s.varpi,
        w,
        rates,
        aux_sum_rate,
        inner_iters: out.inner_iters,
        outer_iters: out.outer_iters,
        history: out.history,
        certificate: certificate(&out.program),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channels, Scenario};
    use nalgebra::DVector;
    use num_complex::Complex64;

    fn cv(v: &[(f64, f64)]) -> ComplexVector {
        DVector::from_iterator(v.len(), v.iter().map(|&(a, b)| Complex64::new(a, b)))
    }

    fn instance(k: usize, n: usize, seed: u64, rbar: f64, gamma_b: f64) -> CBInstance {
        let s = Scenario::with_pairs(n, k);
        let ch = generate_channels(&s, seed).unwrap();
        let radar = RadarReference::new(n, &s.r_angles_deg, 10.0, 61, s.p_max_linear(), &SolverOptions::default()).unwrap();
        CBInstance::uniform(ch, rbar, gamma_b, radar).unwrap()
    }

    #[test]
    fn single_pair_rate_examples() {
        let ch = ChannelSet { h_r: vec![cv(&[(1.0, 0.0), (0.0, 0.0)])], h_c: vec![cv(&[(0.5, 0.5), (1.0, 0.0)])], p_max_linear: 1.0 };
        let w = vec![cv(&[(1.0, 0.0), (2.0, -1.0)])];
        let g = ch.h_c[0].dotc(&w[0]).norm_sqr();
        let r = rates_cb(&ch, &w, &[0.0], &[1.0]);
        assert_eq!(r[0].r_mc, 0.0);
        assert!((r[0].r_u - (1.0 + g).log2()).abs() < 1e-12);
        let r = rates_cb(&ch, &w, &[1.0], &[0.0]);
        assert_eq!(r[0].r_u, 0.0);
    }

    #[test]
    fn three_pair_rates_match_scalar_evaluation() {
        let ch = ChannelSet {
            h_r: vec![cv(&[(1.0, 0.0), (0.2, 0.1)]), cv(&[(0.3, -0.4), (1.0, 0.0)]), cv(&[(0.0, 1.0), (0.5, 0.5)])],
            h_c: vec![cv(&[(0.7, 0.1), (-0.2, 0.3)]), cv(&[(0.1, 0.9), (0.4, 0.0)]), cv(&[(-0.6, 0.2), (0.3, -0.8)])],
            p_max_linear: 1.0,
        };
        let w = vec![cv(&[(1.0, 0.5), (0.0, 1.0)]), cv(&[(0.3, 0.0), (1.2, -0.4)]), cv(&[(-0.7, 0.7), (0.2, 0.2)])];
        let am = [0.3, 0.6, 0.9];
        let au: Vec<f64> = am.iter().map(|a| 1.0 - a).collect();
        let r = rates_cb(&ch, &w, &am, &au);
        // Scalar evaluation with explicit sums.
        let inner = |h: &ComplexVector, x: &ComplexVector| {
            let mut re = 0.0;
            let mut im = 0.0;
            for i in 0..2 {
                re += h[i].re * x[i].re + h[i].im * x[i].im;
                im += h[i].re * x[i].im - h[i].im * x[i].re;
            }
            re * re + im * im
        };
        for k in 0..3 {
            let mut ic = 0.0;
            let mut ir = 0.0;
            for i in 0..3 {
                if i != k {
                    ic += inner(&ch.h_c[k], &w[i]);
                    ir += inner(&ch.h_r[k], &w[i]);
                }
            }
            let gc = inner(&ch.h_c[k], &w[k]);
            let gr = inner(&ch.h_r[k], &w[k]);
            let rmc = (1.0 + am[k] * gc / (au[k] * gc + ic + 1.0)).log2();
            let rmr = (1.0 + am[k] * gr / (au[k] * gr + ir + 1.0)).log2();
            assert!((r[k].r_mc - rmc).abs() < 1e-12 && (r[k].r_mr - rmr).abs() < 1e-12);
            assert!((r[k].r_u - (1.0 + au[k] * gc / (ic + 1.0)).log2()).abs() < 1e-12);
            assert_eq!(r[k].r_m, rmc.min(rmr));
        }
    }

    #[test]
    fn auxiliary_examples() {
        let h = cv(&[(1.0, 0.0), (0.5, -0.5)]);
        let ch = ChannelSet { h_r: vec![h.clone()], h_c: vec![h.clone()], p_max_linear: 1.0 };
        let w = vec![HermitianMatrix::from_real_diagonal(&[2.0, 1.0])];
        let t = ch.h_c[0].dotc(&(w[0].matrix() * &ch.h_c[0])).re;
        let aux = auxiliary_from_state(&w, &[1.0], &ch);
        assert!((aux.varpi[0] - t).abs() < 1e-12);
        assert_eq!(aux.a_c[0], 1.0);
        assert!((aux.b[0] - t.sqrt()).abs() < 1e-12);
        let aux = auxiliary_from_state(&w, &[0.0], &ch);
        assert_eq!((aux.varpi[0], aux.b[0]), (crate::sca::EPS_AUX, crate::sca::EPS_AUX));
    }

    #[test]
    fn state_is_feasible_for_its_own_subproblem() {
        let inst = instance(3, 6, 4, 0.5, 0.1);
        let cfg = PenaltyConfig::default();
        let st = initialize_feasible(&inst, &cfg).unwrap();
        let p = CbProblem::new(&inst);
        let (prog, layout) = p.build_with_layout(&st);
        // Expansion point: W, α and the auxiliaries, with q at its tight value.
        let mut scalars = vec![0.0; prog.n_scalars()];
        for k in 0..3 {
            scalars[layout.alpha_u[k]] = st.alpha_u[k];
            let l = layout.links[k];
            scalars[l.varpi] = st.varpi[k];
            scalars[l.b] = st.b[k];
            scalars[l.q] = 1.0;
            scalars[layout.a_r[k]] = st.a_r[k];
            scalars[layout.a_c[k]] = st.a_c[k];
        }
        let blocks: Vec<_> = st.w.iter().map(|w| crate::lift::hermitian_to_block(w, 1.0)).collect();
        let rep = radcom_conic::validate_solution(&prog, &scalars, &blocks);
        assert!(rep.worst() <= 1e-7, "{rep:?}");
    }

    #[test]
    fn high_rate_is_infeasible() {
        let inst = instance(1, 4, 1, 20.0, 0.1);
        assert!(matches!(solve_cb(&inst, &PenaltyConfig::default()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn three_pairs_meet_invariants() {
        let inst = instance(3, 6, 9, 0.5, 0.1);
        let cfg = PenaltyConfig::default();
        let sol = solve_cb(&inst, &cfg).unwrap();
        let again = solve_cb(&inst, &cfg).unwrap();
        assert_eq!(sol.sum_rate, again.sum_rate);
        let p = inst.p_max();
        let total: f64 = sol.w_cov.iter().map(|w| w.trace()).sum();
        assert!((total - p).abs() <= 1e-6 * p);
        for (r, w) in sol.rates.iter().zip(&sol.w_cov) {
            assert!(r.r_m >= 0.5 - 1e-6, "{r:?}");
            assert!(crate::hermitian::rank_one_residual(w).unwrap() <= cfg.eps_outer * p);
        }
        for (m, u) in sol.alpha_m.iter().zip(&sol.alpha_u) {
            assert!((m + u - 1.0).abs() < 1e-12 && *m >= 0.0 && *u >= 0.0);
        }
        assert!(sol.mismatch_ratio <= 0.1 + 1e-6);
        assert!((sol.aux_sum_rate - sol.sum_rate).abs() <= 1e-4, "{} vs {}", sol.aux_sum_rate, sol.sum_rate);
    }
}
