//! Benchmark schemes without superposition coding.
//!
//! * TDMA with one pair: a single beam serves the multicast message in one
//!   half of the frame and the unicast message in the other.
//! * CBF without SIC: multicast and unicast beams are superimposed and the
//!   C-user treats the multicast signal as noise.
//! * TDMA with `K` pairs: one beam per pair, shared by both half slots;
//!   every user treats the other pairs' beams as noise.

use radcom_conic::{solve_with, ConeProgram, LinExpr, SolverOptions, SolverSolution, Status};
use serde::{Deserialize, Serialize};

use crate::bb_noma::{certificate, covariance, extract, isotropic_start, principal, sinr_row, BBInstance};
use crate::beampattern::RadarReference;
use crate::cb_noma::CBInstance;
use crate::channel::ChannelSet;
use crate::hermitian::{ComplexVector, HermitianMatrix};
use crate::lift::{block_to_hermitian, Frame};
use crate::penalty::{channel_expr, run_penalty, trace_expr, OuterLog, PenaltyConfig, PenaltyProblem, EXTRACTION_MARGIN};
use crate::sca::{add_unicast, log_objective, LinkAux};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineScheme {
    Tdma,
    CbfNoSic,
    TdmaMulti,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineSolution {
    pub scheme: BaselineScheme,
    pub w: Vec<ComplexVector>,
    pub w_cov: Vec<HermitianMatrix>,
    /// Unicast rate of every pair.
    pub r_u: Vec<f64>,
    /// Multicast rate of every pair, the smaller of its two users.
    pub r_m: Vec<f64>,
    pub sum_rate: f64,
    pub mismatch_ratio: f64,
    pub inner_iters: usize,
    pub outer_iters: usize,
    pub history: Vec<OuterLog>,
    pub certificate: f64,
}

/// SINR of one user with every other listed beam treated as noise.
struct Link {
    h: ComplexVector,
    c: HermitianMatrix,
    signal: Vec<usize>,
    interference: Vec<usize>,
}

impl Link {
    fn new(h: &ComplexVector, frame: &Frame, signal: Vec<usize>, interference: Vec<usize>) -> Self {
        Link { h: h.clone(), c: frame.channel(h), signal, interference }
    }

    fn power(h: &ComplexVector, w: &[ComplexVector], idx: &[usize]) -> f64 {
        idx.iter().map(|&j| h.dotc(&w[j]).norm_sqr()).sum()
    }

    fn sinr(&self, w: &[ComplexVector]) -> f64 {
        Self::power(&self.h, w, &self.signal) / (Self::power(&self.h, w, &self.interference) + 1.0)
    }

    /// Signal and interference power at normalized beam matrices.
    fn powers(&self, w: &[HermitianMatrix]) -> (f64, f64) {
        let sum = |idx: &[usize]| idx.iter().map(|&j| self.c.inner(&w[j])).sum::<f64>();
        (sum(&self.signal), sum(&self.interference))
    }

    fn expr(&self, blocks: &[usize], idx: &[usize]) -> LinExpr {
        channel_expr(&self.c, &idx.iter().map(|&j| blocks[j]).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone)]
struct TinState {
    w: Vec<HermitianMatrix>,
    aux: Vec<LinkAux>,
}

/// A scheme in which every user treats undesired beams as noise.
struct Tin<'a> {
    scheme: BaselineScheme,
    frame: Frame,
    radar: &'a RadarReference,
    gamma_b: f64,
    n_beams: usize,
    /// Share of the frame each message occupies.
    slot: f64,
    /// Both multicast links of every pair, with the pair's requirement.
    multicast: Vec<([Link; 2], f64)>,
    unicast: Vec<Link>,
    /// Maximize the received unicast power instead of the rate; exact when
    /// the unicast links see no interference.
    linear: bool,
}

impl Tin<'_> {
    fn threshold(&self, rbar: f64) -> f64 {
        2f64.powf(rbar / self.slot) - 1.0
    }

    fn state(&self, w: Vec<HermitianMatrix>) -> TinState {
        let aux = self
            .unicast
            .iter()
            .map(|l| {
                let (s, i) = l.powers(&w);
                LinkAux::new(s, i)
            })
            .collect();
        TinState { w, aux }
    }

    /// Multicast rows, mismatch and power budget over fresh blocks.
    fn base(&self) -> (ConeProgram, Vec<usize>) {
        let n = self.frame.n;
        let mut prog = ConeProgram::new();
        let blocks: Vec<usize> = (0..self.n_beams).map(|_| prog.add_psd_block(2 * n)).collect();
        for (links, rbar) in &self.multicast {
            let g = self.threshold(*rbar);
            for l in links {
                let sig: Vec<usize> = l.signal.iter().map(|&j| blocks[j]).collect();
                let int: Vec<usize> = l.interference.iter().map(|&j| blocks[j]).collect();
                prog.add_ineq(sinr_row(&l.c, &sig, &int, g));
            }
        }
        self.radar.constrain(&mut prog, &blocks, self.gamma_b, self.frame.unit);
        prog.add_eq(trace_expr(n, &blocks).with_constant(-self.frame.budget));
        (prog, blocks)
    }

    fn linear_objective(&self, blocks: &[usize]) -> LinExpr {
        let mut obj = LinExpr::new();
        for l in &self.unicast {
            obj = obj.plus(-1.0, &l.expr(blocks, &l.signal));
        }
        obj
    }

    /// Feasible starting point: maximizes the received unicast power.
    fn initialize(&self, opts: &SolverOptions) -> Result<TinState, Error> {
        if self.linear {
            let start = isotropic_start(self.frame.n, self.n_beams, self.frame.budget);
            return Ok(self.state(vec![start; self.n_beams]));
        }
        let (mut prog, blocks) = self.base();
        prog.minimize(self.linear_objective(&blocks));
        let sol = solve_with(&prog, opts)?;
        match sol.status {
            Status::Optimal => Ok(self.state(blocks.iter().map(|&b| block_to_hermitian(&sol.blocks[b], 1.0)).collect())),
            Status::Infeasible => Err(Error::Infeasible(format!("{:?}: constraints cannot be met jointly", self.scheme))),
            status => Err(Error::Solver { status, context: format!("{:?} initialization", self.scheme) }),
        }
    }

    fn rates(&self, w: &[ComplexVector]) -> (Vec<f64>, Vec<f64>) {
        let rate = |l: &Link| self.slot * (1.0 + l.sinr(w)).log2();
        let r_u = self.unicast.iter().map(rate).collect();
        let r_m = self.multicast.iter().map(|(ls, _)| rate(&ls[0]).min(rate(&ls[1]))).collect();
        (r_u, r_m)
    }

    fn solve(&self, cfg: &PenaltyConfig) -> Result<BaselineSolution, Error> {
        cfg.validate()?;
        let init = self.initialize(&SolverOptions::with_tol(cfg.solver_tol))?;
        let label = format!("{:?}", self.scheme);
        let out = run_penalty(self, init, cfg, &label)?;
        let w = out.state.w.iter().map(|x| extract(x, &self.frame, cfg.eps_outer)).collect::<Result<Vec<_>, _>>()?;
        let (r_u, r_m) = self.rates(&w);
        Ok(BaselineSolution {
            scheme: self.scheme,
            w_cov: out.state.w.iter().map(|x| self.frame.to_physical(x)).collect(),
            mismatch_ratio: self.radar.mismatch_ratio(&covariance(&w)),
            sum_rate: r_u.iter().sum(),
            w,
            r_u,
            r_m,
            inner_iters: out.inner_iters,
            outer_iters: out.outer_iters,
            history: out.history,
            certificate: certificate(&out.program),
        })
    }
}

impl PenaltyProblem for Tin<'_> {
    type State = TinState;

    fn beams<'s>(&self, s: &'s TinState) -> &'s [HermitianMatrix] {
        &s.w
    }

    fn budget(&self) -> f64 {
        self.frame.budget
    }

    fn objective(&self, s: &TinState) -> f64 {
        self.unicast
            .iter()
            .map(|l| {
                let (sig, int) = l.powers(&s.w);
                if self.linear {
                    -sig
                } else {
                    -(1.0 + sig.max(0.0) / (int + 1.0)).log2()
                }
            })
            .sum()
    }

    fn build(&self, s: &TinState) -> (ConeProgram, Vec<usize>) {
        let (mut prog, blocks) = self.base();
        if self.linear {
            prog.minimize(self.linear_objective(&blocks));
            return (prog, blocks);
        }
        let links: Vec<_> = self
            .unicast
            .iter()
            .zip(&s.aux)
            .map(|(l, aux)| add_unicast(&mut prog, LinExpr::constant(1.0), l.expr(&blocks, &l.signal), &l.expr(&blocks, &l.interference), *aux))
            .collect();
        prog.minimize(log_objective(&links));
        (prog, blocks)
    }

    fn decode(&self, _: &TinState, sol: &SolverSolution) -> TinState {
        self.state(sol.blocks[..self.n_beams].iter().map(|b| block_to_hermitian(b, 1.0)).collect())
    }

    fn extraction_feasible(&self, s: &TinState) -> bool {
        let w: Vec<ComplexVector> = s.w.iter().map(|x| principal(x, self.frame.unit)).collect();
        let (_, r_m) = self.rates(&w);
        r_m.iter().zip(&self.multicast).all(|(r, (_, rbar))| *r >= rbar - EXTRACTION_MARGIN)
            && self.radar.mismatch_ratio(&covariance(&w)) <= self.gamma_b + EXTRACTION_MARGIN
    }
}

fn frame_for(radar: &RadarReference, channels: &ChannelSet) -> Frame {
    Frame::new(radar.n_antennas(), channels.p_max_linear, channels.p_max_linear)
}

/// One beam, multicast and unicast in separate half slots. Maximizes the
/// C-user's received power, which also maximizes its unicast rate.
pub fn solve_tdma_single(inst: &BBInstance, cfg: &PenaltyConfig) -> Result<BaselineSolution, Error> {
    let frame = frame_for(&inst.radar, &inst.channels);
    let ch = &inst.channels;
    let link = |h: &ComplexVector| Link::new(h, &frame, vec![0], vec![]);
    let tin = Tin {
        scheme: BaselineScheme::Tdma,
        radar: &inst.radar,
        gamma_b: inst.gamma_b,
        n_beams: 1,
        slot: 0.5,
        multicast: vec![([link(&ch.h_r[0]), link(&ch.h_c[0])], inst.rbar_m)],
        unicast: vec![link(&ch.h_c[0])],
        linear: true,
        frame,
    };
    tin.solve(cfg)
}

/// Superimposed multicast (beam 0) and unicast (beam 1) without SIC.
pub fn solve_cbf_no_sic(inst: &BBInstance, cfg: &PenaltyConfig) -> Result<BaselineSolution, Error> {
    let frame = frame_for(&inst.radar, &inst.channels);
    let ch = &inst.channels;
    let multicast = |h: &ComplexVector| Link::new(h, &frame, vec![0], vec![1]);
    let tin = Tin {
        scheme: BaselineScheme::CbfNoSic,
        radar: &inst.radar,
        gamma_b: inst.gamma_b,
        n_beams: 2,
        slot: 1.0,
        multicast: vec![([multicast(&ch.h_r[0]), multicast(&ch.h_c[0])], inst.rbar_m)],
        unicast: vec![Link::new(&ch.h_c[0], &frame, vec![1], vec![0])],
        linear: false,
        frame,
    };
    tin.solve(cfg)
}

/// One beam per pair shared by the multicast and unicast half slots.
pub fn solve_tdma_multi(inst: &CBInstance, cfg: &PenaltyConfig) -> Result<BaselineSolution, Error> {
    let k = inst.k_pairs();
    if k < 2 {
        return Err(Error::Contract(format!("multi-pair TDMA needs at least two pairs, got {k}")));
    }
    let frame = frame_for(&inst.radar, &inst.channels);
    let ch = &inst.channels;
    let link = |h: &ComplexVector, j: usize| Link::new(h, &frame, vec![j], (0..k).filter(|&i| i != j).collect());
    let tin = Tin {
        scheme: BaselineScheme::TdmaMulti,
        radar: &inst.radar,
        gamma_b: inst.gamma_b,
        n_beams: k,
        slot: 0.5,
        multicast: (0..k).map(|j| ([link(&ch.h_r[j], j), link(&ch.h_c[j], j)], inst.rbar[j])).collect(),
        unicast: (0..k).map(|j| link(&ch.h_c[j], j)).collect(),
        linear: false,
        frame,
    };
    tin.solve(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channels, Scenario};

    fn radar(s: &Scenario) -> RadarReference {
        RadarReference::new(s.n_antennas, &s.r_angles_deg, 10.0, 61, s.p_max_linear(), &SolverOptions::default()).unwrap()
    }

    fn bb(seed: u64, rbar: f64, gamma_b: f64) -> BBInstance {
        let s = Scenario::single(4);
        BBInstance::new(generate_channels(&s, seed).unwrap(), rbar, gamma_b, radar(&s)).unwrap()
    }

    fn check(sol: &BaselineSolution, rbar: f64, gamma_b: f64, p: f64, cfg: &PenaltyConfig) {
        let total: f64 = sol.w_cov.iter().map(|w| w.trace()).sum();
        assert!((total - p).abs() <= 1e-6 * p);
        for w in &sol.w_cov {
            assert!(crate::hermitian::rank_one_residual(w).unwrap() <= cfg.eps_outer * p);
        }
        assert!(sol.r_m.iter().all(|r| *r >= rbar - 1e-6), "{:?}", sol.r_m);
        assert!(sol.mismatch_ratio <= gamma_b + 1e-6);
        assert!(sol.certificate <= 1e-6);
    }

    #[test]
    fn tdma_is_half_of_mrt_without_requirements() {
        let inst = bb(3, 0.0, 1e6);
        let sol = solve_tdma_single(&inst, &PenaltyConfig::default()).unwrap();
        let mrt = 0.5 * (1.0 + inst.p_max() * inst.channels.h_c[0].norm_squared()).log2();
        assert!((sol.r_u[0] - mrt).abs() < 1e-3, "{} vs {mrt}", sol.r_u[0]);
    }

    #[test]
    fn tdma_ignores_slack_rate_requirements() {
        let cfg = PenaltyConfig::default();
        let low = solve_tdma_single(&bb(5, 0.1, 0.1), &cfg).unwrap();
        let high = solve_tdma_single(&bb(5, 0.3, 0.1), &cfg).unwrap();
        assert!(low.r_m[0] > 0.3);
        assert!((low.sum_rate - high.sum_rate).abs() < 1e-4);
        check(&high, 0.3, 0.1, bb(5, 0.3, 0.1).p_max(), &cfg);
    }

    #[test]
    fn cbf_meets_invariants() {
        let cfg = PenaltyConfig::default();
        let inst = bb(7, 0.5, 0.1);
        let sol = solve_cbf_no_sic(&inst, &cfg).unwrap();
        check(&sol, 0.5, 0.1, inst.p_max(), &cfg);
        assert_eq!(sol.scheme, BaselineScheme::CbfNoSic);
        assert_eq!(solve_cbf_no_sic(&inst, &cfg).unwrap().sum_rate, sol.sum_rate);
    }

    #[test]
    fn tdma_multi_meets_invariants() {
        let cfg = PenaltyConfig::default();
        let s = Scenario::with_pairs(6, 3);
        let inst = CBInstance::uniform(generate_channels(&s, 2).unwrap(), 0.5, 0.1, radar(&s)).unwrap();
        let sol = solve_tdma_multi(&inst, &cfg).unwrap();
        check(&sol, 0.5, 0.1, inst.p_max(), &cfg);
        assert_eq!(sol.r_u.len(), 3);
    }

    #[test]
    fn tdma_multi_rejects_one_pair() {
        let s = Scenario::single(4);
        let inst = CBInstance::uniform(generate_channels(&s, 2).unwrap(), 0.5, 0.1, radar(&s)).unwrap();
        assert!(matches!(solve_tdma_multi(&inst, &PenaltyConfig::default()), Err(Error::Contract(_))));
    }

    #[test]
    fn high_rate_is_infeasible_for_every_baseline() {
        let cfg = PenaltyConfig::default();
        let inst = bb(1, 20.0, 0.1);
        assert!(matches!(solve_tdma_single(&inst, &cfg), Err(Error::Infeasible(_))));
        assert!(matches!(solve_cbf_no_sic(&inst, &cfg), Err(Error::Infeasible(_))));
    }
}
