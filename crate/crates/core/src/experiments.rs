//! Monte Carlo sweeps over the scenario parameters and CSV output.
//!
//! Every trial index maps to one channel seed, shared by all schemes and
//! sweep values, so differences between schemes are paired. Trials run in
//! parallel but records come back in a fixed order, which makes the output
//! independent of the thread count.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{solve_cbf_no_sic, solve_tdma_multi, solve_tdma_single};
use crate::bb_noma::{solve_bb, BBInstance};
use crate::beampattern::{AngularGrid, RadarReference};
use crate::cb_noma::{solve_cb, CBInstance};
use crate::channel::{db_to_linear, default_angles, generate_channels, trial_seed, ChannelSet, Scenario};
use crate::{Error, PenaltyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    BbNoma,
    CbNoma,
    Tdma,
    CbfNoSic,
    TdmaMulti,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::BbNoma, Scheme::CbNoma, Scheme::Tdma, Scheme::CbfNoSic, Scheme::TdmaMulti];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::BbNoma => "bb_noma",
            Scheme::CbNoma => "cb_noma",
            Scheme::Tdma => "tdma",
            Scheme::CbfNoSic => "cbf_no_sic",
            Scheme::TdmaMulti => "tdma_multi",
        }
    }

    /// Whether the scheme is defined for `k` pairs.
    pub fn supports(self, k: usize) -> bool {
        match self {
            Scheme::BbNoma | Scheme::Tdma | Scheme::CbfNoSic => k == 1,
            Scheme::CbNoma => k >= 1,
            Scheme::TdmaMulti => k >= 2,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    GammaBDb,
    RbarM,
    GammaPDb,
    KPairs,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::GammaBDb => "gamma_b_db",
            SweepParam::RbarM => "rbar_m",
            SweepParam::GammaPDb => "gamma_p_db",
            SweepParam::KPairs => "k_pairs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_n")]
    pub n_antennas: usize,
    #[serde(default = "default_k")]
    pub k_pairs: usize,
    /// Defaults to the standard angle set for `k_pairs` when omitted.
    #[serde(default)]
    pub r_angles_deg: Option<Vec<f64>>,
    #[serde(default = "default_d_r")]
    pub d_r_m: f64,
    #[serde(default = "default_d_c")]
    pub d_c_m: f64,
    #[serde(default = "default_l0")]
    pub l0_db: f64,
    #[serde(default = "default_gamma_p")]
    pub gamma_p_db: f64,
    #[serde(default = "default_rbar")]
    pub rbar_m: f64,
    #[serde(default = "default_gamma_b")]
    pub gamma_b_db: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_n() -> usize {
    4
}
fn default_k() -> usize {
    1
}
fn default_d_r() -> f64 {
    1000.0
}
fn default_d_c() -> f64 {
    100.0
}
fn default_l0() -> f64 {
    40.0
}
fn default_gamma_p() -> f64 {
    110.0
}
fn default_rbar() -> f64 {
    0.5
}
fn default_gamma_b() -> f64 {
    -10.0
}
fn default_trials() -> usize {
    200
}
fn default_grid() -> usize {
    181
}
fn default_width() -> f64 {
    10.0
}
fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::BbNoma]
}
fn default_rates_csv() -> String {
    "rates.csv".into()
}
fn default_pattern_csv() -> String {
    "pattern.csv".into()
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ScenarioConfig {
    pub fn scenario(&self) -> Scenario {
        Scenario {
            n_antennas: self.n_antennas,
            k_pairs: self.k_pairs,
            r_angles_deg: self.r_angles_deg.clone().unwrap_or_else(|| default_angles(self.k_pairs)),
            d_r_m: self.d_r_m,
            d_c_m: self.d_c_m,
            l0_db: self.l0_db,
            gamma_p_db: self.gamma_p_db,
            rbar_m: self.rbar_m,
            gamma_b_db: self.gamma_b_db,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    /// A single point at the scenario's mismatch tolerance when omitted.
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default = "default_width")]
    pub beam_width_deg: f64,
    /// Measure wall time per trial. Off by default since timings make the
    /// output differ between runs.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default = "default_rates_csv")]
    pub rates_csv: String,
    #[serde(default = "default_pattern_csv")]
    pub pattern_csv: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    /// Parses and validates a JSON config. Syntax and type errors carry
    /// the line and column reported by the parser.
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    /// `(parameter, values)` of the sweep.
    pub fn points(&self) -> (SweepParam, Vec<f64>) {
        match &self.sweep {
            Some(s) => (s.param, s.values.clone()),
            None => (SweepParam::GammaBDb, vec![self.scenario.gamma_b_db]),
        }
    }

    /// The scenario at one sweep value.
    pub fn scenario_at(&self, param: SweepParam, value: f64) -> Scenario {
        let mut base = self.scenario.clone();
        match param {
            SweepParam::GammaBDb => base.gamma_b_db = value,
            SweepParam::RbarM => base.rbar_m = value,
            SweepParam::GammaPDb => base.gamma_p_db = value,
            SweepParam::KPairs => {
                base.k_pairs = value as usize;
                base.r_angles_deg = None;
            }
        }
        base.scenario()
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if self.schemes.is_empty() {
            return bad("schemes must not be empty".into());
        }
        if self.grid_points < 3 || self.grid_points % 2 == 0 {
            return bad(format!("grid_points must be odd and at least 3, got {}", self.grid_points));
        }
        if !(self.beam_width_deg >= 0.0 && self.beam_width_deg < 180.0) {
            return bad(format!("beam_width_deg must be in [0, 180), got {}", self.beam_width_deg));
        }
        self.penalty.validate().map_err(|e| Error::Config(format!("penalty: {e}")))?;
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad("sweep.values must not be empty".into());
            }
            if let Some(v) = s.values.iter().find(|v| !v.is_finite()) {
                return bad(format!("sweep value {v} is not finite"));
            }
            if s.param == SweepParam::KPairs {
                if let Some(v) = s.values.iter().find(|v| !(v.fract() == 0.0 && **v >= 1.0)) {
                    return bad(format!("k_pairs sweep value {v} is not a positive integer"));
                }
                if self.scenario.r_angles_deg.is_some() {
                    return bad("r_angles_deg cannot be fixed while sweeping k_pairs".into());
                }
            }
        }
        let (param, values) = self.points();
        for v in values {
            let s = self.scenario_at(param, v);
            s.validate().map_err(|e| Error::Config(format!("scenario at {}={v}: {e}", param.as_str())))?;
            if let Some(x) = self.schemes.iter().find(|x| !x.supports(s.k_pairs)) {
                return bad(format!("scheme {x} does not support k_pairs = {}", s.k_pairs));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Infeasible,
    Maxiter,
    /// The conic solver failed on a subproblem.
    Failed,
}

impl TrialStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialStatus::Ok => "ok",
            TrialStatus::Infeasible => "infeasible",
            TrialStatus::Maxiter => "maxiter",
            TrialStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep_param: SweepParam,
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    /// Per-pair rates, empty unless the status is `ok`.
    pub r_u: Vec<f64>,
    pub r_m: Vec<f64>,
    pub mismatch_ratio: Option<f64>,
    pub inner_iters: usize,
    pub outer_iters: usize,
    pub wall_ms: f64,
}

impl TrialRecord {
    pub fn r_u_sum(&self) -> Option<f64> {
        self.ok().then(|| self.r_u.iter().sum())
    }

    pub fn r_m_min(&self) -> Option<f64> {
        self.ok().then(|| self.r_m.iter().copied().fold(f64::INFINITY, f64::min))
    }

    pub fn ok(&self) -> bool {
        self.status == TrialStatus::Ok
    }
}

/// Result of one successful solve, reduced to what the tables need.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub r_u: Vec<f64>,
    pub r_m: Vec<f64>,
    pub mismatch_ratio: f64,
    pub inner_iters: usize,
    pub outer_iters: usize,
    /// Transmit covariance `Σ_j w_j w_jᴴ`.
    pub covariance: crate::hermitian::HermitianMatrix,
}

/// Runs one scheme on one channel draw.
pub fn solve_scheme(scheme: Scheme, channels: ChannelSet, scenario: &Scenario, radar: &RadarReference, cfg: &PenaltyConfig) -> Result<SchemeOutcome, Error> {
    let gamma_b = db_to_linear(scenario.gamma_b_db);
    let cov = |w: &[crate::hermitian::ComplexVector]| crate::bb_noma::covariance(w);
    match scheme {
        Scheme::BbNoma => {
            let sol = solve_bb(&BBInstance::new(channels, scenario.rbar_m, gamma_b, radar.clone())?, cfg)?;
            Ok(SchemeOutcome {
                r_u: vec![sol.rates.r_u],
                r_m: vec![sol.rates.r_m],
                mismatch_ratio: sol.mismatch_ratio,
                inner_iters: sol.inner_iters,
                outer_iters: sol.outer_iters,
                covariance: cov(&[sol.w_m, sol.w_u]),
            })
        }
        Scheme::CbNoma => {
            let sol = solve_cb(&CBInstance::uniform(channels, scenario.rbar_m, gamma_b, radar.clone())?, cfg)?;
            Ok(SchemeOutcome {
                r_u: sol.rates.iter().map(|r| r.r_u).collect(),
                r_m: sol.rates.iter().map(|r| r.r_m).collect(),
                mismatch_ratio: sol.mismatch_ratio,
                inner_iters: sol.inner_iters,
                outer_iters: sol.outer_iters,
                covariance: cov(&sol.w),
            })
        }
        Scheme::Tdma | Scheme::CbfNoSic | Scheme::TdmaMulti => {
            let sol = match scheme {
                Scheme::Tdma => solve_tdma_single(&BBInstance::new(channels, scenario.rbar_m, gamma_b, radar.clone())?, cfg)?,
                Scheme::CbfNoSic => solve_cbf_no_sic(&BBInstance::new(channels, scenario.rbar_m, gamma_b, radar.clone())?, cfg)?,
                _ => solve_tdma_multi(&CBInstance::uniform(channels, scenario.rbar_m, gamma_b, radar.clone())?, cfg)?,
            };
            Ok(SchemeOutcome {
                covariance: cov(&sol.w),
                r_u: sol.r_u,
                r_m: sol.r_m,
                mismatch_ratio: sol.mismatch_ratio,
                inner_iters: sol.inner_iters,
                outer_iters: sol.outer_iters,
            })
        }
    }
}

pub fn radar_reference(scenario: &Scenario, cfg: &ExperimentConfig) -> Result<RadarReference, Error> {
    let opts = radcom_conic::SolverOptions::default();
    RadarReference::new(scenario.n_antennas, &scenario.r_angles_deg, cfg.beam_width_deg, cfg.grid_points, scenario.p_max_linear(), &opts)
}

fn run_trial(cfg: &ExperimentConfig, param: SweepParam, value: f64, scenario: &Scenario, radar: &RadarReference, scheme: Scheme, trial: usize) -> Result<TrialRecord, Error> {
    let seed = trial_seed(scenario.seed, trial as u64);
    let channels = generate_channels(scenario, seed)?;
    let start = Instant::now();
    let result = solve_scheme(scheme, channels, scenario, radar, &cfg.penalty);
    let wall_ms = if cfg.record_wall_time { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    let mut rec = TrialRecord {
        sweep_param: param,
        sweep_value: value,
        scheme,
        trial,
        seed,
        status: TrialStatus::Ok,
        r_u: Vec::new(),
        r_m: Vec::new(),
        mismatch_ratio: None,
        inner_iters: 0,
        outer_iters: 0,
        wall_ms,
    };
    match result {
        Ok(o) => {
            rec.r_u = o.r_u;
            rec.r_m = o.r_m;
            rec.mismatch_ratio = Some(o.mismatch_ratio);
            rec.inner_iters = o.inner_iters;
            rec.outer_iters = o.outer_iters;
        }
        Err(Error::Infeasible(_)) => rec.status = TrialStatus::Infeasible,
        Err(Error::MaxIterations { outer, inner, .. }) => {
            rec.status = TrialStatus::Maxiter;
            rec.inner_iters = inner;
            rec.outer_iters = outer;
        }
        Err(Error::RankOneExtractionFailed { .. }) => rec.status = TrialStatus::Maxiter,
        Err(Error::Solver { .. } | Error::Program(_)) => rec.status = TrialStatus::Failed,
        Err(e) => return Err(e),
    }
    if !rec.ok() {
        log::info!("{scheme} at {}={value}, trial {trial}: {}", param.as_str(), rec.status.as_str());
    }
    Ok(rec)
}

/// Runs every (sweep value, trial, scheme) combination. `threads = None`
/// uses rayon's default pool size.
pub fn run_sweep(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<TrialRecord>, Error> {
    cfg.validate()?;
    let (param, values) = cfg.points();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let points = values
            .iter()
            .map(|&v| {
                let s = cfg.scenario_at(param, v);
                let radar = radar_reference(&s, cfg)?;
                Ok((v, s, radar))
            })
            .collect::<Result<Vec<_>, Error>>()?;
        let jobs: Vec<(usize, usize, Scheme)> = (0..points.len())
            .flat_map(|p| (0..cfg.trials).flat_map(move |t| cfg.schemes.iter().map(move |&x| (p, t, x))))
            .collect();
        jobs.par_iter()
            .map(|&(p, t, x)| {
                let (v, s, radar) = &points[p];
                run_trial(cfg, param, *v, s, radar, x, t)
            })
            .collect()
    })
}

/// Formats `x` with 12 significant digits, in positional notation when
/// the exponent allows it.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s.to_string() };
    if (-5..12).contains(&exp) {
        trim(&format!("{:.*}", (11 - exp) as usize, x))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

pub const RATE_HEADER: [&str; 11] =
    ["sweep_param", "sweep_value", "scheme", "seed", "status", "r_u_sum", "r_m_min", "mismatch_ratio", "inner_iters", "outer_iters", "wall_ms"];

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Io { path: path.display().to_string(), source: e.into() }
}

/// Writes one row per record. Rates and mismatch are left empty for
/// trials that did not succeed.
pub fn emit_csv(records: &[TrialRecord], path: &Path) -> Result<(), Error> {
    if records.is_empty() {
        return Err(Error::Contract("no records to write".into()));
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(RATE_HEADER).map_err(csv_err(path))?;
    let opt = |x: Option<f64>| x.map(format_sig).unwrap_or_default();
    for r in records {
        w.write_record([
            r.sweep_param.as_str().to_string(),
            format_sig(r.sweep_value),
            r.scheme.to_string(),
            r.seed.to_string(),
            r.status.as_str().to_string(),
            opt(r.r_u_sum()),
            opt(r.r_m_min()),
            opt(r.mismatch_ratio),
            r.inner_iters.to_string(),
            r.outer_iters.to_string(),
            format_sig(r.wall_ms),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes the transmit beam pattern over `grid`, linear gains.
pub fn emit_pattern_csv(grid: &AngularGrid, gains: &[f64], path: &Path) -> Result<(), Error> {
    if gains.len() != grid.len() {
        return Err(Error::Contract(format!("{} gains for a grid of {} angles", gains.len(), grid.len())));
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["theta_deg", "gain"]).map_err(csv_err(path))?;
    for (t, g) in grid.angles_deg().iter().zip(gains) {
        w.write_record([format_sig(*t), format_sig(*g)]).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Mean unicast rate of one scheme at one sweep value, over the trials
/// that succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub trials: usize,
    pub feasible: usize,
    pub mean_r_u: f64,
}

pub fn summarize(records: &[TrialRecord]) -> Vec<Summary> {
    let mut out: Vec<Summary> = Vec::new();
    for r in records {
        let i = match out.iter().position(|s| s.sweep_value == r.sweep_value && s.scheme == r.scheme) {
            Some(i) => i,
            None => {
                out.push(Summary { sweep_value: r.sweep_value, scheme: r.scheme, trials: 0, feasible: 0, mean_r_u: 0.0 });
                out.len() - 1
            }
        };
        let s = &mut out[i];
        s.trials += 1;
        if let Some(v) = r.r_u_sum() {
            s.feasible += 1;
            s.mean_r_u += v;
        }
    }
    for s in &mut out {
        s.mean_r_u = if s.feasible > 0 { s.mean_r_u / s.feasible as f64 } else { f64::NAN };
    }
    out
}
