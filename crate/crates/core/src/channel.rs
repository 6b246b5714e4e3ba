//! Scenario geometry, array response and seeded channel draws.
//!
//! Everything is expressed in noise-normalized units: receiver noise power
//! is 1 and the transmit budget is the linear transmit SNR `10^(γ_p/10)`.
//! Channel vectors therefore carry only the large-scale gain `g`, so that
//! `p_max · g` is the full-power single-user SNR.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::hermitian::ComplexVector;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathLossModel {
    LoS,
    NLoS,
}

/// Path loss in dB at distance `d` meters given the 1 m reference loss.
pub fn path_loss_db(model: PathLossModel, d: f64, l0_db: f64) -> Result<f64, Error> {
    if !(d >= 1.0) {
        return Err(Error::Contract(format!("distance {d} m is below the 1 m reference")));
    }
    let exponent = match model {
        PathLossModel::LoS => 2.0,
        PathLossModel::NLoS => 3.0,
    };
    Ok(l0_db + 10.0 * exponent * d.log10())
}

/// Half-wavelength ULA response: entry `i` is `exp(jπ i sin θ)`.
pub fn steering_vector(theta_deg: f64, n: usize) -> ComplexVector {
    let phase = std::f64::consts::PI * theta_deg.to_radians().sin();
    DVector::from_fn(n, |i, _| Complex64::from_polar(1.0, phase * i as f64))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n_antennas: usize,
    pub k_pairs: usize,
    pub r_angles_deg: Vec<f64>,
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

/// Target angles used for `K` pairs when none are given.
pub fn default_angles(k: usize) -> Vec<f64> {
    match k {
        1 => vec![0.0],
        2 => vec![-30.0, 30.0],
        3 => vec![-60.0, 0.0, 60.0],
        4 => vec![-60.0, -20.0, 20.0, 60.0],
        5 => vec![-60.0, -30.0, 0.0, 30.0, 60.0],
        6 => vec![-75.0, -45.0, -15.0, 15.0, 45.0, 75.0],
        _ => (0..k).map(|i| -75.0 + 150.0 * (i as f64 + 0.5) / k as f64).collect(),
    }
}

impl Scenario {
    /// Single-pair scenario with the default geometry and R-user at 0°.
    pub fn single(n: usize) -> Self {
        Self::with_pairs(n, 1)
    }

    pub fn with_pairs(n: usize, k: usize) -> Self {
        Scenario {
            n_antennas: n,
            k_pairs: k,
            r_angles_deg: default_angles(k),
            d_r_m: default_d_r(),
            d_c_m: default_d_c(),
            l0_db: default_l0(),
            gamma_p_db: default_gamma_p(),
            rbar_m: default_rbar(),
            gamma_b_db: default_gamma_b(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_antennas < 2 {
            return bad(format!("n_antennas must be at least 2, got {}", self.n_antennas));
        }
        if self.k_pairs < 1 {
            return bad("k_pairs must be at least 1".into());
        }
        if self.r_angles_deg.len() != self.k_pairs {
            return bad(format!(
                "r_angles_deg has {} entries but k_pairs is {}",
                self.r_angles_deg.len(),
                self.k_pairs
            ));
        }
        if let Some(a) = self.r_angles_deg.iter().find(|a| !(a.abs() < 90.0)) {
            return bad(format!("angle {a} is not strictly inside (-90, 90)"));
        }
        for (name, d) in [("d_r_m", self.d_r_m), ("d_c_m", self.d_c_m)] {
            if !(d >= 1.0 && d.is_finite()) {
                return bad(format!("{name} must be a finite distance of at least 1 m, got {d}"));
            }
        }
        if !(self.rbar_m >= 0.0 && self.rbar_m.is_finite()) {
            return bad(format!("rbar_m must be finite and nonnegative, got {}", self.rbar_m));
        }
        for (name, v) in [("l0_db", self.l0_db), ("gamma_p_db", self.gamma_p_db), ("gamma_b_db", self.gamma_b_db)] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        Ok(())
    }

    pub fn p_max_linear(&self) -> f64 {
        db_to_linear(self.gamma_p_db)
    }

    pub fn gamma_b_linear(&self) -> f64 {
        db_to_linear(self.gamma_b_db)
    }

    pub fn radar_gain(&self) -> f64 {
        db_to_linear(-path_loss_db(PathLossModel::LoS, self.d_r_m, self.l0_db).expect("validated distance"))
    }

    pub fn comm_gain(&self) -> f64 {
        db_to_linear(-path_loss_db(PathLossModel::NLoS, self.d_c_m, self.l0_db).expect("validated distance"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub h_r: Vec<ComplexVector>,
    pub h_c: Vec<ComplexVector>,
    pub p_max_linear: f64,
}

impl ChannelSet {
    pub fn n_antennas(&self) -> usize {
        self.h_c[0].len()
    }

    pub fn k_pairs(&self) -> usize {
        self.h_c.len()
    }

    /// `(h_r, h_c)` of pair `k` as a two-element array, radar user first.
    pub fn pair(&self, k: usize) -> [&ComplexVector; 2] {
        [&self.h_r[k], &self.h_c[k]]
    }
}

/// Draws the channels of one trial. Pair `k` uses ChaCha20 stream `k`
/// keyed by `seed`, so adding pairs leaves earlier pairs unchanged.
pub fn generate_channels(scenario: &Scenario, seed: u64) -> Result<ChannelSet, Error> {
    scenario.validate()?;
    let n = scenario.n_antennas;
    let g_r = scenario.radar_gain();
    let g_c = scenario.comm_gain();
    let sd = (g_c / 2.0).sqrt();
    let mut h_r = Vec::with_capacity(scenario.k_pairs);
    let mut h_c = Vec::with_capacity(scenario.k_pairs);
    for (k, &theta) in scenario.r_angles_deg.iter().enumerate() {
        h_r.push(steering_vector(theta, n) * Complex64::new(g_r.sqrt(), 0.0));
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        h_c.push(DVector::from_fn(n, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(sd * re, sd * im)
        }));
    }
    Ok(ChannelSet { h_r, h_c, p_max_linear: scenario.p_max_linear() })
}

/// Seed of trial `t` under a master seed: the first word of ChaCha20
/// stream `t`.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(trial);
    rng.random()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, re: f64, im: f64) -> bool {
        (a - Complex64::new(re, im)).norm() < 1e-12
    }

    #[test]
    fn steering_examples() {
        assert!(steering_vector(0.0, 4).iter().all(|z| close(*z, 1.0, 0.0)));
        let a = steering_vector(90.0, 2);
        assert!(close(a[0], 1.0, 0.0) && close(a[1], -1.0, 0.0));
        let a = steering_vector(30.0, 3);
        assert!(close(a[0], 1.0, 0.0) && close(a[1], 0.0, 1.0) && close(a[2], -1.0, 0.0));
        let a = steering_vector(-37.0, 7);
        assert!((a.dotc(&a).re - 7.0).abs() < 1e-12);
    }

    #[test]
    fn path_loss_examples() {
        assert!((path_loss_db(PathLossModel::LoS, 1000.0, 40.0).unwrap() - 100.0).abs() < 1e-12);
        assert!((path_loss_db(PathLossModel::NLoS, 100.0, 40.0).unwrap() - 100.0).abs() < 1e-12);
        assert!((path_loss_db(PathLossModel::LoS, 1.0, 40.0).unwrap() - 40.0).abs() < 1e-12);
        assert!(path_loss_db(PathLossModel::LoS, 0.5, 40.0).is_err());
    }

    #[test]
    fn default_link_budget_is_ten_db() {
        let s = Scenario::single(4);
        assert!((s.p_max_linear() * s.radar_gain() - 10.0).abs() < 1e-9);
        assert!((s.p_max_linear() * s.comm_gain() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn channels_are_deterministic() {
        let s = Scenario::with_pairs(4, 3);
        let a = generate_channels(&s, 17).unwrap();
        let b = generate_channels(&s, 17).unwrap();
        assert_eq!(a, b);
        let c = generate_channels(&s, 18).unwrap();
        assert_ne!(a.h_c, c.h_c);
    }

    #[test]
    fn pair_streams_do_not_depend_on_pair_count() {
        let one = generate_channels(&Scenario::with_pairs(4, 1), 5).unwrap();
        let mut s3 = Scenario::with_pairs(4, 3);
        s3.r_angles_deg[0] = 0.0;
        let three = generate_channels(&s3, 5).unwrap();
        assert_eq!(one.h_c[0], three.h_c[0]);
    }

    #[test]
    fn radar_channel_is_steering_direction() {
        let s = Scenario::with_pairs(5, 3);
        let ch = generate_channels(&s, 1).unwrap();
        for (h, &t) in ch.h_r.iter().zip(&s.r_angles_deg) {
            let a = steering_vector(t, 5);
            let c = a.dotc(h).norm();
            assert!((c - a.norm() * h.norm()).abs() < 1e-12 * c);
        }
    }

    #[test]
    fn comm_channel_second_moment() {
        let s = Scenario::single(4);
        let draws = 10_000;
        let mean: f64 = (0..draws)
            .map(|t| generate_channels(&s, trial_seed(99, t)).unwrap().h_c[0].norm_squared())
            .sum::<f64>()
            / draws as f64;
        let expect = 4.0 * s.comm_gain();
        assert!((mean - expect).abs() < 0.05 * expect, "mean {mean:e} vs {expect:e}");
    }

    #[test]
    fn rates_invariant_under_noise_normalization() {
        // Physical units: noise σ², power P; normalized: noise 1, power P/σ².
        let s = Scenario::single(3);
        let ch = generate_channels(&s, 3).unwrap();
        let sigma2 = 1e-13;
        let p_phys = s.p_max_linear() * sigma2;
        let h = &ch.h_c[0];
        let w = h / Complex64::new(h.norm(), 0.0);
        let snr_phys = p_phys * w.dotc(h).norm_sqr() / sigma2;
        let snr_norm = s.p_max_linear() * w.dotc(h).norm_sqr();
        assert!(((1.0 + snr_phys).log2() - (1.0 + snr_norm).log2()).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_scenarios() {
        let mut s = Scenario::single(1);
        assert!(s.validate().is_err());
        s = Scenario::single(4);
        s.r_angles_deg = vec![90.0];
        assert!(s.validate().is_err());
        s = Scenario::with_pairs(4, 2);
        s.r_angles_deg.pop();
        assert!(s.validate().is_err());
        s = Scenario::single(4);
        s.rbar_m = -0.1;
        assert!(s.validate().is_err());
    }
}
