use radcom::bb_noma::{solve_bb, solve_bb_scaled, BBInstance};
use radcom::beampattern::{evaluate_pattern, RadarReference};
use radcom::channel::{generate_channels, trial_seed, Scenario};
use radcom::experiments::{
    emit_csv, emit_pattern_csv, format_sig, radar_reference, run_sweep, solve_scheme, ExperimentConfig, Scheme, TrialStatus, RATE_HEADER,
};
use radcom::PenaltyConfig;
use radcom_conic::SolverOptions;

fn mrt_scenario() -> Scenario {
    let mut s = Scenario::single(4);
    s.rbar_m = 0.0;
    s.gamma_b_db = 60.0;
    s
}

#[test]
fn single_pair_schemes_reach_mrt() {
    let s = mrt_scenario();
    let cfg = ExperimentConfig::default();
    let radar = radar_reference(&s, &cfg).unwrap();
    for seed in 0..3 {
        let ch = generate_channels(&s, trial_seed(7, seed)).unwrap();
        let mrt = (1.0 + ch.p_max_linear * ch.h_c[0].norm_squared()).log2();
        for scheme in [Scheme::BbNoma, Scheme::CbNoma, Scheme::CbfNoSic, Scheme::Tdma] {
            let out = solve_scheme(scheme, ch.clone(), &s, &radar, &cfg.penalty).unwrap();
            let expect = if scheme == Scheme::Tdma { mrt / 2.0 } else { mrt };
            let r_u: f64 = out.r_u.iter().sum();
            assert!((r_u - expect).abs() < 1e-3, "{scheme} seed {seed}: {r_u} vs {expect}");
        }
    }
}

#[test]
fn bb_solution_does_not_depend_on_normalization() {
    let s = Scenario::single(4);
    let radar = RadarReference::new(4, &s.r_angles_deg, 10.0, 61, s.p_max_linear(), &SolverOptions::default()).unwrap();
    let ch = generate_channels(&s, 11).unwrap();
    let inst = BBInstance::new(ch, s.rbar_m, s.gamma_b_linear(), radar).unwrap();
    let cfg = PenaltyConfig::default();
    let a = solve_bb(&inst, &cfg).unwrap();
    let b = solve_bb_scaled(&inst, &cfg, s.p_max_linear() / 8.0).unwrap();
    assert!((a.rates.r_u - b.rates.r_u).abs() < 1e-4, "{} vs {}", a.rates.r_u, b.rates.r_u);
}

fn small_sweep() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{
            "schemes": ["bb_noma", "tdma"],
            "sweep": {"param": "rbar_m", "values": [0.5, 40]},
            "trials": 2,
            "grid_points": 61
        }"#,
    )
    .unwrap()
}

#[test]
fn rate_csv_layout() {
    let records = run_sweep(&small_sweep(), Some(2)).unwrap();
    assert_eq!(records.len(), 8);
    // A 40-bit multicast requirement cannot be met.
    for r in &records {
        assert_eq!(r.status == TrialStatus::Infeasible, r.sweep_value == 40.0, "{r:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rates.csv");
    emit_csv(&records, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), RATE_HEADER.join(","));
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), RATE_HEADER.len());
        assert_eq!(f[0], "rbar_m");
        assert_eq!(f[10], "0", "wall time is off by default");
        match f[4] {
            "ok" => {
                let r_u: f64 = f[5].parse().unwrap();
                assert!(r_u > 0.0);
                assert_eq!(format_sig(r_u), f[5]);
                assert!(f[6].parse::<f64>().unwrap() >= 0.5 - 1e-6);
            }
            "infeasible" => assert!(f[5].is_empty() && f[6].is_empty() && f[7].is_empty()),
            other => panic!("unexpected status {other}"),
        }
    }
}

#[test]
fn sweep_output_is_thread_independent() {
    let cfg = small_sweep();
    let dir = tempfile::tempdir().unwrap();
    let bytes: Vec<Vec<u8>> = [1, 4]
        .iter()
        .map(|&t| {
            let path = dir.path().join(format!("{t}.csv"));
            emit_csv(&run_sweep(&cfg, Some(t)).unwrap(), &path).unwrap();
            std::fs::read(path).unwrap()
        })
        .collect();
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn pattern_csv_rows() {
    let s = Scenario::single(4);
    let cfg = ExperimentConfig::default();
    let radar = radar_reference(&s, &cfg).unwrap();
    let gains = evaluate_pattern(&radar.ideal.r0_star, &radar.grid);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pattern.csv");
    emit_pattern_csv(&radar.grid, &gains, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "theta_deg,gain");
    assert_eq!(rows.len(), cfg.grid_points + 1);
    assert_eq!(rows[1].split(',').next().unwrap(), "-90");
    let peak = rows[1..]
        .iter()
        .map(|r| r.split(',').map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .max_by(|a, b| a[1].total_cmp(&b[1]))
        .unwrap();
    assert!((peak[0] - s.r_angles_deg[0]).abs() <= 5.0, "{peak:?}");
}
