use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;
use radcom::beampattern::evaluate_pattern;
use radcom::channel::generate_channels;
use radcom::experiments::{emit_csv, emit_pattern_csv, radar_reference, run_sweep, solve_scheme, summarize, ExperimentConfig, Scheme, SweepParam, TrialRecord, TrialStatus};
use radcom::Error;

/// Joint radar and multicast-unicast beamforming experiments.
#[derive(Parser)]
#[command(name = "radcom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the radar-only reference pattern and write it as CSV.
    Ideal(Common),
    /// Solve one channel realization with one scheme.
    Solve {
        #[arg(long, value_parser = parse_scheme)]
        scheme: Scheme,
        #[command(flatten)]
        common: Common,
    },
    /// Run the Monte Carlo sweep described by the config.
    Sweep(Common),
    /// Parse and check a config file.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trials, overriding the config.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads for the sweep.
    #[arg(long, env = "RADCOM_THREADS")]
    threads: Option<usize>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_SOLVER: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Contract(_) => EXIT_CONFIG,
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        Error::Io { .. } => 1,
        _ => EXIT_SOLVER,
    }
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.scenario.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_file(&self, name: &str) -> Result<PathBuf, Error> {
        std::fs::create_dir_all(&self.out).map_err(|source| Error::Io { path: self.out.display().to_string(), source })?;
        Ok(self.out.join(name))
    }
}

fn ideal(c: &Common) -> Result<(), Error> {
    let cfg = c.load()?;
    let s = cfg.scenario.scenario();
    let radar = radar_reference(&s, &cfg)?;
    let path = c.out_file(&cfg.pattern_csv)?;
    emit_pattern_csv(&radar.grid, &evaluate_pattern(&radar.ideal.r0_star, &radar.grid), &path)?;
    println!("delta* = {:.6e}, error* = {:.6e}", radar.ideal.delta_star, radar.ideal.error_star);
    println!("wrote {}", path.display());
    Ok(())
}

fn solve(scheme: Scheme, c: &Common) -> Result<(), Error> {
    let cfg = c.load()?;
    let s = cfg.scenario.scenario();
    if !scheme.supports(s.k_pairs) {
        return Err(Error::Config(format!("scheme {scheme} does not support k_pairs = {}", s.k_pairs)));
    }
    let radar = radar_reference(&s, &cfg)?;
    let channels = generate_channels(&s, s.seed)?;
    let start = Instant::now();
    let result = solve_scheme(scheme, channels, &s, &radar, &cfg.penalty);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut rec = TrialRecord {
        sweep_param: SweepParam::GammaBDb,
        sweep_value: s.gamma_b_db,
        scheme,
        trial: 0,
        seed: s.seed,
        status: TrialStatus::Ok,
        r_u: Vec::new(),
        r_m: Vec::new(),
        mismatch_ratio: None,
        inner_iters: 0,
        outer_iters: 0,
        wall_ms,
    };
    let rates = c.out_file(&cfg.rates_csv)?;
    match result {
        Ok(o) => {
            let pattern = c.out_file(&cfg.pattern_csv)?;
            emit_pattern_csv(&radar.grid, &evaluate_pattern(&o.covariance, &radar.grid), &pattern)?;
            rec.r_u = o.r_u;
            rec.r_m = o.r_m;
            rec.mismatch_ratio = Some(o.mismatch_ratio);
            rec.inner_iters = o.inner_iters;
            rec.outer_iters = o.outer_iters;
            emit_csv(&[rec.clone()], &rates)?;
            println!(
                "{scheme}: R_u = {:?}, R_m = {:?}, mismatch = {:.4e}, {} inner / {} outer iterations, {wall_ms:.1} ms",
                rec.r_u, rec.r_m, o.mismatch_ratio, rec.inner_iters, rec.outer_iters
            );
            Ok(())
        }
        Err(e) => {
            rec.status = match e {
                Error::Infeasible(_) => TrialStatus::Infeasible,
                Error::MaxIterations { .. } | Error::RankOneExtractionFailed { .. } => TrialStatus::Maxiter,
                _ => TrialStatus::Failed,
            };
            emit_csv(&[rec], &rates)?;
            Err(e)
        }
    }
}

fn sweep(c: &Common) -> Result<(), Error> {
    let cfg = c.load()?;
    let start = Instant::now();
    let records = run_sweep(&cfg, c.threads)?;
    let path = c.out_file(&cfg.rates_csv)?;
    emit_csv(&records, &path)?;
    info!("{} trials in {:.1} s", records.len(), start.elapsed().as_secs_f64());
    let (param, _) = cfg.points();
    println!("{:>12}  {:<11} {:>9}  mean R_u (feasible only)", param.as_str(), "scheme", "feasible");
    for s in summarize(&records) {
        println!("{:>12}  {:<11} {:>4}/{:<4}  {:.4}", s.sweep_value, s.scheme.as_str(), s.feasible, s.trials, s.mean_r_u);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn validate(path: &Path) -> Result<(), Error> {
    let cfg = ExperimentConfig::load(path)?;
    let (param, values) = cfg.points();
    println!("ok: {} schemes, {} values of {}, {} trials", cfg.schemes.len(), values.len(), param.as_str(), cfg.trials);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::Ideal(c) => ideal(c),
        Command::Solve { scheme, common } => solve(*scheme, common),
        Command::Sweep(c) => sweep(c),
        Command::ValidateConfig { config } => validate(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
