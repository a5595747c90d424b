use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use snls_core::config::RunConfig;
use snls_core::experiments::{strong_order_space, strong_order_time, ErrorTable};
use snls_core::ldp::{mass_deviation_probability, skeleton_trajectory, Control};
use snls_core::noise::{check_f_q, WienerPath};
use snls_core::observables::exp_moment_estimator;
use snls_core::output::{ensure_dir, write_failure_dump, write_outputs, AuditSummary, RunManifest};
use snls_core::scheme::{phase_grid_size, Integrator, RunRecord, Stepping};
use snls_core::{Error, Result};

/// Tolerance for `noise-check`.
const FQ_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(name = "snls", version, about = "Stochastic NLS splitting solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// JSON run configuration (a manifest.json is accepted too).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set model.epsilon=0`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// One trajectory of the adaptive scheme.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also run `experiment.n_samples` paths and write exponential moments of H.
        #[arg(long)]
        exp_moments: bool,
    },
    /// Temporal strong-order study over `experiment.levels` (δ values).
    OrderTime(Common),
    /// Spatial strong-order study over `experiment.levels` (N values).
    OrderSpace(Common),
    /// Mass-deviation probabilities over `experiment.epsilons`.
    LdpMass(Common),
    /// Skeleton trajectory for `experiment.control` (zero control if absent).
    Skeleton(Common),
    /// Compares ∫F_Q with Σ q_k.
    NoiseCheck(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. } => common,
            Command::OrderTime(c)
            | Command::OrderSpace(c)
            | Command::LdpMass(c)
            | Command::Skeleton(c)
            | Command::NoiseCheck(c) => c,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::OrderTime(_) => "order-time",
            Command::OrderSpace(_) => "order-space",
            Command::LdpMass(_) => "ldp-mass",
            Command::Skeleton(_) => "skeleton",
            Command::NoiseCheck(_) => "noise-check",
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let base = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let cfg = base.with_overrides(&common.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn configure_threads() {
    if let Some(n) = std::env::var("SNLS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let cfg = match load_config(cli.command.common()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cli.command, &cfg) {
        Ok(code) => code,
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            match write_failure_dump(&cfg.output_dir, &cfg, &e) {
                Ok(p) => eprintln!("diagnostic dump: {}", p.display()),
                Err(d) => eprintln!("could not write diagnostic dump: {d}"),
            }
            ExitCode::from(1)
        }
    }
}

fn run(cmd: &Command, cfg: &RunConfig) -> Result<ExitCode> {
    let start = Instant::now();
    let mut cfg = cfg.clone();
    cfg.experiment.kind = Some(cmd.name().to_string());
    let mut manifest = RunManifest::new(cmd.name(), &cfg)?;
    let dir = cfg.output_dir.clone();
    match cmd {
        Command::Simulate { exp_moments, .. } => {
            let integ = Integrator::new(
                cfg.model_params()?,
                Stepping::Adaptive(cfg.policy.clone()),
                cfg.noise_model()?,
            )?;
            let path = sample_path(&cfg, 0)?;
            let rec = integ.run(&path)?;
            if *exp_moments {
                write_exp_moments(&cfg, &integ, &rec, &dir)?;
                manifest.outputs.push("exp_moments.csv".into());
            }
            finish_record(&rec, &mut manifest, &dir, start)?;
            println!(
                "simulate: {} steps, final mass {:.6e}, outputs in {}",
                rec.n_steps(),
                rec.final_state.mass(),
                dir.display()
            );
        }
        Command::Skeleton(_) => {
            let control = cfg
                .experiment
                .control
                .clone()
                .unwrap_or_else(|| Control::zero(cfg.model.t_final));
            let rec = skeleton_trajectory(&cfg.model_params()?, &cfg.policy, &control, &cfg.noise_model()?)?;
            finish_record(&rec, &mut manifest, &dir, start)?;
            println!(
                "skeleton: {} steps, rate cost {:.6e}, outputs in {}",
                rec.n_steps(),
                control.rate_cost(),
                dir.display()
            );
        }
        Command::OrderTime(_) => {
            let table = strong_order_time(
                &cfg.study_setup()?,
                cfg.model.n_modes,
                &cfg.experiment.levels,
                cfg.experiment.n_samples,
                cfg.seed,
            )?;
            finish_table(&table, &mut manifest, &dir, start)?;
        }
        Command::OrderSpace(_) => {
            let levels = integer_levels(&cfg.experiment.levels)?;
            let table = strong_order_space(&cfg.study_setup()?, &levels, cfg.experiment.n_samples, cfg.seed)?;
            finish_table(&table, &mut manifest, &dir, start)?;
        }
        Command::LdpMass(_) => {
            let table = mass_deviation_probability(
                &cfg.model_params()?,
                &cfg.policy,
                &cfg.noise_model()?,
                cfg.experiment.rho,
                &cfg.experiment.epsilons,
                cfg.experiment.n_samples,
                cfg.seed,
            )?;
            ensure_dir(&dir)?;
            table.write_csv_file(&dir.join("ldp.csv"))?;
            manifest.outputs = vec!["ldp.csv".into()];
            manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
            manifest.write(&dir)?;
            for r in &table.rows {
                println!(
                    "eps {:<8} hits {:>5}/{:<5} p_hat {:.4e} ci [{:.4e}, {:.4e}] -eps*log(p) {}",
                    r.epsilon,
                    r.n_hits,
                    r.n_samples,
                    r.p_hat,
                    r.wilson_ci.0,
                    r.wilson_ci.1,
                    r.neg_eps_log_p.map_or("censored".into(), |v| format!("{v:.4e}"))
                );
            }
        }
        Command::NoiseCheck(_) => {
            let model = cfg.noise_model()?;
            let n_grid = phase_grid_size(cfg.model.n_modes, model.k_modes());
            let check = check_f_q(&model, n_grid);
            let pass = check.abs_diff <= FQ_TOL;
            println!(
                "integral F_Q = {:.16e}\npartial sum q_k = {:.16e}\n|diff| = {:.3e}\n{} (tolerance {FQ_TOL:e})",
                check.quadrature,
                check.partial_sum,
                check.abs_diff,
                if pass { "PASS" } else { "FAIL" }
            );
            return Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn sample_path(cfg: &RunConfig, index: u64) -> Result<WienerPath> {
    WienerPath::sample(
        cfg.seed,
        index,
        cfg.policy.master_j,
        cfg.noise.k_modes,
        cfg.model.t_final,
    )
}

fn integer_levels(levels: &[f64]) -> Result<Vec<usize>> {
    levels
        .iter()
        .map(|&v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::config("experiment.levels", format!("N level {v} is not a positive integer")))
            }
        })
        .collect()
}

fn finish_record(rec: &RunRecord, manifest: &mut RunManifest, dir: &Path, start: Instant) -> Result<()> {
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    let extra = std::mem::take(&mut manifest.outputs);
    write_outputs(rec, manifest, dir)?;
    if !extra.is_empty() {
        manifest.outputs.extend(extra);
        manifest.write(dir)?;
    }
    Ok(())
}

fn finish_table(table: &ErrorTable, manifest: &mut RunManifest, dir: &Path, start: Instant) -> Result<()> {
    ensure_dir(dir)?;
    table.write_files(dir, &manifest.config_hash)?;
    manifest.outputs = vec!["errors.csv".into(), "summary.json".into()];
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(dir)?;
    for i in 0..table.levels.len() {
        println!(
            "level {:<12} error {:.6e} stderr {:.3e}",
            table.levels[i], table.errors[i], table.stderr[i]
        );
    }
    println!(
        "slope {:.4} ci [{:.4}, {:.4}]{}",
        table.fitted_slope,
        table.slope_ci.0,
        table.slope_ci.1,
        if table.degenerate { " (degenerate)" } else { "" }
    );
    Ok(())
}

fn write_exp_moments(cfg: &RunConfig, integ: &Integrator, first: &RunRecord, dir: &Path) -> Result<()> {
    use rayon::prelude::*;
    let n = cfg.experiment.n_samples.max(2) as u64;
    let mut runs: Vec<RunRecord> = (1..n)
        .into_par_iter()
        .map(|i| integ.run(&sample_path(cfg, i)?))
        .collect::<Result<_>>()?;
    runs.insert(0, first.clone());
    let steps = 1usize << cfg.policy.master_j;
    let h = cfg.policy.h(cfg.model.t_final);
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
    let est = exp_moment_estimator(&runs, cfg.experiment.alpha, &times, cfg.bootstrap())?;
    ensure_dir(dir)?;
    let path = dir.join("exp_moments.csv");
    let mut w = csv_writer(&path)?;
    let io = |e: std::io::Error| Error::io(&path, e);
    use std::io::Write;
    writeln!(w, "t,log_mean,log_ci_lo,log_ci_hi").map_err(io)?;
    for i in 0..est.times.len() {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            est.times[i], est.log_mean[i], est.log_ci[i].0, est.log_ci[i].1
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)?;
    let audit = AuditSummary::from_records(&runs);
    println!(
        "exp moments over {} samples: sup log E = {:.6e} at t = {:.4}, floor-hit fraction {:.3e}",
        est.n_samples, est.sup_log_mean, est.sup_time, audit.floor_hit_fraction
    );
    Ok(())
}

fn csv_writer(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}
