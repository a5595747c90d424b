//! Strong-error studies against a shared-path reference solution.
//!
//! For every sample index one Wiener path is drawn and reused by the
//! reference run and every coarse level, so errors are pathwise.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::noise::{NoiseModel, WienerPath};
use crate::observables::BootstrapSpec;
use crate::scheme::{
    InitialDatum, Integrator, ModelParams, Nonlinearity, RecordOptions, StepPolicy, Stepping,
};
use crate::spectral::SpectralState;
use crate::stats::{mean, ols, pairwise_sum, percentile_interval, resample_indices, variance};

/// Default cap on `N_ref · 2^J` for reference runs.
pub const DEFAULT_REFERENCE_BUDGET: u64 = 1 << 26;

pub const MIN_LEVELS: usize = 4;

#[derive(Clone, Debug)]
pub struct StudySetup {
    pub lambda: Nonlinearity,
    pub epsilon: f64,
    pub t_final: f64,
    pub initial: InitialDatum,
    pub model: NoiseModel,
    pub policy: StepPolicy,
    /// Exponent of the `L^p(Ω)` error norm.
    pub p: f64,
    pub n_ref: usize,
    pub reference_budget: u64,
    pub bootstrap: BootstrapSpec,
}

impl StudySetup {
    pub fn params(&self, n_modes: usize) -> Result<ModelParams> {
        ModelParams::new(
            self.lambda,
            self.epsilon,
            self.t_final,
            self.initial.state(n_modes)?,
        )
    }

    pub fn path(&self, base_seed: u64, sample_index: u64) -> Result<WienerPath> {
        WienerPath::sample(
            base_seed,
            sample_index,
            self.policy.master_j,
            self.model.k_modes(),
            self.t_final,
        )
    }

    fn check(&self) -> Result<()> {
        self.policy.validate()?;
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::config("experiment.p", "must be finite and >= 1"));
        }
        Ok(())
    }
}

/// Uniform run at the master step `h` with `n_ref` modes; the state at `T`.
pub fn reference_solution(setup: &StudySetup, path: &WienerPath) -> Result<SpectralState> {
    let work = setup.n_ref as u64 * (1u64 << path.j_levels());
    if work > setup.reference_budget {
        return Err(Error::Budget(format!(
            "reference needs N_ref * 2^J = {work}, budget is {}",
            setup.reference_budget
        )));
    }
    let integ = Integrator::new(
        setup.params(setup.n_ref)?,
        Stepping::Uniform {
            master_j: path.j_levels(),
            ticks: 1,
        },
        setup.model.clone(),
    )?
    .with_options(RecordOptions::FINAL_ONLY);
    Ok(integ.run(path)?.final_state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    TimeDelta,
    SpaceN,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorTable {
    pub axis: Axis,
    pub levels: Vec<f64>,
    /// `(E‖u_ref(T) − u(T)‖^p)^{1/p}` per level.
    pub errors: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_samples: usize,
    pub p: f64,
    pub fitted_slope: f64,
    pub slope_ci: (f64, f64),
    /// Mean `M_T` per level.
    pub mean_steps: Vec<f64>,
    pub floor_hits: Vec<usize>,
    /// Set when the initial datum is already resolved at the coarsest level.
    pub degenerate: bool,
    /// Per-sample errors, `[sample][level]`.
    #[serde(skip)]
    pub sample_errors: Vec<Vec<f64>>,
}

fn p_mean_error(col: &[f64], p: f64) -> f64 {
    let pw: Vec<f64> = col.iter().map(|d| d.powf(p)).collect();
    mean(&pw).powf(1.0 / p)
}

fn slope_of(levels: &[f64], errors: &[f64]) -> f64 {
    let lx: Vec<f64> = levels.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    ols(&lx, &ly).0
}

/// Least-squares slope of `ln error` against `ln level`.
pub fn fit_slope(levels: &[f64], errors: &[f64]) -> Result<f64> {
    if levels.len() < 2 || levels.len() != errors.len() {
        return Err(Error::Domain("slope fit needs matching level and error vectors".into()));
    }
    if errors.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Domain("slope fit needs positive errors".into()));
    }
    Ok(slope_of(levels, errors))
}

impl ErrorTable {
    fn build(
        axis: Axis,
        levels: Vec<f64>,
        per_sample: Vec<SampleResult>,
        setup: &StudySetup,
        degenerate: bool,
    ) -> Self {
        let (p, boot) = (setup.p, setup.bootstrap);
        let mut sample_errors = Vec::with_capacity(per_sample.len());
        let mut steps = Vec::with_capacity(per_sample.len());
        let mut floor_hits = Vec::with_capacity(per_sample.len());
        for s in per_sample {
            sample_errors.push(s.errors);
            steps.push(s.steps);
            floor_hits.push(s.floor_hits);
        }
        let n = sample_errors.len();
        let n_levels = levels.len();
        let column = |l: usize, rows: &[usize]| -> Vec<f64> {
            rows.iter().map(|&s| sample_errors[s][l]).collect()
        };
        let all: Vec<usize> = (0..n).collect();
        let errors: Vec<f64> = (0..n_levels).map(|l| p_mean_error(&column(l, &all), p)).collect();
        let stderr = (0..n_levels)
            .map(|l| {
                let pw: Vec<f64> = column(l, &all).iter().map(|d| d.powf(p)).collect();
                let se_m = (variance(&pw) / n as f64).sqrt();
                let e = errors[l];
                if e > 0.0 {
                    se_m * e.powf(1.0 - p) / p
                } else {
                    0.0
                }
            })
            .collect();
        let positive = errors.iter().all(|e| *e > 0.0);
        let fitted_slope = if positive {
            slope_of(&levels, &errors)
        } else {
            f64::NAN
        };
        let slope_ci = if positive {
            let mut rng = ChaCha8Rng::seed_from_u64(boot.seed);
            let draws: Vec<f64> = (0..boot.resamples)
                .map(|_| {
                    let idx = resample_indices(&mut rng, n);
                    let e: Vec<f64> =
                        (0..n_levels).map(|l| p_mean_error(&column(l, &idx), p)).collect();
                    slope_of(&levels, &e)
                })
                .collect();
            percentile_interval(draws, boot.level)
        } else {
            (f64::NAN, f64::NAN)
        };
        let mean_steps = (0..n_levels)
            .map(|l| {
                let s: Vec<f64> = steps.iter().map(|r| r[l] as f64).collect();
                pairwise_sum(&s) / n as f64
            })
            .collect();
        let floor_hits = (0..n_levels).map(|l| floor_hits.iter().map(|r| r[l]).sum()).collect();
        Self {
            axis,
            levels,
            errors,
            stderr,
            n_samples: n,
            p,
            fitted_slope,
            slope_ci,
            mean_steps,
            floor_hits,
            degenerate,
            sample_errors,
        }
    }

    /// CSV with columns `level, error, stderr`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["level", "error", "stderr"])?;
        for i in 0..self.levels.len() {
            w.write_record([
                format!("{:.16e}", self.levels[i]),
                format!("{:.16e}", self.errors[i]),
                format!("{:.16e}", self.stderr[i]),
            ])?;
        }
        w.flush()
    }

    pub fn summary(&self, config_hash: &str) -> serde_json::Value {
        serde_json::json!({
            "axis": self.axis,
            "levels": self.levels,
            "errors": self.errors,
            "n_samples": self.n_samples,
            "p": self.p,
            "slope": self.fitted_slope,
            "slope_ci": [self.slope_ci.0, self.slope_ci.1],
            "mean_steps": self.mean_steps,
            "floor_hits": self.floor_hits,
            "degenerate": self.degenerate,
            "config_hash": config_hash,
        })
    }

    /// Writes `errors.csv` and `summary.json` into `dir`.
    pub fn write_files(&self, dir: &Path, config_hash: &str) -> Result<()> {
        let csv_path = dir.join("errors.csv");
        let f = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(&csv_path, e))?;
        let json_path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&self.summary(config_hash))
            .map_err(|e| Error::format(&json_path, e))?;
        std::fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))
    }
}

/// Hex SHA-256 of a canonical config string.
pub fn config_hash(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.len() < MIN_LEVELS {
        return Err(Error::config(
            "experiment.levels",
            format!("need >= {MIN_LEVELS} levels, got {}", levels.len()),
        ));
    }
    let inc = levels.windows(2).all(|w| w[0] < w[1]);
    let dec = levels.windows(2).all(|w| w[0] > w[1]);
    if !(inc || dec) {
        return Err(Error::config("experiment.levels", "levels must be strictly monotone"));
    }
    Ok(())
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples < 2 {
        return Err(Error::config("experiment.n_samples", "need at least 2 samples"));
    }
    Ok(())
}

/// Temporal study: fixed `N`, the controller's `δ` varied over `deltas`.
pub fn strong_order_time(
    setup: &StudySetup,
    n_modes: usize,
    deltas: &[f64],
    n_samples: usize,
    base_seed: u64,
) -> Result<ErrorTable> {
    setup.check()?;
    check_levels(deltas)?;
    check_samples(n_samples)?;
    if setup.n_ref < 2 * n_modes {
        return Err(Error::config("experiment.n_ref", format!("must be >= 2N = {}", 2 * n_modes)));
    }
    let integrators = deltas
        .iter()
        .map(|&d| {
            let policy = setup.policy.with_delta(d);
            policy.validate()?;
            Ok(Integrator::new(setup.params(n_modes)?, Stepping::Adaptive(policy), setup.model.clone())?
                .with_options(RecordOptions::FINAL_ONLY))
        })
        .collect::<Result<Vec<_>>>()?;
    let per_sample = run_samples(setup, &integrators, n_samples, base_seed)?;
    Ok(ErrorTable::build(Axis::TimeDelta, deltas.to_vec(), per_sample, setup, false))
}

/// Spatial study: `setup.policy` fixed, `N` varied over `n_levels`.
pub fn strong_order_space(
    setup: &StudySetup,
    n_levels: &[usize],
    n_samples: usize,
    base_seed: u64,
) -> Result<ErrorTable> {
    setup.check()?;
    let levels: Vec<f64> = n_levels.iter().map(|&n| n as f64).collect();
    check_levels(&levels)?;
    check_samples(n_samples)?;
    let n_max = *n_levels.iter().max().unwrap();
    let n_min = *n_levels.iter().min().unwrap();
    if setup.n_ref < 4 * n_max {
        return Err(Error::config("experiment.n_ref", format!("must be >= 4 max N = {}", 4 * n_max)));
    }
    let support = highest_mode(&setup.initial.state(setup.n_ref)?);
    let degenerate = support <= n_min;
    let integrators = n_levels
        .iter()
        .map(|&n| {
            Ok(Integrator::new(
                setup.params(n)?,
                Stepping::Adaptive(setup.policy.clone()),
                setup.model.clone(),
            )?
            .with_options(RecordOptions::FINAL_ONLY))
        })
        .collect::<Result<Vec<_>>>()?;
    let per_sample = run_samples(setup, &integrators, n_samples, base_seed)?;
    Ok(ErrorTable::build(Axis::SpaceN, levels, per_sample, setup, degenerate))
}

fn highest_mode(u: &SpectralState) -> usize {
    u.coeffs()
        .iter()
        .rposition(|c| c.norm_sqr() > 0.0)
        .map_or(0, |i| i + 1)
}

struct SampleResult {
    errors: Vec<f64>,
    steps: Vec<usize>,
    floor_hits: Vec<usize>,
}

fn run_samples(
    setup: &StudySetup,
    integrators: &[Integrator],
    n_samples: usize,
    base_seed: u64,
) -> Result<Vec<SampleResult>> {
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let path = setup.path(base_seed, i)?;
            let reference = reference_solution(setup, &path)?;
            let mut res = SampleResult {
                errors: Vec::with_capacity(integrators.len()),
                steps: Vec::with_capacity(integrators.len()),
                floor_hits: Vec::with_capacity(integrators.len()),
            };
            for integ in integrators {
                let rec = integ.run(&path)?;
                res.errors.push(rec.final_state.distance(&reference));
                res.steps.push(rec.n_steps());
                res.floor_hits.push(rec.floor_hits());
            }
            Ok(res)
        })
        .collect()
}
