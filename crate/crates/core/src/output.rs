//! Output files and run manifests.
//!
//! Floats in CSV and state files are written with 17 significant digits
//! (`{:.16e}`), which round-trips every `f64` exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::scheme::RunRecord;
use crate::spectral::{lambda, SpectralState};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivedConstants {
    pub lambda_n: f64,
    pub h: f64,
    pub n_grid: usize,
    pub tau_min: f64,
    pub step_bound: f64,
}

impl DerivedConstants {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let u0 = cfg.model.u0.state(cfg.model.n_modes)?;
        let mass0 = u0.mass();
        let t = cfg.model.t_final;
        Ok(Self {
            lambda_n: lambda(cfg.model.n_modes),
            h: cfg.policy.h(t),
            n_grid: crate::scheme::phase_grid_size(cfg.model.n_modes, cfg.noise.k_modes),
            tau_min: cfg.policy.tau_min(t, mass0),
            step_bound: cfg.policy.step_bound(t, mass0),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AuditSummary {
    pub runs: usize,
    pub steps: usize,
    pub floor_hit_fraction: f64,
    pub clamped_last_count: usize,
    /// `M_T` value → number of runs.
    pub steps_histogram: BTreeMap<usize, usize>,
    pub max_leakage: f64,
    pub runs_within_step_bound: usize,
}

impl AuditSummary {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a RunRecord>) -> Self {
        let mut s = AuditSummary::default();
        let mut floor = 0usize;
        for r in records {
            s.runs += 1;
            s.steps += r.n_steps();
            floor += r.floor_hits();
            s.clamped_last_count += r.clamped_count();
            *s.steps_histogram.entry(r.n_steps()).or_default() += 1;
            s.max_leakage = s.max_leakage.max(r.max_leakage());
            if r.within_step_bound() == Some(true) {
                s.runs_within_step_bound += 1;
            }
        }
        if s.steps > 0 {
            s.floor_hit_fraction = floor as f64 / s.steps as f64;
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub derived: DerivedConstants,
    pub version: String,
    pub wall_clock_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditSummary>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            config: config.clone(),
            config_hash: crate::experiments::config_hash(&config.canonical_json()),
            derived: DerivedConstants::from_config(config)?,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: 0.0,
            audit: None,
            outputs: Vec::new(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(&path, e))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// `[[re, im], ...]` with 17 significant digits.
pub fn state_to_json(u: &SpectralState) -> String {
    let mut s = String::from("[\n");
    for (i, c) in u.coeffs().iter().enumerate() {
        let sep = if i + 1 == u.n_modes() { "" } else { "," };
        let _ = writeln!(s, "  [{:.16e}, {:.16e}]{sep}", c.re, c.im);
    }
    s.push_str("]\n");
    s
}

pub fn write_state(path: &Path, u: &SpectralState) -> Result<()> {
    std::fs::write(path, state_to_json(u)).map_err(|e| Error::io(path, e))
}

pub fn read_state(path: &Path) -> Result<SpectralState> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let pairs: Vec<[f64; 2]> = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
    SpectralState::new(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
        .map_err(|e| Error::format(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `observables.csv`, `states_final.json` and `manifest.json`.
pub fn write_outputs(record: &RunRecord, manifest: &mut RunManifest, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let obs = dir.join("observables.csv");
    record.observables.write_csv_file(&obs)?;
    let fin = dir.join("states_final.json");
    write_state(&fin, &record.final_state)?;
    manifest.audit = Some(AuditSummary::from_records([record]));
    manifest.outputs = vec!["observables.csv".into(), "states_final.json".into()];
    let man = manifest.write(dir)?;
    Ok(vec![obs, fin, man])
}

/// Diagnostic dump for a failed run.
pub fn write_failure_dump(dir: &Path, config: &RunConfig, err: &Error) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join("failure_dump.json");
    let body = serde_json::json!({
        "error": err.to_string(),
        "config": config,
    });
    let text = serde_json::to_string_pretty(&body).map_err(|e| Error::format(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
