//! Run configuration: JSON schema, dotted overrides, and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::experiments::{StudySetup, DEFAULT_REFERENCE_BUDGET};
use crate::ldp::Control;
use crate::noise::NoiseModel;
use crate::observables::BootstrapSpec;
use crate::scheme::{InitialDatum, ModelParams, Nonlinearity, StepPolicy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `+1` focusing, `-1` defocusing.
    pub lambda: i64,
    pub epsilon: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "N")]
    pub n_modes: usize,
    pub u0: InitialDatum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumPreset {
    /// `q_k = k^{-r}`.
    PowerLaw,
    /// Explicit `q` list.
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(rename = "K_W")]
    pub k_modes: usize,
    pub spectrum: SpectrumPreset,
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// `δ` values for `order-time`, `N` values for `order-space`.
    pub levels: Vec<f64>,
    pub n_samples: usize,
    pub p: f64,
    pub n_ref: usize,
    pub rho: f64,
    pub epsilons: Vec<f64>,
    /// Exponential-moment rate used by `simulate` with several samples.
    pub alpha: f64,
    pub bootstrap_resamples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<Control>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub noise: NoiseConfig,
    pub policy: StepPolicy,
    pub experiment: ExperimentConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig {
                lambda: -1,
                epsilon: 0.5,
                t_final: 0.5,
                n_modes: 32,
                u0: InitialDatum::GaussModes,
            },
            noise: NoiseConfig {
                k_modes: 16,
                spectrum: SpectrumPreset::PowerLaw,
                r: 6.0,
                q: None,
            },
            policy: StepPolicy::default(),
            experiment: ExperimentConfig {
                kind: None,
                levels: vec![0.125, 0.0625, 0.03125, 0.015625, 0.0078125],
                n_samples: 200,
                p: 2.0,
                n_ref: 64,
                rho: 0.1,
                epsilons: vec![0.4, 0.2, 0.1, 0.05],
                alpha: 1.0,
                bootstrap_resamples: 1000,
                control: None,
            },
            seed: 1,
            output_dir: PathBuf::from("snls-out"),
        }
    }
}

fn reject(key: &str, reason: impl Into<String>) -> Error {
    Error::config(key, reason)
}

impl RunConfig {
    /// Reads a config file. A run manifest is accepted too; its `config` echo is used.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut value: Value = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
        Self::from_value(value, &path.display().to_string())
    }

    fn from_value(value: Value, origin: &str) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| reject(origin, e.to_string()))
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Canonical JSON text; keys are emitted in declaration order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Applies `key=value` overrides. `value` is parsed as JSON, falling back
    /// to a plain string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut value = self.to_value();
        let mut last_key = String::from("--set");
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| reject(item, "override must look like key=value"))?;
            let key = key.trim();
            let parsed: Value = serde_json::from_str(raw.trim())
                .unwrap_or_else(|_| Value::String(raw.trim().to_string()));
            set_dotted(&mut value, key, parsed)?;
            // check each override on its own so a type error names its key
            serde_json::from_value::<RunConfig>(value.clone())
                .map_err(|e| reject(key, e.to_string()))?;
            last_key = key.to_string();
        }
        Self::from_value(value, &last_key)
    }

    /// Rejects every constant set that violates the step-rule assumptions.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        Nonlinearity::try_from(m.lambda).map_err(|_| reject("model.lambda", "must be +1 or -1"))?;
        if !(m.epsilon >= 0.0 && m.epsilon.is_finite()) {
            return Err(reject("model.epsilon", "must be finite and >= 0"));
        }
        if !(m.t_final > 0.0 && m.t_final.is_finite()) {
            return Err(reject("model.T", "must be finite and > 0"));
        }
        if m.n_modes == 0 {
            return Err(reject("model.N", "must be >= 1"));
        }
        if let InitialDatum::Custom(c) = &m.u0 {
            if c.is_empty() || c.iter().flatten().any(|v| !v.is_finite()) {
                return Err(reject("model.u0", "custom coefficients must be finite and non-empty"));
            }
        }
        let n = &self.noise;
        if n.k_modes == 0 {
            return Err(reject("noise.K_W", "must be >= 1"));
        }
        match n.spectrum {
            SpectrumPreset::PowerLaw => {
                if !(n.r > NoiseModel::MIN_DECAY_EXPONENT && n.r.is_finite()) {
                    return Err(reject("noise.r", "power-law spectra need r > 5"));
                }
            }
            SpectrumPreset::Custom => {
                let q = n.q.as_ref().ok_or_else(|| reject("noise.q", "custom spectrum needs q"))?;
                if q.len() != n.k_modes {
                    return Err(reject("noise.q", format!("has {} entries, K_W is {}", q.len(), n.k_modes)));
                }
                if q.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(reject("noise.q", "entries must be finite and >= 0"));
                }
            }
        }
        self.policy.validate()?;
        let e = &self.experiment;
        if !(e.p >= 1.0 && e.p.is_finite()) {
            return Err(reject("experiment.p", "must be >= 1"));
        }
        if !(e.alpha > 0.0 && e.alpha.is_finite()) {
            return Err(reject("experiment.alpha", "must be > 0"));
        }
        if e.n_samples == 0 {
            return Err(reject("experiment.n_samples", "must be >= 1"));
        }
        if let Some(c) = &e.control {
            if c.end_time() < m.t_final {
                return Err(reject("experiment.control", "control ends before T"));
            }
            if c.max_mode() > n.k_modes {
                return Err(reject("experiment.control", "control mode exceeds K_W"));
            }
        }
        Ok(())
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        Nonlinearity::try_from(self.model.lambda).map_err(|_| reject("model.lambda", "must be +1 or -1"))
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.nonlinearity()?,
            self.model.epsilon,
            self.model.t_final,
            self.model.u0.state(self.model.n_modes)?,
        )
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        match self.noise.spectrum {
            SpectrumPreset::PowerLaw => NoiseModel::power_law(self.noise.k_modes, self.noise.r),
            SpectrumPreset::Custom => {
                NoiseModel::from_eigenvalues(self.noise.q.clone().unwrap_or_default())
            }
        }
        .map_err(|e| reject("noise", e.to_string()))
    }

    pub fn study_setup(&self) -> Result<StudySetup> {
        Ok(StudySetup {
            lambda: self.nonlinearity()?,
            epsilon: self.model.epsilon,
            t_final: self.model.t_final,
            initial: self.model.u0.clone(),
            model: self.noise_model()?,
            policy: self.policy.clone(),
            p: self.experiment.p,
            n_ref: self.experiment.n_ref,
            reference_budget: DEFAULT_REFERENCE_BUDGET,
            bootstrap: self.bootstrap(),
        })
    }

    pub fn bootstrap(&self) -> BootstrapSpec {
        BootstrapSpec {
            resamples: self.experiment.bootstrap_resamples,
            seed: self.seed,
            ..BootstrapSpec::default()
        }
    }
}

fn set_dotted(root: &mut Value, key: &str, new: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(reject(key, "malformed key"));
    }
    let mut node = root;
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| reject(key, format!("`{}` is not a section", parts[..i].join("."))))?;
        let last = i + 1 == parts.len();
        if last {
            // optional fields are omitted when unset, so they are allowed here
            let optional = matches!(
                key,
                "noise.q" | "experiment.kind" | "experiment.control"
            );
            if !obj.contains_key(*part) && !optional {
                return Err(reject(key, "unknown configuration key"));
            }
            obj.insert((*part).to_string(), new);
            return Ok(());
        }
        node = obj
            .get_mut(*part)
            .ok_or_else(|| reject(key, "unknown configuration key"))?;
    }
    unreachable!()
}
