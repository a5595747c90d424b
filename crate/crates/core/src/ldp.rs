//! Small-noise toolkit: piecewise-constant controls, the skeleton and
//! controlled schemes, the rate-function cost, and Monte Carlo estimates of
//! mass-deviation probabilities.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseModel, WienerPath};
use crate::scheme::{Integrator, ModelParams, RecordOptions, RunRecord, StepPolicy, Stepping};

/// Piecewise-constant control `ν(t) = Σ_m v_m(t) √q_{k_m} e_{k_m}`.
///
/// `values[p][m]` is the value of mode `modes[m]` on `[breakpoints[p], breakpoints[p+1])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Control {
    modes: Vec<usize>,
    breakpoints: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl Control {
    pub fn new(modes: Vec<usize>, breakpoints: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let c = Self {
            modes,
            breakpoints,
            values,
        };
        c.validate()?;
        Ok(c)
    }

    /// `ν ≡ 0` on `[0, T]`.
    pub fn zero(t_final: f64) -> Self {
        Self {
            modes: Vec::new(),
            breakpoints: vec![0.0, t_final],
            values: vec![Vec::new()],
        }
    }

    /// `v_k ≡ value` on `[0, T]`.
    pub fn constant(mode: usize, value: f64, t_final: f64) -> Result<Self> {
        Self::new(vec![mode], vec![0.0, t_final], vec![vec![value]])
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(format!("control: {msg}")));
        if self.modes.contains(&0) {
            return bad("mode indices start at 1".into());
        }
        let mut sorted = self.modes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.modes.len() {
            return bad("duplicate mode index".into());
        }
        if self.breakpoints.len() < 2 || self.breakpoints[0] != 0.0 {
            return bad("breakpoints must start at 0 and contain at least two entries".into());
        }
        if !self.breakpoints.windows(2).all(|w| w[0] < w[1] && w[1].is_finite()) {
            return bad("breakpoints must be finite and strictly increasing".into());
        }
        if self.values.len() != self.breakpoints.len() - 1 {
            return bad(format!(
                "{} value rows for {} intervals",
                self.values.len(),
                self.breakpoints.len() - 1
            ));
        }
        for row in &self.values {
            if row.len() != self.modes.len() {
                return bad(format!("row of {} values for {} modes", row.len(), self.modes.len()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return bad("values must be finite".into());
            }
        }
        Ok(())
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn end_time(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn max_mode(&self) -> usize {
        self.modes.iter().copied().max().unwrap_or(0)
    }

    pub(crate) fn check_against(&self, t_final: f64, k_modes: usize) -> Result<()> {
        if self.end_time() < t_final {
            return Err(Error::Domain(format!(
                "control ends at {} but the run needs [0, {t_final}]",
                self.end_time()
            )));
        }
        if self.max_mode() > k_modes {
            return Err(Error::Domain(format!(
                "control uses mode {} beyond K_W = {k_modes}",
                self.max_mode()
            )));
        }
        Ok(())
    }

    /// `∫_a^b v_k(s) ds` for `k = 1..=k_modes`, `None` when all vanish.
    pub fn integrated_weights(&self, a: f64, b: f64, k_modes: usize) -> Option<Vec<f64>> {
        let mut w = vec![0.0; k_modes];
        let mut any = false;
        for (p, row) in self.values.iter().enumerate() {
            let lo = self.breakpoints[p].max(a);
            let hi = self.breakpoints[p + 1].min(b);
            if hi <= lo {
                continue;
            }
            let len = hi - lo;
            for (&k, &v) in self.modes.iter().zip(row) {
                if v != 0.0 {
                    w[k - 1] += v * len;
                    any = true;
                }
            }
        }
        any.then_some(w)
    }

    /// `½ ∫ ‖ν(s)‖²_{H_0} ds = ½ Σ_p |I_p| Σ_m v_{p,m}²`, exact for this representation.
    pub fn rate_cost(&self) -> f64 {
        let total: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(p, row)| {
                let len = self.breakpoints[p + 1] - self.breakpoints[p];
                len * row.iter().map(|v| v * v).sum::<f64>()
            })
            .sum();
        0.5 * total
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("control serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Control = serde_json::from_str(s)
            .map_err(|e| Error::Domain(format!("control JSON: {e}")))?;
        c.validate()?;
        Ok(c)
    }
}

/// `½∫‖ν‖²_{H_0}` of a control.
pub fn rate_cost(control: &Control) -> f64 {
    control.rate_cost()
}

/// Skeleton scheme: the deterministic substep alternated with `w ↦ P^N[e^{-iΦ_m} w]`.
pub fn skeleton_trajectory(
    params: &ModelParams,
    policy: &StepPolicy,
    control: &Control,
    model: &NoiseModel,
) -> Result<RunRecord> {
    Integrator::new(params.clone(), Stepping::Adaptive(policy.clone()), model.clone())?
        .run_forced(None, Some(control))
}

/// Stochastic controlled scheme, phase `√ε ΔW + Φ_m`.
pub fn controlled_trajectory(
    params: &ModelParams,
    policy: &StepPolicy,
    control: &Control,
    model: &NoiseModel,
    path: &WienerPath,
) -> Result<RunRecord> {
    Integrator::new(params.clone(), Stepping::Adaptive(policy.clone()), model.clone())?
        .run_forced(Some(path), Some(control))
}

/// `sup` of `‖a(t) − b(t)‖` over master ticks accepted by both runs.
pub fn sup_distance_on_shared_times(a: &RunRecord, b: &RunRecord) -> Result<f64> {
    if a.states.is_empty() || b.states.is_empty() {
        return Err(Error::Domain("both runs must record states".into()));
    }
    let (mut i, mut j) = (0, 0);
    let mut sup = 0.0f64;
    while i < a.ticks.len() && j < b.ticks.len() {
        match a.ticks[i].cmp(&b.ticks[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sup = sup.max(a.states[i].distance(&b.states[j]));
                i += 1;
                j += 1;
            }
        }
    }
    Ok(sup)
}

pub const WILSON_Z: f64 = 1.96;
pub const MIN_LDP_SAMPLES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LdpRow {
    pub epsilon: f64,
    pub n_samples: usize,
    pub n_hits: usize,
    pub p_hat: f64,
    /// `−ε ln p̂`, `None` (censored) when there are no hits.
    pub neg_eps_log_p: Option<f64>,
    pub wilson_ci: (f64, f64),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LdpTable {
    pub rho: f64,
    pub rows: Vec<LdpRow>,
}

impl LdpRow {
    pub fn new(epsilon: f64, n_samples: usize, n_hits: usize) -> Self {
        let p_hat = n_hits as f64 / n_samples as f64;
        Self {
            epsilon,
            n_samples,
            n_hits,
            p_hat,
            neg_eps_log_p: (n_hits > 0).then(|| -epsilon * p_hat.ln()),
            wilson_ci: crate::stats::wilson_interval(n_hits, n_samples, WILSON_Z),
        }
    }
}

impl LdpTable {
    /// CSV with columns `epsilon, n, hits, p_hat, ci_lo, ci_hi, neg_eps_log_p`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epsilon", "n", "hits", "p_hat", "ci_lo", "ci_hi", "neg_eps_log_p"])?;
        for r in &self.rows {
            w.write_record([
                format!("{:.16e}", r.epsilon),
                r.n_samples.to_string(),
                r.n_hits.to_string(),
                format!("{:.16e}", r.p_hat),
                format!("{:.16e}", r.wilson_ci.0),
                format!("{:.16e}", r.wilson_ci.1),
                r.neg_eps_log_p
                    .map_or_else(|| "censored".to_string(), |v| format!("{v:.16e}")),
            ])?;
        }
        w.flush()
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    /// Successive rows never increase in `p̂` beyond what overlapping Wilson
    /// intervals allow.
    pub fn non_increasing_within_ci(&self) -> bool {
        self.rows.windows(2).all(|w| {
            w[1].p_hat <= w[0].p_hat || w[1].wilson_ci.0 <= w[0].wilson_ci.1
        })
    }
}

/// Estimates `P(|sup_t ‖u(t)‖² − ‖u_0‖²| ≥ ρ)` for each `ε`.
///
/// Sample `i` uses the path `(base_seed, i)` at every `ε`.
pub fn mass_deviation_probability(
    params: &ModelParams,
    policy: &StepPolicy,
    model: &NoiseModel,
    rho: f64,
    epsilons: &[f64],
    n_samples: usize,
    base_seed: u64,
) -> Result<LdpTable> {
    if !(rho > 0.0) {
        return Err(Error::config("experiment.rho", "must be > 0"));
    }
    if n_samples < MIN_LDP_SAMPLES {
        return Err(Error::config(
            "experiment.n_samples",
            format!("need at least {MIN_LDP_SAMPLES} samples"),
        ));
    }
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(Error::config("experiment.epsilons", "need finite values >= 0"));
    }
    if !epsilons.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::config("experiment.epsilons", "must be strictly decreasing"));
    }
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let integ = Integrator::new(
            params.with_epsilon(eps)?,
            Stepping::Adaptive(policy.clone()),
            model.clone(),
        )?
        .with_options(RecordOptions::FINAL_ONLY);
        let hits: Vec<bool> = (0..n_samples as u64)
            .into_par_iter()
            .map(|i| -> Result<bool> {
                let path = WienerPath::sample(
                    base_seed,
                    i,
                    policy.master_j,
                    model.k_modes(),
                    params.t_final,
                )?;
                let rec = integ.run(&path)?;
                Ok(rec.sup_mass_deviation().abs() >= rho)
            })
            .collect::<Result<_>>()?;
        rows.push(LdpRow::new(eps, n_samples, hits.iter().filter(|h| **h).count()));
    }
    Ok(LdpTable { rho, rows })
}
