//! Fully discrete splitting scheme with the adaptive step controller.
//!
//! One step of size `τ` maps `u ↦ Φ^S(Φ^D_τ(u))` where
//! `Φ^D_τ(u) = S^N(τ)(u + iλτ P^N(|u|²u))` is the explicit exponential step of
//! the deterministic part, and `Φ^S(v) = P^N[e^{-iθ} v]` is the exact phase
//! flow of the multiplicative subsystem with `θ = √ε ΔW (+ ∫ν ds)`, followed by
//! one projection. All accepted steps are whole multiples of the master step
//! `h = T / 2^J`, so runs at different tolerances share one Brownian path.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldp::Control;
use crate::noise::{NoiseModel, NoiseProjector, WienerPath, MAX_LEVELS};
use crate::observables::ObservableSeries;
use crate::spectral::{apply_semigroup, lambda, RealGrid, SpectralSpace, SpectralState};

/// Relative slack on the a.s. mass bounds, for quadrature round-off.
pub const MASS_SLACK: f64 = 1e-10;

/// Sign of the cubic term: `+1` focusing, `-1` defocusing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Nonlinearity {
    Focusing,
    Defocusing,
}

impl Nonlinearity {
    pub fn sign(self) -> f64 {
        match self {
            Nonlinearity::Focusing => 1.0,
            Nonlinearity::Defocusing => -1.0,
        }
    }
}

impl TryFrom<i64> for Nonlinearity {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Nonlinearity::Focusing),
            -1 => Ok(Nonlinearity::Defocusing),
            other => Err(Error::Domain(format!("lambda must be +1 or -1, got {other}"))),
        }
    }
}

impl From<Nonlinearity> for i64 {
    fn from(n: Nonlinearity) -> i64 {
        match n {
            Nonlinearity::Focusing => 1,
            Nonlinearity::Defocusing => -1,
        }
    }
}

/// Named initial data, projected onto `H_N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialDatum {
    /// `u_0 = e_1`.
    E1,
    /// `c_k = k^{-4} / √ζ(8)`: the projection of one fixed unit-mass function.
    GaussModes,
    /// Explicit `[re, im]` coefficients; truncated or zero-padded to `N`.
    Custom(Vec<[f64; 2]>),
}

impl InitialDatum {
    pub fn state(&self, n_modes: usize) -> Result<SpectralState> {
        match self {
            InitialDatum::E1 => SpectralState::basis(n_modes, 1),
            InitialDatum::GaussModes => {
                let zeta8 = PI.powi(8) / 9450.0;
                let norm = zeta8.sqrt();
                let coeffs = (1..=n_modes)
                    .map(|k| Complex64::new((k as f64).powi(-4) / norm, 0.0))
                    .collect();
                SpectralState::new(coeffs)
            }
            InitialDatum::Custom(pairs) => {
                let mut coeffs: Vec<Complex64> =
                    pairs.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
                coeffs.resize(n_modes, Complex64::new(0.0, 0.0));
                SpectralState::new(coeffs)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub lambda: Nonlinearity,
    pub epsilon: f64,
    pub t_final: f64,
    pub initial: SpectralState,
}

impl ModelParams {
    pub fn new(
        lambda: Nonlinearity,
        epsilon: f64,
        t_final: f64,
        initial: SpectralState,
    ) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::config("model.epsilon", "must be finite and >= 0"));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::config("model.T", "must be finite and > 0"));
        }
        Ok(Self {
            lambda,
            epsilon,
            t_final,
            initial,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.initial.n_modes()
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.lambda, epsilon, self.t_final, self.initial.clone())
    }
}

/// Constants of the adaptive step rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "L3")]
    pub l3: f64,
    pub gamma: f64,
    pub zeta: f64,
    pub beta: f64,
    pub xi: f64,
    pub delta: f64,
    #[serde(rename = "master_J")]
    pub master_j: u32,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            l1: 1.0,
            l2: 2.0e4,
            l3: 100.0,
            gamma: 0.25,
            zeta: 1.0,
            beta: 2.0,
            xi: 4.0,
            delta: 0.125,
            master_j: 10,
        }
    }
}

impl StepPolicy {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("policy.L1", self.l1),
            ("policy.L2", self.l2),
            ("policy.L3", self.l3),
            ("policy.zeta", self.zeta),
            ("policy.beta", self.beta),
            ("policy.xi", self.xi),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 0.5) {
            return Err(Error::config(
                "policy.gamma",
                format!("must lie in (0, 1/2), got {}", self.gamma),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config(
                "policy.delta",
                format!("must lie in (0, 1), got {}", self.delta),
            ));
        }
        if self.master_j < 1 || self.master_j > MAX_LEVELS {
            return Err(Error::config(
                "policy.master_J",
                format!("must lie in 1..={MAX_LEVELS}, got {}", self.master_j),
            ));
        }
        Ok(())
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self {
            delta,
            ..self.clone()
        }
    }

    pub fn h(&self, t_final: f64) -> f64 {
        t_final / (1u64 << self.master_j) as f64
    }

    /// `τ_min = (ζ e^{βL1T/2} ‖u_0‖^β + ξ)^{-1}`.
    pub fn tau_min(&self, t_final: f64, mass0: f64) -> f64 {
        let growth = (self.beta * self.l1 * t_final / 2.0).exp();
        1.0 / (self.zeta * growth * mass0.sqrt().powf(self.beta) + self.xi)
    }

    /// Upper bound `T / (τ_min δ)` on the number of steps.
    pub fn step_bound(&self, t_final: f64, mass0: f64) -> f64 {
        t_final / (self.tau_min(t_final, mass0) * self.delta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapKind {
    /// `L1 ‖u‖² / ‖u‖⁶_{L⁶}`
    Mass,
    /// `Tδ`
    Horizon,
    /// `(L2 / λ_N)^{1/(1/2-γ)}`
    Spectral,
    /// `(L3 / H(u))^{1/γ}`
    Energy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepCaps {
    pub mass: f64,
    pub horizon: f64,
    pub spectral: f64,
    pub energy: f64,
}

impl StepCaps {
    pub fn min(&self) -> (f64, CapKind) {
        let mut best = (self.mass, CapKind::Mass);
        for cand in [
            (self.horizon, CapKind::Horizon),
            (self.spectral, CapKind::Spectral),
            (self.energy, CapKind::Energy),
        ] {
            if cand.0 < best.0 {
                best = cand;
            }
        }
        best
    }
}

/// Step chosen by the controller, in master-grid ticks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepProposal {
    pub ticks: usize,
    pub tau: f64,
    pub caps: StepCaps,
    pub binding: CapKind,
    pub candidate: f64,
    pub floor: f64,
    pub floor_hit: bool,
}

pub fn step_caps(
    space: &SpectralSpace,
    u: &SpectralState,
    policy: &StepPolicy,
    params: &ModelParams,
) -> StepCaps {
    let nm = space.norms(u);
    let mass = if nm.l6_6 > 0.0 {
        policy.l1 * nm.l2_sq / nm.l6_6
    } else {
        f64::INFINITY
    };
    let lam_n = lambda(u.n_modes());
    let spectral = (policy.l2 / lam_n).powf(1.0 / (0.5 - policy.gamma));
    let h = crate::observables::hamiltonian_from_norms(&nm, params.lambda);
    let energy = if h > 0.0 {
        (policy.l3 / h).powf(1.0 / policy.gamma)
    } else {
        f64::INFINITY
    };
    StepCaps {
        mass,
        horizon: params.t_final * policy.delta,
        spectral,
        energy,
    }
}

/// Applies the step rule at state `u`.
pub fn propose_step(
    space: &SpectralSpace,
    u: &SpectralState,
    policy: &StepPolicy,
    params: &ModelParams,
) -> StepProposal {
    let caps = step_caps(space, u, policy, params);
    let (candidate, binding) = caps.min();
    let h = policy.h(params.t_final);
    let n = 1usize << policy.master_j;

    let lower = policy.delta / (policy.zeta * u.mass().sqrt().powf(policy.beta) + policy.xi);
    let floor_ticks = ((lower / h).ceil() as usize).clamp(1, n);
    let cand_ticks = (candidate / h).floor().min(n as f64) as usize;
    let (ticks, floor_hit) = if cand_ticks < floor_ticks {
        (floor_ticks, true)
    } else {
        (cand_ticks, false)
    };
    StepProposal {
        ticks,
        tau: ticks as f64 * h,
        caps,
        binding,
        candidate,
        floor: floor_ticks as f64 * h,
        floor_hit,
    }
}

/// `S^N(τ)(u + iλτ P^N(|u|²u))`.
pub fn det_substep(
    space: &SpectralSpace,
    u: &SpectralState,
    tau: f64,
    lambda: Nonlinearity,
) -> SpectralState {
    if tau == 0.0 {
        return u.clone();
    }
    let cub = space.projected_cubic(u);
    let f = Complex64::new(0.0, lambda.sign() * tau);
    let v: Vec<Complex64> = u
        .coeffs()
        .iter()
        .zip(cub.coeffs())
        .map(|(c, g)| c + f * g)
        .collect();
    apply_semigroup(&SpectralState::from_vec(v), tau)
}

/// `‖u + iλτ|u|²u‖²` before projection, by exact grid quadrature.
pub fn det_pre_projection_mass(
    space: &SpectralSpace,
    u: &SpectralState,
    tau: f64,
    lambda: Nonlinearity,
) -> f64 {
    let g = space.to_grid(u);
    let f = Complex64::new(0.0, lambda.sign() * tau);
    let w = 1.0 / (space.n_grid() + 1) as f64;
    w * g
        .values()
        .iter()
        .map(|v| (v + f * v * v.norm_sqr()).norm_sqr())
        .sum::<f64>()
}

/// `P^N[e^{-iθ} u]`; identity when `θ ≡ 0`.
pub fn phase_substep(space: &SpectralSpace, u: &SpectralState, theta: &RealGrid) -> SpectralState {
    if theta.values().iter().all(|t| *t == 0.0) {
        return u.clone();
    }
    space.project_phase_product(u, theta)
}

/// `‖e^{-iθ} u‖²` before projection, by grid quadrature.
pub fn phase_pre_projection_mass(space: &SpectralSpace, u: &SpectralState, theta: &RealGrid) -> f64 {
    let g = space.to_grid(u);
    let w = 1.0 / (space.n_grid() + 1) as f64;
    w * g
        .values()
        .iter()
        .zip(theta.values())
        .map(|(v, t)| (v * Complex64::from_polar(1.0, -t)).norm_sqr())
        .sum::<f64>()
}

/// Stochastic substep `u ↦ P^N[e^{-i√ε ΔW} u]` for a sampled increment field.
pub fn stoch_substep(
    space: &SpectralSpace,
    u: &SpectralState,
    dw: &RealGrid,
    epsilon: f64,
) -> SpectralState {
    if epsilon == 0.0 {
        return u.clone();
    }
    let s = epsilon.sqrt();
    let theta = RealGrid::new(dw.values().iter().map(|v| s * v).collect());
    phase_substep(space, u, &theta)
}

/// How step sizes are chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum Stepping {
    Adaptive(StepPolicy),
    /// Fixed steps of `ticks` master steps on a `2^master_j` grid.
    Uniform { master_j: u32, ticks: usize },
}

impl Stepping {
    pub fn master_j(&self) -> u32 {
        match self {
            Stepping::Adaptive(p) => p.master_j,
            Stepping::Uniform { master_j, .. } => *master_j,
        }
    }
}

/// What a run keeps besides the final state and the audit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecordOptions {
    pub states: bool,
    pub observables: bool,
}

impl Default for RecordOptions {
    fn default() -> Self {
        Self {
            states: true,
            observables: true,
        }
    }
}

impl RecordOptions {
    pub const FINAL_ONLY: Self = Self {
        states: false,
        observables: false,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepAudit {
    pub t_start: f64,
    pub tau: f64,
    pub ticks: usize,
    pub proposal: Option<StepProposal>,
    pub floor_hit: bool,
    pub clamped_last: bool,
    /// `‖(Id − P^N) e^{-iθ} v‖` of the phase substep.
    pub leakage: f64,
    pub mass_before: f64,
    pub mass_after: f64,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub times: Vec<f64>,
    /// Master-grid index of every entry of `times`.
    pub ticks: Vec<usize>,
    pub step_sizes: Vec<f64>,
    /// States at every accepted time, empty unless requested.
    pub states: Vec<SpectralState>,
    pub final_state: SpectralState,
    pub audit: Vec<StepAudit>,
    pub observables: ObservableSeries,
    pub initial_mass: f64,
    pub sup_mass: f64,
    pub n_grid: usize,
    pub h: f64,
    pub tau_min: Option<f64>,
    pub step_bound: Option<f64>,
}

impl RunRecord {
    /// `M_T`.
    pub fn n_steps(&self) -> usize {
        self.step_sizes.len()
    }

    pub fn floor_hits(&self) -> usize {
        self.audit.iter().filter(|a| a.floor_hit).count()
    }

    pub fn floor_hit_fraction(&self) -> f64 {
        if self.audit.is_empty() {
            0.0
        } else {
            self.floor_hits() as f64 / self.audit.len() as f64
        }
    }

    pub fn clamped_count(&self) -> usize {
        self.audit.iter().filter(|a| a.clamped_last).count()
    }

    pub fn max_leakage(&self) -> f64 {
        self.audit.iter().map(|a| a.leakage).fold(0.0, f64::max)
    }

    /// `sup_t ‖u(t)‖² − ‖u_0‖²`, nonnegative since `t = 0` is included.
    pub fn sup_mass_deviation(&self) -> f64 {
        self.sup_mass - self.initial_mass
    }

    /// `M_T ≤ T/(τ_min δ)`, or `None` for uniform runs and runs with floor hits.
    pub fn within_step_bound(&self) -> Option<bool> {
        match self.step_bound {
            Some(b) if self.floor_hits() == 0 => Some(self.n_steps() as f64 <= b),
            _ => None,
        }
    }
}

/// Reusable integrator: one spectral space and noise table for many paths.
#[derive(Clone, Debug)]
pub struct Integrator {
    params: ModelParams,
    stepping: Stepping,
    model: NoiseModel,
    space: SpectralSpace,
    projector: NoiseProjector,
    options: RecordOptions,
}

/// Collocation grid size for `N` modes driven by a `K`-mode phase field.
pub fn phase_grid_size(n_modes: usize, k_modes: usize) -> usize {
    SpectralSpace::DEALIAS_FACTOR * n_modes.max(k_modes)
}

impl Integrator {
    pub fn new(params: ModelParams, stepping: Stepping, model: NoiseModel) -> Result<Self> {
        match &stepping {
            Stepping::Adaptive(p) => p.validate()?,
            Stepping::Uniform { master_j, ticks } => {
                if *master_j < 1 || *master_j > MAX_LEVELS {
                    return Err(Error::config("policy.master_J", "out of range"));
                }
                if *ticks == 0 {
                    return Err(Error::Domain("uniform step must span at least one tick".into()));
                }
            }
        }
        let n_grid = phase_grid_size(params.n_modes(), model.k_modes());
        let space = SpectralSpace::new(params.n_modes(), n_grid)?;
        let projector = NoiseProjector::new(&model, n_grid);
        Ok(Self {
            params,
            stepping,
            model,
            space,
            projector,
            options: RecordOptions::default(),
        })
    }

    pub fn with_options(mut self, options: RecordOptions) -> Self {
        self.options = options;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn stepping(&self) -> &Stepping {
        &self.stepping
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn space(&self) -> &SpectralSpace {
        &self.space
    }

    pub fn projector(&self) -> &NoiseProjector {
        &self.projector
    }

    fn check_path(&self, path: &WienerPath) -> Result<()> {
        if path.j_levels() != self.stepping.master_j() {
            return Err(Error::Domain(format!(
                "path has J = {}, stepping uses {}",
                path.j_levels(),
                self.stepping.master_j()
            )));
        }
        if path.k_modes() != self.model.k_modes() {
            return Err(Error::Domain(format!(
                "path has {} modes, noise model has {}",
                path.k_modes(),
                self.model.k_modes()
            )));
        }
        if path.t_final() != self.params.t_final {
            return Err(Error::Domain(format!(
                "path covers [0, {}], model needs [0, {}]",
                path.t_final(),
                self.params.t_final
            )));
        }
        Ok(())
    }

    /// Noise-driven run.
    pub fn run(&self, path: &WienerPath) -> Result<RunRecord> {
        self.run_forced(Some(path), None)
    }

    /// Run with optional noise and optional control. The phase of the
    /// multiplicative substep is `√ε ΔW + ∫ν ds`; absent parts are skipped so
    /// the reductions to the pure cases are exact.
    pub fn run_forced(
        &self,
        path: Option<&WienerPath>,
        control: Option<&Control>,
    ) -> Result<RunRecord> {
        if let Some(p) = path {
            self.check_path(p)?;
        }
        if let Some(c) = control {
            c.check_against(self.params.t_final, self.model.k_modes())?;
        }
        let t_final = self.params.t_final;
        let n = 1usize << self.stepping.master_j();
        let h = t_final / n as f64;
        let lam = self.params.lambda;
        let mut u = self.params.initial.clone();
        let mass0 = u.mass();

        let (tau_min, step_bound, envelope, runaway) = match &self.stepping {
            Stepping::Adaptive(p) => {
                let bound = p.step_bound(t_final, mass0);
                (
                    Some(p.tau_min(t_final, mass0)),
                    Some(bound),
                    Some((p.l1 * t_final).exp() * mass0),
                    Some((10.0 * bound).ceil() as usize),
                )
            }
            Stepping::Uniform { .. } => (None, None, None, None),
        };

        let mut rec = RunRecord {
            times: vec![0.0],
            ticks: vec![0],
            step_sizes: Vec::new(),
            states: Vec::new(),
            final_state: u.clone(),
            audit: Vec::new(),
            observables: ObservableSeries::default(),
            initial_mass: mass0,
            sup_mass: mass0,
            n_grid: self.space.n_grid(),
            h,
            tau_min,
            step_bound,
        };
        if self.options.states {
            rec.states.push(u.clone());
        }
        if self.options.observables {
            rec.observables.push(0.0, &u, &self.space, lam);
        }

        let mut i = 0usize;
        let mut floor_seen = false;
        while i < n {
            let (want, proposal) = match &self.stepping {
                Stepping::Adaptive(p) => {
                    let prop = propose_step(&self.space, &u, p, &self.params);
                    (prop.ticks, Some(prop))
                }
                Stepping::Uniform { ticks, .. } => (*ticks, None),
            };
            let ticks = want.min(n - i);
            let clamped_last = ticks < want;
            let tau = ticks as f64 * h;
            let floor_hit = proposal.is_some_and(|p| p.floor_hit);
            let t_start = i as f64 * h;

            let mass_before = u.mass();
            let ud = det_substep(&self.space, &u, tau, lam);
            let mass_mid = ud.mass();
            let next = match self.phase(path, control, i, i + ticks) {
                Some(theta) => phase_substep(&self.space, &ud, &theta),
                None => ud,
            };
            let mass_after = next.mass();
            let leakage = (mass_mid - mass_after).max(0.0).sqrt();

            i += ticks;
            let t = if i == n { t_final } else { i as f64 * h };
            let step = rec.step_sizes.len();

            if !next.is_finite() {
                return Err(Error::Invariant {
                    step,
                    time: t,
                    detail: "non-finite coefficient".into(),
                });
            }
            if let (Stepping::Adaptive(p), false) = (&self.stepping, floor_hit) {
                let bound = (1.0 + p.l1 * tau) * mass_before * (1.0 + MASS_SLACK);
                if mass_after > bound {
                    return Err(Error::Invariant {
                        step,
                        time: t,
                        detail: format!(
                            "step mass {mass_after:e} exceeds (1 + L1 τ) bound {bound:e}"
                        ),
                    });
                }
            }
            floor_seen |= floor_hit;
            if let (Some(env), false) = (envelope, floor_seen) {
                if mass_after > env * (1.0 + MASS_SLACK) {
                    return Err(Error::Invariant {
                        step,
                        time: t,
                        detail: format!("mass {mass_after:e} exceeds e^(L1 T) envelope {env:e}"),
                    });
                }
            }

            rec.audit.push(StepAudit {
                t_start,
                tau,
                ticks,
                proposal,
                floor_hit,
                clamped_last,
                leakage,
                mass_before,
                mass_after,
            });
            rec.times.push(t);
            rec.ticks.push(i);
            rec.step_sizes.push(tau);
            rec.sup_mass = rec.sup_mass.max(mass_after);
            if self.options.states {
                rec.states.push(next.clone());
            }
            if self.options.observables {
                rec.observables.push(t, &next, &self.space, lam);
            }
            if let Some(limit) = runaway {
                if rec.step_sizes.len() > limit {
                    return Err(Error::Runaway { limit });
                }
            }
            u = next;
        }
        rec.final_state = u;
        Ok(rec)
    }

    /// Phase field over master ticks `[i_from, i_to)`, `None` when it vanishes.
    fn phase(
        &self,
        path: Option<&WienerPath>,
        control: Option<&Control>,
        i_from: usize,
        i_to: usize,
    ) -> Option<RealGrid> {
        let noise = match path {
            Some(p) if self.params.epsilon > 0.0 => {
                let db = p
                    .brownian_increment(i_from, i_to)
                    .expect("step interval lies inside the master grid");
                let s = self.params.epsilon.sqrt();
                let mut f = self.projector.field(&db);
                for v in f.values_mut() {
                    *v *= s;
                }
                Some(f)
            }
            _ => None,
        };
        let h = self.params.t_final / (1usize << self.stepping.master_j()) as f64;
        let ctrl = control.and_then(|c| {
            c.integrated_weights(i_from as f64 * h, i_to as f64 * h, self.model.k_modes())
                .map(|w| self.projector.field(&w))
        });
        match (noise, ctrl) {
            (Some(mut a), Some(b)) => {
                for (x, y) in a.values_mut().iter_mut().zip(b.values()) {
                    *x += y;
                }
                Some(a)
            }
            (a, None) => a,
            (None, b) => b,
        }
    }
}

/// Adaptive run of the full scheme along `path`.
pub fn integrate(
    params: &ModelParams,
    policy: &StepPolicy,
    path: &WienerPath,
    model: &NoiseModel,
) -> Result<RunRecord> {
    Integrator::new(params.clone(), Stepping::Adaptive(policy.clone()), model.clone())?.run(path)
}
