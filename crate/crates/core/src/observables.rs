//! Monitored functionals: mass, Hamiltonian, the `H²` functional `f`, and
//! Monte Carlo exponential moments of the Hamiltonian.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scheme::{Nonlinearity, RunRecord};
use crate::spectral::{lambda, Norms, SpectralSpace, SpectralState};
use crate::stats::{log_mean_exp, percentile_interval, resample_indices};

/// `‖u‖²_{L²}`.
pub fn mass(u: &SpectralState) -> f64 {
    u.mass()
}

pub(crate) fn hamiltonian_from_norms(nm: &Norms, lam: Nonlinearity) -> f64 {
    0.5 * nm.h1_sq - 0.25 * lam.sign() * nm.l4_4
}

/// `H(u) = ½‖∇u‖² − (λ/4)‖u‖⁴_{L⁴}`.
pub fn hamiltonian(space: &SpectralSpace, u: &SpectralState, lam: Nonlinearity) -> f64 {
    hamiltonian_from_norms(&space.norms(u), lam)
}

/// `f(u) = ‖Δu‖² + λ⟨Δu, |u|²u⟩`.
///
/// `Δu` has coefficients `−λ_k c_k` in `H_N`, so the inner product only sees
/// `P^N(|u|²u)`.
pub fn f_functional(space: &SpectralSpace, u: &SpectralState, lam: Nonlinearity) -> f64 {
    let nm = space.norms(u);
    f_from_parts(u, &space.projected_cubic(u), nm.h2_sq, lam)
}

fn f_from_parts(u: &SpectralState, cub: &SpectralState, h2_sq: f64, lam: Nonlinearity) -> f64 {
    let inner: f64 = u
        .coeffs()
        .iter()
        .zip(cub.coeffs())
        .enumerate()
        .map(|(i, (c, g))| -lambda(i + 1) * (c.conj() * g).re)
        .sum();
    h2_sq + lam.sign() * inner
}

/// Observables along a trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub hamiltonian: Vec<f64>,
    pub f_value: Vec<f64>,
    pub h1_sq: Vec<f64>,
    pub h2_sq: Vec<f64>,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, u: &SpectralState, space: &SpectralSpace, lam: Nonlinearity) {
        let nm = space.norms(u);
        let cub = space.projected_cubic(u);
        self.times.push(t);
        self.mass.push(nm.l2_sq);
        self.hamiltonian.push(hamiltonian_from_norms(&nm, lam));
        self.f_value.push(f_from_parts(u, &cub, nm.h2_sq, lam));
        self.h1_sq.push(nm.h1_sq);
        self.h2_sq.push(nm.h2_sq);
    }

    /// CSV with columns `t, mass, hamiltonian, f, h1_sq, h2_sq`; floats with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "mass", "hamiltonian", "f", "h1_sq", "h2_sq"])?;
        for i in 0..self.len() {
            let row = [
                self.times[i],
                self.mass[i],
                self.hamiltonian[i],
                self.f_value[i],
                self.h1_sq[i],
                self.h2_sq[i],
            ];
            w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
        }
        w.flush()
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

/// Value of a right-continuous step function `(times, values)` at `t`.
fn step_value(times: &[f64], values: &[f64], t: f64) -> f64 {
    let idx = times.partition_point(|&s| s <= t);
    values[idx.saturating_sub(1)]
}

/// Empirical `E[exp{H(u(t)) / e^{αt}}]` across samples, kept in log space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpMomentSeries {
    pub alpha: f64,
    pub n_samples: usize,
    pub times: Vec<f64>,
    pub log_mean: Vec<f64>,
    /// Pointwise bootstrap band, log space.
    pub log_ci: Vec<(f64, f64)>,
    pub sup_log_mean: f64,
    pub sup_time: f64,
    /// Bootstrap interval of `sup_t` of the mean, log space.
    pub sup_log_ci: (f64, f64),
}

impl ExpMomentSeries {
    /// `exp(sup_log_mean)`; may be `+∞` when the moment is too large for `f64`.
    pub fn sup_mean(&self) -> f64 {
        self.sup_log_mean.exp()
    }

    /// Width of the bootstrap interval of the supremum, in linear scale.
    pub fn sup_ci_width(&self) -> f64 {
        self.sup_log_ci.1.exp() - self.sup_log_ci.0.exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BootstrapSpec {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        Self {
            resamples: 1000,
            level: 0.95,
            seed: 0x5eed,
        }
    }
}

/// Exponential-moment estimator on common evaluation times.
///
/// Each trajectory's Hamiltonian is read as a step function of its accepted
/// times, so adaptive runs with different step sequences share one grid.
pub fn exp_moment_estimator(
    samples: &[RunRecord],
    alpha: f64,
    eval_times: &[f64],
    boot: BootstrapSpec,
) -> Result<ExpMomentSeries> {
    if samples.len() < 2 {
        return Err(Error::Domain("exponential moments need at least 2 samples".into()));
    }
    if eval_times.is_empty() {
        return Err(Error::Domain("no evaluation times".into()));
    }
    if let Some(i) = samples.iter().position(|r| r.observables.is_empty()) {
        return Err(Error::Domain(format!("sample {i} recorded no observables")));
    }
    let n = samples.len();
    // exponent[t][s]
    let exponents: Vec<Vec<f64>> = eval_times
        .iter()
        .map(|&t| {
            let scale = (-alpha * t).exp();
            samples
                .iter()
                .map(|r| {
                    step_value(&r.observables.times, &r.observables.hamiltonian, t) * scale
                })
                .collect()
        })
        .collect();
    let log_mean: Vec<f64> = exponents.iter().map(|a| log_mean_exp(a)).collect();
    let (sup_idx, sup_log_mean) = log_mean
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });

    let mut rng = ChaCha8Rng::seed_from_u64(boot.seed);
    let mut pointwise: Vec<Vec<f64>> = vec![Vec::with_capacity(boot.resamples); eval_times.len()];
    let mut sup_draws = Vec::with_capacity(boot.resamples);
    let mut buf = vec![0.0; n];
    for _ in 0..boot.resamples {
        let idx = resample_indices(&mut rng, n);
        let mut sup = f64::NEG_INFINITY;
        for (t, a) in exponents.iter().enumerate() {
            for (b, &i) in buf.iter_mut().zip(&idx) {
                *b = a[i];
            }
            let v = log_mean_exp(&buf);
            pointwise[t].push(v);
            sup = sup.max(v);
        }
        sup_draws.push(sup);
    }
    let log_ci = pointwise
        .into_iter()
        .map(|d| percentile_interval(d, boot.level))
        .collect();
    Ok(ExpMomentSeries {
        alpha,
        n_samples: n,
        times: eval_times.to_vec(),
        log_mean,
        log_ci,
        sup_log_mean,
        sup_time: eval_times[sup_idx],
        sup_log_ci: percentile_interval(sup_draws, boot.level),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{basis_value, grid_points};
    use crate::test_support::{assert_close, random_state};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn mass_examples() {
        let e1 = SpectralState::basis(3, 1).unwrap();
        assert_eq!(mass(&e1), 1.0);
        assert_eq!(mass(&e1.scaled(Complex64::new(2.0, 0.0))), 4.0);
        let u = SpectralState::new(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]).unwrap();
        assert_eq!(mass(&u), 2.0);
    }

    #[test]
    fn hamiltonian_and_f_of_first_mode() {
        let space = SpectralSpace::with_default_grid(5).unwrap();
        let z = SpectralState::zeros(5);
        assert_eq!(hamiltonian(&space, &z, Nonlinearity::Focusing), 0.0);
        assert_eq!(f_functional(&space, &z, Nonlinearity::Focusing), 0.0);
        let e1 = SpectralState::basis(5, 1).unwrap();
        let pi2 = PI * PI;
        assert_close(hamiltonian(&space, &e1, Nonlinearity::Focusing), pi2 / 2.0 - 0.375, 1e-12);
        assert_close(hamiltonian(&space, &e1, Nonlinearity::Defocusing), pi2 / 2.0 + 0.375, 1e-12);
        assert_close(f_functional(&space, &e1, Nonlinearity::Focusing), pi2 * pi2 - 1.5 * pi2, 1e-12);
    }

    /// Dense-grid oracle on 16N points, evaluating Δu and |u|²u pointwise.
    fn dense_oracle(u: &SpectralState, lam: Nonlinearity) -> (f64, f64) {
        let n = u.n_modes();
        let grid = 16 * n;
        let w = 1.0 / (grid + 1) as f64;
        let (mut l4, mut inner) = (0.0, 0.0);
        for x in grid_points(grid) {
            let mut v = Complex64::new(0.0, 0.0);
            let mut lap = Complex64::new(0.0, 0.0);
            for k in 1..=n {
                let e = basis_value(k, x);
                v += u.coeff(k) * e;
                lap -= u.coeff(k) * (lambda(k) * e);
            }
            l4 += w * v.norm_sqr().powi(2);
            inner += w * (lap * (v * v.norm_sqr()).conj()).re;
        }
        let h1: f64 = (1..=n).map(|k| lambda(k) * u.coeff(k).norm_sqr()).sum();
        let h2: f64 = (1..=n).map(|k| lambda(k).powi(2) * u.coeff(k).norm_sqr()).sum();
        (0.5 * h1 - 0.25 * lam.sign() * l4, h2 + lam.sign() * inner)
    }

    #[test]
    fn exp_moment_of_identical_samples_is_pointwise_value() {
        use crate::noise::{NoiseModel, WienerPath};
        use crate::scheme::{integrate, InitialDatum, ModelParams, StepPolicy};
        let p = ModelParams::new(
            Nonlinearity::Defocusing,
            0.0,
            0.25,
            InitialDatum::GaussModes.state(8).unwrap(),
        )
        .unwrap();
        let model = NoiseModel::power_law(4, 6.0).unwrap();
        let policy = StepPolicy {
            delta: 0.125,
            master_j: 6,
            ..StepPolicy::default()
        };
        let path = WienerPath::sample(1, 0, 6, 4, 0.25).unwrap();
        let rec = integrate(&p, &policy, &path, &model).unwrap();
        let runs = vec![rec.clone(), rec.clone(), rec.clone()];
        let est = exp_moment_estimator(&runs, 1.0, &rec.times, BootstrapSpec::default()).unwrap();
        for (i, t) in rec.times.iter().enumerate() {
            let want = rec.observables.hamiltonian[i] * (-t).exp();
            assert!((est.log_mean[i] - want).abs() < 1e-12);
            assert!((est.log_ci[i].0 - want).abs() < 1e-12 && (est.log_ci[i].1 - want).abs() < 1e-12);
        }
        assert!(exp_moment_estimator(&runs[..1], 1.0, &rec.times, BootstrapSpec::default()).is_err());
    }

    #[test]
    fn step_function_lookup() {
        let t = [0.0, 0.5, 1.0];
        let v = [1.0, 2.0, 3.0];
        assert_eq!(step_value(&t, &v, 0.0), 1.0);
        assert_eq!(step_value(&t, &v, 0.49), 1.0);
        assert_eq!(step_value(&t, &v, 0.5), 2.0);
        assert_eq!(step_value(&t, &v, 1.0), 3.0);
    }

    proptest! {
        #[test]
        fn functionals_match_dense_oracle(seed in any::<u64>(), n in 1usize..=16, amp in 0.1f64..2.0) {
            use rand::SeedableRng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_state(&mut rng, n, amp);
            let space = SpectralSpace::with_default_grid(n).unwrap();
            for lam in [Nonlinearity::Focusing, Nonlinearity::Defocusing] {
                let (h_ref, f_ref) = dense_oracle(&u, lam);
                let h = hamiltonian(&space, &u, lam);
                let f = f_functional(&space, &u, lam);
                prop_assert!((h - h_ref).abs() <= 1e-8 * h_ref.abs().max(1e-300) + 1e-14);
                prop_assert!((f - f_ref).abs() <= 1e-8 * f_ref.abs().max(1e-300) + 1e-12);
            }
            let g = space.to_grid(&u);
            prop_assert!((g.quadrature_mass() - mass(&u)).abs() <= 1e-10 * mass(&u));
        }

        #[test]
        fn f_lower_bound(seed in any::<u64>(), n in 1usize..=16, amp in 0.1f64..4.0) {
            use rand::SeedableRng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_state(&mut rng, n, amp);
            let space = SpectralSpace::with_default_grid(n).unwrap();
            let nm = space.norms(&u);
            for lam in [Nonlinearity::Focusing, Nonlinearity::Defocusing] {
                let f = f_functional(&space, &u, lam);
                let lower = nm.h2_sq - nm.h2_sq.sqrt() * nm.l6_6.sqrt();
                prop_assert!(f >= lower - 1e-8 * nm.h2_sq.max(1.0));
            }
        }
    }
}
