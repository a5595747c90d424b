//! Dirichlet sine spectral space on (0, 1).
//!
//! A function in `H_N` is stored by its coefficients on the orthonormal basis
//! `e_k(x) = √2 sin(kπx)`, `k = 1..=N`. Pointwise work happens on the interior
//! collocation grid `x_j = j / (n_grid + 1)`, `j = 1..=n_grid`, whose
//! rectangle rule (weight `1 / (n_grid + 1)`) is exact for every sine or cosine
//! polynomial of degree below `2 (n_grid + 1)`. With `n_grid >= 4N` this makes
//! the cubic nonlinearity and the `L^4`/`L^6` norms alias-free.
//!
//! Transforms run through a length `2 (n_grid + 1)` FFT. The `*_direct`
//! variants evaluate the same sums by brute force and serve as the reference.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Eigenvalue `λ_k = k²π²` of the Dirichlet negative Laplacian on (0, 1).
pub fn eigenvalue(k: i64) -> Result<f64> {
    if k < 1 {
        return Err(Error::Domain(format!("eigenvalue index must be >= 1, got {k}")));
    }
    Ok(lambda(k as usize))
}

#[inline]
pub(crate) fn lambda(k: usize) -> f64 {
    let kp = k as f64 * PI;
    kp * kp
}

/// `e_k(x) = √2 sin(kπx)`.
#[inline]
pub fn basis_value(k: usize, x: f64) -> f64 {
    SQRT_2 * (k as f64 * PI * x).sin()
}

/// Interior collocation points `x_j = j / (n_grid + 1)`.
pub fn grid_points(n_grid: usize) -> Vec<f64> {
    let m = (n_grid + 1) as f64;
    (1..=n_grid).map(|j| j as f64 / m).collect()
}

/// Coefficient vector of a function in `H_N`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct SpectralState {
    coeffs: Vec<Complex64>,
}

impl SpectralState {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Domain("a spectral state needs at least one mode".into()));
        }
        if let Some(k) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("coefficient {} is not finite", k + 1)));
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(n_modes: usize) -> Self {
        assert!(n_modes > 0, "a spectral state needs at least one mode");
        Self {
            coeffs: vec![ZERO; n_modes],
        }
    }

    /// The basis function `e_k` in `H_N`.
    pub fn basis(n_modes: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n_modes {
            return Err(Error::Domain(format!(
                "basis index {k} outside 1..={n_modes}"
            )));
        }
        let mut s = Self::zeros(n_modes);
        s.coeffs[k - 1] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub(crate) fn from_vec(coeffs: Vec<Complex64>) -> Self {
        debug_assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient of `e_k`, 1-based.
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs[k - 1]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// `‖u‖²_{L²} = Σ|c_k|²` (Parseval).
    pub fn mass(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Zero-extends or truncates (`P^n`) to `n` modes.
    pub fn resized(&self, n: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(n, ZERO);
        Self::from_vec(coeffs)
    }

    /// `L²` distance, treating missing modes as zero.
    pub fn distance(&self, other: &Self) -> f64 {
        let n = self.n_modes().max(other.n_modes());
        (0..n)
            .map(|i| {
                let a = self.coeffs.get(i).copied().unwrap_or(ZERO);
                let b = other.coeffs.get(i).copied().unwrap_or(ZERO);
                (a - b).norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::from_vec(self.coeffs.iter().map(|c| c * factor).collect())
    }
}

impl fmt::Debug for SpectralState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralState")
            .field("n_modes", &self.n_modes())
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl TryFrom<Vec<[f64; 2]>> for SpectralState {
    type Error = Error;

    fn try_from(pairs: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

impl From<SpectralState> for Vec<[f64; 2]> {
    fn from(s: SpectralState) -> Self {
        s.coeffs.into_iter().map(|c| [c.re, c.im]).collect()
    }
}

/// `S^N(t) = P^N e^{itΔ}`: `c_k ↦ e^{-iλ_k t} c_k`.
pub fn apply_semigroup(u: &SpectralState, t: f64) -> SpectralState {
    let coeffs = u
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c * Complex64::from_polar(1.0, -lambda(i + 1) * t))
        .collect();
    SpectralState::from_vec(coeffs)
}

/// Complex samples on the interior collocation grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridBuffer {
    values: Vec<Complex64>,
}

impl GridBuffer {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn n_grid(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Rectangle-rule `∫|g|² dx`.
    pub fn quadrature_mass(&self) -> f64 {
        let w = 1.0 / (self.values.len() + 1) as f64;
        w * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }
}

/// Real samples on the interior collocation grid (noise increments, `F_Q`, phases).
#[derive(Clone, Debug, PartialEq)]
pub struct RealGrid {
    values: Vec<f64>,
}

impl RealGrid {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n_grid: usize) -> Self {
        Self {
            values: vec![0.0; n_grid],
        }
    }

    pub fn n_grid(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Rectangle-rule `∫ f dx`.
    pub fn integral(&self) -> f64 {
        let w = 1.0 / (self.values.len() + 1) as f64;
        w * self.values.iter().sum::<f64>()
    }
}

/// Norm bundle of a state. `*_sq`, `l4_4`, `l6_6` are powers as named.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Norms {
    pub l2_sq: f64,
    pub h1_sq: f64,
    pub h2_sq: f64,
    pub l4_4: f64,
    pub l6_6: f64,
    pub linf: f64,
}

/// Transform workspace for a fixed `(N, n_grid)` pair.
///
/// Cheap to share across threads; every method takes `&self`.
#[derive(Clone)]
pub struct SpectralSpace {
    n_modes: usize,
    n_grid: usize,
    fft: Arc<dyn Fft<f64>>,
    // Cosine-to-sine transfer entries `∫₀¹ cos(jπx) e_k(x) dx` for the
    // parity-matching `j`, row k packed contiguously.
    transfer: Vec<Vec<f64>>,
}

impl fmt::Debug for SpectralSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralSpace")
            .field("n_modes", &self.n_modes)
            .field("n_grid", &self.n_grid)
            .finish()
    }
}

impl SpectralSpace {
    pub const DEALIAS_FACTOR: usize = 4;

    pub fn new(n_modes: usize, n_grid: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::Domain("spectral space needs at least one mode".into()));
        }
        let required = Self::DEALIAS_FACTOR * n_modes;
        if n_grid < required {
            return Err(Error::Dealiasing {
                n_grid,
                n_modes,
                required,
            });
        }
        let m = n_grid + 1;
        let fft = FftPlanner::new().plan_fft_forward(2 * m);
        let transfer = (1..=n_modes)
            .map(|k| {
                let kf = k as f64;
                (((k + 1) % 2)..=m)
                    .step_by(2)
                    .map(|j| {
                        let jf = j as f64;
                        2.0 * SQRT_2 * kf / (PI * (kf * kf - jf * jf))
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            n_modes,
            n_grid,
            fft,
            transfer,
        })
    }

    /// Space on the default `4N` grid.
    pub fn with_default_grid(n_modes: usize) -> Result<Self> {
        Self::new(n_modes, Self::DEALIAS_FACTOR * n_modes)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    pub fn points(&self) -> Vec<f64> {
        grid_points(self.n_grid)
    }

    fn check_state(&self, u: &SpectralState) {
        assert_eq!(
            u.n_modes(),
            self.n_modes,
            "state has {} modes, space expects {}",
            u.n_modes(),
            self.n_modes
        );
    }

    fn check_grid(&self, len: usize) {
        assert_eq!(
            len, self.n_grid,
            "grid buffer has {len} points, space expects {}",
            self.n_grid
        );
    }

    /// `S_l = Σ_{j=1}^{M-1} data_j sin(πlj/M)` for `l = 1..M-1`; short input is zero-padded.
    fn sine_sums(&self, data: &[Complex64]) -> Vec<Complex64> {
        let m = self.n_grid + 1;
        let mut buf = vec![ZERO; 2 * m];
        for (j, &v) in data.iter().enumerate() {
            buf[j + 1] = v;
            buf[2 * m - j - 1] = -v;
        }
        self.fft.process(&mut buf);
        let half_i = Complex64::new(0.0, 0.5);
        buf[1..m].iter().map(|y| y * half_i).collect()
    }

    /// `C_j = Σ_{i=1}^{M-1} data_i cos(πji/M)` for `j = 0..=M`.
    fn cosine_sums(&self, data: &[Complex64]) -> Vec<Complex64> {
        let m = self.n_grid + 1;
        let mut buf = vec![ZERO; 2 * m];
        for (i, &v) in data.iter().enumerate() {
            buf[i + 1] = v;
            buf[2 * m - i - 1] = v;
        }
        self.fft.process(&mut buf);
        buf[..=m].iter().map(|y| y * 0.5).collect()
    }

    /// Evaluates `Σ c_k e_k(x_j)` on the grid.
    pub fn to_grid(&self, u: &SpectralState) -> GridBuffer {
        self.check_state(u);
        let values = self
            .sine_sums(&u.coeffs)
            .into_iter()
            .map(|s| s * SQRT_2)
            .collect();
        GridBuffer { values }
    }

    /// Discrete `⟨g, e_k⟩`, `k = 1..=N`.
    pub fn from_grid(&self, g: &GridBuffer) -> SpectralState {
        self.check_grid(g.n_grid());
        let scale = SQRT_2 / (self.n_grid + 1) as f64;
        let sums = self.sine_sums(&g.values);
        SpectralState::from_vec(sums[..self.n_modes].iter().map(|s| s * scale).collect())
    }

    /// Brute-force reference for [`Self::to_grid`].
    pub fn to_grid_direct(&self, u: &SpectralState) -> GridBuffer {
        self.check_state(u);
        let x = self.points();
        let values = x
            .iter()
            .map(|&xj| {
                u.coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * basis_value(i + 1, xj))
                    .sum()
            })
            .collect();
        GridBuffer { values }
    }

    /// Brute-force reference for [`Self::from_grid`].
    pub fn from_grid_direct(&self, g: &GridBuffer) -> SpectralState {
        self.check_grid(g.n_grid());
        let x = self.points();
        let w = 1.0 / (self.n_grid + 1) as f64;
        let coeffs = (1..=self.n_modes)
            .map(|k| {
                w * g
                    .values
                    .iter()
                    .zip(&x)
                    .map(|(v, &xj)| v * basis_value(k, xj))
                    .sum::<Complex64>()
            })
            .collect();
        SpectralState::from_vec(coeffs)
    }

    /// `P^N(|u|²u)`, alias-free on a grid of at least `4N` points.
    pub fn projected_cubic(&self, u: &SpectralState) -> SpectralState {
        let mut g = self.to_grid(u);
        for v in g.values.iter_mut() {
            *v *= v.norm_sqr();
        }
        self.from_grid(&g)
    }

    pub fn norms(&self, u: &SpectralState) -> Norms {
        let (mut l2, mut h1, mut h2) = (0.0, 0.0, 0.0);
        for (i, c) in u.coeffs.iter().enumerate() {
            let a = c.norm_sqr();
            let lam = lambda(i + 1);
            l2 += a;
            h1 += lam * a;
            h2 += lam * lam * a;
        }
        let g = self.to_grid(u);
        let w = 1.0 / (self.n_grid + 1) as f64;
        let (mut l4, mut l6, mut linf) = (0.0, 0.0, 0.0f64);
        for v in &g.values {
            let a = v.norm_sqr();
            l4 += a * a;
            l6 += a * a * a;
            linf = linf.max(a);
        }
        Norms {
            l2_sq: l2,
            h1_sq: h1,
            h2_sq: h2,
            l4_4: w * l4,
            l6_6: w * l6,
            linf: linf.sqrt(),
        }
    }

    /// `P^N[e^{-iθ} u]` for a real phase field θ sampled on the grid.
    ///
    /// The product is split as `u cos θ - i u sin θ`. The first term is odd and
    /// analytic, so the sine transform resolves it spectrally. The second is
    /// even, its odd extension has boundary kinks, and the grid sine transform
    /// would alias them. It is expanded in cosines instead and mapped to the
    /// sine basis through the exact integrals `∫₀¹ cos(jπx) e_k(x) dx`. The
    /// result is the continuous `L²` projection up to round-off, provided the
    /// grid resolves the phase.
    pub fn project_phase_product(&self, u: &SpectralState, theta: &RealGrid) -> SpectralState {
        self.check_grid(theta.n_grid());
        let g = self.to_grid(u);
        let (odd, even): (Vec<Complex64>, Vec<Complex64>) = g
            .values
            .iter()
            .zip(&theta.values)
            .map(|(v, &th)| {
                let (s, c) = th.sin_cos();
                (v * c, v * s)
            })
            .unzip();
        let odd_part = self.from_grid(&GridBuffer { values: odd });
        let cos_coeffs = self.cosine_coefficients(&self.cosine_sums(&even));
        self.combine_phase_parts(odd_part, &cos_coeffs)
    }

    /// Brute-force reference for [`Self::project_phase_product`].
    pub fn project_phase_product_direct(
        &self,
        u: &SpectralState,
        theta: &RealGrid,
    ) -> SpectralState {
        self.check_grid(theta.n_grid());
        let g = self.to_grid_direct(u);
        let m = self.n_grid + 1;
        let mut odd = Vec::with_capacity(self.n_grid);
        let mut even = Vec::with_capacity(self.n_grid);
        for (v, &th) in g.values.iter().zip(&theta.values) {
            odd.push(v * th.cos());
            even.push(v * th.sin());
        }
        let odd_part = self.from_grid_direct(&GridBuffer { values: odd });
        let sums: Vec<Complex64> = (0..=m)
            .map(|j| {
                even.iter()
                    .enumerate()
                    .map(|(i, v)| v * (PI * (j * (i + 1)) as f64 / m as f64).cos())
                    .sum()
            })
            .collect();
        let cos_coeffs = self.cosine_coefficients(&sums);
        let coeffs = (1..=self.n_modes)
            .map(|k| {
                let kf = k as f64;
                let even_k: Complex64 = cos_coeffs
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| (j + k) % 2 == 1)
                    .map(|(j, b)| {
                        let jf = j as f64;
                        b * (2.0 * SQRT_2 * kf / (PI * (kf * kf - jf * jf)))
                    })
                    .sum();
                odd_part.coeffs[k - 1] - Complex64::i() * even_k
            })
            .collect();
        SpectralState::from_vec(coeffs)
    }

    /// Interpolating cosine-series coefficients `b_0..=b_M` from the sums `C_j`.
    fn cosine_coefficients(&self, sums: &[Complex64]) -> Vec<Complex64> {
        let m = self.n_grid + 1;
        let scale = 2.0 / m as f64;
        let mut b: Vec<Complex64> = sums.iter().map(|c| c * scale).collect();
        b[0] *= 0.5;
        b[m] *= 0.5;
        b
    }

    fn combine_phase_parts(&self, odd_part: SpectralState, b: &[Complex64]) -> SpectralState {
        let coeffs = odd_part
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, odd)| {
                let k = i + 1;
                let even_k: Complex64 = self.transfer[i]
                    .iter()
                    .zip(b[((k + 1) % 2)..].iter().step_by(2))
                    .map(|(t, bj)| bj * t)
                    .sum();
                odd - Complex64::i() * even_k
            })
            .collect();
        SpectralState::from_vec(coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{assert_close, random_state, simpson};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigenvalues() {
        assert_eq!(eigenvalue(1).unwrap(), PI * PI);
        assert_close(eigenvalue(2).unwrap(), 4.0 * PI * PI, 1e-15);
        assert_close(eigenvalue(10).unwrap(), 100.0 * PI * PI, 1e-15);
        assert!(matches!(eigenvalue(0), Err(Error::Domain(_))));
        assert!(matches!(eigenvalue(-3), Err(Error::Domain(_))));
    }

    #[test]
    fn semigroup_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_state(&mut rng, 6, 1.0);
        assert_eq!(apply_semigroup(&u, 0.0), u);

        let e1 = SpectralState::basis(4, 1).unwrap();
        assert_close(apply_semigroup(&e1, 0.37).coeff(1).norm(), 1.0, 1e-15);

        let e2 = SpectralState::basis(4, 2).unwrap();
        let got = apply_semigroup(&e2, 0.1).coeff(2);
        let want = Complex64::from_polar(1.0, -0.4 * PI * PI);
        assert!((got - want).norm() < 1e-14, "{got} vs {want}");
    }

    #[test]
    fn rejects_non_finite_and_coarse_grids() {
        assert!(SpectralState::new(vec![Complex64::new(f64::NAN, 0.0)]).is_err());
        assert!(SpectralState::new(vec![]).is_err());
        assert!(matches!(
            SpectralSpace::new(8, 31),
            Err(Error::Dealiasing { required: 32, .. })
        ));
    }

    #[test]
    fn transform_examples() {
        let space = SpectralSpace::with_default_grid(5).unwrap();
        let zero = SpectralState::zeros(5);
        let g = space.to_grid(&zero);
        assert!(g.values().iter().all(|v| *v == ZERO));
        assert_eq!(space.from_grid(&g), zero);

        let e1 = SpectralState::basis(5, 1).unwrap();
        let g = space.to_grid(&e1);
        for (v, x) in g.values().iter().zip(space.points()) {
            assert!((v - SQRT_2 * (PI * x).sin()).norm() < 1e-14);
        }
        // dense quadrature of ⟨√2 sin πx, e_k⟩
        let back = space.from_grid(&g);
        for k in 1..=5 {
            let oracle = simpson(|x| 2.0 * (PI * x).sin() * (k as f64 * PI * x).sin(), 20_000);
            assert!((back.coeff(k).re - oracle).abs() < 1e-12);
            assert!(back.coeff(k).im.abs() < 1e-12);
        }

        let mut u = SpectralState::zeros(5);
        u.coeffs[0] = Complex64::new(2.0, 1.0);
        let rt = space.from_grid(&space.to_grid(&u));
        assert!(rt.distance(&u) < 1e-12 * 5f64.sqrt());
    }

    #[test]
    fn fast_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, grid) in &[(1, 4), (3, 12), (7, 40), (16, 64)] {
            let space = SpectralSpace::new(n, grid).unwrap();
            let u = random_state(&mut rng, n, 1.0);
            let fast = space.to_grid(&u);
            let slow = space.to_grid_direct(&u);
            for (a, b) in fast.values().iter().zip(slow.values()) {
                assert!((a - b).norm() < 1e-12);
            }
            let back_fast = space.from_grid(&fast);
            let back_slow = space.from_grid_direct(&slow);
            assert!(back_fast.distance(&back_slow) < 1e-12);
        }
    }

    #[test]
    fn projected_cubic_of_first_mode() {
        for n in [3, 4, 9] {
            let space = SpectralSpace::with_default_grid(n).unwrap();
            let cub = space.projected_cubic(&SpectralState::basis(n, 1).unwrap());
            for k in 1..=n {
                let want = match k {
                    1 => 1.5,
                    3 => -0.5,
                    _ => 0.0,
                };
                assert!((cub.coeff(k) - Complex64::new(want, 0.0)).norm() < 1e-12, "k={k}");
            }
        }
        let space = SpectralSpace::with_default_grid(1).unwrap();
        let cub = space.projected_cubic(&SpectralState::basis(1, 1).unwrap());
        assert_eq!(cub.n_modes(), 1);
        assert!((cub.coeff(1) - Complex64::new(1.5, 0.0)).norm() < 1e-12);

        let space = SpectralSpace::with_default_grid(4).unwrap();
        assert_eq!(
            space.projected_cubic(&SpectralState::zeros(4)),
            SpectralState::zeros(4)
        );
    }

    #[test]
    fn norms_of_first_mode() {
        let space = SpectralSpace::with_default_grid(6).unwrap();
        let nm = space.norms(&SpectralState::basis(6, 1).unwrap());
        assert_close(nm.l2_sq, 1.0, 1e-15);
        assert_close(nm.h1_sq, PI * PI, 1e-14);
        assert_close(nm.h2_sq, PI.powi(4), 1e-14);
        assert_close(nm.l4_4, 1.5, 1e-13);
        assert_close(nm.l6_6, 2.5, 1e-13);
        // oracles by dense quadrature
        assert_close(simpson(|x| (SQRT_2 * (PI * x).sin()).powi(4), 20_000), 1.5, 1e-12);
        assert_close(simpson(|x| (SQRT_2 * (PI * x).sin()).powi(6), 20_000), 2.5, 1e-12);
        assert!(nm.linf <= SQRT_2 + 1e-12 && nm.linf > 1.4);
    }

    /// Independent `O(N · n_grid)` oracle: evaluate `u` pointwise and take the
    /// rectangle-rule inner products of `|u|²u` directly.
    fn cubic_oracle(u: &SpectralState, n_grid: usize) -> SpectralState {
        let x = grid_points(n_grid);
        let w = 1.0 / (n_grid + 1) as f64;
        let vals: Vec<Complex64> = x
            .iter()
            .map(|&xj| {
                let v: Complex64 = (1..=u.n_modes())
                    .map(|k| u.coeff(k) * basis_value(k, xj))
                    .sum();
                v * v.norm_sqr()
            })
            .collect();
        let coeffs = (1..=u.n_modes())
            .map(|k| {
                w * vals
                    .iter()
                    .zip(&x)
                    .map(|(v, &xj)| v * basis_value(k, xj))
                    .sum::<Complex64>()
            })
            .collect();
        SpectralState::new(coeffs).unwrap()
    }

    #[test]
    fn phase_projection_matches_dense_quadrature() {
        // u = e_1, θ = w √2 sin(πx)
        for &(n, w) in &[(4usize, 0.05), (8, 0.3), (16, 1.0), (6, 2.5)] {
            let space = SpectralSpace::with_default_grid(n).unwrap();
            let theta = RealGrid::new(space.points().iter().map(|&x| w * basis_value(1, x)).collect());
            let u = SpectralState::basis(n, 1).unwrap();
            let got = space.project_phase_product(&u, &theta);
            for k in 1..=n {
                let re = simpson(
                    |x| (w * basis_value(1, x)).cos() * basis_value(1, x) * basis_value(k, x),
                    40_000,
                );
                let im = simpson(
                    |x| -(w * basis_value(1, x)).sin() * basis_value(1, x) * basis_value(k, x),
                    40_000,
                );
                let diff = (got.coeff(k) - Complex64::new(re, im)).norm();
                assert!(diff < 1e-9, "n={n} w={w} k={k} diff={diff:e}");
            }
            let direct = space.project_phase_product_direct(&u, &theta);
            assert!(got.distance(&direct) < 1e-12);
        }
    }

    #[test]
    fn phase_projection_is_identity_for_zero_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_state(&mut rng, 9, 1.0);
        let space = SpectralSpace::with_default_grid(9).unwrap();
        let out = space.project_phase_product(&u, &RealGrid::zeros(space.n_grid()));
        assert!(out.distance(&u) < 1e-13);
    }

    proptest! {
        #[test]
        fn semigroup_group_law_and_isometry(seed in any::<u64>(), s in -0.05f64..0.05, t in -0.05f64..0.05) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_state(&mut rng, 12, 1.0);
            let a = apply_semigroup(&apply_semigroup(&u, s), t);
            let b = apply_semigroup(&u, s + t);
            prop_assert!(a.distance(&b) <= 1e-12 * u.mass().sqrt());
            let m = apply_semigroup(&u, t).mass();
            prop_assert!((m - u.mass()).abs() <= 1e-13 * u.mass());
        }

        #[test]
        fn transform_round_trip_and_quadrature(seed in any::<u64>(), n in 1usize..24) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_state(&mut rng, n, 2.0);
            let space = SpectralSpace::with_default_grid(n).unwrap();
            let g = space.to_grid(&u);
            let back = space.from_grid(&g);
            prop_assert!(back.distance(&u) <= 1e-12 * u.mass().sqrt().max(1e-300));
            let quad = g.quadrature_mass();
            prop_assert!((quad - u.mass()).abs() <= 1e-10 * u.mass());
        }

        #[test]
        fn cubic_matches_direct_oracle(seed in any::<u64>(), n in 1usize..=16) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_state(&mut rng, n, 1.5);
            let space = SpectralSpace::with_default_grid(n).unwrap();
            let fast = space.projected_cubic(&u);
            let oracle = cubic_oracle(&u, space.n_grid());
            prop_assert!(fast.distance(&oracle) <= 1e-10 * (1.0 + oracle.mass().sqrt()));
        }

        #[test]
        fn phase_projection_never_gains_mass(seed in any::<u64>(), n in 2usize..=16, amp in 0.05f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_state(&mut rng, n, 1.0);
            let space = SpectralSpace::with_default_grid(n).unwrap();
            let phase = random_state(&mut rng, n, amp);
            let theta = RealGrid::new(space.to_grid(&phase).values().iter().map(|v| v.re).collect());
            let out = space.project_phase_product(&u, &theta);
            prop_assert!(out.mass() <= u.mass() * (1.0 + 1e-14));
            let direct = space.project_phase_product_direct(&u, &theta);
            prop_assert!(out.distance(&direct) <= 1e-12 * u.mass().sqrt());
        }
    }
}
