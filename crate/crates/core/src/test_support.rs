use num_complex::Complex64;
use rand::Rng;

use crate::spectral::SpectralState;

/// Composite Simpson rule on [0, 1] with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = 1.0 / n as f64;
    let mut acc = f(0.0) + f(1.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0
}

pub fn assert_close(got: f64, want: f64, rel: f64) {
    let tol = rel * want.abs().max(1.0);
    assert!(
        (got - want).abs() <= tol,
        "got {got:e}, want {want:e} (tol {tol:e})"
    );
}

/// Random state with coefficients decaying like `1/k²`, scaled by `amp`.
pub fn random_state(rng: &mut impl Rng, n: usize, amp: f64) -> SpectralState {
    let coeffs = (1..=n)
        .map(|k| {
            let s = amp / (k * k) as f64;
            Complex64::new(
                s * rng.random_range(-1.0..1.0),
                s * rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    SpectralState::new(coeffs).unwrap()
}
