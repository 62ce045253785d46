//! Deterministic random streams.
//!
//! Every Monte Carlo trial owns its own ChaCha8 stream, keyed by the master
//! seed and selected by the trial index. A trial's random numbers therefore do
//! not depend on which worker runs it or in which order trials are scheduled.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Random stream used by a single trial.
pub type TrialRng = ChaCha8Rng;

/// Stream for trial `trial_index` under `master_seed`.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// Complex Wiener increment `dW = (dW1 + i dW2)/sqrt(2)` with `dWk ~ N(0, dt)`,
/// so that `<dW conj(dW)> = dt` and `<dW dW> = 0`.
#[inline]
pub fn complex_wiener_increment<R: Rng + ?Sized>(rng: &mut R, dt: f64) -> Complex64 {
    let scale = (0.5 * dt).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// Fills `out` with independent complex Wiener increments over `dt`.
pub fn fill_wiener_increments<R: Rng + ?Sized>(rng: &mut R, dt: f64, out: &mut [Complex64]) {
    for w in out.iter_mut() {
        *w = complex_wiener_increment(rng, dt);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| trial_rng(7, 3).random()).collect();
        let b: Vec<u64> = (0..4).map(|_| trial_rng(7, 3).random()).collect();
        assert_eq!(a, b);
        let x: u64 = trial_rng(7, 3).random();
        let y: u64 = trial_rng(7, 4).random();
        let z: u64 = trial_rng(8, 3).random();
        assert_ne!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn increment_moments() {
        let mut rng = trial_rng(1, 0);
        let dt = 0.25;
        let n = 200_000;
        let (mut abs2, mut sq) = (0.0, Complex64::new(0.0, 0.0));
        for _ in 0..n {
            let w = complex_wiener_increment(&mut rng, dt);
            abs2 += w.norm_sqr();
            sq += w * w;
        }
        let abs2 = abs2 / n as f64;
        let sq = sq / n as f64;
        assert!((abs2 - dt).abs() < 0.01 * dt * 3.0);
        assert!(sq.norm() < 0.01);
    }
}
