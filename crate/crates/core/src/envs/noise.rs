//! Multiplicative-uniform observation noise: o_i = s_i + alpha * eps_i with
//! eps_i ~ U[-|s_i|, |s_i|], so every observation satisfies
//! |o_i - s_i| <= alpha * |s_i| entrywise. At alpha = 0 (or s_i = 0) the
//! observation equals the state bit-exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Observation-noise source with its own seeded stream.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub alpha: f64,
    pub rng_seed: u64,
    rng: ChaCha8Rng,
}

impl NoiseModel {
    pub fn new(alpha: f64, rng_seed: u64) -> Self {
        assert!(alpha >= 0.0, "alpha must be non-negative");
        NoiseModel {
            alpha,
            rng_seed,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        }
    }

    pub fn observe(&mut self, s: &[f64]) -> Vec<f64> {
        observe(s, self.alpha, &mut self.rng)
    }
}

/// Draws one observation of `s` at noise scale `alpha`.
pub fn observe<R: Rng>(s: &[f64], alpha: f64, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; s.len()];
    observe_into(s, alpha, rng, &mut out);
    out
}

/// In-place variant of [`observe`].
///
/// The noise-box bound is enforced exactly in floating point: after the
/// perturbation, any rounding that pushed `|o_i - s_i|` past `alpha * |s_i|`
/// is pulled back by single-ulp nudges toward the state.
pub fn observe_into<R: Rng>(s: &[f64], alpha: f64, rng: &mut R, out: &mut [f64]) {
    assert_eq!(s.len(), out.len());
    if alpha == 0.0 {
        out.copy_from_slice(s);
        return;
    }
    for (o, &si) in out.iter_mut().zip(s.iter()) {
        let mag = si.abs();
        if mag == 0.0 {
            *o = si;
            continue;
        }
        let eps = rng.random_range(-mag..=mag);
        let bound = alpha * mag;
        let mut v = si + alpha * eps;
        while (v - si).abs() > bound {
            v = toward(v, si);
        }
        *o = v;
    }
}

fn toward(x: f64, target: f64) -> f64 {
    if x < target {
        x.next_up()
    } else if x > target {
        x.next_down()
    } else {
        x
    }
}
