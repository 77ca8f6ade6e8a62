//! Seeded, splittable random number generation.
//!
//! ChaCha8 is a counter-based stream cipher RNG: a 64-bit seed plus a 64-bit
//! stream index select statistically independent substreams, which gives the
//! reproducible (seed, purpose, step) splitting the trainer and samplers rely
//! on without any shared mutable state.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// RNG for `(seed, stream)`; distinct streams of one seed never overlap.
pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Substream derivation for per-step work: `purpose` occupies the high bits so
/// (purpose, step) pairs map to disjoint stream indices.
pub fn substream(seed: u64, purpose: u64, step: u64) -> Rng {
    debug_assert!(purpose < (1 << 16));
    debug_assert!(step < (1 << 48));
    seeded(seed, (purpose << 48) | step)
}

/// Standard normal deviate via Box-Muller on ChaCha uniforms. Uses only the
/// cosine branch so each deviate consumes exactly two uniforms (simple and
/// deterministic; sampling is nowhere near the hot path).
pub fn standard_normal(rng: &mut Rng) -> f64 {
    // gen::<f64>() is uniform on [0,1); flip to (0,1] so the log is finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    crate::num::sqrt(-2.0 * crate::num::ln(u1)) * crate::num::cos(2.0 * core::f64::consts::PI * u2)
}

/// Uniform deviate on [lo, hi).
pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Categorical draw by inverse CDF over `weights` (nonnegative, summing to ~1).
/// Falls back to the last positive-weight index if rounding pushes the uniform
/// past the accumulated total.
pub fn categorical(rng: &mut Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            acc += w;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_independent_and_deterministic() {
        let a: alloc::vec::Vec<f64> = {
            let mut r = seeded(7, 0);
            (0..8).map(|_| standard_normal(&mut r)).collect()
        };
        let a2: alloc::vec::Vec<f64> = {
            let mut r = seeded(7, 0);
            (0..8).map(|_| standard_normal(&mut r)).collect()
        };
        let b: alloc::vec::Vec<f64> = {
            let mut r = seeded(7, 1);
            (0..8).map(|_| standard_normal(&mut r)).collect()
        };
        assert_eq!(a, a2);
        assert_ne!(a, b);
    }

    #[test]
    fn normal_moments_are_sane() {
        let mut r = seeded(42, 0);
        let n = 200_000;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for _ in 0..n {
            let z = standard_normal(&mut r);
            mean += z;
            m2 += z * z;
        }
        mean /= n as f64;
        m2 /= n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((m2 - 1.0).abs() < 0.02, "second moment {m2}");
    }

    #[test]
    fn categorical_respects_weights() {
        let mut r = seeded(3, 0);
        let w = [0.0, 0.25, 0.75];
        let mut counts = [0usize; 3];
        for _ in 0..20_000 {
            counts[categorical(&mut r, &w)] += 1;
        }
        assert_eq!(counts[0], 0);
        let frac1 = counts[1] as f64 / 20_000.0;
        assert!((frac1 - 0.25).abs() < 0.02, "frac1 {frac1}");
    }
}
