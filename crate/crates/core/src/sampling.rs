//! Reproducible sample points.
//!
//! The generator is xorshift64* (Marsaglia's xorshift with shifts 12, 25, 27
//! followed by multiplication by `0x2545F4914F6CDD1D`). The seed is mixed with
//! `0x9E3779B97F4A7C15`; a mixed state of zero is replaced by that constant.
//! Uniform doubles take the top 53 bits: `(x >> 11) · 2⁻⁵³`.
//!
//! Test vectors for seed 0 (state `0x9E3779B97F4A7C15`):
//!
//! ```
//! use canonoid::sampling::XorShift64Star;
//! let mut rng = XorShift64Star::new(0);
//! assert_eq!(rng.next_u64(), 0x0d83_b3e2_9a21_487a);
//! assert_eq!(rng.next_u64(), 0x54c4_4c79_f1fe_9d67);
//! assert_eq!(rng.next_u64(), 0xa845_f342_007a_0e78);
//! ```

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XorShift64Star {
    state: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const MULTIPLIER: u64 = 0x2545_F491_4F6C_DD1D;

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        let state = seed ^ GOLDEN;
        XorShift64Star { state: if state == 0 { GOLDEN } else { state } }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(MULTIPLIER)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// `count` points drawn uniformly from the box, coordinates filled in order.
pub fn sample_box(bounds: &[(f64, f64)], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = XorShift64Star::new(seed);
    (0..count).map(|_| bounds.iter().map(|&(lo, hi)| rng.uniform(lo, hi)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_state_is_avoided() {
        let mut rng = XorShift64Star::new(GOLDEN);
        assert_ne!(rng.next_u64(), 0);
        assert_eq!(XorShift64Star::new(GOLDEN), XorShift64Star::new(0));
    }

    #[test]
    fn uniform_range_and_determinism() {
        let a = sample_box(&[(-1.0, 1.0), (2.0, 3.0)], 500, 7);
        assert_eq!(a, sample_box(&[(-1.0, 1.0), (2.0, 3.0)], 500, 7));
        assert_ne!(a, sample_box(&[(-1.0, 1.0), (2.0, 3.0)], 500, 8));
        for p in &a {
            assert!((-1.0..1.0).contains(&p[0]) && (2.0..3.0).contains(&p[1]));
        }
        let mean = a.iter().map(|p| p[0]).sum::<f64>() / 500.0;
        assert!(mean.abs() < 0.1);
    }

    #[test]
    fn first_double() {
        let mut rng = XorShift64Star::new(0);
        let expected = (0x0d83_b3e2_9a21_487au64 >> 11) as f64 / 9007199254740992.0;
        assert_eq!(rng.next_f64(), expected);
    }
}
