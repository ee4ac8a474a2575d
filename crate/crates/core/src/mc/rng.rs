//! Per-replication random streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Uniform, exponential, normal and inverse-Gaussian draws from a ChaCha8
/// stream selected by `(seed, stream index)`.
///
/// With `flip` set every uniform `u` is replaced by `1 − u`, which gives the
/// antithetic partner of the unflipped stream.
pub struct Stream {
    rng: ChaCha8Rng,
    flip: bool,
    normal: Normal,
}

impl Stream {
    pub fn new(seed: u64, index: u64, flip: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Stream {
            rng,
            flip,
            normal: Normal::standard(),
        }
    }

    /// Uniform on the open interval (0, 1), symmetric under `u ↦ 1 − u`.
    pub fn uniform(&mut self) -> f64 {
        let k = (self.rng.next_u64() >> 11) as f64;
        let u = (k + 0.5) * (1.0 / (1u64 << 53) as f64);
        if self.flip {
            1.0 - u
        } else {
            u
        }
    }

    pub fn exp(&mut self, rate: f64) -> f64 {
        -self.uniform().ln() / rate
    }

    pub fn normal(&mut self) -> f64 {
        let u = self.uniform();
        self.normal.inverse_cdf(u)
    }

    /// Bernoulli(`p`) draw.
    pub fn chance(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Inverse Gaussian with mean `m` and shape `s` (Michael–Schucany–Haas).
    pub fn inverse_gaussian(&mut self, m: f64, s: f64) -> f64 {
        let n = self.normal();
        let y = n * n;
        let my = m * y;
        let x = m + m * my / (2.0 * s) - m / (2.0 * s) * (4.0 * m * s * y + my * my).sqrt();
        if self.uniform() <= m / (m + x) {
            x
        } else {
            m * m / x
        }
    }
}
