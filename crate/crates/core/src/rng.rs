//! Seeded random streams.
//!
//! Every random draw comes from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64(seed)`; independent purposes use separate ChaCha stream ids so
//! that, for example, the shuffle order never depends on how many dropout masks
//! were drawn. Uniform floats take the top 53 bits of `next_u64`. Gaussian
//! draws use the Marsaglia polar method.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STREAM_INIT: u64 = 0;
pub const STREAM_SHUFFLE: u64 = 1;
pub const STREAM_DROPOUT: u64 = 2;
pub const STREAM_SYNTH: u64 = 3;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform in [0, 1).
#[inline]
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in [-limit, limit).
#[inline]
pub fn symmetric<R: RngCore + ?Sized>(rng: &mut R, limit: f64) -> f64 {
    (2.0 * unit_f64(rng) - 1.0) * limit
}

/// Standard normal sampler (Marsaglia polar method). Each accepted pair
/// yields two variates; the second is cached and returned by the next call.
#[derive(Debug, Clone, Default)]
pub struct PolarGaussian {
    spare: Option<f64>,
}

impl PolarGaussian {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sample<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * unit_f64(rng) - 1.0;
            let v = 2.0 * unit_f64(rng) - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let scale = libm::sqrt(-2.0 * libm::log(s) / s);
                self.spare = Some(v * scale);
                return u * scale;
            }
        }
    }
}
