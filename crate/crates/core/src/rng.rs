//! Seeded generators. Every random draw in the crate goes through a
//! `(seed, stream)` pair so parallel work is replayable bit-exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SeededRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian_vec(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Uniform point on `S^{n-1}`.
pub fn unit_vector(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    loop {
        let g = gaussian_vec(rng, n);
        let r = crate::numeric::norm2(&g);
        if r > 1e-12 {
            return g.into_iter().map(|v| v / r).collect();
        }
    }
}

pub fn uniform(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
