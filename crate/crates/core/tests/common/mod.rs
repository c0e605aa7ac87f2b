//! Seeded generators shared by the integration suites. No test reads the
//! clock or the environment; every input below is a pure function of its
//! seed.
#![allow(dead_code)]

pub mod fd;
pub mod oracles;

use mofill::tensor::Tensor4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform fill over [lo, hi).
pub fn uniform_tensor(shape: [usize; 4], seed: u64, lo: f64, hi: f64) -> Tensor4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.random_range(lo..hi)).collect();
    Tensor4::from_vec(shape, data).unwrap()
}

/// All-distinct values with pairwise gaps of at least 2/len, so a ±ε probe
/// can never flip a max-pool argmax.
pub fn distinct_tensor(shape: [usize; 4], seed: u64) -> Tensor4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len: usize = shape.iter().product();
    let mut ranks: Vec<usize> = (0..len).collect();
    for i in (1..len).rev() {
        let j = rng.random_range(0..=i);
        ranks.swap(i, j);
    }
    let scale = 2.0 / len as f64;
    let data = ranks.into_iter().map(|r| r as f64 * scale - 1.0).collect();
    Tensor4::from_vec(shape, data).unwrap()
}

/// Values with |x| in [margin, 1): keeps central differences away from the
/// leaky-ReLU / ℓ1 kinks at zero.
pub fn off_kink_tensor(shape: [usize; 4], seed: u64, margin: f64) -> Tensor4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = shape.iter().product();
    let data = (0..len)
        .map(|_| {
            let mag = rng.random_range(margin..1.0);
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect();
    Tensor4::from_vec(shape, data).unwrap()
}
