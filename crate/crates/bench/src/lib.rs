//! Shared helpers for the benchmark targets.

use tuckermc::{DenseTensor, RngStream};

/// Standard normal tensor with the given dimensions.
pub fn random_tensor(dims: &[usize], seed: u64) -> DenseTensor {
    let mut rng = RngStream::new(seed);
    let n: usize = dims.iter().product();
    DenseTensor::new(dims.to_vec(), (0..n).map(|_| rng.standard_normal()).collect())
        .expect("valid dims")
}
