//! Seeded initialization and float-precision plumbing for the network.

use ndarray::{Array1, Array2, Array4, NdFloat};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Floats the network runs in: f32 for training, f64 for gradient checks.
pub trait Scalar: NdFloat + Send + Sync {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Kaiming-uniform convolution kernel: bound = sqrt(6 / fan_in).
pub fn init_conv<F: Scalar>(
    rng: &mut ChaCha8Rng,
    c_out: usize,
    c_in: usize,
    k: usize,
) -> Array4<F> {
    let fan_in = (c_in * k * k) as f64;
    let bound = (6.0 / fan_in).sqrt();
    Array4::from_shape_fn((c_out, c_in, k, k), |_| F::from_f64(rng.gen_range(-bound..bound)))
}

/// Kaiming-uniform dense weight matrix, [out, in].
pub fn init_dense<F: Scalar>(rng: &mut ChaCha8Rng, out: usize, input: usize) -> Array2<F> {
    let bound = (6.0 / input as f64).sqrt();
    Array2::from_shape_fn((out, input), |_| F::from_f64(rng.gen_range(-bound..bound)))
}

pub fn zeros1<F: Scalar>(n: usize) -> Array1<F> {
    Array1::zeros(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn init_is_seeded() {
        let a: Array4<f32> = init_conv(&mut ChaCha8Rng::seed_from_u64(1), 4, 3, 3);
        let b: Array4<f32> = init_conv(&mut ChaCha8Rng::seed_from_u64(1), 4, 3, 3);
        assert_eq!(a, b);
        let c: Array4<f32> = init_conv(&mut ChaCha8Rng::seed_from_u64(2), 4, 3, 3);
        assert_ne!(a, c);
    }
}
