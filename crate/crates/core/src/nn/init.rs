//! Parameter initialization.

use super::Tensor;
use rand::Rng;

/// Kaiming-uniform fan-in initialization: values drawn from
/// `U(-sqrt(6/fan_in), sqrt(6/fan_in))`.
pub fn kaiming_uniform<R: Rng>(shape: Vec<usize>, fan_in: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape, data)
}
