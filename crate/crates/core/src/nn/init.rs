use crate::nn::tensor::{Scalar, Tensor};
use crate::rng::Rng;

/// He normal initialization: `N(0, 2 / fan_in)` with
/// `fan_in = shape[1] * shape[2] * shape[3]`.
pub fn he_init<T: Scalar>(shape: [usize; 4], rng: &mut Rng) -> Tensor<T> {
    let std = he_std(shape);
    Tensor::from_fn(shape, |_| T::of(rng.standard_normal() * std))
}

pub fn he_std(shape: [usize; 4]) -> f64 {
    let fan_in = (shape[1] * shape[2] * shape[3]).max(1);
    (2.0 / fan_in as f64).sqrt()
}
