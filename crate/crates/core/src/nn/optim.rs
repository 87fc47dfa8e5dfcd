use crate::nn::tensor::{Scalar, Tensor};

/// A learned tensor with its gradient accumulator and momentum buffer.
#[derive(Debug, Clone)]
pub struct ParamTensor<T> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub velocity: Tensor<T>,
}

impl<T: Scalar> ParamTensor<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let shape = value.shape();
        ParamTensor { value, grad: Tensor::zeros(shape), velocity: Tensor::zeros(shape) }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    /// Adds `g` elementwise into the gradient accumulator.
    pub fn accumulate(&mut self, g: &[T]) {
        assert_eq!(g.len(), self.grad.len(), "gradient length mismatch");
        for (a, &b) in self.grad.data_mut().iter_mut().zip(g) {
            *a = *a + b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig { lr: 0.01, momentum: 0.9, weight_decay: 1e-4 }
    }
}

/// `v <- momentum * v - lr * (grad + weight_decay * value); value <- value + v`,
/// applied to `params` in the order given.
pub fn sgd_step<'a, T: Scalar>(params: impl IntoIterator<Item = &'a mut ParamTensor<T>>, cfg: SgdConfig) {
    let (lr, mom, wd) = (T::of(cfg.lr), T::of(cfg.momentum), T::of(cfg.weight_decay));
    for p in params {
        let ParamTensor { value, grad, velocity } = p;
        for ((x, &g), v) in value.data_mut().iter_mut().zip(grad.data()).zip(velocity.data_mut()) {
            *v = mom * *v - lr * (g + wd * *x);
            *x = *x + *v;
        }
    }
}
