//! Per-channel batch normalization, `y = gamma * (x - mean) / sqrt(var + eps) + beta`.
//!
//! Training mode normalizes with the batch mean and the biased (population)
//! batch variance, then folds both into the running statistics as
//! `running = momentum * running + (1 - momentum) * batch`. Inference mode
//! reads the running statistics only.

use crate::error::{Error, Result};
use crate::nn::optim::ParamTensor;
use crate::nn::tensor::{Scalar, Tensor};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

#[derive(Debug, Clone)]
pub struct BatchNormState<T> {
    pub gamma: ParamTensor<T>,
    pub beta: ParamTensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub epsilon: T,
    pub momentum: T,
    pub mode: Mode,
}

impl<T: Scalar> BatchNormState<T> {
    /// `gamma = 1`, `beta = 0`, running mean 0, running variance 1.
    pub fn new(channels: usize) -> Self {
        let shape = [1, channels, 1, 1];
        BatchNormState {
            gamma: ParamTensor::new(Tensor::full(shape, T::one())),
            beta: ParamTensor::new(Tensor::zeros(shape)),
            running_mean: Tensor::zeros(shape),
            running_var: Tensor::full(shape, T::one()),
            epsilon: T::of(DEFAULT_EPSILON),
            momentum: T::of(DEFAULT_MOMENTUM),
            mode: Mode::Training,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.c()
    }

    fn check(&self, x: &Tensor<T>) -> Result<()> {
        if x.c() != self.channels() {
            return Err(Error::InvalidShape(format!(
                "batch norm over {} channels given input {:?}",
                self.channels(),
                x.shape()
            )));
        }
        let count = x.n() * x.h() * x.w();
        if count < 2 {
            return Err(Error::DegenerateBatch { channel: 0, count });
        }
        Ok(())
    }
}

/// Per-channel batch mean and biased variance, accumulated in f64 in
/// row-major order.
fn batch_stats<T: Scalar>(x: &Tensor<T>) -> (Vec<f64>, Vec<f64>) {
    let [n, c, h, w] = x.shape();
    let hw = h * w;
    let m = (n * hw) as f64;
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for ch in 0..c {
        let mut s = 0.0;
        for i in 0..n {
            s += x.item(i)[ch * hw..(ch + 1) * hw].iter().map(|v| v.f64()).sum::<f64>();
        }
        let mu = s / m;
        let mut q = 0.0;
        for i in 0..n {
            q += x.item(i)[ch * hw..(ch + 1) * hw].iter().map(|v| (v.f64() - mu).powi(2)).sum::<f64>();
        }
        mean[ch] = mu;
        var[ch] = q / m;
    }
    (mean, var)
}

/// Applies `y = scale[c] * x + shift[c]` per channel.
fn affine<T: Scalar>(x: &Tensor<T>, scale: &[f64], shift: &[f64]) -> Tensor<T> {
    let [n, c, h, w] = x.shape();
    let hw = h * w;
    let mut out = Tensor::zeros(x.shape());
    for i in 0..n {
        let src = x.item(i);
        let dst = out.item_mut(i);
        for ch in 0..c {
            let (a, b) = (T::of(scale[ch]), T::of(shift[ch]));
            for (d, &s) in dst[ch * hw..(ch + 1) * hw].iter_mut().zip(&src[ch * hw..(ch + 1) * hw]) {
                *d = a * s + b;
            }
        }
    }
    out
}

/// Forward pass; in training mode the running statistics are updated.
pub fn batchnorm_forward<T: Scalar>(x: &Tensor<T>, state: &mut BatchNormState<T>) -> Result<Tensor<T>> {
    match state.mode {
        Mode::Inference => batchnorm_inference(x, state),
        Mode::Training => {
            state.check(x)?;
            let (mean, var) = batch_stats(x);
            let eps = state.epsilon.f64();
            let mom = state.momentum;
            let (scale, shift): (Vec<f64>, Vec<f64>) = (0..x.c())
                .map(|ch| {
                    let inv = 1.0 / (var[ch] + eps).sqrt();
                    let g = state.gamma.value.data()[ch].f64();
                    let b = state.beta.value.data()[ch].f64();
                    (g * inv, b - g * inv * mean[ch])
                })
                .unzip();
            for ch in 0..x.c() {
                let rm = &mut state.running_mean.data_mut()[ch];
                *rm = mom * *rm + (T::one() - mom) * T::of(mean[ch]);
                let rv = &mut state.running_var.data_mut()[ch];
                *rv = mom * *rv + (T::one() - mom) * T::of(var[ch]);
            }
            Ok(affine(x, &scale, &shift))
        }
    }
}

/// Inference-mode forward; reads the running statistics and mutates nothing.
pub fn batchnorm_inference<T: Scalar>(x: &Tensor<T>, state: &BatchNormState<T>) -> Result<Tensor<T>> {
    if x.c() != state.channels() {
        return Err(Error::InvalidShape(format!(
            "batch norm over {} channels given input {:?}",
            state.channels(),
            x.shape()
        )));
    }
    let eps = state.epsilon.f64();
    let (scale, shift): (Vec<f64>, Vec<f64>) = (0..x.c())
        .map(|ch| {
            let inv = 1.0 / (state.running_var.data()[ch].f64() + eps).sqrt();
            let g = state.gamma.value.data()[ch].f64();
            let b = state.beta.value.data()[ch].f64();
            (g * inv, b - g * inv * state.running_mean.data()[ch].f64())
        })
        .unzip();
    Ok(affine(x, &scale, &shift))
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads<T> {
    pub grad_x: Tensor<T>,
    pub grad_gamma: Tensor<T>,
    pub grad_beta: Tensor<T>,
}

/// Gradient of the training-mode forward map, including the dependence of
/// the batch mean and variance on `x`. Batch statistics are recomputed from
/// `x`; the running statistics are not touched.
pub fn batchnorm_backward<T: Scalar>(
    x: &Tensor<T>,
    state: &BatchNormState<T>,
    grad_out: &Tensor<T>,
) -> Result<BatchNormGrads<T>> {
    state.check(x)?;
    if grad_out.shape() != x.shape() {
        return Err(Error::InvalidShape(format!(
            "batch norm grad_out {:?} vs input {:?}",
            grad_out.shape(),
            x.shape()
        )));
    }
    let [n, c, h, w] = x.shape();
    let hw = h * w;
    let m = (n * hw) as f64;
    let (mean, var) = batch_stats(x);
    let eps = state.epsilon.f64();
    let mut grad_x = Tensor::zeros(x.shape());
    let mut grad_gamma = Tensor::zeros([1, c, 1, 1]);
    let mut grad_beta = Tensor::zeros([1, c, 1, 1]);
    for ch in 0..c {
        let inv = 1.0 / (var[ch] + eps).sqrt();
        let mut sum_g = 0.0;
        let mut sum_gx = 0.0;
        for i in 0..n {
            let xs = &x.item(i)[ch * hw..(ch + 1) * hw];
            let gs = &grad_out.item(i)[ch * hw..(ch + 1) * hw];
            for (&xv, &gv) in xs.iter().zip(gs) {
                sum_g += gv.f64();
                sum_gx += gv.f64() * (xv.f64() - mean[ch]) * inv;
            }
        }
        grad_beta.data_mut()[ch] = T::of(sum_g);
        grad_gamma.data_mut()[ch] = T::of(sum_gx);
        let k = state.gamma.value.data()[ch].f64() * inv / m;
        for i in 0..n {
            let xs = &x.item(i)[ch * hw..(ch + 1) * hw];
            let gs = &grad_out.item(i)[ch * hw..(ch + 1) * hw];
            let dst = &mut grad_x.item_mut(i)[ch * hw..(ch + 1) * hw];
            for ((d, &xv), &gv) in dst.iter_mut().zip(xs).zip(gs) {
                let xhat = (xv.f64() - mean[ch]) * inv;
                *d = T::of(k * (m * gv.f64() - sum_g - xhat * sum_gx));
            }
        }
    }
    Ok(BatchNormGrads { grad_x, grad_gamma, grad_beta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_gives_zero() {
        let mut st = BatchNormState::<f32>::new(2);
        let y = batchnorm_forward(&Tensor::full([3, 2, 2, 2], 4.5), &mut st).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn four_values_direct_formula() {
        let mut st = BatchNormState::<f64>::new(1);
        let x = Tensor::from_vec([4, 1, 1, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = batchnorm_forward(&x, &mut st).unwrap();
        // Direct oracle: mean 2.5, population variance 1.25.
        let want: Vec<f64> = [1.0, 2.0, 3.0, 4.0].iter().map(|v: &f64| (v - 2.5) / (1.25f64 + 1e-5).sqrt()).collect();
        for (a, b) in y.data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        let rounded: Vec<f64> = y.data().iter().map(|v| (v * 1e4).round() / 1e4).collect();
        assert_eq!(rounded, vec![-1.3416, -0.4472, 0.4472, 1.3416]);
        // running stats: 0.9 * 0 + 0.1 * 2.5, 0.9 * 1 + 0.1 * 1.25
        assert!((st.running_mean.data()[0] - 0.25).abs() < 1e-12);
        assert!((st.running_var.data()[0] - 1.025).abs() < 1e-12);
    }

    #[test]
    fn inference_identity() {
        let mut st = BatchNormState::<f64>::new(1);
        st.mode = Mode::Inference;
        let x = Tensor::from_vec([1, 1, 2, 2], vec![-1.0, 0.0, 2.0, 5.0]).unwrap();
        let y = batchnorm_forward(&x, &mut st).unwrap();
        assert!(y.max_abs_diff(&x) < 1e-4);
    }

    #[test]
    fn normalized_moments() {
        let mut st = BatchNormState::<f64>::new(2);
        let x = Tensor::from_fn([5, 2, 3, 3], |i| ((i * 37) % 11) as f64 * 0.7 - 2.0);
        let y = batchnorm_forward(&x, &mut st).unwrap();
        let (mean, var) = batch_stats(&y);
        for ch in 0..2 {
            assert!(mean[ch].abs() < 1e-9);
            assert!((var[ch] - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn degenerate_and_mismatch() {
        let mut st = BatchNormState::<f32>::new(1);
        assert!(matches!(
            batchnorm_forward(&Tensor::zeros([1, 1, 1, 1]), &mut st),
            Err(Error::DegenerateBatch { .. })
        ));
        assert!(matches!(batchnorm_forward(&Tensor::zeros([2, 3, 1, 1]), &mut st), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn backward_zero_and_beta_identity() {
        let st = BatchNormState::<f64>::new(2);
        let x = Tensor::from_fn([3, 2, 2, 2], |i| (i as f64).cos());
        let g = batchnorm_backward(&x, &st, &Tensor::zeros(x.shape())).unwrap();
        assert!(g.grad_x.data().iter().chain(g.grad_gamma.data()).all(|&v| v == 0.0));
        let go = Tensor::from_fn(x.shape(), |i| i as f64 * 0.25);
        let g = batchnorm_backward(&x, &st, &go).unwrap();
        for ch in 0..2 {
            let s: f64 = (0..3).flat_map(|n| go.item(n)[ch * 4..ch * 4 + 4].to_vec()).sum();
            assert!((g.grad_beta.data()[ch] - s).abs() < 1e-12);
        }
    }
}
