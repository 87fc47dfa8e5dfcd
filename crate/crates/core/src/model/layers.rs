//! Stateful layer wrappers. Training-mode forward caches what backward needs;
//! [`infer`](Conv::infer) variants take `&self` and cache nothing.

use crate::error::{Error, Result};
use crate::nn::activation::relu_in_place;
use crate::nn::batchnorm::{batchnorm_backward, batchnorm_forward, batchnorm_inference, BatchNormState, Mode};
use crate::nn::conv::{conv2d_backward, conv2d_forward};
use crate::nn::init::he_init;
use crate::nn::optim::ParamTensor;
use crate::nn::relu_backward;
use crate::nn::tensor::{Scalar, Tensor};
use crate::rng::Rng;

fn missing_cache(layer: &str) -> Error {
    Error::InvalidShape(format!("{layer}: backward called without a training-mode forward"))
}

/// Bias-free convolution; every convolution in the network feeds a batch
/// norm, which absorbs any bias.
#[derive(Debug, Clone)]
pub struct Conv<T> {
    pub weight: ParamTensor<T>,
    pub stride: usize,
    pub pad: usize,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Conv<T> {
    /// He-initialized `cout x cin x k x k` kernel with "same" padding.
    pub fn new(cin: usize, cout: usize, kernel: usize, stride: usize, rng: &mut Rng) -> Self {
        Conv { weight: ParamTensor::new(he_init([cout, cin, kernel, kernel], rng)), stride, pad: kernel / 2, input: None }
    }

    pub fn forward_train(&mut self, x: Tensor<T>) -> Result<Tensor<T>> {
        let y = conv2d_forward(&x, &self.weight.value, None, self.stride, self.pad)?;
        self.input = Some(x);
        Ok(y)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv2d_forward(x, &self.weight.value, None, self.stride, self.pad)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.take().ok_or_else(|| missing_cache("conv"))?;
        let g = conv2d_backward(&x, &self.weight.value, grad_out, self.stride, self.pad)?;
        self.weight.accumulate(g.grad_w.data());
        Ok(g.grad_x)
    }
}

#[derive(Debug, Clone)]
pub struct Norm<T> {
    pub state: BatchNormState<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Norm<T> {
    pub fn new(channels: usize) -> Self {
        Norm { state: BatchNormState::new(channels), input: None }
    }

    /// Uses batch statistics in training mode, running statistics otherwise.
    pub fn forward(&mut self, x: Tensor<T>) -> Result<Tensor<T>> {
        let y = batchnorm_forward(&x, &mut self.state)?;
        if self.state.mode == Mode::Training {
            self.input = Some(x);
        }
        Ok(y)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        batchnorm_inference(x, &self.state)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.take().ok_or_else(|| missing_cache("batch norm"))?;
        let g = batchnorm_backward(&x, &self.state, grad_out)?;
        self.state.gamma.accumulate(g.grad_gamma.data());
        self.state.beta.accumulate(g.grad_beta.data());
        Ok(g.grad_x)
    }
}

/// Two 3x3 conv/BN units with a shortcut added before the final ReLU. The
/// shortcut is the identity, or a 1x1 conv + BN projection when the stride
/// or channel count changes.
#[derive(Debug, Clone)]
pub struct BasicBlock<T> {
    pub conv1: Conv<T>,
    pub bn1: Norm<T>,
    pub conv2: Conv<T>,
    pub bn2: Norm<T>,
    pub shortcut: Option<(Conv<T>, Norm<T>)>,
    hidden: Option<Tensor<T>>,
    output: Option<Tensor<T>>,
}

impl<T: Scalar> BasicBlock<T> {
    pub fn new(cin: usize, cout: usize, kernel: usize, stride: usize, rng: &mut Rng) -> Self {
        let conv1 = Conv::new(cin, cout, kernel, stride, rng);
        let conv2 = Conv::new(cout, cout, kernel, 1, rng);
        let shortcut =
            (stride != 1 || cin != cout).then(|| (Conv::new(cin, cout, 1, stride, rng), Norm::new(cout)));
        BasicBlock { conv1, bn1: Norm::new(cout), conv2, bn2: Norm::new(cout), shortcut, hidden: None, output: None }
    }

    pub fn forward(&mut self, x: Tensor<T>) -> Result<Tensor<T>> {
        let training = self.bn1.state.mode == Mode::Training;
        let skip = match &mut self.shortcut {
            Some((conv, bn)) => bn.forward(conv.forward_train(x.clone())?)?,
            None => x.clone(),
        };
        let mut h = self.bn1.forward(self.conv1.forward_train(x)?)?;
        relu_in_place(&mut h);
        if training {
            self.hidden = Some(h.clone());
        }
        let mut y = self.bn2.forward(self.conv2.forward_train(h)?)?;
        y.add_assign(&skip)?;
        relu_in_place(&mut y);
        if training {
            self.output = Some(y.clone());
        } else {
            self.clear_caches();
        }
        Ok(y)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut h = self.bn1.infer(&self.conv1.infer(x)?)?;
        relu_in_place(&mut h);
        let mut y = self.bn2.infer(&self.conv2.infer(&h)?)?;
        match &self.shortcut {
            Some((conv, bn)) => y.add_assign(&bn.infer(&conv.infer(x)?)?)?,
            None => y.add_assign(x)?,
        }
        relu_in_place(&mut y);
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let out = self.output.take().ok_or_else(|| missing_cache("basic block"))?;
        let hidden = self.hidden.take().ok_or_else(|| missing_cache("basic block"))?;
        let g = relu_backward(&out, grad_out)?;
        let g_skip = match &mut self.shortcut {
            Some((conv, bn)) => conv.backward(&bn.backward(&g)?)?,
            None => g.clone(),
        };
        let gh = self.conv2.backward(&self.bn2.backward(&g)?)?;
        let gh = relu_backward(&hidden, &gh)?;
        let mut gx = self.conv1.backward(&self.bn1.backward(&gh)?)?;
        gx.add_assign(&g_skip)?;
        Ok(gx)
    }

    fn clear_caches(&mut self) {
        self.hidden = None;
        self.output = None;
        for c in [&mut self.conv1, &mut self.conv2] {
            c.input = None;
        }
        if let Some((c, _)) = &mut self.shortcut {
            c.input = None;
        }
    }

    pub(crate) fn for_each_param<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a ParamTensor<T>)) {
        f(format!("{prefix}.conv1.weight"), &self.conv1.weight);
        f(format!("{prefix}.bn1.gamma"), &self.bn1.state.gamma);
        f(format!("{prefix}.bn1.beta"), &self.bn1.state.beta);
        f(format!("{prefix}.conv2.weight"), &self.conv2.weight);
        f(format!("{prefix}.bn2.gamma"), &self.bn2.state.gamma);
        f(format!("{prefix}.bn2.beta"), &self.bn2.state.beta);
        if let Some((conv, bn)) = &self.shortcut {
            f(format!("{prefix}.shortcut.conv.weight"), &conv.weight);
            f(format!("{prefix}.shortcut.bn.gamma"), &bn.state.gamma);
            f(format!("{prefix}.shortcut.bn.beta"), &bn.state.beta);
        }
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        let mut v = vec![
            &mut self.conv1.weight,
            &mut self.bn1.state.gamma,
            &mut self.bn1.state.beta,
            &mut self.conv2.weight,
            &mut self.bn2.state.gamma,
            &mut self.bn2.state.beta,
        ];
        if let Some((conv, bn)) = &mut self.shortcut {
            v.push(&mut conv.weight);
            v.push(&mut bn.state.gamma);
            v.push(&mut bn.state.beta);
        }
        v
    }

    pub(crate) fn norms(&self, prefix: &str) -> Vec<(String, &Norm<T>)> {
        let mut v = vec![(format!("{prefix}.bn1"), &self.bn1), (format!("{prefix}.bn2"), &self.bn2)];
        if let Some((_, bn)) = &self.shortcut {
            v.push((format!("{prefix}.shortcut.bn"), bn));
        }
        v
    }

    pub(crate) fn norms_mut(&mut self) -> Vec<&mut Norm<T>> {
        let mut v = vec![&mut self.bn1, &mut self.bn2];
        if let Some((_, bn)) = &mut self.shortcut {
            v.push(bn);
        }
        v
    }
}
