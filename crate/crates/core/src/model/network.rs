use std::fmt;

use crate::error::{Error, Result};
use crate::model::config::NetworkConfig;
use crate::model::layers::{BasicBlock, Conv, Norm};
use crate::nn::activation::relu_in_place;
use crate::nn::batchnorm::Mode;
use crate::nn::linear::{fully_connected, fully_connected_backward};
use crate::nn::optim::ParamTensor;
use crate::nn::pool::{global_avg_pool, global_avg_pool_backward, maxpool2x2, maxpool2x2_backward};
use crate::nn::relu_backward;
use crate::nn::tensor::{Scalar, Tensor};
use crate::rng::Rng;

/// Layer counts of a built network. Projection shortcuts are reported
/// separately and are not part of `convolutions`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchitectureReport {
    pub convolutions: usize,
    pub projection_convolutions: usize,
    pub fully_connected: usize,
    pub parameters: usize,
}

impl fmt::Display for ArchitectureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} convolutions (+{} projection shortcuts), {} fully-connected, {} parameters",
            self.convolutions, self.projection_convolutions, self.fully_connected, self.parameters
        )
    }
}

#[derive(Debug, Default, Clone)]
struct Caches<T> {
    stem_out: Option<Tensor<T>>,
    pool_argmax: Option<(Vec<usize>, [usize; 4])>,
    gap_input_shape: Option<[usize; 4]>,
    fc_input: Option<Tensor<T>>,
}

#[derive(Debug, Clone)]
pub struct Network<T> {
    config: NetworkConfig,
    pub stem_conv: Conv<T>,
    pub stem_bn: Norm<T>,
    pub blocks: Vec<BasicBlock<T>>,
    pub fc_weight: ParamTensor<T>,
    pub fc_bias: ParamTensor<T>,
    mode: Mode,
    caches: Caches<T>,
}

impl<T: Scalar> Network<T> {
    /// Builds the layer graph: He-initialized convolutions, BN with
    /// `gamma = 1, beta = 0`, an FC layer with `N(0, 1/fan_in)` weights and
    /// zero bias. The network starts in training mode.
    pub fn build(config: &NetworkConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let ch = config.channels();
        let stem_conv = Conv::new(config.in_channels, ch[0], config.first_kernel, 1, rng);
        let mut blocks = Vec::new();
        let mut cin = ch[0];
        for (stage, (&cout, &count)) in ch.iter().zip(&config.blocks_per_stage).enumerate() {
            for b in 0..count {
                let stride = if stage > 0 && b == 0 { 2 } else { 1 };
                blocks.push(BasicBlock::new(cin, cout, config.other_kernel, stride, rng));
                cin = cout;
            }
        }
        let std = (1.0 / cin as f64).sqrt();
        let fc = Tensor::from_fn([config.num_classes, cin, 1, 1], |_| T::of(rng.standard_normal() * std));
        Ok(Network {
            config: config.clone(),
            stem_conv,
            stem_bn: Norm::new(ch[0]),
            blocks,
            fc_weight: ParamTensor::new(fc),
            fc_bias: ParamTensor::new(Tensor::zeros([1, config.num_classes, 1, 1])),
            mode: Mode::Training,
            caches: Caches { stem_out: None, pool_argmax: None, gap_input_shape: None, fc_input: None },
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        for n in self.norms_mut() {
            n.state.mode = mode;
        }
    }

    pub fn report(&self) -> ArchitectureReport {
        let projections = self.blocks.iter().filter(|b| b.shortcut.is_some()).count();
        ArchitectureReport {
            convolutions: 1 + 2 * self.blocks.len(),
            projection_convolutions: projections,
            fully_connected: 1,
            parameters: self.named_params().iter().map(|(_, p)| p.value.len()).sum(),
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let s = self.config.input_size;
        if x.shape()[1..] != [self.config.in_channels, s, s] {
            return Err(Error::InvalidShape(format!(
                "network expects (N, {}, {s}, {s}), got {:?}",
                self.config.in_channels,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Forward pass in the current mode. Training mode caches activations
    /// for [`backward`](Self::backward) and updates BN running statistics;
    /// inference mode defers to [`infer`](Self::infer).
    pub fn forward(&mut self, x: Tensor<T>) -> Result<Tensor<T>> {
        if self.mode == Mode::Inference {
            return self.infer(&x);
        }
        self.check_input(&x)?;
        let mut h = self.stem_bn.forward(self.stem_conv.forward_train(x)?)?;
        relu_in_place(&mut h);
        let (pooled, argmax) = maxpool2x2(&h)?;
        self.caches.pool_argmax = Some((argmax, h.shape()));
        self.caches.stem_out = Some(h);
        let mut h = pooled;
        for block in &mut self.blocks {
            h = block.forward(h)?;
        }
        self.caches.gap_input_shape = Some(h.shape());
        let pooled = global_avg_pool(&h);
        let logits = fully_connected(&pooled, &self.fc_weight.value, self.fc_bias.value.data())?;
        self.caches.fc_input = Some(pooled);
        Ok(logits)
    }

    /// Inference-mode forward using BN running statistics. Mutates nothing,
    /// so a network may be shared across threads for evaluation.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut h = self.stem_bn.infer(&self.stem_conv.infer(x)?)?;
        relu_in_place(&mut h);
        let (mut h, _) = maxpool2x2(&h)?;
        for block in &self.blocks {
            h = block.infer(&h)?;
        }
        fully_connected(&global_avg_pool(&h), &self.fc_weight.value, self.fc_bias.value.data())
    }

    /// Back-propagates `grad_logits` through the last training-mode forward,
    /// accumulating into every parameter gradient.
    pub fn backward(&mut self, grad_logits: &Tensor<T>) -> Result<()> {
        let missing = || Error::InvalidShape("network backward without a training-mode forward".into());
        let fc_in = self.caches.fc_input.take().ok_or_else(missing)?;
        let g = fully_connected_backward(&fc_in, &self.fc_weight.value, grad_logits)?;
        self.fc_weight.accumulate(g.grad_w.data());
        self.fc_bias.accumulate(&g.grad_b);
        let gap_shape = self.caches.gap_input_shape.take().ok_or_else(missing)?;
        let mut grad = global_avg_pool_backward(gap_shape, &g.grad_x)?;
        for block in self.blocks.iter_mut().rev() {
            grad = block.backward(&grad)?;
        }
        let (argmax, shape) = self.caches.pool_argmax.take().ok_or_else(missing)?;
        let grad = maxpool2x2_backward(shape, &argmax, &grad)?;
        let stem_out = self.caches.stem_out.take().ok_or_else(missing)?;
        let grad = relu_backward(&stem_out, &grad)?;
        self.stem_conv.backward(&self.stem_bn.backward(&grad)?)?;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Parameters in their fixed canonical order.
    pub fn named_params(&self) -> Vec<(String, &ParamTensor<T>)> {
        let mut out = Vec::new();
        let mut push = |name: String, p| out.push((name, p));
        push("stem.conv.weight".into(), &self.stem_conv.weight);
        push("stem.bn.gamma".into(), &self.stem_bn.state.gamma);
        push("stem.bn.beta".into(), &self.stem_bn.state.beta);
        for (i, block) in self.blocks.iter().enumerate() {
            block.for_each_param(&self.block_name(i), &mut push);
        }
        push("fc.weight".into(), &self.fc_weight);
        push("fc.bias".into(), &self.fc_bias);
        out
    }

    /// Same order as [`named_params`](Self::named_params).
    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        let mut out = vec![&mut self.stem_conv.weight, &mut self.stem_bn.state.gamma, &mut self.stem_bn.state.beta];
        for block in &mut self.blocks {
            out.extend(block.params_mut());
        }
        out.push(&mut self.fc_weight);
        out.push(&mut self.fc_bias);
        out
    }

    pub fn named_norms(&self) -> Vec<(String, &Norm<T>)> {
        let mut out = vec![("stem.bn".to_string(), &self.stem_bn)];
        for (i, block) in self.blocks.iter().enumerate() {
            out.extend(block.norms(&self.block_name(i)));
        }
        out
    }

    pub fn norms_mut(&mut self) -> Vec<&mut Norm<T>> {
        let mut out = vec![&mut self.stem_bn];
        for block in &mut self.blocks {
            out.extend(block.norms_mut());
        }
        out
    }

    /// Every stored tensor (parameters, then BN running statistics) by name.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out: Vec<(String, &Tensor<T>)> =
            self.named_params().into_iter().map(|(n, p)| (n, &p.value)).collect();
        for (name, norm) in self.named_norms() {
            out.push((format!("{name}.running_mean"), &norm.state.running_mean));
            out.push((format!("{name}.running_var"), &norm.state.running_var));
        }
        out
    }

    /// Mutable access to a stored tensor by the name used in
    /// [`named_tensors`](Self::named_tensors).
    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        let names: Vec<String> = self.named_tensors().into_iter().map(|(n, _)| n).collect();
        let pos = names.iter().position(|n| n == name)?;
        let n_params = self.named_params().len();
        if pos < n_params {
            return self.params_mut().into_iter().nth(pos).map(|p| &mut p.value);
        }
        let k = pos - n_params;
        let norm = self.norms_mut().into_iter().nth(k / 2)?;
        Some(if k % 2 == 0 { &mut norm.state.running_mean } else { &mut norm.state.running_var })
    }

    fn block_name(&self, index: usize) -> String {
        let mut i = index;
        for (stage, &count) in self.config.blocks_per_stage.iter().enumerate() {
            if i < count {
                return format!("stage{}.block{}", stage + 1, i);
            }
            i -= count;
        }
        unreachable!("block index beyond configured stages")
    }

    pub fn predict(&self, x: &Tensor<T>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.infer(x)?))
    }
}

/// Row-wise argmax of `(N, K)` logits; the lowest index wins ties.
pub fn argmax_rows<T: Scalar>(logits: &Tensor<T>) -> Vec<usize> {
    let k = logits.item_len();
    logits
        .data()
        .chunks(k)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn predict<T: Scalar>(net: &Network<T>, batch: &Tensor<T>) -> Result<Vec<usize>> {
    net.predict(batch)
}
