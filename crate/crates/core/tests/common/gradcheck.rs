//! Finite-difference checks shared by the gradient tests and the acceptance
//! harness. Each returns `(case, worst relative error)` per tested shape.

use super::*;
use satm::model::{BasicBlock, Network, NetworkConfig};
use satm::nn::batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormState};
use satm::nn::conv::{conv2d_backward, conv2d_forward};
use satm::nn::loss::softmax_cross_entropy;
use satm::nn::{
    fully_connected, fully_connected_backward, global_avg_pool, global_avg_pool_backward, maxpool2x2,
    maxpool2x2_backward, relu, relu_backward,
};
use satm::{Rng, Tensor};

pub const LAYER_TOL: f64 = 1e-4;
pub const NETWORK_TOL: f64 = 1e-5;
/// Small enough that ReLU and max-pool switches inside the stencil are rare.
pub const NETWORK_STEP: f64 = 1e-6;
pub const NETWORK_SAMPLES: usize = 20;
const FLOOR: f64 = 1e-6;

pub type Cases = Vec<(String, f64)>;

fn worst(errors: &[f64]) -> f64 {
    errors.iter().copied().fold(0.0, f64::max)
}

pub fn conv() -> Cases {
    let mut rng = Rng::new(11);
    // (n, cin, h, w, cout, k, stride, pad)
    let shapes = [
        (1, 1, 5, 5, 1, 3, 1, 1),
        (2, 2, 6, 5, 3, 3, 2, 1),
        (1, 3, 7, 7, 2, 5, 1, 2),
        (2, 2, 4, 6, 2, 1, 2, 0),
        (1, 2, 8, 8, 4, 3, 2, 0),
        (3, 1, 5, 4, 2, 3, 1, 2),
    ];
    shapes
        .into_iter()
        .map(|(n, cin, h, w, cout, k, stride, pad)| {
            let x = random_tensor([n, cin, h, w], &mut rng);
            let wt = random_tensor([cout, cin, k, k], &mut rng);
            let bias: Vec<f64> = (0..cout).map(|_| rng.standard_normal()).collect();
            let y = conv2d_forward(&x, &wt, Some(&bias), stride, pad).unwrap();
            let r = random_tensor(y.shape(), &mut rng);
            let g = conv2d_backward(&x, &wt, &r, stride, pad).unwrap();
            let nx = numeric_grad(&x, |p| dot(&conv2d_forward(p, &wt, Some(&bias), stride, pad).unwrap(), &r));
            let nw = numeric_grad(&wt, |p| dot(&conv2d_forward(&x, p, Some(&bias), stride, pad).unwrap(), &r));
            let bt = Tensor::from_vec([1, cout, 1, 1], bias.clone()).unwrap();
            let nb = numeric_grad(&bt, |p| dot(&conv2d_forward(&x, &wt, Some(p.data()), stride, pad).unwrap(), &r));
            let e = worst(&[
                max_rel_err(g.grad_x.data(), &nx, FLOOR),
                max_rel_err(g.grad_w.data(), &nw, FLOOR),
                max_rel_err(&g.grad_b, &nb, FLOOR),
            ]);
            (format!("{:?}", (n, cin, h, w, cout, k, stride, pad)), e)
        })
        .collect()
}

pub fn batchnorm() -> Cases {
    let mut rng = Rng::new(12);
    [[2, 1, 3, 3], [4, 3, 2, 2], [1, 2, 4, 3], [3, 2, 1, 1], [2, 4, 3, 2]]
        .into_iter()
        .map(|shape| {
            let x = random_tensor(shape, &mut rng);
            let mut state = BatchNormState::<f64>::new(shape[1]);
            state.gamma.value = random_tensor([1, shape[1], 1, 1], &mut rng);
            state.beta.value = random_tensor([1, shape[1], 1, 1], &mut rng);
            let r = random_tensor(shape, &mut rng);
            let g = batchnorm_backward(&x, &state, &r).unwrap();
            let eval = |x: &Tensor<f64>, gamma: &Tensor<f64>, beta: &Tensor<f64>| {
                let mut s = BatchNormState::<f64>::new(shape[1]);
                s.gamma.value = gamma.clone();
                s.beta.value = beta.clone();
                dot(&batchnorm_forward(x, &mut s).unwrap(), &r)
            };
            let (gamma, beta) = (state.gamma.value.clone(), state.beta.value.clone());
            let nx = numeric_grad(&x, |p| eval(p, &gamma, &beta));
            let ng = numeric_grad(&gamma, |p| eval(&x, p, &beta));
            let nb = numeric_grad(&beta, |p| eval(&x, &gamma, p));
            let e = worst(&[
                max_rel_err(g.grad_x.data(), &nx, FLOOR),
                max_rel_err(g.grad_gamma.data(), &ng, FLOOR),
                max_rel_err(g.grad_beta.data(), &nb, FLOOR),
            ]);
            (format!("{shape:?}"), e)
        })
        .collect()
}

pub fn relu_layer() -> Cases {
    let mut rng = Rng::new(13);
    [[1, 1, 4, 4], [2, 3, 3, 2], [3, 1, 1, 5], [1, 4, 2, 2], [2, 2, 5, 1]]
        .into_iter()
        .map(|shape| {
            // Keep inputs away from the kink so the step never crosses it.
            let x = Tensor::from_fn(shape, |_| {
                let v = rng.standard_normal();
                v.signum() * (v.abs() + 0.05)
            });
            let r = random_tensor(shape, &mut rng);
            let g = relu_backward(&x, &r).unwrap();
            let n = numeric_grad(&x, |p| dot(&relu(p), &r));
            (format!("{shape:?}"), max_rel_err(g.data(), &n, FLOOR))
        })
        .collect()
}

pub fn maxpool() -> Cases {
    let mut rng = Rng::new(14);
    [[1, 1, 4, 4], [2, 2, 6, 4], [1, 3, 2, 2], [3, 1, 4, 8], [2, 2, 2, 6]]
        .into_iter()
        .map(|shape| {
            // Distinct values spaced far wider than the step keep the argmax fixed.
            let len: usize = shape.iter().product();
            let perm = rng.permutation(len);
            let x = Tensor::from_vec(shape, perm.iter().map(|&p| p as f64 * 0.1).collect()).unwrap();
            let (y, argmax) = maxpool2x2(&x).unwrap();
            let r = random_tensor(y.shape(), &mut rng);
            let g = maxpool2x2_backward(shape, &argmax, &r).unwrap();
            let n = numeric_grad(&x, |p| dot(&maxpool2x2(p).unwrap().0, &r));
            (format!("{shape:?}"), max_rel_err(g.data(), &n, FLOOR))
        })
        .collect()
}

pub fn global_avg() -> Cases {
    let mut rng = Rng::new(15);
    [[1, 1, 3, 3], [2, 4, 2, 2], [3, 2, 1, 5], [1, 5, 6, 6], [2, 1, 4, 1]]
        .into_iter()
        .map(|shape| {
            let x = random_tensor(shape, &mut rng);
            let r = random_tensor([shape[0], shape[1], 1, 1], &mut rng);
            let g = global_avg_pool_backward(shape, &r).unwrap();
            let n = numeric_grad(&x, |p| dot(&global_avg_pool(p), &r));
            (format!("{shape:?}"), max_rel_err(g.data(), &n, FLOOR))
        })
        .collect()
}

pub fn fully_connected_layer() -> Cases {
    let mut rng = Rng::new(16);
    [(1, 1, 1), (2, 5, 3), (4, 8, 10), (3, 2, 7), (1, 16, 4)]
        .into_iter()
        .map(|(n, d, k)| {
            let x = random_tensor([n, d, 1, 1], &mut rng);
            let w = random_tensor([k, d, 1, 1], &mut rng);
            let b = random_tensor([1, k, 1, 1], &mut rng);
            let r = random_tensor([n, k, 1, 1], &mut rng);
            let g = fully_connected_backward(&x, &w, &r).unwrap();
            let nx = numeric_grad(&x, |p| dot(&fully_connected(p, &w, b.data()).unwrap(), &r));
            let nw = numeric_grad(&w, |p| dot(&fully_connected(&x, p, b.data()).unwrap(), &r));
            let nb = numeric_grad(&b, |p| dot(&fully_connected(&x, &w, p.data()).unwrap(), &r));
            let e = worst(&[
                max_rel_err(g.grad_x.data(), &nx, FLOOR),
                max_rel_err(g.grad_w.data(), &nw, FLOOR),
                max_rel_err(&g.grad_b, &nb, FLOOR),
            ]);
            (format!("{:?}", (n, d, k)), e)
        })
        .collect()
}

pub fn softmax_ce() -> Cases {
    let mut rng = Rng::new(17);
    [(1, 2), (3, 10), (5, 4), (2, 7), (8, 3)]
        .into_iter()
        .map(|(n, k)| {
            let logits = Tensor::from_fn([n, k, 1, 1], |_| 3.0 * rng.standard_normal());
            let labels: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
            let (_, g) = softmax_cross_entropy(&logits, &labels).unwrap();
            let num = numeric_grad(&logits, |p| softmax_cross_entropy(p, &labels).unwrap().0);
            (format!("{:?}", (n, k)), max_rel_err(g.data(), &num, FLOOR))
        })
        .collect()
}

pub fn basic_block() -> Cases {
    let mut rng = Rng::new(18);
    // (n, cin, cout, size, stride): identity and projection shortcuts.
    [(2, 2, 2, 4, 1), (2, 2, 3, 4, 2), (3, 1, 2, 6, 2), (2, 3, 3, 3, 1), (4, 2, 4, 2, 2)]
        .into_iter()
        .map(|(n, cin, cout, size, stride)| {
            let mut block = BasicBlock::<f64>::new(cin, cout, 3, stride, &mut rng);
            let x = random_tensor([n, cin, size, size], &mut rng);
            let y = block.forward(x.clone()).unwrap();
            let r = random_tensor(y.shape(), &mut rng);
            let gx = block.backward(&r).unwrap();
            let analytic_w = block.conv1.weight.grad.clone();
            let mut probe = block.clone();
            let nx = numeric_grad(&x, |p| dot(&probe.forward(p.clone()).unwrap(), &r));
            let w = block.conv1.weight.value.clone();
            let nw = numeric_grad(&w, |p| {
                probe.conv1.weight.value = p.clone();
                dot(&probe.forward(x.clone()).unwrap(), &r)
            });
            let e = worst(&[max_rel_err(gx.data(), &nx, FLOOR), max_rel_err(analytic_w.data(), &nw, FLOOR)]);
            (format!("{:?}", (n, cin, cout, size, stride)), e)
        })
        .collect()
}

/// Every layer check, labelled by layer.
pub fn all_layers() -> Vec<(&'static str, Cases)> {
    vec![
        ("conv", conv()),
        ("batchnorm", batchnorm()),
        ("relu", relu_layer()),
        ("maxpool", maxpool()),
        ("global_avg_pool", global_avg()),
        ("fully_connected", fully_connected_layer()),
        ("softmax_cross_entropy", softmax_ce()),
        ("basic_block", basic_block()),
    ]
}

/// Relative errors of [`NETWORK_SAMPLES`] randomly sampled parameters of a
/// reduced network, with the parameter name.
pub fn full_network() -> Cases {
    let config = NetworkConfig { input_size: 32, num_classes: 4, width_mult: 0.125, ..NetworkConfig::default() };
    let mut rng = Rng::new(19);
    let mut net = Network::<f64>::build(&config, &mut rng).unwrap();
    let x = Tensor::from_fn([4, 1, 32, 32], |_| rng.next_f64());
    let labels = [0, 1, 2, 3];
    net.zero_grad();
    let logits = net.forward(x.clone()).unwrap();
    let (_, g) = softmax_cross_entropy(&logits, &labels).unwrap();
    net.backward(&g).unwrap();

    let params: Vec<(String, Vec<f64>)> =
        net.named_params().into_iter().map(|(n, p)| (n, p.grad.data().to_vec())).collect();
    let mut sample_rng = Rng::new(20);
    (0..NETWORK_SAMPLES)
        .map(|_| {
            let (name, grad) = &params[sample_rng.below(params.len())];
            let i = sample_rng.below(grad.len());
            let mut loss_at = |delta: f64| {
                let t = net.tensor_mut(name).unwrap();
                let orig = t.data()[i];
                t.data_mut()[i] = orig + delta;
                let l = softmax_cross_entropy(&net.forward(x.clone()).unwrap(), &labels).unwrap().0;
                net.tensor_mut(name).unwrap().data_mut()[i] = orig;
                l
            };
            let numeric = (loss_at(NETWORK_STEP) - loss_at(-NETWORK_STEP)) / (2.0 * NETWORK_STEP);
            (format!("{name}[{i}]"), rel_err(grad[i], numeric, 1e-7))
        })
        .collect()
}
