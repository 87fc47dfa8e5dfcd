#![allow(dead_code)]

pub mod gradcheck;

use satm::data::{Chip, Image, Split};
use satm::{Rng, Tensor};

/// Central-difference step used by every gradient check.
pub const FD_STEP: f64 = 1e-4;

pub fn random_tensor(shape: [usize; 4], rng: &mut Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.standard_normal())
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Central differences of `f` with respect to every element of `x`.
pub fn numeric_grad(x: &Tensor<f64>, mut f: impl FnMut(&Tensor<f64>) -> f64) -> Vec<f64> {
    let mut probe = x.clone();
    (0..x.len())
        .map(|i| {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + FD_STEP;
            let up = f(&probe);
            probe.data_mut()[i] = orig - FD_STEP;
            let down = f(&probe);
            probe.data_mut()[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Largest elementwise relative error between two gradient vectors.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic.iter().zip(numeric).map(|(&a, &n)| rel_err(a, n, floor)).fold(0.0, f64::max)
}

/// `sum(y * r)`: a scalar objective whose gradient with respect to `y` is `r`.
pub fn dot(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

pub fn chip(pixels: Image, label: usize) -> Chip {
    Chip {
        pixels,
        label,
        class_name: format!("c{label}"),
        serial: String::new(),
        depression_deg: 17.0,
        split: Split::Test,
        source_path: format!("chip{label}").into(),
    }
}

/// A small model whose running statistics differ from their initial values.
pub fn small_model(seed: u64) -> satm::model::TrainedModel {
    use satm::model::{Network, NetworkConfig, TrainedModel, TrainingMeta};
    use satm::nn::batchnorm::Mode;
    let config = NetworkConfig { input_size: 16, num_classes: 3, width_mult: 0.0625, ..NetworkConfig::default() };
    let mut rng = Rng::new(seed);
    let mut network = Network::<f32>::build(&config, &mut rng).unwrap();
    network.forward(Tensor::from_fn([4, 1, 16, 16], |_| rng.next_f64() as f32)).unwrap();
    network.set_mode(Mode::Inference);
    let meta = TrainingMeta {
        seed,
        epochs: 1,
        augmentation: satm::train::Augmentation::RandomCrop { source: 20 },
        crop_size: 16,
        norm_scale: 0.8125,
        class_names: vec!["a".into(), "b".into(), "c".into()],
    };
    TrainedModel { network, meta }
}

/// Direct nested-loop convolution with zero padding.
pub fn conv_reference(x: &Tensor<f64>, w: &Tensor<f64>, bias: &[f64], stride: usize, pad: usize) -> Tensor<f64> {
    let [n, cin, h, wd] = x.shape();
    let [cout, _, k, _] = w.shape();
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    let mut y = Tensor::zeros([n, cout, oh, ow]);
    for b in 0..n {
        for o in 0..cout {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = bias[o];
                    for c in 0..cin {
                        for u in 0..k {
                            for v in 0..k {
                                let r = (i * stride + u) as isize - pad as isize;
                                let s = (j * stride + v) as isize - pad as isize;
                                if r >= 0 && s >= 0 && (r as usize) < h && (s as usize) < wd {
                                    acc += w.at(o, c, u, v) * x.at(b, c, r as usize, s as usize);
                                }
                            }
                        }
                    }
                    y.data_mut()[((b * cout + o) * oh + i) * ow + j] = acc;
                }
            }
        }
    }
    y
}

pub const CONV_TOL: f64 = 1e-6;

/// Largest elementwise difference from [`conv_reference`] for three random
/// shapes at every kernel 1/3/5, stride 1-2 and pad 0-2 combination.
pub fn conv_sweep() -> Vec<(String, f64)> {
    let mut rng = Rng::new(21);
    let mut cases = Vec::new();
    for kernel in [1, 3, 5] {
        for stride in [1, 2] {
            for pad in 0..=2 {
                for _ in 0..3 {
                    let n = 1 + rng.below(2);
                    let cin = 1 + rng.below(3);
                    let cout = 1 + rng.below(4);
                    let h = kernel + rng.below(7);
                    let w = kernel + rng.below(7);
                    let x = random_tensor([n, cin, h, w], &mut rng);
                    let wt = random_tensor([cout, cin, kernel, kernel], &mut rng);
                    let bias: Vec<f64> = (0..cout).map(|_| rng.standard_normal()).collect();
                    let got = satm::nn::conv::conv2d_forward(&x, &wt, Some(&bias), stride, pad).unwrap();
                    let want = conv_reference(&x, &wt, &bias, stride, pad);
                    let diff = if got.shape() == want.shape() { got.max_abs_diff(&want) } else { f64::INFINITY };
                    cases.push((format!("k{kernel} s{stride} p{pad} [{n},{cin},{h},{w}]"), diff));
                }
            }
        }
    }
    cases
}

/// Bit patterns of the magnitudes in `fixtures/phoenix_4x5.bin`.
pub const PHOENIX_GOLDEN_BITS: [u32; 20] = [
    0x0, 0x3fc00000, 0x3a83126f, 0x3b54fdf4, 0x40e00000, 0x3e000000, 0x3d800000, 0x35800000, 0x414c0000, 0x3eaa7efa,
    0x33d6bf95, 0x45800000, 0x3f000000, 0x3f400000, 0x3f600000, 0x3c23d70a, 0x3ca3d70a, 0x3cf5c28f, 0x3d23d70a,
    0x42c70000,
];

pub fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)).unwrap()
}
