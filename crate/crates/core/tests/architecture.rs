mod common;

use satm::model::{Network, NetworkConfig};
use satm::nn::batchnorm::Mode;
use satm::nn::loss::softmax_cross_entropy;
use satm::{Rng, Tensor};

#[test]
fn default_network_audit() {
    let net = Network::<f32>::build(&NetworkConfig::default(), &mut Rng::new(1)).unwrap();
    let report = net.report();
    assert_eq!(report.convolutions, 17);
    assert_eq!(report.projection_convolutions, 3);
    assert_eq!(report.fully_connected, 1);
    // Closed form computed independently: ResNet-18 layout with a 1-channel
    // 5x5 stem, bias-free convolutions, BN scale and shift, 10-way head.
    assert_eq!(report.parameters, 11_173_834);
    let y = net.infer(&Tensor::zeros([1, 1, 96, 96])).unwrap();
    assert_eq!(y.shape(), [1, 10, 1, 1]);
}

#[test]
fn desk_width_parameter_count() {
    let net = Network::<f32>::build(&NetworkConfig::desk(), &mut Rng::new(1)).unwrap();
    assert_eq!(net.report().parameters, 701_434);
}

#[test]
fn canonical_parameter_names() {
    let net = Network::<f32>::build(&NetworkConfig::desk(), &mut Rng::new(1)).unwrap();
    let names: Vec<String> = net.named_params().into_iter().map(|(n, _)| n).collect();
    assert_eq!(names.first().map(String::as_str), Some("stem.conv.weight"));
    assert_eq!(names.last().map(String::as_str), Some("fc.bias"));
    assert!(names.iter().any(|n| n == "stage2.block0.shortcut.conv.weight"));
    assert!(!names.iter().any(|n| n.starts_with("stage1.") && n.contains("shortcut")));
    let conv_weights = names.iter().filter(|n| n.ends_with(".weight") && n.contains("conv") && !n.contains("shortcut")).count();
    assert_eq!(conv_weights, 17);
}

#[test]
fn same_seed_same_weights() {
    let a = Network::<f32>::build(&NetworkConfig::desk(), &mut Rng::new(9)).unwrap();
    let b = Network::<f32>::build(&NetworkConfig::desk(), &mut Rng::new(9)).unwrap();
    for ((na, ta), (nb, tb)) in a.named_tensors().into_iter().zip(b.named_tensors()) {
        assert_eq!(na, nb);
        assert_eq!(ta, tb);
    }
}

#[test]
fn inference_is_pure_and_batch_independent() {
    let mut rng = Rng::new(2);
    let config = NetworkConfig { input_size: 32, width_mult: 0.125, ..NetworkConfig::default() };
    let mut net = Network::<f32>::build(&config, &mut rng).unwrap();
    let x = Tensor::from_fn([3, 1, 32, 32], |_| rng.next_f64() as f32);
    // Give the running statistics non-trivial values first.
    net.forward(x.clone()).unwrap();
    net.set_mode(Mode::Inference);
    let before: Vec<_> = net.named_tensors().into_iter().map(|(_, t)| t.clone()).collect();
    let batch = net.infer(&x).unwrap();
    let again = net.forward(x.clone()).unwrap();
    assert_eq!(batch, again);
    let after: Vec<_> = net.named_tensors().into_iter().map(|(_, t)| t.clone()).collect();
    assert_eq!(before, after);
    for i in 0..3 {
        let single = Tensor::from_vec([1, 1, 32, 32], x.item(i).to_vec()).unwrap();
        let y = net.infer(&single).unwrap();
        assert_eq!(y.data(), batch.item(i));
    }
}

#[test]
fn wrong_input_shape_is_rejected() {
    let net = Network::<f32>::build(&NetworkConfig::desk(), &mut Rng::new(1)).unwrap();
    let err = net.infer(&Tensor::zeros([1, 1, 64, 64])).unwrap_err();
    assert!(err.to_string().contains("96"), "{err}");
}

#[test]
fn uniform_logits_loss_is_ln_k() {
    let logits = Tensor::<f64>::full([4, 10, 1, 1], 0.3);
    let (loss, _) = softmax_cross_entropy(&logits, &[0, 3, 5, 9]).unwrap();
    assert!((loss - 10f64.ln()).abs() < 1e-12);
    assert!((loss - 2.302585).abs() < 1e-6);
}

#[test]
fn residual_blocks_with_zero_branch_pass_input_through() {
    // With the second BN's scale and shift at zero, an identity block
    // computes relu(x); for non-negative x that is x itself.
    let mut rng = Rng::new(4);
    let mut block = satm::model::BasicBlock::<f64>::new(3, 3, 3, 1, &mut rng);
    block.bn2.state.gamma.value.fill(0.0);
    block.bn2.state.beta.value.fill(0.0);
    let x = Tensor::from_fn([2, 3, 5, 5], |_| rng.next_f64());
    let y = block.forward(x.clone()).unwrap();
    assert!(y.max_abs_diff(&x) < 1e-12);
}
