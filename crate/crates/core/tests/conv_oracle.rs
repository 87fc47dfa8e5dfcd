//! Convolution against a direct nested-loop evaluation of its definition.

mod common;

use common::{conv_reference, conv_sweep, random_tensor, CONV_TOL};
use satm::nn::conv::conv2d_forward;
use satm::Rng;

#[test]
fn randomized_shape_sweep() {
    let cases = conv_sweep();
    assert_eq!(cases.len(), 54);
    for (case, diff) in cases {
        assert!(diff < CONV_TOL, "{case} diff {diff}");
    }
}

#[test]
fn single_precision_matches_reference() {
    let mut rng = Rng::new(22);
    let x = random_tensor([2, 3, 11, 9], &mut rng);
    let wt = random_tensor([4, 3, 3, 3], &mut rng);
    let want = conv_reference(&x, &wt, &[0.0; 4], 2, 1);
    let got = conv2d_forward(&x.cast::<f32>(), &wt.cast::<f32>(), None, 2, 1).unwrap();
    assert!(got.cast::<f64>().max_abs_diff(&want) < 1e-5);
}
