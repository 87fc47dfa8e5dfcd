use crate::error::{Error, Result};
use crate::nn::tensor::{Scalar, Tensor};

/// 2x2 max pooling with stride 2. Returns the pooled tensor and, per output
/// cell, the flat input index of the selected value (first maximum in
/// row-major window order wins ties).
pub fn maxpool2x2<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let [n, c, h, w] = x.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::InvalidShape(format!("2x2 max pool needs even extents, got {:?}", x.shape())));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros([n, c, oh, ow]);
    let mut argmax = vec![0usize; n * c * oh * ow];
    let src = x.data();
    let dst = out.data_mut();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                let o = (plane * oh + oy) * ow + ox;
                dst[o] = src[best];
                argmax[o] = best;
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool2x2_backward<T: Scalar>(
    input_shape: [usize; 4],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    if grad_out.len() != argmax.len() {
        return Err(Error::InvalidShape(format!(
            "max pool grad_out {:?} has {} cells, argmax has {}",
            grad_out.shape(),
            grad_out.len(),
            argmax.len()
        )));
    }
    let mut g = Tensor::zeros(input_shape);
    let gd = g.data_mut();
    for (&idx, &v) in argmax.iter().zip(grad_out.data()) {
        gd[idx] = gd[idx] + v;
    }
    Ok(g)
}

/// Per-channel spatial mean, `(N,C,H,W) -> (N,C,1,1)`.
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let [n, c, h, w] = x.shape();
    let hw = h * w;
    let inv = T::one() / T::of(hw as f64);
    Tensor::from_fn([n, c, 1, 1], |i| x.data()[i * hw..(i + 1) * hw].iter().copied().sum::<T>() * inv)
}

pub fn global_avg_pool_backward<T: Scalar>(input_shape: [usize; 4], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = input_shape;
    if grad_out.shape() != [n, c, 1, 1] {
        return Err(Error::InvalidShape(format!(
            "global pool grad_out {:?} for input {input_shape:?}",
            grad_out.shape()
        )));
    }
    let hw = h * w;
    let inv = T::one() / T::of(hw as f64);
    Ok(Tensor::from_fn(input_shape, |i| grad_out.data()[i / hw] * inv))
}
