use crate::error::{Error, Result};
use crate::nn::tensor::{matmul, MatRef, Scalar, Tensor};

/// `y = x W^T + b` with `x` flattened to `(N, D)`, `w` of shape `(K, D, 1, 1)`
/// and `b` of length `K`. The result has shape `(N, K, 1, 1)`.
pub fn fully_connected<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &[T]) -> Result<Tensor<T>> {
    let (n, d, k) = check(x, w, b.len())?;
    let mut out = Tensor::from_fn([n, k, 1, 1], |i| b[i % k]);
    matmul(MatRef::new(x.data(), n, d), MatRef::transposed(w.data(), d, k), out.data_mut(), true);
    Ok(out)
}

fn check<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, bias_len: usize) -> Result<(usize, usize, usize)> {
    let (n, d) = (x.n(), x.item_len());
    let k = w.n();
    if w.item_len() != d || bias_len != k {
        return Err(Error::InvalidShape(format!(
            "fully connected input {:?} against weights {:?} and bias of {bias_len}",
            x.shape(),
            w.shape()
        )));
    }
    Ok((n, d, k))
}

#[derive(Debug, Clone)]
pub struct LinearGrads<T> {
    pub grad_x: Tensor<T>,
    pub grad_w: Tensor<T>,
    pub grad_b: Vec<T>,
}

pub fn fully_connected_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<LinearGrads<T>> {
    let (n, d, k) = check(x, w, w.n())?;
    if grad_out.shape() != [n, k, 1, 1] {
        return Err(Error::InvalidShape(format!("fully connected grad_out {:?}", grad_out.shape())));
    }
    let mut grad_x = Tensor::zeros(x.shape());
    matmul(MatRef::new(grad_out.data(), n, k), MatRef::new(w.data(), k, d), grad_x.data_mut(), false);
    let mut grad_w = Tensor::zeros(w.shape());
    matmul(MatRef::transposed(grad_out.data(), k, n), MatRef::new(x.data(), n, d), grad_w.data_mut(), false);
    let grad_b = (0..k).map(|j| (0..n).map(|i| grad_out.data()[i * k + j]).sum()).collect();
    Ok(LinearGrads { grad_x, grad_w, grad_b })
}
