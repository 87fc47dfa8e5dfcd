use crate::error::{Error, Result};
use crate::nn::tensor::{Scalar, Tensor};

/// Numerically stable softmax over each row of `(N, K)` logits.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let k = logits.item_len();
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

/// Mean cross-entropy of `softmax(logits)` against class indices, and its
/// gradient `(softmax - onehot) / N`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let (n, k) = (logits.n(), logits.item_len());
    if labels.len() != n {
        return Err(Error::InvalidShape(format!("{} labels for {n} logit rows", labels.len())));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidLabel { label, classes: k });
    }
    let mut grad = softmax(logits);
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let row = &logits.data()[i * k..(i + 1) * k];
        let max = row.iter().map(|v| v.f64()).fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v.f64() - max).exp()).sum::<f64>().ln();
        loss += lse - row[label].f64();
        let g = &mut grad.data_mut()[i * k..(i + 1) * k];
        g[label] = g[label] - T::one();
        for v in g.iter_mut() {
            *v = *v * T::of(inv_n);
        }
    }
    Ok((T::of(loss * inv_n), grad))
}
