//! 2-D convolution by im2col and a single GEMM per batch item.

use crate::error::{Error, Result};
use crate::nn::tensor::{matmul, MatRef, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Geometry {
    cin: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn new(x: [usize; 4], w: [usize; 4], stride: usize, pad: usize) -> Result<Self> {
        let [_, cin, h, wd] = x;
        let [_, wcin, kh, kw] = w;
        if stride == 0 {
            return Err(Error::InvalidShape("convolution stride must be positive".into()));
        }
        if cin != wcin {
            return Err(Error::InvalidShape(format!(
                "conv input {x:?} has {cin} channels but weights {w:?} expect {wcin}"
            )));
        }
        if h + 2 * pad < kh || wd + 2 * pad < kw || kh == 0 || kw == 0 {
            return Err(Error::InvalidShape(format!(
                "kernel of weights {w:?} does not fit padded input {x:?} (pad {pad})"
            )));
        }
        // Floor division: trailing rows/cols that do not fill a stride step are dropped.
        let oh = (h + 2 * pad - kh) / stride + 1;
        let ow = (wd + 2 * pad - kw) / stride + 1;
        Ok(Geometry { cin, h, w: wd, kh, kw, stride, pad, oh, ow })
    }

    fn k(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn p(&self) -> usize {
        self.oh * self.ow
    }

    /// 1x1, stride 1, no padding: the input item already is the column matrix.
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        let p = self.p();
        for c in 0..self.cin {
            let plane = &x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = &mut cols[((c * self.kh + ki) * self.kw + kj) * p..][..p];
                    for oy in 0..self.oh {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        let dst = &mut row[oy * self.ow..(oy + 1) * self.ow];
                        if iy < 0 || iy >= self.h as isize {
                            dst.fill(T::zero());
                            continue;
                        }
                        let src = &plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                            *d = if ix < 0 || ix >= self.w as isize { T::zero() } else { src[ix as usize] };
                        }
                    }
                }
            }
        }
    }

    /// Scatter-add of a column matrix back onto an input item.
    fn col2im<T: Scalar>(&self, cols: &[T], x: &mut [T]) {
        let p = self.p();
        for c in 0..self.cin {
            let plane = &mut x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = &cols[((c * self.kh + ki) * self.kw + kj) * p..][..p];
                    for oy in 0..self.oh {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for ox in 0..self.ow {
                            let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                            if ix >= 0 && ix < self.w as isize {
                                dst[ix as usize] = dst[ix as usize] + row[oy * self.ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Output extent of a convolution along one axis (floor rule).
pub fn conv_out_extent(input: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (input + 2 * pad - kernel) / stride + 1
}

/// Zero-padded cross-correlation: `x (N,Cin,H,W)`, `w (Cout,Cin,kh,kw)`,
/// optional bias of length `Cout`.
pub fn conv2d_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: Option<&[T]>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    let g = Geometry::new(x.shape(), w.shape(), stride, pad)?;
    let cout = w.n();
    if let Some(b) = bias {
        if b.len() != cout {
            return Err(Error::InvalidShape(format!("bias length {} for {cout} output channels", b.len())));
        }
    }
    let (k, p) = (g.k(), g.p());
    let mut out = Tensor::zeros([x.n(), cout, g.oh, g.ow]);
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); k * p] };
    let wmat = MatRef::new(w.data(), cout, k);
    for n in 0..x.n() {
        let xi = x.item(n);
        let colmat = if g.is_pointwise() {
            MatRef::new(xi, k, p)
        } else {
            g.im2col(xi, &mut cols);
            MatRef::new(&cols, k, p)
        };
        let oi = out.item_mut(n);
        if let Some(b) = bias {
            for (o, &bo) in b.iter().enumerate() {
                oi[o * p..(o + 1) * p].fill(bo);
            }
        }
        matmul(wmat, colmat, oi, bias.is_some());
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub grad_x: Tensor<T>,
    pub grad_w: Tensor<T>,
    pub grad_b: Vec<T>,
}

/// Gradients of [`conv2d_forward`] with respect to input, weights and bias.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<ConvGrads<T>> {
    let g = Geometry::new(x.shape(), w.shape(), stride, pad)?;
    let cout = w.n();
    let expected = [x.n(), cout, g.oh, g.ow];
    if grad_out.shape() != expected {
        return Err(Error::InvalidShape(format!(
            "conv grad_out {:?} does not match forward output {expected:?}",
            grad_out.shape()
        )));
    }
    let (k, p) = (g.k(), g.p());
    let mut grad_x = Tensor::zeros(x.shape());
    let mut grad_w = Tensor::zeros(w.shape());
    let mut grad_b = vec![T::zero(); cout];
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); k * p] };
    let mut grad_cols = vec![T::zero(); k * p];
    let w_t = MatRef::transposed(w.data(), k, cout);
    for n in 0..x.n() {
        let go = grad_out.item(n);
        for (o, gb) in grad_b.iter_mut().enumerate() {
            *gb = *gb + go[o * p..(o + 1) * p].iter().copied().sum::<T>();
        }
        let go_mat = MatRef::new(go, cout, p);
        let xi = x.item(n);
        let cols_t = if g.is_pointwise() {
            MatRef::transposed(xi, p, k)
        } else {
            g.im2col(xi, &mut cols);
            MatRef::transposed(&cols, p, k)
        };
        matmul(go_mat, cols_t, grad_w.data_mut(), true);
        if g.is_pointwise() {
            matmul(w_t, go_mat, grad_x.item_mut(n), false);
        } else {
            matmul(w_t, go_mat, &mut grad_cols, false);
            g.col2im(&grad_cols, grad_x.item_mut(n));
        }
    }
    Ok(ConvGrads { grad_x, grad_w, grad_b })
}
