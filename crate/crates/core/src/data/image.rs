use std::path::Path;

use crate::error::{Error, Result};

/// A single-channel raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidShape(format!("{rows}x{cols} image with {} values", data.len())));
        }
        Ok(Image { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Image { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f32) {
        self.data[row * self.cols + col] = v;
    }

    /// `size x size` window with top-left corner `(top, left)`; the caller
    /// guarantees it lies inside the image.
    pub fn window(&self, top: usize, left: usize, size: usize) -> Image {
        debug_assert!(top + size <= self.rows && left + size <= self.cols);
        let mut data = Vec::with_capacity(size * size);
        for r in top..top + size {
            data.extend_from_slice(&self.data[r * self.cols + left..r * self.cols + left + size]);
        }
        Image { rows: size, cols: size, data }
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    /// Location `(row, col)` of the first maximum in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        (best / self.cols, best % self.cols)
    }
}

/// Percentile of the raw magnitudes used as the normalization divisor.
pub const NORMALIZATION_PERCENTILE: f64 = 99.9;

/// Nearest-rank percentile: the value at sorted position
/// `ceil(p/100 * n) - 1` (clamped to `[0, n-1]`), ignoring float noise in
/// the product.
pub fn percentile(values: &[f32], p: f64) -> Result<f32> {
    if values.is_empty() {
        return Err(Error::EmptyInput("percentile of an empty set"));
    }
    let n = values.len();
    let rank = ((p / 100.0 * n as f64 - 1e-9).ceil() as usize).clamp(1, n) - 1;
    let mut v = values.to_vec();
    let (_, nth, _) = v.select_nth_unstable_by(rank, f32::total_cmp);
    Ok(*nth)
}

/// Divides by `scale` and clamps to `[0, 1]`.
pub fn normalize(patch: &Image, scale: f32) -> Image {
    let inv = 1.0 / scale;
    Image { rows: patch.rows, cols: patch.cols, data: patch.data.iter().map(|&v| (v * inv).clamp(0.0, 1.0)).collect() }
}

/// Binary 16-bit PGM (`P5`, maxval 65535, big-endian samples), linearly
/// scaled so the image maximum maps to 65535.
pub fn write_pgm16(image: &Image, path: &Path) -> Result<()> {
    std::fs::write(path, encode_pgm16(image)).map_err(|e| Error::io(path, e))
}

pub fn encode_pgm16(image: &Image) -> Vec<u8> {
    let max = image.max();
    let mut out = format!("P5\n{} {}\n65535\n", image.cols, image.rows).into_bytes();
    for &v in &image.data {
        let s = if max > 0.0 { (f64::from(v.max(0.0)) / f64::from(max) * 65535.0).round() as u16 } else { 0 };
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}
