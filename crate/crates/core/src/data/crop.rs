use crate::data::image::Image;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CropMode {
    Center,
    Random,
    Translated { dx: i64, dy: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropSpec {
    pub crop_size: usize,
    /// Side of the centered region random crops are drawn from.
    pub aug_source_size: usize,
    pub mode: CropMode,
}

impl Default for CropSpec {
    fn default() -> Self {
        CropSpec { crop_size: 96, aug_source_size: 100, mode: CropMode::Center }
    }
}

impl CropSpec {
    pub fn center(crop_size: usize) -> Self {
        CropSpec { crop_size, aug_source_size: crop_size, mode: CropMode::Center }
    }

    pub fn random(crop_size: usize, aug_source_size: usize) -> Self {
        CropSpec { crop_size, aug_source_size, mode: CropMode::Random }
    }

    pub fn translated(crop_size: usize, dx: i64, dy: i64) -> Self {
        CropSpec { crop_size, aug_source_size: crop_size, mode: CropMode::Translated { dx, dy } }
    }
}

/// Top-left offset of a centered window: `floor((extent - size) / 2)`.
pub fn center_offset(extent: usize, size: usize) -> usize {
    (extent - size) / 2
}

/// Largest `|dx|`, `|dy|` accepted by [`translated_crop`] for a chip of this
/// extent: `floor((min(rows, cols) - size) / 2)`.
pub fn max_translation(rows: usize, cols: usize, size: usize) -> usize {
    (rows.min(cols).saturating_sub(size)) / 2
}

fn check_fits(img: &Image, size: usize) -> Result<()> {
    if size == 0 || size > img.rows || size > img.cols {
        return Err(Error::InvalidCrop(format!("{size}x{size} crop from a {}x{} chip", img.rows, img.cols)));
    }
    Ok(())
}

pub fn center_crop(img: &Image, size: usize) -> Result<Image> {
    check_fits(img, size)?;
    Ok(img.window(center_offset(img.rows, size), center_offset(img.cols, size), size))
}

/// Center crop whose window is shifted by `(dx, dy)`. Shifts beyond
/// [`max_translation`] are rejected even where an odd slack would leave
/// room on one side, so the legal range is symmetric.
pub fn translated_crop(img: &Image, size: usize, dx: i64, dy: i64) -> Result<Image> {
    check_fits(img, size)?;
    let bound = max_translation(img.rows, img.cols, size);
    if dx.unsigned_abs() as usize > bound || dy.unsigned_abs() as usize > bound {
        return Err(Error::Range {
            message: format!("translation ({dx}, {dy}) of a {size}px crop from a {}x{} chip", img.rows, img.cols),
            bound,
        });
    }
    let top = center_offset(img.rows, size) as i64 + dy;
    let left = center_offset(img.cols, size) as i64 + dx;
    Ok(img.window(top as usize, left as usize, size))
}

/// Draws the `(row, col)` offset of a random crop inside the source region:
/// row first, then column, each uniform over `0..=source - crop`.
pub fn random_offset(spec: &CropSpec, rng: &mut Rng) -> (usize, usize) {
    let slack = spec.aug_source_size - spec.crop_size;
    let oy = rng.below(slack + 1);
    let ox = rng.below(slack + 1);
    (oy, ox)
}

/// Center-crops to `aug_source_size`, then takes a `crop_size` window at a
/// uniformly random offset within it.
pub fn random_crop_aug(img: &Image, spec: &CropSpec, rng: &mut Rng) -> Result<Image> {
    if spec.aug_source_size < spec.crop_size {
        return Err(Error::InvalidCrop(format!(
            "augmentation source {} smaller than crop {}",
            spec.aug_source_size, spec.crop_size
        )));
    }
    let source = center_crop(img, spec.aug_source_size)?;
    check_fits(&source, spec.crop_size)?;
    let (oy, ox) = random_offset(spec, rng);
    Ok(source.window(oy, ox, spec.crop_size))
}

/// Applies `spec`. Random mode requires a generator.
pub fn apply_crop(img: &Image, spec: &CropSpec, rng: Option<&mut Rng>) -> Result<Image> {
    match spec.mode {
        CropMode::Center => center_crop(img, spec.crop_size),
        CropMode::Translated { dx, dy } => translated_crop(img, spec.crop_size, dx, dy),
        CropMode::Random => match rng {
            Some(rng) => random_crop_aug(img, spec, rng),
            None => Err(Error::InvalidCrop("random crop without a generator".into())),
        },
    }
}

/// Pixelwise arithmetic mean of the cropped images (deterministic crop
/// modes only).
pub fn mean_image<'a>(images: impl IntoIterator<Item = &'a Image>, spec: &CropSpec) -> Result<Image> {
    if spec.mode == CropMode::Random {
        return Err(Error::InvalidCrop("mean image needs a deterministic crop".into()));
    }
    let mut sum: Vec<f64> = Vec::new();
    let mut count = 0usize;
    let mut size = 0;
    for img in images {
        let patch = apply_crop(img, spec, None)?;
        if count == 0 {
            size = patch.rows;
            sum = vec![0.0; patch.data.len()];
        }
        for (s, &v) in sum.iter_mut().zip(&patch.data) {
            *s += f64::from(v);
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyInput("mean image of an empty chip list"));
    }
    Image::new(size, size, sum.into_iter().map(|s| (s / count as f64) as f32).collect())
}
