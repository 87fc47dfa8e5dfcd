//! Chip ingestion, dataset manifests, crops and input normalization.
//!
//! Coordinates are `(row, col) = (y, x)`. A translation `(dx, dy)` moves the
//! crop window: positive `dx` shifts the window right (the target appears
//! shifted left in the patch), positive `dy` shifts it down.

mod crop;
mod dataset;
mod image;
pub mod phoenix;
pub mod portable;

pub use crop::{
    apply_crop, center_crop, center_offset, max_translation, mean_image, random_crop_aug, random_offset,
    translated_crop, CropMode, CropSpec,
};
pub use dataset::{
    chip_metadata, detect_format, load_chip_file, load_dataset, read_class_list, validate_split, write_class_list, Chip, ChipFormat,
    Dataset, DatasetManifest, LoadOptions, ManifestEntry, Split, SplitReport, CLASS_LIST_FILE, MSTAR_CLASSES,
    MSTAR_COUNTS,
};
pub use image::{normalize, percentile, write_pgm16, Image, NORMALIZATION_PERCENTILE};
