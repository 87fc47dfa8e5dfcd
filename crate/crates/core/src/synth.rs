//! Deterministic synthetic SAR-like chips.
//!
//! Each chip holds one of ten silhouettes, rotated to a random azimuth about
//! its centroid and placed with the centroid on the chip center. The
//! noiseless intensity is `clutter + amplitude * mask * (1 + core * g(r))`,
//! where `g` is a Gaussian bump at the centroid standing in for a dominant
//! scatterer. Every pixel is then multiplied by unit-mean gamma speckle with
//! shape `speckle_looks`.
//!
//! The output is a pure function of [`SynthConfig`]: sample `i` draws from
//! its own stream `(seed, "synth", i)`.

use std::f64::consts::TAU;
use std::path::Path;

use crate::config::KeyValues;
use crate::data::portable::encode_sarc;
use crate::data::{chip_metadata, write_class_list, Chip, DatasetManifest, Image, Split};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const CLASS_NAMES: [&str; 10] =
    ["bar", "ell", "tee", "cross", "ellipse", "ring", "wedge", "double_bar", "square", "chevron"];

pub const CONFIG_FILE: &str = "synth.cfg";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub chip_size: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Gamma shape of the multiplicative speckle; its variance is `1 / looks`.
    pub speckle_looks: f64,
    /// Mean background level.
    pub clutter_level: f64,
    pub target_amplitude: f64,
    /// Extra gain of the central scatterer relative to the body.
    pub core_gain: f64,
    /// Width (std, pixels) of the central scatterer.
    pub core_sigma: f64,
    /// Maximum absolute integer offset of the target from the chip center;
    /// 0 places every target exactly at the center.
    pub jitter: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            chip_size: 128,
            train_per_class: 50,
            test_per_class: 30,
            speckle_looks: 4.0,
            clutter_level: 0.1,
            target_amplitude: 1.0,
            core_gain: 1.0,
            core_sigma: 4.0,
            jitter: 0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("chip_size", self.chip_size);
        kv.set("train_per_class", self.train_per_class);
        kv.set("test_per_class", self.test_per_class);
        kv.set("speckle_looks", self.speckle_looks);
        kv.set("clutter_level", self.clutter_level);
        kv.set("target_amplitude", self.target_amplitude);
        kv.set("core_gain", self.core_gain);
        kv.set("core_sigma", self.core_sigma);
        kv.set("jitter", self.jitter);
        kv.set("seed", self.seed);
        kv
    }

    /// Absent keys keep their defaults.
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let cfg = SynthConfig {
            chip_size: kv.parsed_or("chip_size", d.chip_size)?,
            train_per_class: kv.parsed_or("train_per_class", d.train_per_class)?,
            test_per_class: kv.parsed_or("test_per_class", d.test_per_class)?,
            speckle_looks: kv.parsed_or("speckle_looks", d.speckle_looks)?,
            clutter_level: kv.parsed_or("clutter_level", d.clutter_level)?,
            target_amplitude: kv.parsed_or("target_amplitude", d.target_amplitude)?,
            core_gain: kv.parsed_or("core_gain", d.core_gain)?,
            core_sigma: kv.parsed_or("core_sigma", d.core_sigma)?,
            jitter: kv.parsed_or("jitter", d.jitter)?,
            seed: kv.parsed_or("seed", d.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.chip_size < 48 {
            return Err(Error::Config(format!("chip_size {} is too small for the archetypes (min 48)", self.chip_size)));
        }
        if !(self.speckle_looks > 0.0 && self.speckle_looks.is_finite()) {
            return Err(Error::Config("speckle_looks must be positive".into()));
        }
        if self.clutter_level < 0.0 || self.target_amplitude < 0.0 || self.core_gain < 0.0 || self.core_sigma <= 0.0 {
            return Err(Error::Config("clutter, amplitude and core parameters must be non-negative".into()));
        }
        if 2 * self.jitter + 40 > self.chip_size {
            return Err(Error::Config(format!("jitter {} too large for {}px chips", self.jitter, self.chip_size)));
        }
        Ok(())
    }
}

type Pt = (f64, f64);

fn in_rect(p: Pt, u0: f64, u1: f64, v0: f64, v1: f64) -> bool {
    p.0 >= u0 && p.0 <= u1 && p.1 >= v0 && p.1 <= v1
}

fn in_polygon(p: Pt, poly: &[Pt]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a.1 > p.1) != (b.1 > p.1) && p.0 < (b.0 - a.0) * (p.1 - a.1) / (b.1 - a.1) + a.0 {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Silhouette membership in the archetype's own frame (pixels, origin near
/// the shape's middle, `u` right, `v` down). Every silhouette contains its
/// own centroid.
fn silhouette(class_id: usize, p: Pt) -> bool {
    let r2 = p.0 * p.0 + p.1 * p.1;
    match class_id {
        0 => in_rect(p, -20.0, 20.0, -5.0, 5.0),
        1 => in_rect(p, 0.0, 28.0, 0.0, 14.0) || in_rect(p, 0.0, 14.0, 14.0, 28.0),
        2 => in_rect(p, -16.0, 16.0, -16.0, -6.0) || in_rect(p, -5.0, 5.0, -6.0, 16.0),
        3 => in_rect(p, -17.0, 17.0, -4.0, 4.0) || in_rect(p, -4.0, 4.0, -17.0, 17.0),
        4 => (p.0 / 18.0).powi(2) + (p.1 / 10.0).powi(2) <= 1.0,
        5 => r2 <= 16.0 || (81.0..=225.0).contains(&r2),
        6 => in_polygon(p, &[(-14.0, -13.0), (18.0, 0.0), (-14.0, 13.0)]),
        7 => in_rect(p, -16.0, 16.0, -11.0, -5.0) || in_rect(p, -16.0, 16.0, 5.0, 11.0) || in_rect(p, -3.0, 3.0, -5.0, 5.0),
        8 => in_rect(p, -11.0, 11.0, -11.0, 11.0),
        9 => in_polygon(p, &[(-14.0, -16.0), (16.0, 0.0), (-14.0, 16.0), (-4.0, 0.0)]),
        _ => false,
    }
}

fn bilinear(img: &Image, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let at = |r: f64, c: f64| -> f64 {
        if r < 0.0 || c < 0.0 || r >= img.rows as f64 || c >= img.cols as f64 {
            0.0
        } else {
            f64::from(img.get(r as usize, c as usize))
        }
    };
    at(y0, x0) * (1.0 - fx) * (1.0 - fy)
        + at(y0, x0 + 1.0) * fx * (1.0 - fy)
        + at(y0 + 1.0, x0) * (1.0 - fx) * fy
        + at(y0 + 1.0, x0 + 1.0) * fx * fy
}

/// Intensity-weighted centroid `(x, y)` in continuous pixel coordinates
/// (pixel `(r, c)` covers `[c, c+1) x [r, r+1)`).
pub fn centroid(img: &Image) -> (f64, f64) {
    let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
    for r in 0..img.rows {
        for c in 0..img.cols {
            let w = f64::from(img.get(r, c));
            sx += w * (c as f64 + 0.5);
            sy += w * (r as f64 + 0.5);
            s += w;
        }
    }
    (sx / s, sy / s)
}

/// Binary silhouette of `class_id` at rotation 0, rasterized at pixel
/// centers around the raster center.
fn base_mask(class_id: usize, size: usize) -> Image {
    let c = size as f64 / 2.0;
    let mut img = Image::zeros(size, size);
    for r in 0..size {
        for col in 0..size {
            if silhouette(class_id, (col as f64 + 0.5 - c, r as f64 + 0.5 - c)) {
                img.set(r, col, 1.0);
            }
        }
    }
    img
}

/// `size x size` mask of archetype `class_id` rotated by `rotation` radians
/// (counter-clockwise on screen) about its centroid, which lands on the
/// raster center `(size/2, size/2)`. Bilinear resampling gives fractional
/// values along edges.
pub fn shape_archetype(class_id: usize, rotation: f64, size: usize) -> Result<Image> {
    if class_id >= CLASS_NAMES.len() {
        return Err(Error::InvalidLabel { label: class_id, classes: CLASS_NAMES.len() });
    }
    let base = base_mask(class_id, size);
    let (cx, cy) = centroid(&base);
    let c = size as f64 / 2.0;
    let (sin, cos) = rotation.sin_cos();
    let mut out = Image::zeros(size, size);
    for r in 0..size {
        for col in 0..size {
            let (px, py) = (col as f64 + 0.5 - c, r as f64 + 0.5 - c);
            // Inverse rotation into the base frame; screen y points down.
            let sx = cos * px - sin * py;
            let sy = sin * px + cos * py;
            out.set(r, col, bilinear(&base, sx + cx - 0.5, sy + cy - 0.5) as f32);
        }
    }
    Ok(out)
}

/// The noiseless intensity of one target.
pub fn clean_chip(cfg: &SynthConfig, class_id: usize, rotation: f64, offset: (i64, i64)) -> Result<Image> {
    let mask = shape_archetype(class_id, rotation, cfg.chip_size)?;
    let n = cfg.chip_size;
    let c = n as f64 / 2.0;
    let mut img = Image::zeros(n, n);
    for r in 0..n {
        for col in 0..n {
            let (sr, sc) = (r as i64 - offset.1, col as i64 - offset.0);
            let m = if sr < 0 || sc < 0 || sr >= n as i64 || sc >= n as i64 {
                0.0
            } else {
                f64::from(mask.get(sr as usize, sc as usize))
            };
            let (dx, dy) = (sc as f64 + 0.5 - c, sr as f64 + 0.5 - c);
            let core = 1.0 + cfg.core_gain * (-(dx * dx + dy * dy) / (2.0 * cfg.core_sigma * cfg.core_sigma)).exp();
            img.set(r, col, (cfg.clutter_level + cfg.target_amplitude * m * core) as f32);
        }
    }
    Ok(img)
}

/// Multiplies every pixel by an independent unit-mean gamma variate.
pub fn apply_speckle(img: &mut Image, looks: f64, rng: &mut Rng) {
    for v in &mut img.data {
        *v = (f64::from(*v) * rng.gamma(looks, 1.0 / looks)) as f32;
    }
}

/// Global sample index used to derive each sample's stream.
fn sample_index(cfg: &SynthConfig, split: Split, class_id: usize, i: usize) -> u64 {
    let per_class = match split {
        Split::Train => cfg.train_per_class,
        Split::Test => cfg.test_per_class,
    };
    let base = match split {
        Split::Train => 0,
        Split::Test => cfg.train_per_class * CLASS_NAMES.len(),
    };
    (base + class_id * per_class + i) as u64
}

pub fn generate_chip(cfg: &SynthConfig, split: Split, class_id: usize, i: usize) -> Result<Chip> {
    let index = sample_index(cfg, split, class_id, i);
    let mut rng = Rng::derive_indexed(cfg.seed, "synth", index);
    let rotation = rng.next_f64() * TAU;
    let offset = if cfg.jitter == 0 {
        (0, 0)
    } else {
        let span = 2 * cfg.jitter + 1;
        (rng.below(span) as i64 - cfg.jitter as i64, rng.below(span) as i64 - cfg.jitter as i64)
    };
    let mut pixels = clean_chip(cfg, class_id, rotation, offset)?;
    apply_speckle(&mut pixels, cfg.speckle_looks, &mut rng);
    Ok(Chip {
        pixels,
        label: class_id,
        class_name: CLASS_NAMES[class_id].to_string(),
        serial: format!("synth-{index:06}"),
        depression_deg: match split {
            Split::Train => 17.0,
            Split::Test => 15.0,
        },
        split,
        source_path: Default::default(),
    })
}

/// Generates the whole dataset in memory, train split first.
pub fn generate_chips(cfg: &SynthConfig) -> Result<Vec<Chip>> {
    cfg.validate()?;
    let mut chips = Vec::new();
    for split in Split::ALL {
        let per_class = if split == Split::Train { cfg.train_per_class } else { cfg.test_per_class };
        for class_id in 0..CLASS_NAMES.len() {
            for i in 0..per_class {
                chips.push(generate_chip(cfg, split, class_id, i)?);
            }
        }
    }
    Ok(chips)
}

/// Writes `out_dir/{train,test}/<class>/<nnnnn>.sarc`, `classes.txt` and
/// `synth.cfg`, and returns the manifest.
pub fn generate_dataset(cfg: &SynthConfig, out_dir: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    let classes: Vec<String> = CLASS_NAMES.iter().map(|s| s.to_string()).collect();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_class_list(out_dir, &classes)?;
    let cfg_path = out_dir.join(CONFIG_FILE);
    std::fs::write(&cfg_path, cfg.to_kv().render()).map_err(|e| Error::io(&cfg_path, e))?;
    let mut manifest = DatasetManifest::new(classes);
    for split in Split::ALL {
        let per_class = if split == Split::Train { cfg.train_per_class } else { cfg.test_per_class };
        for (class_id, name) in CLASS_NAMES.iter().enumerate() {
            let dir = out_dir.join(split.dir_name()).join(name);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for i in 0..per_class {
                let chip = generate_chip(cfg, split, class_id, i)?;
                let path = dir.join(format!("{i:05}.sarc"));
                std::fs::write(&path, encode_sarc(&chip.pixels, &chip_metadata(&chip)))
                    .map_err(|e| Error::io(&path, e))?;
                manifest.push(class_id, path, split);
            }
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centroid_inside_every_silhouette() {
        for k in 0..10 {
            let base = base_mask(k, 128);
            let (cx, cy) = centroid(&base);
            assert_eq!(base.get(cy as usize, cx as usize), 1.0, "class {k}");
        }
    }

    #[test]
    fn rotation_periodic() {
        for k in 0..10 {
            let a = shape_archetype(k, 0.0, 96).unwrap();
            let b = shape_archetype(k, TAU, 96).unwrap();
            let d = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).fold(0.0f32, f32::max);
            assert!(d < 1e-6, "class {k}: {d}");
        }
    }

    #[test]
    fn centroid_on_center_at_any_rotation() {
        for k in 0..10 {
            for step in 0..8 {
                let m = shape_archetype(k, step as f64 * 0.7, 128).unwrap();
                let (cx, cy) = centroid(&m);
                assert!((cx - 64.0).abs() <= 0.5 && (cy - 64.0).abs() <= 0.5, "class {k} rot {step}: {cx} {cy}");
            }
        }
    }

    #[test]
    fn config_round_trip() {
        let cfg = SynthConfig { seed: 9, jitter: 2, speckle_looks: 2.5, ..Default::default() };
        assert_eq!(SynthConfig::from_kv(&cfg.to_kv()).unwrap(), cfg);
    }
}
