use crate::config::{parse_list, KeyValues};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub input_size: usize,
    pub in_channels: usize,
    pub num_classes: usize,
    pub stage_channels: [usize; 4],
    pub blocks_per_stage: [usize; 4],
    pub first_kernel: usize,
    pub other_kernel: usize,
    pub width_mult: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            input_size: 96,
            in_channels: 1,
            num_classes: 10,
            stage_channels: [64, 128, 256, 512],
            blocks_per_stage: [2, 2, 2, 2],
            first_kernel: 5,
            other_kernel: 3,
            width_mult: 1.0,
        }
    }
}

impl NetworkConfig {
    /// Quarter-width network used for desk-scale runs.
    pub fn desk() -> Self {
        NetworkConfig { width_mult: 0.25, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.input_size % 16 != 0 {
            return Err(Error::Config(format!(
                "input_size {} must be a positive multiple of 16 (four stride-2 reductions)",
                self.input_size
            )));
        }
        if self.in_channels == 0 || self.num_classes == 0 {
            return Err(Error::Config("in_channels and num_classes must be positive".into()));
        }
        if self.first_kernel % 2 == 0 || self.other_kernel % 2 == 0 {
            return Err(Error::Config("kernel sizes must be odd".into()));
        }
        if self.stage_channels.contains(&0) || self.blocks_per_stage.contains(&0) {
            return Err(Error::Config("stage channels and block counts must be positive".into()));
        }
        if !(self.width_mult.is_finite() && self.width_mult > 0.0) {
            return Err(Error::Config(format!("width_mult {} must be positive", self.width_mult)));
        }
        Ok(())
    }

    /// Stage widths after applying `width_mult` (rounded, at least 1).
    pub fn channels(&self) -> [usize; 4] {
        self.stage_channels.map(|c| ((c as f64 * self.width_mult).round() as usize).max(1))
    }

    pub fn to_kv(&self, kv: &mut KeyValues) {
        let join = |v: &[usize; 4]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        kv.set("input_size", self.input_size);
        kv.set("in_channels", self.in_channels);
        kv.set("num_classes", self.num_classes);
        kv.set("stage_channels", join(&self.stage_channels));
        kv.set("blocks_per_stage", join(&self.blocks_per_stage));
        kv.set("first_kernel", self.first_kernel);
        kv.set("other_kernel", self.other_kernel);
        kv.set("width_mult", self.width_mult);
    }

    /// Reads the keys written by [`to_kv`](Self::to_kv); absent keys keep
    /// their defaults.
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let four = |key: &str, default: [usize; 4]| -> Result<[usize; 4]> {
            match kv.get(key) {
                None => Ok(default),
                Some(v) => parse_list::<usize>(key, v)?
                    .try_into()
                    .map_err(|_| Error::Config(format!("'{key}' needs exactly four values"))),
            }
        };
        let cfg = NetworkConfig {
            input_size: kv.parsed_or("input_size", d.input_size)?,
            in_channels: kv.parsed_or("in_channels", d.in_channels)?,
            num_classes: kv.parsed_or("num_classes", d.num_classes)?,
            stage_channels: four("stage_channels", d.stage_channels)?,
            blocks_per_stage: four("blocks_per_stage", d.blocks_per_stage)?,
            first_kernel: kv.parsed_or("first_kernel", d.first_kernel)?,
            other_kernel: kv.parsed_or("other_kernel", d.other_kernel)?,
            width_mult: kv.parsed_or("width_mult", d.width_mult)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
