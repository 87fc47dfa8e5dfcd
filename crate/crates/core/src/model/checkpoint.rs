//! Checkpoint files.
//!
//! ```text
//! "SATM"            4 bytes magic
//! version           u32 LE (currently 1)
//! config length     u32 LE, byte length of the config block
//! config block      UTF-8 key=value lines: network config, then training metadata
//! tensor records    until end of file, each:
//!     name length   u32 LE
//!     name          UTF-8 bytes
//!     dims          4 x u32 LE (N, C, H, W)
//!     payload       N*C*H*W f32 LE
//! ```
//!
//! Records hold every parameter followed by the BN running statistics, in
//! the network's canonical tensor order.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use crate::config::{parse_list, KeyValues};
use crate::error::{Error, Result};
use crate::model::config::NetworkConfig;
use crate::model::network::Network;
use crate::nn::batchnorm::Mode;
use crate::rng::Rng;
use crate::train::Augmentation;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SATM";
pub const CHECKPOINT_VERSION: u32 = 1;

/// How a checkpoint was produced, and what inference needs to reproduce the
/// training-time input pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub augmentation: Augmentation,
    pub crop_size: usize,
    /// Divisor applied to raw magnitudes before clamping to `[0, 1]`.
    pub norm_scale: f32,
    pub class_names: Vec<String>,
}

impl TrainingMeta {
    fn to_kv(&self, kv: &mut KeyValues) {
        kv.set("seed", self.seed);
        kv.set("epochs", self.epochs);
        kv.set("augmentation", &self.augmentation);
        kv.set("crop_size", self.crop_size);
        kv.set("norm_scale", format!("{:?}", self.norm_scale));
        kv.set("class_names", self.class_names.join(","));
    }

    fn from_kv(kv: &KeyValues) -> Result<Self> {
        Ok(TrainingMeta {
            seed: kv.require_parsed("seed")?,
            epochs: kv.require_parsed("epochs")?,
            augmentation: kv.require_parsed("augmentation")?,
            crop_size: kv.require_parsed("crop_size")?,
            norm_scale: kv.require_parsed("norm_scale")?,
            class_names: match kv.require("class_names")? {
                "" => Vec::new(),
                v => parse_list("class_names", v)?,
            },
        })
    }
}

/// A network together with its training metadata.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub network: Network<f32>,
    pub meta: TrainingMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointHeader {
    pub version: u32,
    pub config: NetworkConfig,
    pub meta: TrainingMeta,
    pub raw: KeyValues,
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format { offset: offset as u64, message: message.into() }
}

pub fn write_checkpoint(model: &TrainedModel) -> Vec<u8> {
    let mut kv = KeyValues::new();
    model.network.config().to_kv(&mut kv);
    model.meta.to_kv(&mut kv);
    let text = kv.render();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    for (name, t) in model.network.named_tensors() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        for d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(model: &TrainedModel, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

fn parse_header_prefix(prefix: &[u8]) -> Result<(u32, usize)> {
    if prefix.len() < 12 {
        return Err(format_err(prefix.len(), "file shorter than the 12-byte checkpoint header"));
    }
    if &prefix[..4] != CHECKPOINT_MAGIC {
        return Err(format_err(0, format!("bad magic {:?}, expected \"SATM\"", String::from_utf8_lossy(&prefix[..4]))));
    }
    let version = u32::from_le_bytes(prefix[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version { found: version, expected: CHECKPOINT_VERSION });
    }
    Ok((version, u32::from_le_bytes(prefix[8..12].try_into().unwrap()) as usize))
}

fn parse_config_block(block: &[u8]) -> Result<(NetworkConfig, TrainingMeta, KeyValues)> {
    let text = std::str::from_utf8(block).map_err(|e| format_err(12 + e.valid_up_to(), "config block is not UTF-8"))?;
    let kv = KeyValues::parse(text)?;
    Ok((NetworkConfig::from_kv(&kv)?, TrainingMeta::from_kv(&kv)?, kv))
}

/// Reads only the fixed header and config block; tensors are not touched.
pub fn read_checkpoint_header(path: &Path) -> Result<CheckpointHeader> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut prefix = Vec::with_capacity(12);
    (&mut reader).take(12).read_to_end(&mut prefix).map_err(|e| Error::io(path, e))?;
    let mut inner = || -> Result<CheckpointHeader> {
        let (version, len) = parse_header_prefix(&prefix)?;
        let mut block = Vec::with_capacity(len);
        (&mut reader).take(len as u64).read_to_end(&mut block).map_err(|e| Error::io(path, e))?;
        if block.len() < len {
            return Err(format_err(12 + block.len(), format!("config block truncated ({} of {len} bytes)", block.len())));
        }
        let (config, meta, raw) = parse_config_block(&block)?;
        Ok(CheckpointHeader { version, config, meta, raw })
    };
    inner().map_err(|e| e.in_file(path))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(format_err(
                self.pos,
                format!("truncated {what}: need {n} bytes, {} remain", self.bytes.len() - self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Decodes a whole checkpoint. Either every tensor of the configured
/// network is present with the right shape, or an error is returned.
pub fn read_checkpoint(bytes: &[u8]) -> Result<TrainedModel> {
    let (_, len) = parse_header_prefix(bytes)?;
    let mut cur = Cursor { bytes, pos: 12 };
    let block = cur.take(len, "config block")?;
    let (config, meta, _) = parse_config_block(block)?;
    let mut network = Network::<f32>::build(&config, &mut Rng::new(0))?;
    let expected: Vec<String> = network.named_tensors().into_iter().map(|(n, _)| n).collect();
    let mut seen = vec![false; expected.len()];
    while cur.pos < bytes.len() {
        let start = cur.pos;
        let name_len = cur.u32("tensor name length")? as usize;
        let name = std::str::from_utf8(cur.take(name_len, "tensor name")?)
            .map_err(|_| format_err(start + 4, "tensor name is not UTF-8"))?
            .to_string();
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = cur.u32("tensor dims")? as usize;
        }
        let idx = expected
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| format_err(start, format!("unexpected tensor '{name}'")))?;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(format_err(start, format!("duplicate tensor '{name}'")));
        }
        let target = network.tensor_mut(&name).expect("name taken from the network");
        if target.shape() != dims {
            return Err(format_err(
                start,
                format!("tensor '{name}' has dims {dims:?}, network expects {:?}", target.shape()),
            ));
        }
        let payload = cur.take(4 * target.len(), "tensor payload")?;
        for (v, chunk) in target.data_mut().iter_mut().zip(payload.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(format_err(bytes.len(), format!("missing tensor '{}'", expected[i])));
    }
    network.set_mode(Mode::Inference);
    Ok(TrainedModel { network, meta })
}

pub fn load_checkpoint(path: &Path) -> Result<TrainedModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes).map_err(|e| e.in_file(path))
}

impl TrainedModel {
    /// True when every stored tensor (parameters and running statistics) is
    /// bit-identical.
    pub fn tensors_equal(&self, other: &TrainedModel) -> bool {
        let a = self.network.named_tensors();
        let b = other.network.named_tensors();
        a.len() == b.len() && a.iter().zip(&b).all(|((na, ta), (nb, tb))| na == nb && ta == tb)
    }
}
