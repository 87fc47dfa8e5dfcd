//! The portable chip format.
//!
//! ```text
//! "SARC"      4 bytes magic
//! version     u32 LE (currently 1)
//! rows, cols  u32 LE each
//! pixels      rows * cols f32 LE, row-major
//! metadata    optional, to end of file: UTF-8 key=value lines
//! ```

use crate::config::KeyValues;
use crate::data::image::Image;
use crate::error::{Error, Result};

pub const SARC_MAGIC: &[u8; 4] = b"SARC";
pub const SARC_VERSION: u32 = 1;

pub fn is_sarc(bytes: &[u8]) -> bool {
    bytes.starts_with(SARC_MAGIC)
}

pub fn encode_sarc(pixels: &Image, metadata: &KeyValues) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * pixels.data.len());
    out.extend_from_slice(SARC_MAGIC);
    out.extend_from_slice(&SARC_VERSION.to_le_bytes());
    out.extend_from_slice(&(pixels.rows as u32).to_le_bytes());
    out.extend_from_slice(&(pixels.cols as u32).to_le_bytes());
    for v in &pixels.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(metadata.render().as_bytes());
    out
}

pub fn decode_sarc(bytes: &[u8]) -> Result<(Image, KeyValues)> {
    let err = |offset: usize, message: String| Error::Format { offset: offset as u64, message };
    if bytes.len() < 16 {
        return Err(err(bytes.len(), "file shorter than the 16-byte SARC header".into()));
    }
    if !is_sarc(bytes) {
        return Err(err(0, "bad magic, expected \"SARC\"".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != SARC_VERSION {
        return Err(Error::Version { found: version, expected: SARC_VERSION });
    }
    let (rows, cols) = (word(8) as usize, word(12) as usize);
    let expected = rows * cols * 4;
    let available = bytes.len() - 16;
    if available < expected {
        return Err(Error::Truncated { expected: expected as u64, actual: available as u64 });
    }
    let data = bytes[16..16 + expected].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let tail = &bytes[16 + expected..];
    let text = std::str::from_utf8(tail).map_err(|e| err(16 + expected + e.valid_up_to(), "metadata is not UTF-8".into()))?;
    Ok((Image::new(rows, cols, data)?, KeyValues::parse(text)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_metadata() {
        let img = Image::new(2, 2, vec![0.5, -0.0, f32::MIN_POSITIVE, 1e30]).unwrap();
        let mut kv = KeyValues::new();
        kv.set("class", "ring");
        let bytes = encode_sarc(&img, &kv);
        let (back, meta) = decode_sarc(&bytes).unwrap();
        assert_eq!(back.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), img.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(meta, kv);
        assert_eq!(encode_sarc(&back, &meta), bytes);
    }

    #[test]
    fn truncated_and_version() {
        let img = Image::zeros(3, 3);
        let bytes = encode_sarc(&img, &KeyValues::new());
        assert!(matches!(decode_sarc(&bytes[..30]), Err(Error::Truncated { expected: 36, actual: 14 })));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(decode_sarc(&v2), Err(Error::Version { found: 2, .. })));
    }
}
