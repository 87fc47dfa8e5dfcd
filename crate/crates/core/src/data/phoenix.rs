//! Reader for MSTAR public-release chip files.
//!
//! A file starts with an ASCII Phoenix header:
//!
//! ```text
//! [PhoenixHeaderVer01.04]
//! PhoenixHeaderLength= 00001234
//! NumberOfColumns= 128
//! NumberOfRows= 128
//! TargetType= bmp2_tank
//! ...
//! [EndofPhoenixHeader]
//! ```
//!
//! followed by an optional native header and the image data: `rows * cols`
//! big-endian f32 magnitudes, then the same amount of phase (ignored here).
//! The data starts at `PhoenixHeaderLength + native_header_length` when the
//! header declares those lengths, otherwise right after the terminator line.

use crate::config::KeyValues;
use crate::data::image::Image;
use crate::error::{Error, Result};

pub const HEADER_START: &str = "[PhoenixHeaderVer";
pub const HEADER_END: &str = "[EndofPhoenixHeader]";

#[derive(Debug, Clone, PartialEq)]
pub struct PhoenixChip {
    /// Every `key= value` line of the header, unknown keys included.
    pub header: KeyValues,
    pub version: String,
    pub magnitude: Image,
    pub target_type: Option<String>,
    pub serial: Option<String>,
    pub depression_deg: Option<f64>,
    pub data_offset: usize,
}

pub fn is_phoenix(bytes: &[u8]) -> bool {
    bytes.starts_with(HEADER_START.as_bytes())
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format { offset: offset as u64, message: message.into() }
}

pub fn parse_phoenix(bytes: &[u8]) -> Result<PhoenixChip> {
    if !is_phoenix(bytes) {
        return Err(format_err(0, "missing [PhoenixHeaderVer..] line"));
    }
    let mut header = KeyValues::new();
    let mut version = String::new();
    let mut pos = 0;
    let mut end_of_header = None;
    while pos < bytes.len() {
        let line_end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |i| pos + i);
        let raw = &bytes[pos..line_end];
        let next = (line_end + 1).min(bytes.len());
        let line = std::str::from_utf8(raw).map_err(|_| format_err(pos, "non-ASCII byte in Phoenix header"))?;
        let line = line.trim_end_matches('\r').trim();
        if line == HEADER_END {
            end_of_header = Some(next);
            break;
        }
        if let Some(rest) = line.strip_prefix(HEADER_START) {
            version = rest.trim_end_matches(']').to_string();
        } else if let Some((k, v)) = line.split_once('=') {
            header.set(k.trim(), v.trim());
        }
        pos = next;
    }
    let end_of_header = end_of_header.ok_or_else(|| format_err(bytes.len(), "missing [EndofPhoenixHeader] terminator"))?;

    let field = |key: &str| -> Result<usize> {
        header
            .get(key)
            .ok_or_else(|| format_err(0, format!("header lacks {key}")))?
            .parse::<usize>()
            .map_err(|_| format_err(0, format!("{key} is not a non-negative integer")))
    };
    let rows = field("NumberOfRows")?;
    let cols = field("NumberOfColumns")?;
    let data_offset = match header.get("PhoenixHeaderLength") {
        Some(_) => {
            let native = match header.get("native_header_length") {
                Some(_) => field("native_header_length")?,
                None => 0,
            };
            field("PhoenixHeaderLength")? + native
        }
        None => end_of_header,
    };
    let expected = rows * cols * 4;
    let available = bytes.len().saturating_sub(data_offset);
    if available < expected {
        return Err(Error::Truncated { expected: expected as u64, actual: available as u64 });
    }
    let data = bytes[data_offset..data_offset + expected]
        .chunks_exact(4)
        .map(|c| f32::from_be_bytes(c.try_into().unwrap()))
        .collect();
    let depression_deg = ["MeasuredDepression", "DesiredDepression"]
        .iter()
        .find_map(|k| header.get(k))
        .and_then(|v| v.parse::<f64>().ok());
    Ok(PhoenixChip {
        magnitude: Image::new(rows, cols, data)?,
        target_type: header.get("TargetType").map(str::to_string),
        serial: header.get("TargetSerNum").map(str::to_string),
        depression_deg,
        header,
        version,
        data_offset,
    })
}
