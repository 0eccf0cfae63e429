//! IDX container (the MNIST family's native file format).
//!
//! Layout, all integers big-endian: two zero bytes, a type byte (`0x08` for
//! unsigned bytes, the only type accepted here), a dimension count byte,
//! one `u32` size per dimension, then the row-major payload. Label files
//! use magic `0x00000801`, image files `0x00000803`.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::{RawTensor, TensorData};
use crate::{Error, Result};

pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const IMAGE_MAGIC: u32 = 0x0000_0803;
const UBYTE: u8 = 0x08;

pub fn parse_idx(bytes: &[u8]) -> Result<RawTensor> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: 4,
            actual: bytes.len(),
        });
    }
    if bytes[0] != 0 || bytes[1] != 0 || bytes[2] != UBYTE || bytes[3] == 0 {
        return Err(Error::Format(format!(
            "bad IDX magic {:02x} {:02x} {:02x} {:02x}",
            bytes[0], bytes[1], bytes[2], bytes[3]
        )));
    }
    let ndim = usize::from(bytes[3]);
    let header_len = 4 + 4 * ndim;
    if bytes.len() < header_len {
        return Err(Error::Truncated {
            expected: header_len,
            actual: bytes.len(),
        });
    }
    let shape: Vec<usize> = bytes[4..header_len]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let payload_len: usize = shape.iter().product();
    let payload = &bytes[header_len..];
    if payload.len() < payload_len {
        return Err(Error::Truncated {
            expected: header_len + payload_len,
            actual: bytes.len(),
        });
    }
    if payload.len() > payload_len {
        return Err(Error::Format(format!(
            "{} trailing bytes after IDX payload",
            payload.len() - payload_len
        )));
    }
    RawTensor::new(shape, TensorData::U8(payload.to_vec()))
}

/// Reads an IDX file, transparently gunzipping paths ending in `.gz`.
pub fn read_idx(path: &Path) -> Result<RawTensor> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bytes = if path.extension().is_some_and(|e| e == "gz") {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        out
    } else {
        raw
    };
    parse_idx(&bytes)
}

/// Image tensor loader. Rejects files whose magic is not `0x00000803`.
pub fn load_idx_images(path: &Path) -> Result<RawTensor> {
    let t = read_idx(path)?;
    if t.shape.len() != 3 {
        return Err(Error::Format(format!(
            "{}: expected a 3-d image tensor, found shape {:?}",
            path.display(),
            t.shape
        )));
    }
    Ok(t)
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let t = read_idx(path)?;
    if t.shape.len() != 1 {
        return Err(Error::Format(format!(
            "{}: expected a 1-d label tensor, found shape {:?}",
            path.display(),
            t.shape
        )));
    }
    t.labels_u8()
}

/// Serializes a `u8` tensor to IDX bytes.
pub fn encode_idx(tensor: &RawTensor) -> Result<Vec<u8>> {
    let TensorData::U8(data) = &tensor.data else {
        return Err(Error::Format("IDX writer only supports u8 tensors".into()));
    };
    if tensor.shape.is_empty() || tensor.shape.len() > 255 {
        return Err(Error::Shape(format!(
            "IDX needs 1..=255 dimensions, got {}",
            tensor.shape.len()
        )));
    }
    let mut out = vec![0, 0, UBYTE, tensor.shape.len() as u8];
    for &d in &tensor.shape {
        let d = u32::try_from(d)
            .map_err(|_| Error::Shape(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(data);
    Ok(out)
}
