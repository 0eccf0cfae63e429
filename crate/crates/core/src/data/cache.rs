//! Binary cache for preprocessed datasets.
//!
//! Little-endian layout:
//!
//! | bytes         | field                                        |
//! |---------------|----------------------------------------------|
//! | 8             | magic `QFLDSET\0`                            |
//! | 4             | version `u32` (= 1)                          |
//! | 4             | name length `u32`, then that many UTF-8 bytes |
//! | 8 + 8         | rows `u64`, cols `u64`                        |
//! | 4 + 4         | image height, width `u32` (0, 0 = none)       |
//! | rows*cols*8   | features, `f64`, row-major                    |
//! | rows          | labels, `u8`                                  |

use std::path::Path;

use super::Dataset;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"QFLDSET\0";
const VERSION: u32 = 1;

pub fn encode(ds: &Dataset) -> Vec<u8> {
    let rows = ds.len();
    let cols = ds.num_features();
    let mut out = Vec::with_capacity(48 + ds.name.len() + rows * (cols * 8 + 1));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.name.len() as u32).to_le_bytes());
    out.extend_from_slice(ds.name.as_bytes());
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    let (h, w) = ds.feature_meta.unwrap_or((0, 0));
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    for row in &ds.features {
        for x in row {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out.extend_from_slice(&ds.labels);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(
            Error::Truncated {
                expected: self.pos.saturating_add(n),
                actual: self.bytes.len(),
            },
        )?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Dataset> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::Format("bad dataset cache magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported cache version {version}")));
    }
    let name_len = c.u32()? as usize;
    let name = std::str::from_utf8(c.take(name_len)?)
        .map_err(|e| Error::Format(format!("cache name is not UTF-8: {e}")))?
        .to_string();
    let rows = c.u64()? as usize;
    let cols = c.u64()? as usize;
    let (h, w) = (c.u32()? as usize, c.u32()? as usize);
    let feature_bytes = c.take(rows * cols * 8)?;
    let features = if cols == 0 {
        vec![Vec::new(); rows]
    } else {
        feature_bytes
            .chunks_exact(cols * 8)
            .map(|row| {
                row.chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                    .collect()
            })
            .collect()
    };
    let labels = c.take(rows)?.to_vec();
    if c.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes in dataset cache",
            bytes.len() - c.pos
        )));
    }
    let meta = (h != 0 || w != 0).then_some((h, w));
    Dataset::new(name, features, labels, meta)
}

pub fn write(ds: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, encode(ds)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<Dataset> {
    decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
