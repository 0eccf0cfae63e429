//! NPY arrays and NPZ archives (ZIP of `.npy` members, stored or DEFLATE).
//!
//! Only C-order arrays of `u1`, little-endian `f4` and little-endian `f8` are
//! supported; that covers the MedMNIST distribution files.

use std::fs::File;
use std::io::{Read, Seek, Write};
use std::path::Path;

use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipArchive, ZipWriter};

use super::{RawTensor, TensorData};
use crate::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const HEADER_ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    U8,
    F32,
    F64,
}

impl Dtype {
    fn parse(descr: &str) -> Result<Self> {
        match descr {
            "|u1" | "<u1" | "u1" | "|b1" => Ok(Dtype::U8),
            "<f4" => Ok(Dtype::F32),
            "<f8" => Ok(Dtype::F64),
            other => Err(Error::Format(format!("unsupported NPY dtype `{other}`"))),
        }
    }

    fn descr(self) -> &'static str {
        match self {
            Dtype::U8 => "|u1",
            Dtype::F32 => "<f4",
            Dtype::F64 => "<f8",
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyHeader {
    pub dtype: Dtype,
    pub fortran_order: bool,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
enum PyValue {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

/// Parser for the Python-literal dict that forms an NPY header.
struct HeaderParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> HeaderParser<'a> {
    fn err(&self, what: &str) -> Error {
        Error::Format(format!("malformed NPY header at byte {}: {what}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn string(&mut self) -> Result<String> {
        let quote = self.peek().ok_or_else(|| self.err("unexpected end"))?;
        if quote != b'\'' && quote != b'"' {
            return Err(self.err("expected string"));
        }
        self.pos += 1;
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos] != quote {
            self.pos += 1;
        }
        if self.pos >= self.src.len() {
            return Err(self.err("unterminated string"));
        }
        let s = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
        self.pos += 1;
        Ok(s)
    }

    fn integer(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        // Python 2 era headers may carry an `L` suffix.
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        if self.src.get(self.pos) == Some(&b'L') {
            self.pos += 1;
        }
        digits.parse().map_err(|_| self.err("expected integer"))
    }

    fn value(&mut self) -> Result<PyValue> {
        match self.peek() {
            Some(b'\'') | Some(b'"') => self.string().map(PyValue::Str),
            Some(b'(') => {
                self.pos += 1;
                let mut dims = Vec::new();
                loop {
                    match self.peek() {
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        Some(b',') => self.pos += 1,
                        Some(_) => dims.push(self.integer()?),
                        None => return Err(self.err("unterminated tuple")),
                    }
                }
                Ok(PyValue::Tuple(dims))
            }
            Some(_) => {
                let rest = &self.src[self.pos..];
                if rest.starts_with(b"True") {
                    self.pos += 4;
                    Ok(PyValue::Bool(true))
                } else if rest.starts_with(b"False") {
                    self.pos += 5;
                    Ok(PyValue::Bool(false))
                } else {
                    Err(self.err("unsupported literal"))
                }
            }
            None => Err(self.err("unexpected end")),
        }
    }

    fn dict(&mut self) -> Result<Vec<(String, PyValue)>> {
        self.expect(b'{')?;
        let mut entries = Vec::new();
        loop {
            match self.peek() {
                Some(b'}') => {
                    self.pos += 1;
                    return Ok(entries);
                }
                Some(b',') => self.pos += 1,
                Some(_) => {
                    let key = self.string()?;
                    self.expect(b':')?;
                    entries.push((key, self.value()?));
                }
                None => return Err(self.err("unterminated dict")),
            }
        }
    }
}

fn parse_header_dict(text: &[u8]) -> Result<NpyHeader> {
    let entries = HeaderParser { src: text, pos: 0 }.dict()?;
    let lookup = |key: &str| {
        entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::Format(format!("NPY header lacks `{key}`")))
    };
    let dtype = match lookup("descr")? {
        PyValue::Str(s) => Dtype::parse(&s)?,
        _ => return Err(Error::Format("NPY `descr` is not a string".into())),
    };
    let fortran_order = match lookup("fortran_order")? {
        PyValue::Bool(b) => b,
        _ => return Err(Error::Format("NPY `fortran_order` is not a bool".into())),
    };
    let shape = match lookup("shape")? {
        PyValue::Tuple(t) => t,
        _ => return Err(Error::Format("NPY `shape` is not a tuple".into())),
    };
    Ok(NpyHeader {
        dtype,
        fortran_order,
        shape,
    })
}

/// Parses a complete `.npy` byte buffer.
pub fn parse_npy(bytes: &[u8]) -> Result<RawTensor> {
    if bytes.len() < 10 {
        return Err(Error::Truncated {
            expected: 10,
            actual: bytes.len(),
        });
    }
    if &bytes[..6] != MAGIC {
        return Err(Error::Format("bad NPY magic".into()));
    }
    let major = bytes[6];
    let (header_len, header_start) = match major {
        1 => (usize::from(u16::from_le_bytes([bytes[8], bytes[9]])), 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(Error::Truncated {
                    expected: 12,
                    actual: bytes.len(),
                });
            }
            (
                u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
                12,
            )
        }
        v => return Err(Error::Format(format!("unsupported NPY version {v}.{}", bytes[7]))),
    };
    let data_start = header_start + header_len;
    if bytes.len() < data_start {
        return Err(Error::Truncated {
            expected: data_start,
            actual: bytes.len(),
        });
    }
    let header = parse_header_dict(&bytes[header_start..data_start])?;
    if header.fortran_order {
        return Err(Error::UnsupportedLayout(
            "Fortran-ordered arrays are not supported".into(),
        ));
    }
    let count: usize = header.shape.iter().product();
    let expected = data_start + count * header.dtype.size();
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    let payload = &bytes[data_start..expected];
    let data = match header.dtype {
        Dtype::U8 => TensorData::U8(payload.to_vec()),
        Dtype::F32 => TensorData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
        Dtype::F64 => TensorData::F64(
            payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect(),
        ),
    };
    RawTensor::new(header.shape, data)
}

/// Serializes a tensor as NPY v1.0, C order, header padded to 64 bytes.
pub fn encode_npy(tensor: &RawTensor) -> Vec<u8> {
    let dtype = match tensor.data {
        TensorData::U8(_) => Dtype::U8,
        TensorData::F32(_) => Dtype::F32,
        TensorData::F64(_) => Dtype::F64,
    };
    let shape = match tensor.shape.as_slice() {
        [d] => format!("({d},)"),
        dims => format!(
            "({})",
            dims.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {shape}, }}",
        dtype.descr()
    );
    let unpadded = 10 + header.len() + 1;
    let padded = unpadded.div_ceil(HEADER_ALIGN) * HEADER_ALIGN;
    header.push_str(&" ".repeat(padded - unpadded));
    header.push('\n');

    let mut out = Vec::with_capacity(padded + tensor.data.len() * dtype.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match &tensor.data {
        TensorData::U8(v) => out.extend_from_slice(v),
        TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    out
}

fn zip_err(path: &Path, e: zip::result::ZipError) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

/// Array names (member names without `.npy`) in an NPZ archive.
pub fn npz_members<R: Read + Seek>(archive: &ZipArchive<R>) -> Vec<String> {
    archive
        .file_names()
        .filter_map(|n| n.ok())
        .map(|n| n.strip_suffix(".npy").unwrap_or(&n).to_string())
        .collect()
}

pub fn read_npz_array<R: Read + Seek>(reader: R, array_name: &str, origin: &Path) -> Result<RawTensor> {
    let mut archive = ZipArchive::new(reader).map_err(|e| zip_err(origin, e))?;
    let member = format!("{array_name}.npy");
    let mut available = npz_members(&archive);
    available.sort();
    let bytes = match archive.by_name(&member) {
        Ok(mut file) => {
            let mut buf = Vec::with_capacity(file.size() as usize);
            file.read_to_end(&mut buf).map_err(|e| Error::io(origin, e))?;
            buf
        }
        Err(zip::result::ZipError::FileNotFound) => {
            return Err(Error::NotFound {
                name: array_name.to_string(),
                available,
            });
        }
        Err(e) => return Err(zip_err(origin, e)),
    };
    parse_npy(&bytes)
}

/// Loads `array_name` from the NPZ file at `path`.
pub fn load_npz_array(path: &Path, array_name: &str) -> Result<RawTensor> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_npz_array(file, array_name, path)
}

/// Writes `arrays` into an NPZ archive, DEFLATE-compressed when `compress`.
pub fn write_npz<W: Write + Seek>(writer: W, arrays: &[(&str, &RawTensor)], compress: bool) -> Result<W> {
    let mut zip = ZipWriter::new(writer);
    let method = if compress {
        CompressionMethod::Deflated
    } else {
        CompressionMethod::Stored
    };
    let options = SimpleFileOptions::default().compression_method(method);
    let here = Path::new("<npz writer>");
    for (name, tensor) in arrays {
        zip.start_file(format!("{name}.npy"), options)
            .map_err(|e| zip_err(here, e))?;
        zip.write_all(&encode_npy(tensor)).map_err(|e| Error::io(here, e))?;
    }
    zip.finish().map_err(|e| zip_err(here, e))
}
