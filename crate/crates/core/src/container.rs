//! Self-describing binary tensor container.
//!
//! Layout, bit-exact:
//!
//! ```text
//! offset 0   magic  b"RSB1"
//! offset 4   header_len: u64 little-endian
//! offset 12  header: UTF-8 JSON, exactly header_len bytes
//! then, per tensor in header order:
//!            zero padding to the next 64-byte file offset,
//!            raw little-endian payload (row-major)
//! ```
//!
//! The JSON header carries `kind`, caller metadata under `meta`, and a
//! `tensors` array of `{name, shape, dtype}` with dtype `"float32"` or
//! `"float64"`. Batch files always use `float32`; the filterbank export uses
//! `float64` so external consumers read the exact matrices.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RSB1";
pub const ALIGNMENT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "float32")]
    F32,
    #[serde(rename = "float64")]
    F64,
}

impl Dtype {
    pub fn byte_width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    pub fn dtype(&self) -> Dtype {
        match self {
            TensorData::F32(_) => Dtype::F32,
            TensorData::F64(_) => Dtype::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values widened to f64 regardless of storage dtype.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }

    fn write_le(&self, out: &mut Vec<u8>) {
        match self {
            TensorData::F32(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            TensorData::F64(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: TensorData) -> Self {
        let t = Self {
            name: name.into(),
            shape,
            data,
        };
        assert_eq!(
            t.shape.iter().product::<usize>(),
            t.data.len(),
            "tensor {} payload does not match shape",
            t.name
        );
        t
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorDesc {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: Dtype,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: String,
    meta: serde_json::Value,
    tensors: Vec<TensorDesc>,
}

#[derive(Debug, Clone)]
pub struct TensorFile {
    pub kind: String,
    pub meta: serde_json::Value,
    pub tensors: Vec<Tensor>,
}

fn pad_to_alignment(bytes: &mut Vec<u8>) {
    let rem = bytes.len() % ALIGNMENT;
    if rem != 0 {
        bytes.resize(bytes.len() + (ALIGNMENT - rem), 0);
    }
}

/// Serialize to the container byte layout.
pub fn encode(kind: &str, meta: &serde_json::Value, tensors: &[Tensor]) -> Result<Vec<u8>> {
    let header = Header {
        format: "RSB1".to_string(),
        version: 1,
        kind: kind.to_string(),
        meta: meta.clone(),
        tensors: tensors
            .iter()
            .map(|t| TensorDesc {
                name: t.name.clone(),
                shape: t.shape.clone(),
                dtype: t.data.dtype(),
            })
            .collect(),
    };
    let header_json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(
        12 + header_json.len()
            + tensors
                .iter()
                .map(|t| t.data.len() * t.data.dtype().byte_width() + ALIGNMENT)
                .sum::<usize>(),
    );
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_json);
    for t in tensors {
        pad_to_alignment(&mut out);
        t.data.write_le(&mut out);
    }
    Ok(out)
}

/// Write to a sibling temp file and rename into place, so readers never
/// observe a partial file.
pub fn write_bytes_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("tmp-write");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(bytes).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

/// Atomic write of an encoded container file.
pub fn write_tensor_file(
    path: impl AsRef<Path>,
    kind: &str,
    meta: &serde_json::Value,
    tensors: &[Tensor],
) -> Result<()> {
    let bytes = encode(kind, meta, tensors)?;
    write_bytes_atomic(path, &bytes)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<TensorFile> {
    let fail = |msg: String| Error::TensorFile {
        path: path.to_path_buf(),
        msg,
    };
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(fail("missing RSB1 magic".into()));
    }
    let header_len = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let header_end = 12usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| fail("header length exceeds file size".into()))?;
    let header: Header = serde_json::from_slice(&bytes[12..header_end])?;
    if header.format != "RSB1" {
        return Err(fail(format!("unexpected format field {:?}", header.format)));
    }

    let mut offset = header_end;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for desc in &header.tensors {
        let rem = offset % ALIGNMENT;
        if rem != 0 {
            offset += ALIGNMENT - rem;
        }
        let count: usize = desc.shape.iter().product();
        let nbytes = count * desc.dtype.byte_width();
        if offset + nbytes > bytes.len() {
            return Err(fail(format!("tensor {} payload truncated", desc.name)));
        }
        let raw = &bytes[offset..offset + nbytes];
        let data = match desc.dtype {
            Dtype::F32 => TensorData::F32(
                raw.chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            ),
            Dtype::F64 => TensorData::F64(
                raw.chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            ),
        };
        tensors.push(Tensor {
            name: desc.name.clone(),
            shape: desc.shape.clone(),
            data,
        });
        offset += nbytes;
    }

    Ok(TensorFile {
        kind: header.kind,
        meta: header.meta,
        tensors,
    })
}

pub fn read_tensor_file(path: impl AsRef<Path>) -> Result<TensorFile> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn roundtrip_preserves_payload_bits() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.rsb");
        let tensors = vec![
            Tensor::new(
                "a",
                vec![2, 3],
                TensorData::F32(vec![1.0, -2.5, 3.25, 0.0, 1e-30, 7.0]),
            ),
            Tensor::new(
                "b",
                vec![4],
                TensorData::F64(vec![0.1, 0.2, 0.3, f64::MIN_POSITIVE]),
            ),
        ];
        let meta = serde_json::json!({"purpose": "test", "n": 3});
        write_tensor_file(&path, "unit", &meta, &tensors).unwrap();

        let back = read_tensor_file(&path).unwrap();
        assert_eq!(back.kind, "unit");
        assert_eq!(back.meta["n"], 3);
        assert_eq!(back.tensors.len(), 2);
        assert_eq!(back.tensors[0].shape, vec![2, 3]);
        assert_eq!(back.tensors[0].data, tensors[0].data);
        assert_eq!(back.tensors[1].data, tensors[1].data);
    }

    #[test]
    fn payloads_are_64_byte_aligned() {
        let tensors = vec![
            Tensor::new("x", vec![1], TensorData::F32(vec![1.0])),
            Tensor::new("y", vec![1], TensorData::F32(vec![2.0])),
        ];
        let bytes = encode("unit", &serde_json::json!({}), &tensors).unwrap();
        let header_len = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let first = (12 + header_len).div_ceil(ALIGNMENT) * ALIGNMENT;
        assert_eq!(&bytes[first..first + 4], &1.0f32.to_le_bytes());
        let second = (first + 4).div_ceil(ALIGNMENT) * ALIGNMENT;
        assert_eq!(&bytes[second..second + 4], &2.0f32.to_le_bytes());
    }

    #[test]
    fn encoding_is_deterministic() {
        let tensors = vec![Tensor::new(
            "x",
            vec![3],
            TensorData::F32(vec![0.5, -0.5, 0.25]),
        )];
        let meta = serde_json::json!({"seed": 7, "alpha": 0.125});
        let a = encode("unit", &meta, &tensors).unwrap();
        let b = encode("unit", &meta, &tensors).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.rsb");
        std::fs::write(&path, b"NOPE0000").unwrap();
        assert!(read_tensor_file(&path).is_err());
    }
}
