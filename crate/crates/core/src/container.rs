//! Binary model container.
//!
//! Layout: `OLIDCKPT` magic, format version (u32 LE), metadata length
//! (u64 LE), JSON metadata, raw little-endian tensor bytes in the order the
//! metadata lists them, and a trailing SHA-256 of everything before it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"OLIDCKPT";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;
const HEADER_LEN: usize = 8 + 4 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    F64,
    U32,
    U64,
}

impl DType {
    fn width(self) -> usize {
        match self {
            DType::F32 | DType::U32 => 4,
            DType::F64 | DType::U64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U32(Vec<u32>),
    U64(Vec<u64>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
            TensorData::U32(_) => DType::U32,
            TensorData::U64(_) => DType::U64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::U32(v) => v.len(),
            TensorData::U64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn write(&self, out: &mut Vec<u8>) {
        match self {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::U64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
    }

    fn read(dtype: DType, bytes: &[u8]) -> TensorData {
        match dtype {
            DType::F32 => TensorData::F32(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
            DType::F64 => TensorData::F64(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
            DType::U32 => TensorData::U32(bytes.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect()),
            DType::U64 => TensorData::U64(bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: TensorData) -> Self {
        Tensor {
            name: name.into(),
            shape,
            data,
        }
    }

    pub fn f32(name: impl Into<String>, shape: Vec<usize>, values: &[f32]) -> Self {
        Tensor::new(name, shape, TensorData::F32(values.to_vec()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    dtype: DType,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: String,
    metadata: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

/// A model-kind tag, free-form JSON metadata and named tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub metadata: serde_json::Value,
    pub tensors: Vec<Tensor>,
}

fn corrupt(message: impl Into<String>) -> Error {
    Error::Checkpoint(message.into())
}

impl Container {
    pub fn new(kind: impl Into<String>, metadata: serde_json::Value) -> Self {
        Container {
            kind: kind.into(),
            metadata,
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, tensor: Tensor) {
        self.tensors.push(tensor);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut entries = Vec::with_capacity(self.tensors.len());
        for t in &self.tensors {
            if t.shape.iter().product::<usize>() != t.data.len() {
                return Err(corrupt(format!("tensor {} has shape {:?} but {} values", t.name, t.shape, t.data.len())));
            }
            entries.push(TensorEntry {
                name: t.name.clone(),
                dtype: t.data.dtype(),
                shape: t.shape.clone(),
            });
        }
        let header = Header {
            kind: self.kind.clone(),
            metadata: self.metadata.clone(),
            tensors: entries,
        };
        let meta = serde_json::to_vec(&header).map_err(|e| corrupt(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        for t in &self.tensors {
            t.data.write(&mut out);
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    /// The checksum is verified before anything else is interpreted.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
            return Err(corrupt("file is truncated"));
        }
        let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != checksum {
            return Err(corrupt("checksum mismatch; the file is corrupted or truncated"));
        }
        if &body[..8] != MAGIC {
            return Err(corrupt("not a model container (bad magic bytes)"));
        }
        let version = u32::from_le_bytes(body[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(corrupt(format!("unsupported format version {version}, expected {FORMAT_VERSION}")));
        }
        let meta_len = u64::from_le_bytes(body[12..20].try_into().unwrap()) as usize;
        let meta_end = HEADER_LEN
            .checked_add(meta_len)
            .filter(|&end| end <= body.len())
            .ok_or_else(|| corrupt("metadata length exceeds file size"))?;
        let header: Header =
            serde_json::from_slice(&body[HEADER_LEN..meta_end]).map_err(|e| corrupt(format!("metadata: {e}")))?;
        let mut offset = meta_end;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for entry in header.tensors {
            let len = entry.shape.iter().product::<usize>() * entry.dtype.width();
            let end = offset
                .checked_add(len)
                .filter(|&end| end <= body.len())
                .ok_or_else(|| corrupt(format!("tensor {} runs past the end of the file", entry.name)))?;
            tensors.push(Tensor {
                data: TensorData::read(entry.dtype, &body[offset..end]),
                name: entry.name,
                shape: entry.shape,
            });
            offset = end;
        }
        if offset != body.len() {
            return Err(corrupt("trailing bytes after the last tensor"));
        }
        Ok(Container {
            kind: header.kind,
            metadata: header.metadata,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Container::from_bytes(&bytes)
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(corrupt(format!("expected a {kind} model, found {}", self.kind)));
        }
        Ok(())
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| corrupt(format!("missing tensor {name}")))
    }

    pub fn f32s(&self, name: &str) -> Result<&[f32]> {
        match &self.tensor(name)?.data {
            TensorData::F32(v) => Ok(v),
            other => Err(corrupt(format!("tensor {name} has dtype {:?}, expected f32", other.dtype()))),
        }
    }

    pub fn f64s(&self, name: &str) -> Result<&[f64]> {
        match &self.tensor(name)?.data {
            TensorData::F64(v) => Ok(v),
            other => Err(corrupt(format!("tensor {name} has dtype {:?}, expected f64", other.dtype()))),
        }
    }

    pub fn u32s(&self, name: &str) -> Result<&[u32]> {
        match &self.tensor(name)?.data {
            TensorData::U32(v) => Ok(v),
            other => Err(corrupt(format!("tensor {name} has dtype {:?}, expected u32", other.dtype()))),
        }
    }

    pub fn u64s(&self, name: &str) -> Result<&[u64]> {
        match &self.tensor(name)?.data {
            TensorData::U64(v) => Ok(v),
            other => Err(corrupt(format!("tensor {name} has dtype {:?}, expected u64", other.dtype()))),
        }
    }

    /// Deserialize the metadata block.
    pub fn metadata_as<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.metadata.clone()).map_err(|e| corrupt(format!("metadata: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample() -> Container {
        let mut c = Container::new("test", json!({"note": "x", "n": 3}));
        c.push(Tensor::f32("a", vec![2, 2], &[1.0, -0.0, f32::MIN_POSITIVE, 3.5]));
        c.push(Tensor::new("b", vec![3], TensorData::F64(vec![0.1, 1e300, -2.0])));
        c.push(Tensor::new("c", vec![2], TensorData::U32(vec![7, u32::MAX])));
        c.push(Tensor::new("d", vec![0], TensorData::U64(vec![])));
        c
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let back = Container::from_bytes(&c.to_bytes().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.f32s("a").unwrap()[1].to_bits(), (-0.0f32).to_bits());
        assert_eq!(back.to_bytes().unwrap(), c.to_bytes().unwrap());
    }

    #[test]
    fn every_single_byte_corruption_is_detected() {
        let bytes = sample().to_bytes().unwrap();
        for i in 0..bytes.len() {
            let mut bad = bytes.clone();
            bad[i] ^= 0x01;
            assert!(Container::from_bytes(&bad).is_err(), "flip at {i} accepted");
        }
        assert!(Container::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Container::from_bytes(&[]).is_err());
    }

    #[test]
    fn version_is_checked() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[8] = 2;
        let n = bytes.len() - CHECKSUM_LEN;
        let digest = Sha256::digest(&bytes[..n]);
        bytes[n..].copy_from_slice(&digest);
        let err = Container::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("version 2"), "{err}");
    }

    #[test]
    fn typed_accessors() {
        let c = sample();
        assert!(c.f32s("b").is_err());
        assert!(c.tensor("missing").is_err());
        assert_eq!(c.u32s("c").unwrap(), [7, u32::MAX]);
        assert!(c.expect_kind("other").is_err());
        let mut bad = Container::new("x", json!(null));
        bad.push(Tensor::f32("a", vec![3], &[1.0]));
        assert!(bad.to_bytes().is_err());
    }
}
