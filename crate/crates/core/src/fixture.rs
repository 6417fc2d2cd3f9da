//! On-disk fixture container: a directory holding `manifest.json` and one
//! little-endian blob per tensor, each guarded by a SHA-256 checksum.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SimError};

pub const FIXTURE_FORMAT: &str = "optisense-fixture";
pub const FIXTURE_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixtureKind {
    Model,
    Dataset,
    Golden,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    F64,
    U8,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
            DType::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub dtype: DType,
    pub shape: Vec<usize>,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub kind: FixtureKind,
    pub tensors: Vec<TensorEntry>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn len(&self) -> usize {
        match &self.data {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self.data {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
            TensorData::U8(_) => DType::U8,
        }
    }

    /// Values widened to f64.
    pub fn to_f64(&self) -> Vec<f64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
            TensorData::U8(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn as_u8(&self) -> Option<&[u8]> {
        match &self.data {
            TensorData::U8(v) => Some(v),
            _ => None,
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        match &self.data {
            TensorData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            TensorData::F64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            TensorData::U8(v) => v.clone(),
        }
    }

    fn from_bytes(entry: &TensorEntry, bytes: &[u8]) -> std::result::Result<Tensor, String> {
        let count: usize = entry.shape.iter().product();
        if bytes.len() != count * entry.dtype.size() {
            return Err(format!(
                "tensor `{}`: {} bytes for shape {:?} of {:?}",
                entry.name,
                bytes.len(),
                entry.shape,
                entry.dtype
            ));
        }
        let data = match entry.dtype {
            DType::F32 => TensorData::F32(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
                    .collect(),
            ),
            DType::F64 => TensorData::F64(
                bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                    .collect(),
            ),
            DType::U8 => TensorData::U8(bytes.to_vec()),
        };
        Ok(Tensor {
            name: entry.name.clone(),
            shape: entry.shape.clone(),
            data,
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A loaded, checksum-verified fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub dir: PathBuf,
    pub kind: FixtureKind,
    pub meta: serde_json::Value,
    pub tensors: Vec<Tensor>,
}

impl Fixture {
    /// Opens a fixture directory (or its `manifest.json`) and verifies every
    /// blob against its checksum.
    pub fn open(path: impl AsRef<Path>) -> Result<Fixture> {
        let path = path.as_ref();
        let dir = if path.is_dir() {
            path.to_path_buf()
        } else {
            path.parent().map(Path::to_path_buf).unwrap_or_default()
        };
        let manifest_path = dir.join(MANIFEST);
        let text = fs::read_to_string(&manifest_path).map_err(|e| SimError::io(&manifest_path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| SimError::fixture(&manifest_path, e.to_string()))?;
        if manifest.format != FIXTURE_FORMAT || manifest.version != FIXTURE_VERSION {
            return Err(SimError::fixture(
                &manifest_path,
                format!(
                    "unsupported container {} v{} (expected {FIXTURE_FORMAT} v{FIXTURE_VERSION})",
                    manifest.format, manifest.version
                ),
            ));
        }
        let mut tensors = Vec::with_capacity(manifest.tensors.len());
        for entry in &manifest.tensors {
            if entry.file.contains("..") || Path::new(&entry.file).is_absolute() {
                return Err(SimError::fixture(
                    &manifest_path,
                    format!("tensor file `{}` escapes the fixture", entry.file),
                ));
            }
            let blob_path = dir.join(&entry.file);
            let bytes = fs::read(&blob_path).map_err(|e| SimError::io(&blob_path, e))?;
            let found = sha256_hex(&bytes);
            if !found.eq_ignore_ascii_case(&entry.sha256) {
                return Err(SimError::ChecksumMismatch {
                    path: blob_path,
                    expected: entry.sha256.clone(),
                    found,
                });
            }
            tensors.push(Tensor::from_bytes(entry, &bytes).map_err(|r| SimError::fixture(&blob_path, r))?);
        }
        Ok(Fixture {
            dir,
            kind: manifest.kind,
            meta: manifest.meta,
            tensors,
        })
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| SimError::fixture(&self.dir, format!("no tensor named `{name}`")))
    }

    pub fn expect_kind(&self, kind: FixtureKind) -> Result<()> {
        if self.kind != kind {
            return Err(SimError::fixture(
                &self.dir,
                format!("expected a {kind:?} fixture, found {:?}", self.kind),
            ));
        }
        Ok(())
    }

    /// Writes a fixture directory; blobs are named after their tensors.
    pub fn write(dir: impl AsRef<Path>, kind: FixtureKind, tensors: &[Tensor], meta: serde_json::Value) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
        let mut entries = Vec::with_capacity(tensors.len());
        for t in tensors {
            let file = format!("{}.bin", t.name);
            let bytes = t.to_bytes();
            let path = dir.join(&file);
            fs::write(&path, &bytes).map_err(|e| SimError::io(&path, e))?;
            entries.push(TensorEntry {
                name: t.name.clone(),
                dtype: t.dtype(),
                shape: t.shape.clone(),
                file,
                sha256: sha256_hex(&bytes),
            });
        }
        let manifest = Manifest {
            format: FIXTURE_FORMAT.into(),
            version: FIXTURE_VERSION,
            kind,
            tensors: entries,
            meta,
        };
        let path = dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        fs::write(&path, text).map_err(|e| SimError::io(&path, e))
    }
}
