//! QCT1 binary tensor files, a JSON export, and an on-disk build cache.
//!
//! Layout (little-endian): `b"QCT1"`, name length `u32`, name bytes (UTF-8),
//! `d: u32`, `mode: u8`, `samples: u64`, `seed: u64`, `nnz: u64`, then `nnz`
//! records of `i: u32, j: u32, k: u32, value: f64` with 1-based indices.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::composition::{build_tensor, CompositionMode, CompositionTensor};
use crate::error::{Error, Result};
use crate::partition::SpacePartition;

pub const MAGIC: &[u8; 4] = b"QCT1";
const MAX_D: usize = 4096;

pub fn encode(tensor: &CompositionTensor) -> Vec<u8> {
    let name = tensor.partition_name.as_bytes();
    let nnz = tensor.nonzero_count();
    let mut out = Vec::with_capacity(37 + name.len() + nnz * 20);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name);
    out.extend_from_slice(&(tensor.d as u32).to_le_bytes());
    out.push(tensor.mode.code());
    out.extend_from_slice(&tensor.samples_per_region.to_le_bytes());
    out.extend_from_slice(&tensor.seed.to_le_bytes());
    out.extend_from_slice(&(nnz as u64).to_le_bytes());
    for (i, j, k, v) in tensor.nonzeros() {
        out.extend_from_slice(&(i as u32).to_le_bytes());
        out.extend_from_slice(&(j as u32).to_le_bytes());
        out.extend_from_slice(&(k as u32).to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a str,
}

impl<'a> Cursor<'a> {
    fn err(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            source_name: self.source.to_string(),
            line: 0,
            column: offset,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(self.pos, format!("truncated {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Parses a QCT1 buffer. Errors carry the byte offset in `column`.
pub fn decode(source_name: &str, bytes: &[u8]) -> Result<CompositionTensor> {
    let mut c = Cursor {
        bytes,
        pos: 0,
        source: source_name,
    };
    if c.take(4, "magic")? != MAGIC {
        return Err(c.err(0, "bad magic, expected QCT1"));
    }
    let name_len = c.u32("name length")? as usize;
    let at = c.pos;
    let name = std::str::from_utf8(c.take(name_len, "partition name")?)
        .map_err(|_| c.err(at, "partition name is not UTF-8"))?
        .to_string();
    let at = c.pos;
    let d = c.u32("d")? as usize;
    if d == 0 || d > MAX_D {
        return Err(c.err(at, format!("d = {d} out of range")));
    }
    let at = c.pos;
    let code = c.take(1, "mode")?[0];
    let mode = CompositionMode::from_code(code).ok_or_else(|| c.err(at, format!("unknown mode {code}")))?;
    let samples = c.u64("sample count")?;
    let seed = c.u64("seed")?;
    let at = c.pos;
    let nnz = c.u64("entry count")? as usize;
    if nnz > d * d * d {
        return Err(c.err(at, format!("{nnz} entries exceed d^3")));
    }
    let mut values = vec![0.0; d * d * d];
    for _ in 0..nnz {
        let at = c.pos;
        let (i, j, k) = (c.u32("entry")? as usize, c.u32("entry")? as usize, c.u32("entry")? as usize);
        let v = c.f64("entry value")?;
        if [i, j, k].iter().any(|&x| x == 0 || x > d) {
            return Err(c.err(at, format!("index ({i}, {j}, {k}) outside 1..={d}")));
        }
        if !v.is_finite() || v < 0.0 {
            return Err(c.err(at + 12, format!("invalid value {v}")));
        }
        values[((i - 1) * d + j - 1) * d + k - 1] = v;
    }
    if c.pos != bytes.len() {
        return Err(c.err(c.pos, "trailing bytes"));
    }
    CompositionTensor::from_dense(d, &name, mode, samples, seed, values)
}

pub fn write_tensor(path: &Path, tensor: &CompositionTensor) -> Result<()> {
    fs::write(path, encode(tensor))?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<CompositionTensor> {
    let bytes = fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("tensor file {}: {e}", path.display())))
    })?;
    decode(&path.display().to_string(), &bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorJson {
    pub partition: String,
    pub d: usize,
    pub mode: CompositionMode,
    pub samples_per_region: u64,
    pub seed: u64,
    pub nonzero_count: usize,
    /// `[i, j, k, value]` with 1-based indices.
    pub entries: Vec<(usize, usize, usize, f64)>,
}

pub fn to_json(tensor: &CompositionTensor) -> TensorJson {
    TensorJson {
        partition: tensor.partition_name.clone(),
        d: tensor.d,
        mode: tensor.mode,
        samples_per_region: tensor.samples_per_region,
        seed: tensor.seed,
        nonzero_count: tensor.nonzero_count(),
        entries: tensor.nonzeros().collect(),
    }
}

/// File name a tensor is cached under.
pub fn cache_file_name(partition: &str, mode: CompositionMode, samples: u64, seed: u64) -> String {
    let mode = match mode {
        CompositionMode::Probabilistic => "prob",
        CompositionMode::Deterministic => "det",
    };
    format!("{partition}-{mode}-{samples}-{seed}.qct")
}

/// Loads the cached tensor for these parameters or builds and stores it.
/// Returns the tensor, its path, and whether it was read from the cache.
pub fn load_or_build(
    cache_dir: &Path,
    partition: &SpacePartition,
    mode: CompositionMode,
    samples: u64,
    seed: u64,
) -> Result<(CompositionTensor, PathBuf, bool)> {
    let path = cache_dir.join(cache_file_name(&partition.name, mode, samples, seed));
    if path.exists() {
        let t = read_tensor(&path)?;
        if t.partition_name == partition.name && t.mode == mode && t.samples_per_region == samples && t.seed == seed {
            return Ok((t, path, true));
        }
    }
    let t = build_tensor(partition, samples, mode, seed)?;
    fs::create_dir_all(cache_dir)?;
    let tmp = path.with_extension("qct.tmp");
    write_tensor(&tmp, &t)?;
    fs::rename(&tmp, &path)?;
    Ok((t, path, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CompositionTensor {
        let mut v = vec![0.0; 27];
        v[0] = 0.25;
        v[13] = 0.5;
        v[26] = 0.25;
        CompositionTensor::from_dense(3, "toy", CompositionMode::Probabilistic, 10, 4, v).unwrap()
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let t = small();
        let bytes = encode(&t);
        assert_eq!(&bytes[..4], MAGIC);
        assert_eq!(bytes.len(), 4 + 4 + 3 + 4 + 1 + 8 + 8 + 8 + 3 * 20);
        assert_eq!(decode("mem", &bytes).unwrap(), t);
    }

    #[test]
    fn corrupt_files_report_byte_offsets() {
        let bytes = encode(&small());
        match decode("mem", &bytes[..bytes.len() - 3]) {
            Err(Error::Parse { line: 0, column, .. }) => assert_eq!(column, bytes.len() - 8),
            other => panic!("{other:?}"),
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode("mem", &bad), Err(Error::Parse { column: 0, .. })));
        let mut bad = bytes.clone();
        let first = 4 + 4 + 3 + 4 + 1 + 8 + 8 + 8;
        bad[first..first + 4].copy_from_slice(&9u32.to_le_bytes());
        assert!(matches!(decode("mem", &bad), Err(Error::Parse { column, .. }) if column == first));
    }

    #[test]
    fn cache_is_keyed_by_parameters() {
        let dir = tempfile::tempdir().unwrap();
        let p = SpacePartition::edc();
        let (a, path, hit) = load_or_build(dir.path(), &p, CompositionMode::Probabilistic, 5, 1).unwrap();
        assert!(!hit);
        assert!(path.ends_with("edc-prob-5-1.qct"));
        let (b, _, hit) = load_or_build(dir.path(), &p, CompositionMode::Probabilistic, 5, 1).unwrap();
        assert!(hit);
        assert_eq!(a, b);
        let (_, other, hit) = load_or_build(dir.path(), &p, CompositionMode::Probabilistic, 5, 2).unwrap();
        assert!(!hit);
        assert_ne!(path, other);
    }
}
