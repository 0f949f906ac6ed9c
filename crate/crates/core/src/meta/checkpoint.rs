//! Binary checkpoint format, all integers and reals little-endian:
//!
//! ```text
//! magic    "FSASDCKP"
//! u32      format version
//! u32 n    + n bytes UTF-8 metadata
//! u32      entry count
//! entry*   u32 name length, name, u32 rank, u64 extents, f64 values
//! [u8; 32] SHA-256 of everything above
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::autodiff::{ParameterVector, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"FSASDCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<S> {
    pub metadata: String,
    pub params: ParameterVector<S>,
}

pub fn encode<S: Scalar>(metadata: &str, params: &ParameterVector<S>) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + metadata.len() + params.numel() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(metadata.len() as u32).to_le_bytes());
    out.extend_from_slice(metadata.as_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.values() {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }
}

pub fn decode<S: Scalar>(bytes: &[u8]) -> Result<Checkpoint<S>> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}, this build reads version {VERSION}"
        )));
    }
    if bytes.len() < 12 + 32 {
        return Err(Error::Checkpoint("truncated checkpoint".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checkpoint(format!(
            "checksum mismatch; file is corrupt (format version {version})"
        )));
    }
    let mut c = Cursor { buf: body, pos: 12 };
    let metadata = c.string()?;
    let n = c.u32()? as usize;
    let mut params = ParameterVector::new();
    for _ in 0..n {
        let name = c.string()?;
        let rank = c.u32()? as usize;
        let shape = (0..rank).map(|_| c.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let numel: usize = shape.iter().product();
        let raw = c.take(numel.checked_mul(8).ok_or_else(|| Error::Checkpoint("bad extents".into()))?)?;
        let values = raw
            .chunks_exact(8)
            .map(|b| S::of(f64::from_le_bytes(b.try_into().unwrap())))
            .collect();
        let t = Tensor::new(shape, values).map_err(|e| Error::Checkpoint(e.to_string()))?;
        params.push(name, t).map_err(|e| Error::Checkpoint(e.to_string()))?;
    }
    if c.pos != body.len() {
        return Err(Error::Checkpoint("trailing bytes after last entry".into()));
    }
    Ok(Checkpoint { metadata, params })
}

pub fn save<S: Scalar>(path: &Path, metadata: &str, params: &ParameterVector<S>) -> Result<()> {
    std::fs::write(path, encode(metadata, params)).map_err(|e| Error::io(path, e))
}

pub fn load<S: Scalar>(path: &Path) -> Result<Checkpoint<S>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
