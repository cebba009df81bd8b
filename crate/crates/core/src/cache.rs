//! Binary cache files for precomputed tables.
//!
//! Layout (little endian):
//!
//! ```text
//! magic "SGPC" | version u32 | header_len u64 | header (JSON) |
//! payload_len u64 | payload f64 * payload_len | sha256(header || payload)
//! ```
//!
//! Writes go to a temporary file in the target directory that is renamed
//! into place, so concurrent readers never see a partial file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SGPC";
const VERSION: u32 = 1;

fn payload_bytes(payload: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() * 8);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Hex SHA-256 of a parameter description followed by the payload values.
pub fn content_checksum<P: Serialize>(params: &P, payload: &[f64]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(params)?);
    for v in payload {
        h.update(v.to_le_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

/// File in `dir` named by `prefix` and a short hash of `params`, so that
/// different parameter sets never share a cache entry.
pub fn keyed_path<P: Serialize>(dir: &Path, prefix: &str, params: &P) -> Result<PathBuf> {
    let key = content_checksum(params, &[])?;
    Ok(dir.join(format!("{prefix}-{}.bin", &key[..16])))
}

pub fn write_cache<H: Serialize>(path: &Path, header: &H, payload: &[f64]) -> Result<()> {
    let header = serde_json::to_vec(header)?;
    let body = payload_bytes(payload);
    let mut digest = Sha256::new();
    digest.update(&header);
    digest.update(&body);
    let digest = digest.finalize();

    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let f = tmp.as_file_mut();
        f.write_all(MAGIC)?;
        f.write_all(&VERSION.to_le_bytes())?;
        f.write_all(&(header.len() as u64).to_le_bytes())?;
        f.write_all(&header)?;
        f.write_all(&(payload.len() as u64).to_le_bytes())?;
        f.write_all(&body)?;
        f.write_all(&digest)?;
        f.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn read_cache<H: DeserializeOwned>(path: &Path) -> Result<(H, Vec<f64>)> {
    let bytes = fs::read(path)?;
    let fail = |what: &str| Error::Format(format!("{}: {what}", path.display()));
    let take = |at: usize, n: usize| bytes.get(at..at + n).ok_or_else(|| fail("truncated"));

    if take(0, 4)? != MAGIC {
        return Err(fail("bad magic"));
    }
    let version = u32::from_le_bytes(take(4, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(fail(&format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(take(8, 8)?.try_into().unwrap()) as usize;
    let header = take(16, header_len)?;
    let at = 16 + header_len;
    let count = u64::from_le_bytes(take(at, 8)?.try_into().unwrap()) as usize;
    let body = take(at + 8, count.checked_mul(8).ok_or_else(|| fail("bad length"))?)?;
    let stored = take(at + 8 + count * 8, 32)?;
    if bytes.len() != at + 8 + count * 8 + 32 {
        return Err(fail("trailing bytes"));
    }

    let mut digest = Sha256::new();
    digest.update(header);
    digest.update(body);
    let digest = digest.finalize();
    if digest.as_slice() != stored {
        return Err(Error::Checksum { expected: hex::encode(stored), found: hex::encode(digest) });
    }
    let header: H = serde_json::from_slice(header)?;
    let payload =
        body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header, payload))
}
