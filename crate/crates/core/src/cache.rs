//! On-disk cache of propagated features.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size   field
//! 0       16     magic  b"GPNET-HBAR-v1\0\0\0"
//! 16      8      n (u64)
//! 24      8      d (u64)
//! 32      32     fingerprint, ASCII lowercase hex
//! 64      8·n·d  row-major f64
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::filter::{FilterConfig, PropagatedFeatures};

pub const MAGIC: &[u8; 16] = b"GPNET-HBAR-v1\0\0\0";
const HEADER_LEN: usize = 64;

/// 128-bit digest of the propagation config and dataset identity, as 32 hex digits.
pub fn fingerprint(config: &FilterConfig, dataset_id: &str) -> String {
    let mut h = Sha256::new();
    h.update(b"gpnet-propagation-v1\n");
    h.update(dataset_id.as_bytes());
    h.update(b"\n");
    h.update(config.canonical().as_bytes());
    to_hex(&h.finalize()[..16])
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn is_fingerprint(s: &[u8]) -> bool {
    s.len() == 32 && s.iter().all(|c| c.is_ascii_digit() || (b'a'..=b'f').contains(c))
}

pub fn encode(features: &PropagatedFeatures) -> Result<Vec<u8>> {
    if !is_fingerprint(features.fingerprint.as_bytes()) {
        return Err(Error::input(format!(
            "fingerprint '{}' is not 32 lowercase hex digits",
            features.fingerprint
        )));
    }
    let m = &features.features;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    out.extend_from_slice(features.fingerprint.as_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn malformed(reason: impl Into<String>) -> Error {
    crate::error::DataError::Malformed {
        file: "propagated-features cache",
        reason: reason.into(),
    }
    .into()
}

pub fn decode(bytes: &[u8]) -> Result<PropagatedFeatures> {
    if bytes.len() < HEADER_LEN {
        return Err(malformed(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..16] != MAGIC {
        return Err(malformed("bad magic"));
    }
    let n = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let d = u64::from_le_bytes(bytes[24..32].try_into().unwrap());
    let fp = &bytes[32..64];
    if !is_fingerprint(fp) {
        return Err(malformed("fingerprint is not 32 lowercase hex digits"));
    }
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(HEADER_LEN as u64))
        .ok_or_else(|| malformed("dimensions overflow"))?;
    if expected != bytes.len() as u64 {
        return Err(malformed(format!(
            "header says {n}x{d} ({expected} bytes) but file has {} bytes",
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let features = DenseMatrix::new(n as usize, d as usize, data)
        .map_err(|e| malformed(e.to_string()))?;
    Ok(PropagatedFeatures {
        features,
        fingerprint: String::from_utf8(fp.to_vec()).expect("hex is ascii"),
    })
}

/// Directory of cache files named `<fingerprint>.hbar`.
#[derive(Clone, Debug)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, fingerprint: &str) -> PathBuf {
        self.dir.join(format!("{fingerprint}.hbar"))
    }

    /// Returns the cached entry, `None` when absent. A present file whose
    /// header disagrees with `fingerprint` is an error.
    pub fn load(&self, fingerprint: &str) -> Result<Option<PropagatedFeatures>> {
        let path = self.path_for(fingerprint);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path, e)),
        };
        let pf = decode(&bytes)?;
        if pf.fingerprint != fingerprint {
            return Err(malformed(format!(
                "{} holds fingerprint {}, expected {fingerprint}",
                path.display(),
                pf.fingerprint
            )));
        }
        Ok(Some(pf))
    }

    pub fn store(&self, features: &PropagatedFeatures) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path_for(&features.fingerprint);
        let tmp = path.with_extension("hbar.tmp");
        fs::write(&tmp, encode(features)?).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
