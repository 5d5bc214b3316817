//! Binary checkpoint of a trained linear layer.
//!
//! ```text
//! offset  size      field
//! 0       8         magic b"GPNETCK1"
//! 8       8         d, feature dimension (u64 LE)
//! 16      8         C, classes (u64 LE)
//! 24      8         selected epoch (u64 LE)
//! 32      8         seed (u64 LE)
//! 40      8         flags (u64 LE); bit 0 = bias present
//! 48      8·d·C     W, row-major f64 LE
//! ...     8·C       bias, only when flagged
//! ```

use std::fs;
use std::path::Path;

use super::ModelParams;
use crate::dense::DenseMatrix;
use crate::error::{DataError, Error, Result};

pub const MAGIC: &[u8; 8] = b"GPNETCK1";
const HEADER_LEN: usize = 48;
const FLAG_BIAS: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub selected_epoch: u64,
    pub seed: u64,
}

pub fn encode(ck: &Checkpoint) -> Vec<u8> {
    let w = &ck.params.weights;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * ck.params.parameter_count());
    out.extend_from_slice(MAGIC);
    for v in [
        w.rows() as u64,
        w.cols() as u64,
        ck.selected_epoch,
        ck.seed,
        if ck.params.bias.is_some() { FLAG_BIAS } else { 0 },
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let bias = ck.params.bias.as_deref().unwrap_or(&[]);
    for v in w.data().iter().chain(bias) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn malformed(reason: impl Into<String>) -> Error {
    DataError::Malformed {
        file: "checkpoint",
        reason: reason.into(),
    }
    .into()
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < HEADER_LEN {
        return Err(malformed(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(malformed("bad magic"));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap());
    let (d, c, selected_epoch, seed, flags) = (word(0), word(1), word(2), word(3), word(4));
    if flags & !FLAG_BIAS != 0 {
        return Err(malformed(format!("unknown flags {flags:#x}")));
    }
    let has_bias = flags & FLAG_BIAS != 0;
    let expected = d
        .checked_mul(c)
        .and_then(|w| w.checked_add(if has_bias { c } else { 0 }))
        .and_then(|p| p.checked_mul(8))
        .and_then(|p| p.checked_add(HEADER_LEN as u64))
        .ok_or_else(|| malformed("dimensions overflow"))?;
    if expected != bytes.len() as u64 {
        return Err(malformed(format!(
            "header says {d}x{c} ({expected} bytes) but file has {} bytes",
            bytes.len()
        )));
    }
    let mut values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()));
    let (d, c) = (d as usize, c as usize);
    let weights = DenseMatrix::new(d, c, values.by_ref().take(d * c).collect())
        .map_err(|e| malformed(e.to_string()))?;
    let bias = if has_bias {
        let b: Vec<f64> = values.collect();
        if !b.iter().all(|v| v.is_finite()) {
            return Err(malformed("bias contains non-finite values"));
        }
        Some(b)
    } else {
        None
    };
    Ok(Checkpoint {
        params: ModelParams { weights, bias },
        selected_epoch,
        seed,
    })
}

pub fn save(ck: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, encode(ck)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
