//! Binary distance-matrix dump.
//!
//! Layout: a 16-byte header (`b"WFDM"`, then `n`, metric code and a
//! reserved zero word, all u32 little-endian) followed by `n * n` f32
//! little-endian values in row-major order.

use std::path::Path;

use wifsm_core::{DistanceMatrix, Metric};

use crate::error::{Error, Result};
use crate::store::write_atomic;

pub const MAGIC: &[u8; 4] = b"WFDM";
pub const HEADER_LEN: usize = 16;

pub fn encode_matrix(m: &DistanceMatrix) -> Vec<u8> {
    let n = m.n();
    let mut out = Vec::with_capacity(HEADER_LEN + n * n * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&m.metric().code().to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for i in 0..n {
        for j in 0..n {
            out.extend_from_slice(&(m.get(i, j) as f32).to_le_bytes());
        }
    }
    out
}

/// Decoded dump: size, metric and the dense f32 values.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixDump {
    pub n: usize,
    pub metric: Metric,
    pub values: Vec<f32>,
}

impl MatrixDump {
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.values[i * self.n + j]
    }
}

pub fn decode_matrix(path: &Path, bytes: &[u8]) -> Result<MatrixDump> {
    let bad = |msg: &str| Error::parse(path, 0, msg);
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(bad("not a distance-matrix dump"));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().expect("4 bytes"));
    let n = word(4) as usize;
    let metric = Metric::from_code(word(8)).ok_or_else(|| bad("unknown metric code"))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() as u64 != (n as u64) * (n as u64) * 4 {
        return Err(bad("body length does not match n"));
    }
    let values = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    Ok(MatrixDump { n, metric, values })
}

pub fn write_matrix(path: &Path, m: &DistanceMatrix) -> Result<()> {
    write_atomic(path, &encode_matrix(m))
}

pub fn read_matrix(path: &Path) -> Result<MatrixDump> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let m = DistanceMatrix::from_upper(3, Metric::Manhattan, vec![1.5, 2.0, 0.25]).unwrap();
        let bytes = encode_matrix(&m);
        assert_eq!(bytes.len(), HEADER_LEN + 9 * 4);
        let d = decode_matrix(Path::new("m"), &bytes).unwrap();
        assert_eq!((d.n, d.metric), (3, Metric::Manhattan));
        assert_eq!(d.get(0, 2), 2.0);
        assert_eq!(d.get(2, 1), 0.25);
        assert_eq!(d.get(1, 1), 0.0);
        assert!(decode_matrix(Path::new("m"), &bytes[..bytes.len() - 1]).is_err());
    }
}
