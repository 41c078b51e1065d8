//! Binary network checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size        field
//! 0       5           magic "GDQN1"
//! 5       2           u16 format revision (1)
//! 7       1           u8 scalar width in bytes (8 = f64, 4 = f32)
//! 8       4           u32 number of layer widths L
//! 12      4*L         u32 layer widths
//! ...                 per layer: weights (row-major, out x in), then biases
//! ```
//!
//! Trailing bytes are rejected. A JSON sidecar next to the binary carries the
//! experiment configuration.

use thiserror::Error;

use crate::nn::{DenseNet, LayerParams};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 5] = b"GDQN1";
pub const FORMAT_REVISION: u16 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("checkpoint parse error at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },
}

fn parse_err(offset: usize, reason: impl Into<String>) -> CheckpointError {
    CheckpointError::Parse { offset, reason: reason.into() }
}

pub fn encode_network<T: Scalar>(net: &DenseNet<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + net.param_count() * T::BYTES);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_REVISION.to_le_bytes());
    out.push(T::BYTES as u8);
    out.extend_from_slice(&(net.dims().len() as u32).to_le_bytes());
    for &d in net.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for layer in net.layers() {
        for &w in &layer.weights {
            w.write_le(&mut out);
        }
        for &b in &layer.biases {
            b.write_le(&mut out);
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() - self.pos < n {
            return Err(parse_err(self.pos, format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_network<T: Scalar>(bytes: &[u8]) -> Result<DenseNet<T>, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(parse_err(0, "bad magic"));
    }
    let rev = r.take(2, "format revision")?;
    let rev = u16::from_le_bytes([rev[0], rev[1]]);
    if rev != FORMAT_REVISION {
        return Err(parse_err(5, format!("unsupported format revision {rev}")));
    }
    let width = r.take(1, "scalar width")?[0] as usize;
    if width != T::BYTES {
        return Err(parse_err(7, format!("scalar width {width} does not match the requested type ({} bytes)", T::BYTES)));
    }
    let n_dims = r.u32("layer count")? as usize;
    if !(2..=64).contains(&n_dims) {
        return Err(parse_err(8, format!("implausible layer count {n_dims}")));
    }
    let mut dims = Vec::with_capacity(n_dims);
    for _ in 0..n_dims {
        let at = r.pos;
        let d = r.u32("layer width")? as usize;
        if d == 0 {
            return Err(parse_err(at, "zero layer width"));
        }
        dims.push(d);
    }
    let mut layers = Vec::with_capacity(n_dims - 1);
    for w in dims.windows(2) {
        let (cols, rows) = (w[0], w[1]);
        let mut read = |n: usize, what: &str| -> Result<Vec<T>, CheckpointError> {
            let raw = r.take(n.checked_mul(T::BYTES).ok_or_else(|| parse_err(0, "layer too large"))?, what)?;
            Ok(raw.chunks_exact(T::BYTES).map(T::read_le).collect())
        };
        let weights = read(rows * cols, "weights")?;
        let biases = read(rows, "biases")?;
        layers.push(LayerParams { rows, cols, weights, biases });
    }
    if r.pos != bytes.len() {
        return Err(parse_err(r.pos, format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    DenseNet::from_layers(layers).map_err(|e| parse_err(r.pos, e.to_string()))
}
