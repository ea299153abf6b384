//! Versioned binary checkpoints.
//!
//! Layout: the 4-byte magic `OPLX`, a little-endian `u32` version, a `u32`
//! metadata length, the JSON metadata, then every tensor as row-major
//! little-endian `f64` pairs `(re, im)`.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::complex::C64;
use crate::error::{Error, FormatError, Result};
use crate::model::ModelSpec;
use crate::nn::Network;

pub const MAGIC: [u8; 4] = *b"OPLX";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub real_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub spec: ModelSpec,
    pub tensors: Vec<TensorInfo>,
    /// Free-form run information (seed, epochs, accuracy).
    #[serde(default)]
    pub extra: serde_json::Value,
}

pub fn encode_network(net: &Network, extra: serde_json::Value) -> Result<Vec<u8>> {
    let meta = CheckpointMeta {
        spec: net.spec.clone(),
        tensors: net
            .params
            .iter()
            .map(|p| TensorInfo {
                name: p.name.clone(),
                rows: p.value.nrows(),
                cols: p.value.ncols(),
                real_only: p.real_only,
            })
            .collect(),
        extra,
    };
    let json = serde_json::to_vec(&meta)?;
    let mut out = Vec::with_capacity(12 + json.len() + 16 * net.params.iter().map(|p| p.value.len()).sum::<usize>());
    out.write_all(&MAGIC)?;
    out.write_u32::<LittleEndian>(VERSION)?;
    out.write_u32::<LittleEndian>(json.len() as u32)?;
    out.write_all(&json)?;
    for p in &net.params {
        for z in p.value.iter() {
            out.write_f64::<LittleEndian>(z.re)?;
            out.write_f64::<LittleEndian>(z.im)?;
        }
    }
    Ok(out)
}

fn fmt_err(path: &str, kind: FormatError) -> Error {
    Error::Format { path: path.to_string(), kind }
}

pub fn decode_network(bytes: &[u8], path: &str) -> Result<(Network, CheckpointMeta)> {
    let truncated = |needed: usize| fmt_err(path, FormatError::Truncated { needed, actual: bytes.len() });
    if bytes.len() < 12 {
        return Err(truncated(12));
    }
    if bytes[..4] != MAGIC {
        return Err(fmt_err(
            path,
            FormatError::BadMagic {
                expected: u32::from_be_bytes(MAGIC),
                found: u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")),
            },
        ));
    }
    let mut cur = Cursor::new(&bytes[4..]);
    let version = cur.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(fmt_err(path, FormatError::Version(version)));
    }
    let meta_len = cur.read_u32::<LittleEndian>()? as usize;
    let body = 12 + meta_len;
    if bytes.len() < body {
        return Err(truncated(body));
    }
    let meta: CheckpointMeta = serde_json::from_slice(&bytes[12..body])
        .map_err(|e| fmt_err(path, FormatError::Other(format!("metadata: {e}"))))?;
    let total: usize = meta.tensors.iter().map(|t| t.rows * t.cols * 16).sum();
    if bytes.len() < body + total {
        return Err(truncated(body + total));
    }
    if bytes.len() > body + total {
        return Err(fmt_err(path, FormatError::Other(format!("{} trailing bytes", bytes.len() - body - total))));
    }
    let mut cur = Cursor::new(&bytes[body..]);
    let mut values = Vec::with_capacity(meta.tensors.len());
    for t in &meta.tensors {
        let mut data = Vec::with_capacity(t.rows * t.cols);
        for _ in 0..t.rows * t.cols {
            let re = cur.read_f64::<LittleEndian>()?;
            let im = cur.read_f64::<LittleEndian>()?;
            data.push(C64::new(re, im));
        }
        values.push(Array2::from_shape_vec((t.rows, t.cols), data).expect("tensor shape"));
    }
    let net = Network::from_params(meta.spec.clone(), values)?;
    for (p, t) in net.params.iter().zip(&meta.tensors) {
        if p.name != t.name || p.real_only != t.real_only {
            return Err(fmt_err(path, FormatError::Other(format!("tensor '{}' does not match model parameter '{}'", t.name, p.name))));
        }
    }
    Ok((net, meta))
}

pub fn save_network(net: &Network, path: impl AsRef<Path>, extra: serde_json::Value) -> Result<()> {
    let bytes = encode_network(net, extra)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_network(path: impl AsRef<Path>) -> Result<(Network, CheckpointMeta)> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_network(&bytes, &path.display().to_string())
}
