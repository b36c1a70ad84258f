//! Checkpoint files: one JSON header line followed by raw little-endian
//! `f32` values for every tensor, in header order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParameterSet, Tensor};
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "condense-abstract-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub precision: String,
    pub tensors: Vec<TensorEntry>,
    /// Free-form model metadata (configs, vocabulary size, ...).
    #[serde(default)]
    pub meta: serde_json::Value,
}

pub fn encode_checkpoint(params: &ParameterSet, meta: serde_json::Value) -> Vec<u8> {
    let header = CheckpointHeader {
        format: FORMAT_NAME.to_string(),
        version: FORMAT_VERSION,
        precision: "f32".to_string(),
        tensors: params
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
        meta,
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    for (_, t) in params.iter() {
        for &x in t.data() {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<(ParameterSet, serde_json::Value)> {
    let fail = |message: String| Error::Checkpoint {
        path: path.to_path_buf(),
        message,
    };
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| fail("missing header line".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| fail(format!("bad header: {e}")))?;
    if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
        return Err(fail(format!(
            "unsupported format {} v{}",
            header.format, header.version
        )));
    }
    if header.precision != "f32" {
        return Err(fail(format!("unsupported precision {}", header.precision)));
    }
    let body = &bytes[newline + 1..];
    let expected: usize = header
        .tensors
        .iter()
        .map(|e| e.shape.iter().product::<usize>() * 4)
        .sum();
    if body.len() != expected {
        return Err(fail(format!(
            "body has {} bytes, header describes {expected}",
            body.len()
        )));
    }
    let mut params = ParameterSet::new();
    let mut offset = 0;
    for entry in header.tensors {
        let n: usize = entry.shape.iter().product();
        let data = body[offset..offset + 4 * n]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        offset += 4 * n;
        let t = Tensor::new(entry.shape, data).map_err(|e| fail(e.to_string()))?;
        params.insert(entry.name, t);
    }
    Ok((params, header.meta))
}

pub fn save_checkpoint(path: &Path, params: &ParameterSet, meta: serde_json::Value) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_checkpoint(params, meta))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ParameterSet, serde_json::Value)> {
    let bytes = fs::read(path).map_err(|e| Error::Checkpoint {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    decode_checkpoint(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParameterSet {
        let mut p = ParameterSet::new();
        p.insert("condense.b", Tensor::vector(vec![0.5, -1.25]));
        p.insert("abstract.W_p", Tensor::identity(2));
        p
    }

    #[test]
    fn round_trip_is_exact_for_f32_values() {
        let p = sample();
        let bytes = encode_checkpoint(&p, serde_json::json!({"k": 1}));
        let (q, meta) = decode_checkpoint(&bytes, Path::new("mem")).unwrap();
        assert_eq!(p, q);
        assert_eq!(meta["k"], 1);
    }

    #[test]
    fn truncated_body_rejected() {
        let mut bytes = encode_checkpoint(&sample(), serde_json::Value::Null);
        bytes.pop();
        let err = decode_checkpoint(&bytes, Path::new("mem")).unwrap_err();
        assert!(err.to_string().contains("bytes"), "{err}");
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode_checkpoint(&sample(), serde_json::Value::Null);
        bytes.extend_from_slice(&[0, 0, 0, 0]);
        assert!(decode_checkpoint(&bytes, Path::new("mem")).is_err());
    }

    #[test]
    fn payload_is_little_endian_f32_in_name_order() {
        let bytes = encode_checkpoint(&sample(), serde_json::Value::Null);
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let body = &bytes[nl + 1..];
        // "abstract.W_p" sorts first: identity 2x2, then [0.5, -1.25].
        assert_eq!(body.len(), 6 * 4);
        assert_eq!(&body[0..4], &1.0f32.to_le_bytes());
        assert_eq!(&body[16..20], &0.5f32.to_le_bytes());
    }
}
