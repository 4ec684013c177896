//! Weights file: the 8-byte magic `STARENH1`, a little-endian `u64` header
//! length, a UTF-8 JSON header listing each model's config and tensor
//! manifest, then every tensor as little-endian `f32` in manifest order.

use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::weights::ModelWeights;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const WEIGHTS_MAGIC: &[u8; 8] = b"STARENH1";
pub const WEIGHTS_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    models: Vec<ModelEntry>,
}

#[derive(Serialize, Deserialize)]
struct ModelEntry {
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn encode_weights(models: &[&ModelWeights]) -> Result<Vec<u8>> {
    let header = Header {
        version: WEIGHTS_FORMAT_VERSION,
        models: models
            .iter()
            .map(|m| ModelEntry {
                config: m.config().clone(),
                tensors: m
                    .tensors()
                    .iter()
                    .map(|(n, t)| TensorEntry {
                        name: n.clone(),
                        shape: t.shape().to_vec(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let text = serde_json::to_vec(&header)?;
    let values: usize = models.iter().map(|m| m.parameter_count()).sum();
    let mut out = Vec::with_capacity(16 + text.len() + 4 * values);
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(&text);
    for m in models {
        for t in m.tensors().values() {
            for v in t.data() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode_weights(bytes: &[u8]) -> Result<Vec<ModelWeights>> {
    if bytes.len() < 16 || &bytes[..8] != WEIGHTS_MAGIC {
        return Err(format_err("missing STARENH1 magic"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let len = usize::try_from(len).map_err(|_| format_err("header length overflows"))?;
    let body = &bytes[16..];
    if len > body.len() {
        return Err(format_err(format!(
            "header claims {len} bytes, only {} remain",
            body.len()
        )));
    }
    let header: Header =
        serde_json::from_slice(&body[..len]).map_err(|e| format_err(format!("bad header: {e}")))?;
    if header.version != WEIGHTS_FORMAT_VERSION {
        return Err(format_err(format!(
            "unsupported weights version {}",
            header.version
        )));
    }
    let mut data = body[len..].chunks_exact(4);
    if body[len..].len() % 4 != 0 {
        return Err(format_err(
            "tensor data is not a whole number of f32 values",
        ));
    }
    let mut models = Vec::with_capacity(header.models.len());
    for entry in header.models {
        let mut tensors = IndexMap::new();
        for te in entry.tensors {
            let n: usize = te.shape.iter().product();
            let mut values = Vec::with_capacity(n);
            for _ in 0..n {
                let chunk = data
                    .next()
                    .ok_or_else(|| format_err(format!("tensor {} is truncated", te.name)))?;
                values.push(f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64);
            }
            if tensors.contains_key(&te.name) {
                return Err(format_err(format!("duplicate tensor {}", te.name)));
            }
            let t = Tensor::new(te.shape, values).map_err(|e| format_err(e.to_string()))?;
            tensors.insert(te.name, t);
        }
        models
            .push(ModelWeights::new(entry.config, tensors).map_err(|e| format_err(e.to_string()))?);
    }
    if data.next().is_some() {
        return Err(format_err("trailing bytes after the last tensor"));
    }
    Ok(models)
}

pub fn save_weights(path: impl AsRef<Path>, models: &[&ModelWeights]) -> Result<()> {
    let bytes = encode_weights(models)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Vec<ModelWeights>> {
    decode_weights(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::MappingConfig;
    use crate::model::init::fixup_init;

    fn small() -> ModelWeights {
        let cfg = ModelConfig::Mapping(MappingConfig {
            latent_dim: 4,
            hidden: vec![5],
            code_channels: vec![2, 3],
        });
        fixup_init(&cfg, 3).unwrap()
    }

    #[test]
    fn rejects_damaged_files() {
        let m = small();
        let bytes = encode_weights(&[&m]).unwrap();
        assert!(matches!(
            decode_weights(&bytes[..10]),
            Err(Error::Format(_))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_weights(&bad).is_err());
        assert!(decode_weights(&bytes[..bytes.len() - 4]).is_err());
        let mut long = bytes.clone();
        long.extend_from_slice(&[0; 4]);
        assert!(decode_weights(&long).is_err());
        assert_eq!(decode_weights(&bytes).unwrap().len(), 1);
    }
}
