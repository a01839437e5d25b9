//! Quantized model file: magic, version, JSON manifest, integer blob, CRC.
//!
//! ```text
//! "DLICMODL" | u32 version | u64 len, manifest JSON | u64 len, blob | u32 crc32
//! ```
//!
//! The blob holds each layer's `i8` weights followed by its `i32` biases
//! (little-endian), in manifest order. The CRC covers every preceding byte.

use std::path::Path;

use dlic_core::discretize::DiscretizationConfig;
use dlic_core::engine::{EntropyModel, IntLayer, IntLayerMeta, ModelConfig};
use serde::{Deserialize, Serialize};

use crate::bytes::{put_block, Reader};
use crate::error::{read_file, write_file, DlicError, Result};

const MAGIC: &[u8; 8] = b"DLICMODL";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: ModelConfig,
    discretization: DiscretizationConfig,
    hyper: Vec<LayerEntry>,
    context: Vec<LayerEntry>,
    param: Vec<LayerEntry>,
}

#[derive(Serialize, Deserialize)]
struct LayerEntry {
    meta: IntLayerMeta,
    weights_offset: u64,
    weights_len: u64,
    bias_offset: u64,
    bias_len: u64,
}

fn pack(layers: &[IntLayer], blob: &mut Vec<u8>) -> Vec<LayerEntry> {
    layers
        .iter()
        .map(|l| {
            let weights_offset = blob.len() as u64;
            blob.extend(l.weights().iter().map(|&w| w as u8));
            let bias_offset = blob.len() as u64;
            for b in l.bias() {
                blob.extend_from_slice(&b.to_le_bytes());
            }
            LayerEntry {
                meta: l.meta().clone(),
                weights_offset,
                weights_len: l.weights().len() as u64,
                bias_offset,
                bias_len: l.bias().len() as u64,
            }
        })
        .collect()
}

fn slice(blob: &[u8], offset: u64, len: u64) -> Result<&[u8]> {
    let start = usize::try_from(offset).ok();
    let end = start.zip(usize::try_from(len).ok()).and_then(|(s, n)| s.checked_add(n));
    match (start, end) {
        (Some(s), Some(e)) if e <= blob.len() => Ok(&blob[s..e]),
        _ => Err(DlicError::Format("layer data outside the model blob".into())),
    }
}

fn unpack(entries: Vec<LayerEntry>, blob: &[u8]) -> Result<Vec<IntLayer>> {
    entries
        .into_iter()
        .map(|e| {
            let weights = slice(blob, e.weights_offset, e.weights_len)?
                .iter()
                .map(|&b| b as i8)
                .collect();
            let bias_len = e.bias_len.checked_mul(4).ok_or_else(|| DlicError::Format("bias length overflow".into()))?;
            let bias = slice(blob, e.bias_offset, bias_len)?
                .chunks_exact(4)
                .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(IntLayer::new(e.meta, weights, bias)?)
        })
        .collect()
}

pub fn model_to_bytes(model: &EntropyModel) -> Result<Vec<u8>> {
    let mut blob = Vec::new();
    let manifest = Manifest {
        config: model.config().clone(),
        discretization: DiscretizationConfig::default(),
        hyper: pack(model.hyper_layers(), &mut blob),
        context: pack(model.context_layers(), &mut blob),
        param: pack(model.param_layers(), &mut blob),
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    let mut out = Vec::with_capacity(json.len() + blob.len() + 40);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    put_block(&mut out, &json);
    put_block(&mut out, &blob);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn model_from_bytes(data: &[u8]) -> Result<EntropyModel> {
    let mut r = Reader::new(data, "model file");
    r.expect_magic(MAGIC)?;
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(DlicError::Version {
            kind: "model file",
            found: version,
        });
    }
    let json = r.block()?;
    let blob = r.block()?;
    let body_len = r.position();
    let crc = r.u32()?;
    r.finish()?;
    if crc32fast::hash(&data[..body_len]) != crc {
        return Err(DlicError::Checksum("model file"));
    }
    let manifest: Manifest = serde_json::from_slice(json)?;
    manifest.discretization.validate()?;
    if manifest.discretization != DiscretizationConfig::default() {
        return Err(DlicError::Format("unsupported discretization configuration".into()));
    }
    Ok(EntropyModel::new(
        manifest.config,
        unpack(manifest.hyper, blob)?,
        unpack(manifest.context, blob)?,
        unpack(manifest.param, blob)?,
    )?)
}

pub fn save_model(path: &Path, model: &EntropyModel) -> Result<()> {
    write_file(path, &model_to_bytes(model)?)
}

pub fn load_model(path: &Path) -> Result<EntropyModel> {
    model_from_bytes(&read_file(path)?)
}
