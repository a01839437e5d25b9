//! Calibration data: a directory of raw little-endian `f32` tensors named
//! `*.f32` plus a `shapes.json` mapping each file name to its shape.

use std::collections::BTreeMap;
use std::path::Path;

use dlic_core::engine::SymbolTensor;
use dlic_core::quant::FloatTensor;
use dlic_core::round::round_f32;

use crate::error::{read_file, write_file, DlicError, Result};

pub const SHAPES_FILE: &str = "shapes.json";

/// Load every `*.f32` tensor in lexicographic file-name order.
pub fn ingest_calibration(dir: &Path) -> Result<Vec<FloatTensor>> {
    let shapes: BTreeMap<String, Vec<usize>> =
        serde_json::from_slice(&read_file(&dir.join(SHAPES_FILE))?)
            .map_err(|e| DlicError::Ingest(format!("{SHAPES_FILE}: {e}")))?;
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| DlicError::io(dir, e))? {
        let entry = entry.map_err(|e| DlicError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".f32") {
            names.push(name);
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(DlicError::Ingest(format!("no .f32 tensors in {}", dir.display())));
    }
    if let Some(extra) = shapes.keys().find(|k| names.binary_search(k).is_err()) {
        return Err(DlicError::Ingest(format!("{SHAPES_FILE} lists missing file {extra}")));
    }
    names
        .iter()
        .map(|name| {
            let shape = shapes
                .get(name)
                .ok_or_else(|| DlicError::Ingest(format!("no shape for {name}")))?;
            let bytes = read_file(&dir.join(name))?;
            let expected = shape.iter().product::<usize>() * 4;
            if bytes.len() != expected {
                return Err(DlicError::Ingest(format!(
                    "{name}: {} bytes, shape {shape:?} needs {expected}",
                    bytes.len()
                )));
            }
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            FloatTensor::new(shape.clone(), data)
                .map_err(|e| DlicError::Ingest(format!("{name}: {e}")))
        })
        .collect()
}

/// Write tensors as `sample_NNNN.f32` plus the shape manifest.
pub fn write_calibration(dir: &Path, tensors: &[FloatTensor]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| DlicError::io(dir, e))?;
    let mut shapes = BTreeMap::new();
    for (i, t) in tensors.iter().enumerate() {
        let name = format!("sample_{i:04}.f32");
        let bytes: Vec<u8> = t.data().iter().flat_map(|v| v.to_le_bytes()).collect();
        write_file(&dir.join(&name), &bytes)?;
        shapes.insert(name, t.shape().to_vec());
    }
    write_file(&dir.join(SHAPES_FILE), &serde_json::to_vec_pretty(&shapes)?)
}

/// Split a stacked `[Cz + C, H, W]` sample into rounded hyper latent and
/// latent symbols.
pub fn split_sample(
    t: &FloatTensor,
    hyper_channels: usize,
    latent_channels: usize,
) -> Result<(SymbolTensor, SymbolTensor)> {
    let &[c, h, w] = t.shape() else {
        return Err(DlicError::Ingest(format!("sample shape {:?} is not 3-d", t.shape())));
    };
    if c != hyper_channels + latent_channels {
        return Err(DlicError::Ingest(format!(
            "sample has {c} channels, model needs {hyper_channels} + {latent_channels}"
        )));
    }
    let rounded: Vec<i32> = t
        .data()
        .iter()
        .map(|&v| round_f32(v).clamp(i32::MIN as f32, i32::MAX as f32) as i32)
        .collect();
    let split = hyper_channels * h * w;
    Ok((
        SymbolTensor::new(hyper_channels, h, w, rounded[..split].to_vec())?,
        SymbolTensor::new(latent_channels, h, w, rounded[split..].to_vec())?,
    ))
}
