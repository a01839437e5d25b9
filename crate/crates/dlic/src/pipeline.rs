//! Offline pipeline glue: calibration over ingested samples and quantization.

use dlic_core::cdf::LutConfig;
use dlic_core::engine::{calibrate, quantize_model, CalibrationReport, EntropyModel, FloatModel, PtqOptions};
use dlic_core::quant::FloatTensor;

use crate::error::Result;
use crate::ingest::split_sample;
use crate::toy::{toy_calibration, toy_float_model, ToyConfig};

pub fn calibrate_samples(model: &FloatModel, samples: &[FloatTensor]) -> Result<CalibrationReport> {
    let pairs = samples
        .iter()
        .map(|s| split_sample(s, model.hyper_channels, model.latent_channels))
        .collect::<Result<Vec<_>>>()?;
    Ok(calibrate(model, &pairs)?)
}

/// Toy float model, calibrated on toy data and quantized.
pub fn build_toy_model(cfg: &ToyConfig, lut: LutConfig, seed: u64) -> Result<(FloatModel, EntropyModel)> {
    let float = toy_float_model(cfg, seed);
    let samples = toy_calibration(&float, 16, 8, 8, seed.wrapping_add(1))?;
    let report = calibrate_samples(&float, &samples)?;
    let model = quantize_model(&float, &report, &PtqOptions { lut })?;
    Ok((float, model))
}
