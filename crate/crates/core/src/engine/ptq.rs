use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::float::{FloatLayer, FloatModel, FloatTrace};
use super::graph::{param_quantizer, symbol_quantizer, EntropyModel, SymbolTensor};
use super::layer::{IntLayer, IntLayerMeta};
use crate::cdf::LutConfig;
use crate::quant::{calibrate_minmax_range, qrange, search_weight_quantizer, FloatTensor, QuantizerSpec};
use crate::requant::derive_requant;
use crate::round::round_f64;
use crate::{Error, Result};

/// Observed activation range of one layer output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerRange {
    pub min: f32,
    pub max: f32,
}

impl LayerRange {
    fn empty() -> Self {
        Self {
            min: f32::INFINITY,
            max: f32::NEG_INFINITY,
        }
    }

    fn observe(&mut self, values: &[f32]) {
        for &v in values {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        }
    }

    fn union(self, other: Self) -> Self {
        Self {
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    /// 8-bit asymmetric quantizer covering this range and zero.
    fn quantizer(self) -> Result<QuantizerSpec> {
        let min = self.min.min(0.0);
        let mut max = self.max.max(0.0);
        if max <= min {
            // constant output; any positive span represents it exactly
            max = min + 1.0;
        }
        calibrate_minmax_range(min, max, 8)
    }
}

/// Per-layer ranges gathered from calibration samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub samples: usize,
    pub hyper: Vec<LayerRange>,
    pub context: Vec<LayerRange>,
    pub param: Vec<LayerRange>,
}

impl CalibrationReport {
    fn new(model: &FloatModel) -> Self {
        Self {
            samples: 0,
            hyper: alloc::vec![LayerRange::empty(); model.hyper.len()],
            context: alloc::vec![LayerRange::empty(); model.context.len()],
            param: alloc::vec![LayerRange::empty(); model.param.len()],
        }
    }

    pub fn observe(&mut self, trace: &FloatTrace) {
        for (r, v) in self.hyper.iter_mut().zip(&trace.hyper) {
            r.observe(v);
        }
        for (r, v) in self.context.iter_mut().zip(&trace.context) {
            r.observe(v);
        }
        for (r, v) in self.param.iter_mut().zip(&trace.param) {
            r.observe(v);
        }
        self.samples += 1;
    }
}

/// Run the float model over `(hyper latent, latent)` samples.
pub fn calibrate(
    model: &FloatModel,
    samples: &[(SymbolTensor, SymbolTensor)],
) -> Result<CalibrationReport> {
    model.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no calibration samples".into()));
    }
    let mut report = CalibrationReport::new(model);
    for (z, y) in samples {
        report.observe(&model.trace(z, y)?);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PtqOptions {
    pub lut: LutConfig,
}

fn quantize_layer(layer: &FloatLayer, input: &QuantizerSpec, output: &QuantizerSpec) -> Result<IntLayer> {
    layer.validate()?;
    let k = layer.kind.kernel();
    let per_filter = layer.in_channels * k * k;
    let weights = layer.effective_weights();
    let w = FloatTensor::new(alloc::vec![layer.out_channels, per_filter], weights.clone())?;
    let scales = search_weight_quantizer(&w, 8)?;
    let (lo, hi) = qrange(8);
    let s_v = input.tensor_scale();
    let z_v = input.zero_point() as i64;

    let mut q_weights = Vec::with_capacity(weights.len());
    let mut bias = Vec::with_capacity(layer.out_channels);
    let mut requant = Vec::with_capacity(layer.out_channels);
    for co in 0..layer.out_channels {
        let s_w = scales[co];
        let filter = &weights[co * per_filter..(co + 1) * per_filter];
        let start = q_weights.len();
        q_weights.extend(
            filter
                .iter()
                .map(|&v| (round_f64(v as f64 / s_w as f64) as i64).clamp(lo, hi) as i8),
        );
        let q_sum: i64 = q_weights[start..].iter().map(|&q| q as i64).sum();
        let b = round_f64(layer.bias[co] as f64 / (s_w as f64 * s_v as f64));
        let b = if b.is_finite() { b as i64 } else { i64::MAX };
        let folded = b.saturating_sub(z_v * q_sum);
        bias.push(i32::try_from(folded).map_err(|_| {
            Error::Accumulator(format!("bias {folded} of output channel {co} exceeds 32 bits"))
        })?);
        requant.push(derive_requant(
            s_w,
            s_v,
            output.tensor_scale(),
            output.zero_point(),
            output.bit_width(),
            layer.activation.leaky_slope(),
        )?);
    }
    IntLayer::new(
        IntLayerMeta {
            kind: layer.kind,
            in_channels: layer.in_channels,
            out_channels: layer.out_channels,
            activation: layer.activation,
            input: input.clone(),
            weight_scales: scales,
            output: output.clone(),
            requant,
        },
        q_weights,
        bias,
    )
}

fn quantize_chain(
    layers: &[FloatLayer],
    ranges: &[LayerRange],
    input: QuantizerSpec,
    last_output: QuantizerSpec,
) -> Result<Vec<IntLayer>> {
    let mut input = input;
    let mut out = Vec::with_capacity(layers.len());
    for (i, (l, r)) in layers.iter().zip(ranges).enumerate() {
        let output = if i + 1 == layers.len() {
            last_output.clone()
        } else {
            r.quantizer()?
        };
        out.push(quantize_layer(l, &input, &output)?);
        input = output;
    }
    Ok(out)
}

/// Post-training quantization of a float model with calibrated ranges.
pub fn quantize_model(
    model: &FloatModel,
    report: &CalibrationReport,
    options: &PtqOptions,
) -> Result<EntropyModel> {
    model.validate()?;
    if report.hyper.len() != model.hyper.len()
        || report.context.len() != model.context.len()
        || report.param.len() != model.param.len()
    {
        return Err(Error::Shape("calibration report does not match the model".into()));
    }
    let (Some(h), Some(c)) = (report.hyper.last(), report.context.last()) else {
        return Err(Error::Shape("model needs hyper and context layers".into()));
    };
    let shared = h.union(*c).quantizer()?;
    let hyper = quantize_chain(&model.hyper, &report.hyper, symbol_quantizer(), shared.clone())?;
    let context = quantize_chain(&model.context, &report.context, symbol_quantizer(), shared.clone())?;
    let param = quantize_chain(&model.param, &report.param, shared, param_quantizer())?;
    EntropyModel::new(model.config(options.lut), hyper, context, param)
}
