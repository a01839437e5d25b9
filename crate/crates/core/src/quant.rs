//! Tensors, uniform affine quantizers and post-training calibration.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::round::{round_f32, round_f64};
use crate::{Error, Result};

/// Row-major `f32` tensor. All values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatTensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl FloatTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} needs {} values, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at index {bad}"
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: alloc::vec![0.0; len],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Minimum and maximum over all elements, `None` for an empty tensor.
    pub fn min_max(&self) -> Option<(f32, f32)> {
        let mut it = self.data.iter().copied();
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }
}

/// Quantization step: one for the whole tensor or one per output channel
/// (axis 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    PerTensor(f32),
    PerChannel(Vec<f32>),
}

impl Scale {
    /// Step applied to channel `c`.
    #[inline]
    pub fn for_channel(&self, c: usize) -> f32 {
        match self {
            Scale::PerTensor(s) => *s,
            Scale::PerChannel(s) => s[c],
        }
    }
}

/// Uniform affine quantizer description.
///
/// The zero point lives in the signed grid `[-2^(B-1), 2^(B-1)-1]`; see
/// [`QuantizerSpec::unsigned_zero_point`] for the unsigned-grid value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    bit_width: u32,
    symmetric: bool,
    scale: Scale,
    zero_point: i32,
}

impl QuantizerSpec {
    pub fn new(bit_width: u32, symmetric: bool, scale: Scale, zero_point: i32) -> Result<Self> {
        if !matches!(bit_width, 8 | 16 | 32) {
            return Err(Error::InvalidQuantizer(format!(
                "bit width {bit_width} not in {{8, 16, 32}}"
            )));
        }
        let scales: &[f32] = match &scale {
            Scale::PerTensor(s) => core::slice::from_ref(s),
            Scale::PerChannel(s) => s,
        };
        if scales.is_empty() {
            return Err(Error::InvalidQuantizer("empty per-channel scale list".into()));
        }
        if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidQuantizer(format!("non-positive scale {s}")));
        }
        if symmetric && zero_point != 0 {
            return Err(Error::InvalidQuantizer(
                "symmetric quantizer with non-zero zero point".into(),
            ));
        }
        if !symmetric && matches!(scale, Scale::PerChannel(_)) {
            return Err(Error::InvalidQuantizer(
                "asymmetric quantization is per-tensor only".into(),
            ));
        }
        Ok(Self {
            bit_width,
            symmetric,
            scale,
            zero_point,
        })
    }

    pub fn symmetric(bit_width: u32, scale: f32) -> Result<Self> {
        Self::new(bit_width, true, Scale::PerTensor(scale), 0)
    }

    pub fn per_channel(bit_width: u32, scales: Vec<f32>) -> Result<Self> {
        Self::new(bit_width, true, Scale::PerChannel(scales), 0)
    }

    pub fn asymmetric(bit_width: u32, scale: f32, zero_point: i32) -> Result<Self> {
        Self::new(bit_width, false, Scale::PerTensor(scale), zero_point)
    }

    pub fn bit_width(&self) -> u32 {
        self.bit_width
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn scale(&self) -> &Scale {
        &self.scale
    }

    /// Per-tensor step; for per-channel specs, the first channel's.
    pub fn tensor_scale(&self) -> f32 {
        self.scale.for_channel(0)
    }

    pub fn zero_point(&self) -> i32 {
        self.zero_point
    }

    /// Zero point expressed on the unsigned grid `[0, 2^B - 1]`, i.e. the
    /// value min-max calibration produces before shifting to signed storage.
    pub fn unsigned_zero_point(&self) -> i64 {
        self.zero_point as i64 + (1i64 << (self.bit_width - 1))
    }

    /// Inclusive integer range of the quantized grid.
    pub fn qrange(&self) -> (i64, i64) {
        qrange(self.bit_width)
    }
}

/// Inclusive signed range of a `bits`-wide integer.
#[inline]
pub fn qrange(bits: u32) -> (i64, i64) {
    (-(1i64 << (bits - 1)), (1i64 << (bits - 1)) - 1)
}

/// Integer tensor with its quantizer. Every element lies in the quantizer's
/// signed range.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    shape: Vec<usize>,
    data: Vec<i32>,
    spec: QuantizerSpec,
}

impl QuantizedTensor {
    pub fn new(shape: Vec<usize>, data: Vec<i32>, spec: QuantizerSpec) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} needs {} values, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        if let Scale::PerChannel(s) = spec.scale() {
            if shape.first().copied() != Some(s.len()) {
                return Err(Error::Shape(format!(
                    "{} per-channel scales for leading dimension {:?}",
                    s.len(),
                    shape.first()
                )));
            }
        }
        let (lo, hi) = spec.qrange();
        if let Some(v) = data.iter().find(|&&v| (v as i64) < lo || (v as i64) > hi) {
            return Err(Error::Range(format!(
                "{v} outside {}-bit range",
                spec.bit_width()
            )));
        }
        Ok(Self { shape, data, spec })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    pub fn spec(&self) -> &QuantizerSpec {
        &self.spec
    }

    pub fn bit_width(&self) -> u32 {
        self.spec.bit_width()
    }

    pub fn into_data(self) -> Vec<i32> {
        self.data
    }
}

fn channel_len(shape: &[usize]) -> usize {
    shape.iter().skip(1).product()
}

/// `clip(round(v / s) + z, -2^(B-1), 2^(B-1)-1)` element-wise.
pub fn quantize_affine(v: &FloatTensor, spec: &QuantizerSpec) -> Result<QuantizedTensor> {
    let per_channel = match spec.scale() {
        Scale::PerTensor(_) => None,
        Scale::PerChannel(s) => {
            if v.shape().first().copied() != Some(s.len()) {
                return Err(Error::Shape(format!(
                    "{} per-channel scales for shape {:?}",
                    s.len(),
                    v.shape()
                )));
            }
            Some(channel_len(v.shape()).max(1))
        }
    };
    let (lo, hi) = spec.qrange();
    let z = spec.zero_point() as i64;
    let data = v
        .data()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = per_channel.map_or(0, |len| i / len);
            let s = spec.scale().for_channel(c);
            // `as` saturates, so huge ratios clip correctly below.
            let q = round_f32(x / s) as i64 + z;
            q.clamp(lo, hi) as i32
        })
        .collect();
    QuantizedTensor::new(v.shape().to_vec(), data, spec.clone())
}

/// `s * q - s * z` element-wise.
pub fn dequantize(q: &QuantizedTensor) -> FloatTensor {
    let spec = q.spec();
    let per_channel = match spec.scale() {
        Scale::PerTensor(_) => None,
        Scale::PerChannel(_) => Some(channel_len(q.shape()).max(1)),
    };
    let z = spec.zero_point() as f32;
    let data = q
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let s = spec.scale().for_channel(per_channel.map_or(0, |len| i / len));
            s * v as f32 - s * z
        })
        .collect();
    FloatTensor {
        shape: q.shape().to_vec(),
        data,
    }
}

/// Min-max activation calibration over an explicit range.
///
/// `s = (max - min) / (2^B - 1)` and the unsigned-grid zero point is
/// `-round(min / s)`; the returned spec stores it shifted to the signed grid.
pub fn calibrate_minmax_range(min: f32, max: f32, bits: u32) -> Result<QuantizerSpec> {
    if !(min.is_finite() && max.is_finite()) || max <= min {
        return Err(Error::DegenerateRange { min, max });
    }
    if !matches!(bits, 8 | 16) {
        return Err(Error::InvalidQuantizer(format!(
            "activation bit width {bits} not in {{8, 16}}"
        )));
    }
    let levels = ((1u64 << bits) - 1) as f64;
    let step = (max as f64 - min as f64) / levels;
    let s = step as f32;
    if s <= 0.0 {
        return Err(Error::DegenerateRange { min, max });
    }
    // Zero point from the unrounded step so exact ties stay ties.
    let z_unsigned = -(round_f64(min as f64 / step) as i64);
    let z = z_unsigned - (1i64 << (bits - 1));
    let z = i32::try_from(z)
        .map_err(|_| Error::InvalidQuantizer(format!("zero point {z} out of range")))?;
    QuantizerSpec::asymmetric(bits, s, z)
}

/// Min-max activation calibration over a tensor's observed range.
pub fn calibrate_minmax(activations: &FloatTensor, bits: u32) -> Result<QuantizerSpec> {
    let (min, max) = activations
        .min_max()
        .ok_or_else(|| Error::InvalidArgument("empty calibration tensor".into()))?;
    calibrate_minmax_range(min, max, bits)
}

/// Symmetric min-max step `max|w| / (2^(B-1) - 1)`.
pub fn symmetric_minmax_step(values: &[f32], bits: u32) -> f32 {
    let peak = values.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    peak / ((1u64 << (bits - 1)) - 1) as f32
}

/// `count` candidates linearly spaced over `[0.2 * s_mm, 1.2 * s_mm]`.
pub fn default_weight_grid(minmax_step: f32, count: usize) -> Vec<f32> {
    let lo = 0.2 * minmax_step as f64;
    let hi = 1.2 * minmax_step as f64;
    match count {
        0 => Vec::new(),
        1 => alloc::vec![lo as f32],
        n => (0..n)
            .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64) as f32)
            .collect(),
    }
}

/// Squared reconstruction error of a filter under symmetric step `s`.
pub fn reconstruction_error(filter: &[f32], step: f32, bits: u32) -> f64 {
    let (lo, hi) = qrange(bits);
    filter
        .iter()
        .map(|&w| {
            let q = (round_f32(w / step) as i64).clamp(lo, hi);
            let err = (step * q as f32) as f64 - w as f64;
            err * err
        })
        .sum()
}

/// Grid candidate minimizing the filter's reconstruction error; ties go to
/// the smaller step.
pub fn search_channel_step(filter: &[f32], grid: &[f32], bits: u32) -> Result<f32> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty step grid".into()));
    }
    if let Some(s) = grid.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::InvalidArgument(format!("non-positive grid step {s}")));
    }
    let mut best = (f64::INFINITY, f32::INFINITY);
    for &s in grid {
        let err = reconstruction_error(filter, s, bits);
        if err < best.0 || (err == best.0 && s < best.1) {
            best = (err, s);
        }
    }
    Ok(best.1)
}

/// Per-filter (axis 0) grid search over a shared candidate list.
pub fn search_weight_step(w: &FloatTensor, grid: &[f32], bits: u32) -> Result<Vec<f32>> {
    let channels = *w
        .shape()
        .first()
        .ok_or_else(|| Error::Shape("weight tensor without channel axis".into()))?;
    let len = channel_len(w.shape());
    (0..channels)
        .map(|c| search_channel_step(&w.data()[c * len..(c + 1) * len], grid, bits))
        .collect()
}

/// Per-filter grid search where each filter gets the default 100-point grid
/// around its own min-max step.
pub fn search_weight_quantizer(w: &FloatTensor, bits: u32) -> Result<Vec<f32>> {
    let channels = *w
        .shape()
        .first()
        .ok_or_else(|| Error::Shape("weight tensor without channel axis".into()))?;
    let len = channel_len(w.shape());
    (0..channels)
        .map(|c| {
            let filter = &w.data()[c * len..(c + 1) * len];
            let s_mm = symmetric_minmax_step(filter, bits);
            if s_mm == 0.0 {
                // all-zero filter: every step reconstructs exactly
                return Ok(1.0);
            }
            search_channel_step(filter, &default_weight_grid(s_mm, 100), bits)
        })
        .collect()
}
