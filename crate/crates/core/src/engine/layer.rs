use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::quant::QuantizerSpec;
use crate::requant::RequantParams;
use crate::{Error, Result};

/// Stride-1, same-padded convolution. A kernel of 1 is a 1x1 convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum LayerKind {
    Conv { kernel: usize },
    /// Causal mask: only taps strictly before the centre in raster order.
    MaskedConv { kernel: usize },
}

impl LayerKind {
    pub fn kernel(&self) -> usize {
        match *self {
            LayerKind::Conv { kernel } | LayerKind::MaskedConv { kernel } => kernel,
        }
    }

    pub fn is_pointwise(&self) -> bool {
        matches!(self, LayerKind::Conv { kernel: 1 })
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.kernel();
        if k == 0 || k.is_multiple_of(2) || k > 15 {
            return Err(Error::Shape(format!("kernel {k} must be odd and at most 15")));
        }
        if matches!(self, LayerKind::MaskedConv { kernel: 1 }) {
            return Err(Error::Shape("masked 1x1 convolution has no taps".into()));
        }
        Ok(())
    }

    /// Whether tap `(ky, kx)` contributes.
    #[inline]
    pub fn tap_enabled(&self, ky: usize, kx: usize) -> bool {
        match *self {
            LayerKind::Conv { .. } => true,
            LayerKind::MaskedConv { kernel } => {
                let c = kernel / 2;
                ky < c || (ky == c && kx < c)
            }
        }
    }

    /// Enabled `(ky, kx)` taps in row-major order.
    pub fn taps(&self) -> Vec<(usize, usize)> {
        let k = self.kernel();
        (0..k)
            .flat_map(|ky| (0..k).map(move |kx| (ky, kx)))
            .filter(|&(ky, kx)| self.tap_enabled(ky, kx))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Activation {
    #[default]
    None,
    Relu,
    Leaky { slope: f32 },
}

impl Activation {
    pub fn leaky_slope(&self) -> Option<f32> {
        match *self {
            Activation::Leaky { slope } => Some(slope),
            _ => None,
        }
    }

    pub fn apply_f32(&self, v: f32) -> f32 {
        match *self {
            Activation::None => v,
            Activation::Relu => v.max(0.0),
            Activation::Leaky { slope } => {
                if v >= 0.0 {
                    v
                } else {
                    slope * v
                }
            }
        }
    }
}

/// Everything about an integer layer except its weights and biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntLayerMeta {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub activation: Activation,
    pub input: QuantizerSpec,
    pub weight_scales: Vec<f32>,
    pub output: QuantizerSpec,
    pub requant: Vec<RequantParams>,
}

/// Quantized convolution: 8-bit weights laid out `[out][in][ky][kx]`, 32-bit
/// biases with the input zero point already folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct IntLayer {
    meta: IntLayerMeta,
    weights: Vec<i8>,
    bias: Vec<i32>,
    taps: Vec<(usize, usize)>,
}

impl IntLayer {
    pub fn new(meta: IntLayerMeta, weights: Vec<i8>, bias: Vec<i32>) -> Result<Self> {
        meta.kind.validate()?;
        let k = meta.kind.kernel();
        let (cin, cout) = (meta.in_channels, meta.out_channels);
        if cin == 0 || cout == 0 {
            return Err(Error::Shape("layer with zero channels".into()));
        }
        if weights.len() != cout * cin * k * k {
            return Err(Error::Shape(format!(
                "expected {} weights, got {}",
                cout * cin * k * k,
                weights.len()
            )));
        }
        if bias.len() != cout || meta.requant.len() != cout || meta.weight_scales.len() != cout {
            return Err(Error::Shape(format!(
                "bias, requant and weight scales need {cout} entries"
            )));
        }
        if meta.input.bit_width() != 8 {
            return Err(Error::Contract(format!(
                "layer input must be 8-bit, got {}",
                meta.input.bit_width()
            )));
        }
        for r in &meta.requant {
            r.check()?;
            if r.bit_width != meta.output.bit_width() {
                return Err(Error::Contract("requant width differs from output quantizer".into()));
            }
            if meta.activation.leaky_slope().is_some() != r.negative.is_some() {
                return Err(Error::Contract(
                    "leaky activation and negative requant branch must come together".into(),
                ));
            }
        }
        let taps = meta.kind.taps();
        let layer = Self {
            meta,
            weights,
            bias,
            taps,
        };
        layer.check_accumulator()?;
        Ok(layer)
    }

    /// Worst-case accumulation over 8-bit inputs must fit in 32 bits.
    fn check_accumulator(&self) -> Result<()> {
        let (lo, hi) = self.meta.input.qrange();
        let peak = lo.abs().max(hi.abs());
        for co in 0..self.meta.out_channels {
            let sum: i64 = (0..self.meta.in_channels)
                .flat_map(|ci| self.taps.iter().map(move |&t| (ci, t)))
                .map(|(ci, (ky, kx))| (self.weight(co, ci, ky, kx) as i64).abs() * peak)
                .sum();
            let bound = sum + (self.bias[co] as i64).abs();
            if bound > i32::MAX as i64 {
                return Err(Error::Accumulator(format!(
                    "output channel {co} can reach {bound}"
                )));
            }
        }
        Ok(())
    }

    pub fn meta(&self) -> &IntLayerMeta {
        &self.meta
    }

    pub fn weights(&self) -> &[i8] {
        &self.weights
    }

    pub fn bias(&self) -> &[i32] {
        &self.bias
    }

    #[inline]
    fn weight(&self, co: usize, ci: usize, ky: usize, kx: usize) -> i8 {
        let k = self.meta.kind.kernel();
        self.weights[((co * self.meta.in_channels + ci) * k + ky) * k + kx]
    }

    #[inline]
    fn finish(&self, co: usize, acc: i32) -> i32 {
        let r = &self.meta.requant[co];
        match self.meta.activation {
            Activation::None => r.requantize_one(acc),
            Activation::Relu => r.requantize_one(acc.max(0)),
            // Presence of the branch is checked at construction.
            Activation::Leaky { .. } => r.requantize_leaky_one(acc).unwrap_or(0),
        }
    }

    /// All output channels at `(y, x)` of a `[in, height, width]` input.
    /// Out-of-image taps read the input zero point.
    pub fn forward_at(
        &self,
        input: &[i32],
        height: usize,
        width: usize,
        y: usize,
        x: usize,
        out: &mut [i32],
    ) {
        let k = self.meta.kind.kernel();
        let c = (k / 2) as isize;
        let cin = self.meta.in_channels;
        let zp = self.meta.input.zero_point();
        for (co, slot) in out.iter_mut().enumerate().take(self.meta.out_channels) {
            let mut acc = self.bias[co];
            let wbase = co * cin * k * k;
            for ci in 0..cin {
                let plane = &input[ci * height * width..(ci + 1) * height * width];
                let wrow = &self.weights[wbase + ci * k * k..wbase + (ci + 1) * k * k];
                for &(ky, kx) in &self.taps {
                    let iy = y as isize + ky as isize - c;
                    let ix = x as isize + kx as isize - c;
                    let v = if iy >= 0 && ix >= 0 && (iy as usize) < height && (ix as usize) < width {
                        plane[iy as usize * width + ix as usize]
                    } else {
                        zp
                    };
                    acc += wrow[ky * k + kx] as i32 * v;
                }
            }
            *slot = self.finish(co, acc);
        }
    }

    /// Pointwise application to one feature vector.
    pub fn forward_vec(&self, input: &[i32], out: &mut [i32]) -> Result<()> {
        if !self.meta.kind.is_pointwise() {
            return Err(Error::Contract("forward_vec on a spatial kernel".into()));
        }
        if input.len() != self.meta.in_channels || out.len() != self.meta.out_channels {
            return Err(Error::Shape("feature vector length mismatch".into()));
        }
        self.forward_at(input, 1, 1, 0, 0, out);
        Ok(())
    }

    /// Full `[out, height, width]` output.
    pub fn forward(&self, input: &[i32], height: usize, width: usize) -> Result<Vec<i32>> {
        if input.len() != self.meta.in_channels * height * width {
            return Err(Error::Shape(format!(
                "layer input has {} values, expected {}",
                input.len(),
                self.meta.in_channels * height * width
            )));
        }
        let cout = self.meta.out_channels;
        let plane = height * width;
        let mut out = alloc::vec![0i32; cout * plane];
        let mut px = alloc::vec![0i32; cout];
        for y in 0..height {
            for x in 0..width {
                self.forward_at(input, height, width, y, x, &mut px);
                for (co, v) in px.iter().enumerate() {
                    out[co * plane + y * width + x] = *v;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::requant::derive_requant_from_m;
    use alloc::vec;

    fn layer(kind: LayerKind, cin: usize, cout: usize, weights: Vec<i8>, bias: Vec<i32>, act: Activation) -> Result<IntLayer> {
        let r = derive_requant_from_m(0.5, 0, 8, act.leaky_slope()).unwrap();
        IntLayer::new(
            IntLayerMeta {
                kind,
                in_channels: cin,
                out_channels: cout,
                activation: act,
                input: QuantizerSpec::symmetric(8, 1.0).unwrap(),
                weight_scales: vec![0.5; cout],
                output: QuantizerSpec::symmetric(8, 1.0).unwrap(),
                requant: vec![r; cout],
            },
            weights,
            bias,
        )
    }

    #[test]
    fn mask_type_a() {
        let k = LayerKind::MaskedConv { kernel: 3 };
        assert_eq!(k.taps(), vec![(0, 0), (0, 1), (0, 2), (1, 0)]);
        assert_eq!(LayerKind::Conv { kernel: 3 }.taps().len(), 9);
        assert!(LayerKind::MaskedConv { kernel: 1 }.validate().is_err());
        assert!(LayerKind::Conv { kernel: 4 }.validate().is_err());
    }

    #[test]
    fn hand_computed_conv() {
        // 3x3 sum filter over a 1-channel 3x3 ramp, zero padding, m = 0.5
        let l = layer(LayerKind::Conv { kernel: 3 }, 1, 1, vec![1; 9], vec![0], Activation::None).unwrap();
        let input: Vec<i32> = (1..=9).collect();
        let out = l.forward(&input, 3, 3).unwrap();
        // neighbourhood sums: 12 21 16 / 27 45 33 / 24 39 28, halved and rounded
        assert_eq!(out, vec![6, 11, 8, 14, 23, 17, 12, 20, 14]);
    }

    #[test]
    fn masked_ignores_future() {
        let l = layer(LayerKind::MaskedConv { kernel: 3 }, 1, 1, vec![2; 9], vec![0], Activation::None).unwrap();
        let mut input = vec![0i32; 9];
        input[0] = 10;
        let base = l.forward(&input, 3, 3).unwrap();
        // changing the centre or later pixels never affects that position
        for pos in 0..9 {
            let mut perturbed = input.clone();
            for v in perturbed.iter_mut().skip(pos) {
                *v = 77;
            }
            let out = l.forward(&perturbed, 3, 3).unwrap();
            assert_eq!(out[pos], base[pos], "pos {pos}");
        }
    }

    #[test]
    fn activations() {
        let w = vec![1i8];
        let relu = layer(LayerKind::Conv { kernel: 1 }, 1, 1, w.clone(), vec![0], Activation::Relu).unwrap();
        let leaky = layer(LayerKind::Conv { kernel: 1 }, 1, 1, w, vec![0], Activation::Leaky { slope: 0.25 }).unwrap();
        let mut out = [0];
        relu.forward_vec(&[-40], &mut out).unwrap();
        assert_eq!(out[0], 0);
        leaky.forward_vec(&[-40], &mut out).unwrap();
        assert_eq!(out[0], -5);
        leaky.forward_vec(&[40], &mut out).unwrap();
        assert_eq!(out[0], 20);
    }

    #[test]
    fn construction_checks() {
        let k1 = LayerKind::Conv { kernel: 1 };
        assert!(layer(k1, 1, 1, vec![1, 1], vec![0], Activation::None).is_err());
        assert!(layer(k1, 1, 2, vec![1, 1], vec![0], Activation::None).is_err());
        assert!(matches!(
            layer(k1, 1, 1, vec![1], vec![i32::MAX - 10], Activation::None),
            Err(Error::Accumulator(_))
        ));
        let mut l = layer(k1, 1, 1, vec![1], vec![0], Activation::None).unwrap();
        l.meta.activation = Activation::Leaky { slope: 0.5 };
        assert!(IntLayer::new(l.meta.clone(), vec![1], vec![0]).is_err());
        assert!(l.forward(&[1, 2], 1, 1).is_err());
    }
}
