use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::graph::{clip_symbol, ModelConfig, SymbolTensor};
use super::layer::{Activation, LayerKind};
use crate::cdf::LutConfig;
use crate::{Error, Result};

/// Float convolution in the same layout as the integer layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloatLayer {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    #[serde(default)]
    pub activation: Activation,
    /// `[out][in][ky][kx]`; masked taps are ignored.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl FloatLayer {
    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        let k = self.kind.kernel();
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Shape("layer with zero channels".into()));
        }
        if self.weights.len() != self.out_channels * self.in_channels * k * k
            || self.bias.len() != self.out_channels
        {
            return Err(Error::Shape(format!(
                "{}x{}x{k}x{k} layer has {} weights and {} biases",
                self.out_channels,
                self.in_channels,
                self.weights.len(),
                self.bias.len()
            )));
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite layer parameter".into()));
        }
        if let Activation::Leaky { slope } = self.activation {
            if !(slope > 0.0 && slope <= 1.0) {
                return Err(Error::InvalidArgument(format!("leaky slope {slope} outside (0, 1]")));
            }
        }
        Ok(())
    }

    /// Weights with masked taps set to zero.
    pub fn effective_weights(&self) -> Vec<f32> {
        let k = self.kind.kernel();
        self.weights
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let (ky, kx) = ((i / k) % k, i % k);
                if self.kind.tap_enabled(ky, kx) {
                    w
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn forward(&self, input: &[f32], height: usize, width: usize) -> Result<Vec<f32>> {
        if input.len() != self.in_channels * height * width {
            return Err(Error::Shape("float layer input size mismatch".into()));
        }
        let k = self.kind.kernel();
        let c = (k / 2) as isize;
        let taps = self.kind.taps();
        let plane = height * width;
        let mut out = vec![0f32; self.out_channels * plane];
        for co in 0..self.out_channels {
            for y in 0..height {
                for x in 0..width {
                    let mut acc = self.bias[co] as f64;
                    for ci in 0..self.in_channels {
                        let wbase = (co * self.in_channels + ci) * k * k;
                        for &(ky, kx) in &taps {
                            let iy = y as isize + ky as isize - c;
                            let ix = x as isize + kx as isize - c;
                            if iy < 0 || ix < 0 || iy as usize >= height || ix as usize >= width {
                                continue;
                            }
                            let v = input[ci * plane + iy as usize * width + ix as usize];
                            acc += self.weights[wbase + ky * k + kx] as f64 * v as f64;
                        }
                    }
                    out[co * plane + y * width + x] = self.activation.apply_f32(acc as f32);
                }
            }
        }
        Ok(out)
    }
}

/// Float entropy-parameter network, the source for post-training
/// quantization and the reference for drift measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloatModel {
    pub latent_channels: usize,
    pub hyper_channels: usize,
    pub mixtures: usize,
    pub hyper_range: u32,
    pub hyper_scales: Vec<f32>,
    pub hyper: Vec<FloatLayer>,
    pub context: Vec<FloatLayer>,
    pub param: Vec<FloatLayer>,
}

/// Post-activation outputs of every layer for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatTrace {
    pub hyper: Vec<Vec<f32>>,
    pub context: Vec<Vec<f32>>,
    pub param: Vec<Vec<f32>>,
}

impl FloatTrace {
    /// Final-layer outputs, `[C*K*3, H, W]`.
    pub fn params(&self) -> &[f32] {
        self.param.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn symbols_as_f32(t: &SymbolTensor) -> Vec<f32> {
    t.data().iter().map(|&v| clip_symbol(v) as f32).collect()
}

impl FloatModel {
    pub fn validate(&self) -> Result<()> {
        for l in self.hyper.iter().chain(&self.context).chain(&self.param) {
            l.validate()?;
        }
        Ok(())
    }

    pub fn config(&self, lut: LutConfig) -> ModelConfig {
        ModelConfig {
            latent_channels: self.latent_channels,
            hyper_channels: self.hyper_channels,
            mixtures: self.mixtures,
            lut,
            hyper_range: self.hyper_range,
            hyper_scales: self.hyper_scales.clone(),
        }
    }

    pub fn trace(&self, z: &SymbolTensor, latent: &SymbolTensor) -> Result<FloatTrace> {
        let (h, w) = (latent.height(), latent.width());
        if z.height() != h || z.width() != w {
            return Err(Error::Shape("hyper latent and latent differ in size".into()));
        }
        let run = |layers: &[FloatLayer], mut x: Vec<f32>| -> Result<Vec<Vec<f32>>> {
            let mut outs = Vec::with_capacity(layers.len());
            for l in layers {
                x = l.forward(&x, h, w)?;
                outs.push(x.clone());
            }
            Ok(outs)
        };
        let hyper = run(&self.hyper, symbols_as_f32(z))?;
        let context = run(&self.context, symbols_as_f32(latent))?;
        let mut feat = hyper.last().cloned().unwrap_or_default();
        feat.extend_from_slice(context.last().map(Vec::as_slice).unwrap_or(&[]));
        let param = run(&self.param, feat)?;
        Ok(FloatTrace {
            hyper,
            context,
            param,
        })
    }
}
