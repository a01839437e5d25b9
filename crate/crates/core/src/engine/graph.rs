use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::layer::{Activation, IntLayer, LayerKind};
use crate::cdf::{FactorizedPrior, GmmQuery, LutConfig, RawComponent, MAX_MIXTURES};
use crate::quant::QuantizerSpec;
use crate::{Error, Result};

/// Step of the final layer's 16-bit outputs.
pub const PARAM_SCALE: f32 = 1.0 / 64.0;

/// Static shape and coding configuration of an entropy model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub latent_channels: usize,
    pub hyper_channels: usize,
    pub mixtures: usize,
    pub lut: LutConfig,
    /// Window half-width of the factorized hyper prior.
    pub hyper_range: u32,
    /// Per-channel scale of the zero-mean hyper prior.
    pub hyper_scales: Vec<f32>,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_channels == 0 || self.hyper_channels == 0 {
            return Err(Error::Shape("model needs latent and hyper channels".into()));
        }
        if self.mixtures == 0 || self.mixtures > MAX_MIXTURES {
            return Err(Error::InvalidArgument(format!(
                "{} mixtures, expected 1..={MAX_MIXTURES}",
                self.mixtures
            )));
        }
        if self.hyper_scales.len() != self.hyper_channels {
            return Err(Error::Shape(format!(
                "{} hyper scales for {} channels",
                self.hyper_scales.len(),
                self.hyper_channels
            )));
        }
        self.lut.validate()
    }

    /// Final-layer channel count, `C * K * 3`.
    pub fn param_channels(&self) -> usize {
        self.latent_channels * self.mixtures * 3
    }
}

/// Integer symbols laid out `[channels, height, width]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<i32>,
}

impl SymbolTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<i32>) -> Result<Self> {
        let n = channels
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| Error::Shape("symbol tensor too large".into()))?;
        if data.len() != n {
            return Err(Error::Shape(format!(
                "symbol tensor {channels}x{height}x{width} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0; channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> i32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: i32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn into_data(self) -> Vec<i32> {
        self.data
    }
}

/// Symbols enter the network through a fixed 8-bit quantizer of step 1.
#[inline]
pub fn clip_symbol(v: i32) -> i32 {
    v.clamp(-128, 127)
}

/// Hyper-synthesis output, computed once per tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperFeatures {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<i32>,
}

impl HyperFeatures {
    pub fn channels(&self) -> usize {
        self.channels
    }

    fn at(&self, y: usize, x: usize, out: &mut [i32]) {
        let plane = self.height * self.width;
        for (c, v) in out.iter_mut().enumerate() {
            *v = self.data[c * plane + y * self.width + x];
        }
    }
}

/// Quantized entropy model: integer layers plus the hyper prior tables.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyModel {
    config: ModelConfig,
    hyper: Vec<IntLayer>,
    context: Vec<IntLayer>,
    param: Vec<IntLayer>,
    prior: FactorizedPrior,
}

fn chain(name: &str, layers: &[IntLayer], in_channels: usize) -> Result<usize> {
    let first = layers
        .first()
        .ok_or_else(|| Error::Shape(format!("{name} has no layers")))?;
    if first.meta().in_channels != in_channels {
        return Err(Error::Shape(format!(
            "{name} expects {} input channels, got {in_channels}",
            first.meta().in_channels
        )));
    }
    for (i, pair) in layers.windows(2).enumerate() {
        let (a, b) = (pair[0].meta(), pair[1].meta());
        if a.out_channels != b.in_channels {
            return Err(Error::Shape(format!("{name} layer {} channel mismatch", i + 1)));
        }
        if a.output != b.input {
            return Err(Error::Contract(format!(
                "{name} layer {} input quantizer differs from previous output",
                i + 1
            )));
        }
    }
    Ok(layers.last().unwrap().meta().out_channels)
}

impl EntropyModel {
    pub fn new(
        config: ModelConfig,
        hyper: Vec<IntLayer>,
        context: Vec<IntLayer>,
        param: Vec<IntLayer>,
    ) -> Result<Self> {
        config.validate()?;
        let symbol_in = symbol_quantizer();
        let hyper_out = chain("hyper synthesis", &hyper, config.hyper_channels)?;
        let context_out = chain("context model", &context, config.latent_channels)?;
        let param_out = chain("parameter network", &param, hyper_out + context_out)?;

        if hyper.iter().any(|l| matches!(l.meta().kind, LayerKind::MaskedConv { .. })) {
            return Err(Error::Contract("hyper synthesis cannot be masked".into()));
        }
        if !matches!(context[0].meta().kind, LayerKind::MaskedConv { .. })
            || context[1..].iter().any(|l| !l.meta().kind.is_pointwise())
        {
            return Err(Error::Contract(
                "context model must be one masked convolution followed by 1x1 layers".into(),
            ));
        }
        if param.iter().any(|l| !l.meta().kind.is_pointwise()) {
            return Err(Error::Contract("parameter network must be 1x1 layers".into()));
        }
        if hyper[0].meta().input != symbol_in || context[0].meta().input != symbol_in {
            return Err(Error::Contract("symbol inputs must use the fixed step-1 quantizer".into()));
        }
        let shared = &hyper.last().unwrap().meta().output;
        if *shared != context.last().unwrap().meta().output || *shared != param[0].meta().input {
            return Err(Error::Contract(
                "hyper and context outputs must share the parameter network's input quantizer"
                    .into(),
            ));
        }
        let last = param.last().unwrap().meta();
        if param_out != config.param_channels() {
            return Err(Error::Shape(format!(
                "parameter network emits {param_out} channels, expected {}",
                config.param_channels()
            )));
        }
        if last.output != param_quantizer() || last.activation != Activation::None {
            return Err(Error::Contract(
                "final layer must be linear 16-bit with step 2^-6 and zero point 0".into(),
            ));
        }
        let prior = FactorizedPrior::from_scales(&config.hyper_scales, config.hyper_range)?;
        Ok(Self {
            config,
            hyper,
            context,
            param,
            prior,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn hyper_layers(&self) -> &[IntLayer] {
        &self.hyper
    }

    pub fn context_layers(&self) -> &[IntLayer] {
        &self.context
    }

    pub fn param_layers(&self) -> &[IntLayer] {
        &self.param
    }

    pub fn prior(&self) -> &FactorizedPrior {
        &self.prior
    }

    fn check_shapes(&self, z: &SymbolTensor, height: usize, width: usize) -> Result<()> {
        if z.channels() != self.config.hyper_channels || z.height() != height || z.width() != width {
            return Err(Error::Shape(format!(
                "hyper latent {:?} does not match {}x{height}x{width}",
                z.shape(),
                self.config.hyper_channels
            )));
        }
        Ok(())
    }

    /// Run hyper synthesis on the whole hyper latent.
    pub fn hyper_features(&self, z: &SymbolTensor) -> Result<HyperFeatures> {
        let (h, w) = (z.height(), z.width());
        self.check_shapes(z, h, w)?;
        let mut x: Vec<i32> = z.data().iter().map(|&v| clip_symbol(v)).collect();
        for l in &self.hyper {
            x = l.forward(&x, h, w)?;
        }
        Ok(HyperFeatures {
            channels: self.hyper.last().unwrap().meta().out_channels,
            height: h,
            width: w,
            data: x,
        })
    }

    /// Final-layer outputs at `(y, x)`.
    ///
    /// `latent` holds clipped symbols `[C, height, width]`; only positions
    /// strictly before `(y, x)` in raster order are read.
    pub fn params_at(
        &self,
        hyper: &HyperFeatures,
        latent: &[i32],
        y: usize,
        x: usize,
        out: &mut [i32],
    ) -> Result<()> {
        let (h, w) = (hyper.height, hyper.width);
        if latent.len() != self.config.latent_channels * h * w || y >= h || x >= w {
            return Err(Error::Shape("latent or position does not match hyper features".into()));
        }
        if out.len() != self.config.param_channels() {
            return Err(Error::Shape("parameter buffer length mismatch".into()));
        }
        let ph = hyper.channels;
        let mut feat = vec![0i32; ph + self.context.last().unwrap().meta().out_channels];
        hyper.at(y, x, &mut feat[..ph]);

        let mut ctx = vec![0i32; self.context[0].meta().out_channels];
        self.context[0].forward_at(latent, h, w, y, x, &mut ctx);
        for l in &self.context[1..] {
            let mut next = vec![0i32; l.meta().out_channels];
            l.forward_vec(&ctx, &mut next)?;
            ctx = next;
        }
        feat[ph..].copy_from_slice(&ctx);

        let (last, body) = self.param.split_last().unwrap();
        for l in body {
            let mut next = vec![0i32; l.meta().out_channels];
            l.forward_vec(&feat, &mut next)?;
            feat = next;
        }
        last.forward_vec(&feat, out)
    }

    /// Whole-tensor evaluation of the final layer, `[C*K*3, H, W]`.
    pub fn forward_params(&self, z: &SymbolTensor, latent: &SymbolTensor) -> Result<Vec<i32>> {
        let (h, w) = (latent.height(), latent.width());
        if latent.channels() != self.config.latent_channels {
            return Err(Error::Shape("latent channel mismatch".into()));
        }
        self.check_shapes(z, h, w)?;
        let hyper = self.hyper_features(z)?;
        let mut ctx: Vec<i32> = latent.data().iter().map(|&v| clip_symbol(v)).collect();
        for l in &self.context {
            ctx = l.forward(&ctx, h, w)?;
        }
        let mut feat = hyper.data;
        feat.extend_from_slice(&ctx);
        for l in &self.param {
            feat = l.forward(&feat, h, w)?;
        }
        Ok(feat)
    }

    /// Split one position's final-layer outputs into per-channel mixtures.
    pub fn queries(&self, params: &[i32]) -> Result<Vec<GmmQuery>> {
        let k = self.config.mixtures;
        if params.len() != self.config.param_channels() {
            return Err(Error::Shape("parameter vector length mismatch".into()));
        }
        params
            .chunks_exact(3 * k)
            .map(|chunk| {
                let mut comps = [RawComponent::default(); MAX_MIXTURES];
                for (c, t) in comps.iter_mut().zip(chunk.chunks_exact(3)) {
                    // 16-bit requantization keeps every output in i16.
                    *c = RawComponent {
                        weight: t[0] as i16,
                        mean: t[1] as i16,
                        scale: t[2] as i16,
                    };
                }
                GmmQuery::from_params(&comps[..k])
            })
            .collect()
    }
}

/// Quantizer of symbols entering the network.
pub fn symbol_quantizer() -> QuantizerSpec {
    QuantizerSpec::symmetric(8, 1.0).expect("static quantizer")
}

/// Quantizer of the final 16-bit outputs.
pub fn param_quantizer() -> QuantizerSpec {
    QuantizerSpec::symmetric(16, PARAM_SCALE).expect("static quantizer")
}
