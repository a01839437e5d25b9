//! Seeded toy models and data for tests, verification and demos.

use dlic_core::cdf::LutSet;
use dlic_core::codec::{lookup_symbol, CumulativeModel, GmmModel, PriorModel};
use dlic_core::engine::{
    clip_symbol, Activation, EntropyModel, FloatLayer, FloatModel, LayerKind, SymbolTensor,
};
use dlic_core::quant::FloatTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub latent_channels: usize,
    pub hyper_channels: usize,
    pub mixtures: usize,
    pub hidden: usize,
    pub context_kernel: usize,
    pub hyper_range: u32,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            latent_channels: 8,
            hyper_channels: 4,
            mixtures: 3,
            hidden: 16,
            context_kernel: 5,
            hyper_range: 32,
        }
    }
}

fn layer(rng: &mut ChaCha8Rng, kind: LayerKind, cin: usize, cout: usize, activation: Activation) -> FloatLayer {
    let k = kind.kernel();
    let amp = 1.0 / ((cin * k * k) as f32).sqrt();
    FloatLayer {
        kind,
        in_channels: cin,
        out_channels: cout,
        activation,
        weights: (0..cout * cin * k * k).map(|_| rng.random_range(-amp..amp)).collect(),
        bias: (0..cout).map(|_| rng.random_range(-0.1..0.1)).collect(),
    }
}

/// Random float model whose outputs stay in a codable range: positive
/// mixture weights, means near zero and scales around 1 to 4.
pub fn toy_float_model(cfg: &ToyConfig, seed: u64) -> FloatModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, cz, k, hid) = (cfg.latent_channels, cfg.hyper_channels, cfg.mixtures, cfg.hidden);
    let leaky = Activation::Leaky { slope: 0.125 };
    let mut last = layer(&mut rng, LayerKind::Conv { kernel: 1 }, 2 * hid, c * k * 3, Activation::None);
    for (i, (row, bias)) in last.weights.chunks_mut(2 * hid).zip(last.bias.iter_mut()).enumerate() {
        // gentle input dependence keeps scales positive
        row.iter_mut().for_each(|v| *v *= 0.5);
        *bias = match i % 3 {
            0 => rng.random_range(0.5..1.5),
            1 => rng.random_range(-0.5..0.5),
            _ => rng.random_range(1.0..3.0),
        };
    }
    FloatModel {
        latent_channels: c,
        hyper_channels: cz,
        mixtures: k,
        hyper_range: cfg.hyper_range,
        hyper_scales: (0..cz).map(|_| rng.random_range(1.0..4.0)).collect(),
        hyper: vec![
            layer(&mut rng, LayerKind::Conv { kernel: 3 }, cz, hid, leaky),
            layer(&mut rng, LayerKind::Conv { kernel: 1 }, hid, hid, Activation::None),
        ],
        context: vec![
            layer(&mut rng, LayerKind::MaskedConv { kernel: cfg.context_kernel }, c, hid, Activation::Relu),
            layer(&mut rng, LayerKind::Conv { kernel: 1 }, hid, hid, Activation::None),
        ],
        param: vec![layer(&mut rng, LayerKind::Conv { kernel: 1 }, 2 * hid, 2 * hid, leaky), last],
    }
}

/// Stacked `[Cz + C, H, W]` float samples with Gaussian values.
pub fn toy_calibration(model: &FloatModel, count: usize, height: usize, width: usize, seed: u64) -> Result<Vec<FloatTensor>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane = height * width;
    let latent = Normal::new(0.0f32, 2.5).expect("valid normal");
    (0..count)
        .map(|_| {
            let mut data = Vec::with_capacity((model.hyper_channels + model.latent_channels) * plane);
            for &s in &model.hyper_scales {
                let d = Normal::new(0.0f32, s).expect("valid normal");
                data.extend((0..plane).map(|_| d.sample(&mut rng)));
            }
            data.extend((0..model.latent_channels * plane).map(|_| latent.sample(&mut rng)));
            Ok(FloatTensor::new(vec![model.hyper_channels + model.latent_channels, height, width], data)?)
        })
        .collect()
}

fn sample<M: CumulativeModel, R: Rng>(m: &M, rng: &mut R) -> i32 {
    lookup_symbol(m, rng.random_range(0..m.total()))
}

/// Draw a hyper latent and a latent from the model's own coding
/// distributions, position by position.
pub fn sample_symbols<R: Rng>(
    model: &EntropyModel,
    luts: &LutSet,
    height: usize,
    width: usize,
    rng: &mut R,
) -> Result<(SymbolTensor, SymbolTensor)> {
    let cfg = model.config();
    let mut z = SymbolTensor::zeros(cfg.hyper_channels, height, width);
    for c in 0..cfg.hyper_channels {
        let m = PriorModel {
            prior: model.prior(),
            channel: c,
        };
        for y in 0..height {
            for x in 0..width {
                z.set(c, y, x, sample(&m, rng));
            }
        }
    }
    let features = model.hyper_features(&z)?;
    let mut latent = SymbolTensor::zeros(cfg.latent_channels, height, width);
    let mut clipped = vec![0i32; cfg.latent_channels * height * width];
    let mut params = vec![0i32; cfg.param_channels()];
    for y in 0..height {
        for x in 0..width {
            model.params_at(&features, &clipped, y, x, &mut params)?;
            for (c, q) in model.queries(&params)?.iter().enumerate() {
                let v = sample(&GmmModel { query: q, luts }, rng);
                latent.set(c, y, x, v);
                clipped[(c * height + y) * width + x] = clip_symbol(v);
            }
        }
    }
    Ok((z, latent))
}
