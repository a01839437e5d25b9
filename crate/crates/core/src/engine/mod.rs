//! Integer-only entropy-parameter network and its float reference.
//!
//! The graph has three parts: hyper synthesis (stride-1 convolutions over the
//! hyper latent), a context model (one causally masked convolution over the
//! latent, optionally followed by 1x1 convolutions) and a parameter network
//! of 1x1 convolutions over the concatenated features. The last layer emits
//! 16-bit `(weight, mean, scale)` triples on a `2^-6` grid.

mod float;
mod graph;
mod layer;
mod ptq;

pub use float::{FloatLayer, FloatModel, FloatTrace};
pub use graph::{
    clip_symbol, param_quantizer, symbol_quantizer, EntropyModel, HyperFeatures, ModelConfig,
    SymbolTensor, PARAM_SCALE,
};
pub use layer::{Activation, IntLayer, IntLayerMeta, LayerKind};
pub use ptq::{calibrate, quantize_model, CalibrationReport, LayerRange, PtqOptions};
