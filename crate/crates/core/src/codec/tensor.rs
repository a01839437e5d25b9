use alloc::vec;
use alloc::vec::Vec;

use super::gmm::{decode_symbol, encode_symbol, CumulativeModel, GmmModel, PriorModel, SymbolCoding};
use super::golomb::{BitReader, BitWriter};
use super::range::{RangeDecoder, RangeEncoder};
use crate::cdf::LutSet;
use crate::engine::{clip_symbol, EntropyModel, SymbolTensor};
use crate::{Error, Result};

/// Streams produced for one latent tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedTensor {
    pub hyper: Vec<u8>,
    pub main: Vec<u8>,
    pub escapes: Vec<u8>,
    pub escape_bits: u64,
}

/// Symbol accounting for one encode.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EncodeStats {
    pub hyper_symbols: u64,
    pub main_symbols: u64,
    pub hyper_escapes: u64,
    pub main_escapes: u64,
    /// Sum of `-log2 p` over directly coded main-stream symbols.
    pub main_ideal_bits: f64,
}

fn check_luts(model: &EntropyModel, luts: &LutSet) -> Result<()> {
    if luts.config() != &model.config().lut {
        return Err(Error::Contract("LUT set was built for a different configuration".into()));
    }
    Ok(())
}

/// Encode the hyper latent with the factorized prior and the latent with the
/// context-conditioned mixtures, raster order, channels innermost.
pub fn encode_tensor(
    model: &EntropyModel,
    luts: &LutSet,
    z: &SymbolTensor,
    y: &SymbolTensor,
) -> Result<(EncodedTensor, EncodeStats)> {
    check_luts(model, luts)?;
    let cfg = model.config();
    if y.channels() != cfg.latent_channels {
        return Err(Error::Shape("latent channel mismatch".into()));
    }
    let mut stats = EncodeStats::default();
    let mut escapes = BitWriter::new();

    let mut enc = RangeEncoder::new();
    for c in 0..z.channels() {
        let m = PriorModel {
            prior: model.prior(),
            channel: c,
        };
        for v in &z.data()[c * z.height() * z.width()..(c + 1) * z.height() * z.width()] {
            if encode_symbol(&mut enc, &mut escapes, &m, *v)? == SymbolCoding::Escaped {
                stats.hyper_escapes += 1;
            }
            stats.hyper_symbols += 1;
        }
    }
    let hyper = enc.finish();

    let features = model.hyper_features(z)?;
    let clipped: Vec<i32> = y.data().iter().map(|&v| clip_symbol(v)).collect();
    let mut params = vec![0i32; cfg.param_channels()];
    let mut enc = RangeEncoder::new();
    for py in 0..y.height() {
        for px in 0..y.width() {
            model.params_at(&features, &clipped, py, px, &mut params)?;
            for (c, q) in model.queries(&params)?.iter().enumerate() {
                let m = GmmModel { query: q, luts };
                let v = y.get(c, py, px);
                match encode_symbol(&mut enc, &mut escapes, &m, v)? {
                    SymbolCoding::Direct => {
                        let p = (m.cdf(v + 1) - m.cdf(v)) as f64 / m.total() as f64;
                        stats.main_ideal_bits -= libm::log2(p);
                    }
                    SymbolCoding::Escaped => stats.main_escapes += 1,
                }
                stats.main_symbols += 1;
            }
        }
    }
    let main = enc.finish();
    let (escapes, escape_bits) = escapes.finish();
    Ok((
        EncodedTensor {
            hyper,
            main,
            escapes,
            escape_bits,
        },
        stats,
    ))
}

/// Decode both latents; `height` and `width` are shared by both.
pub fn decode_tensor(
    model: &EntropyModel,
    luts: &LutSet,
    height: usize,
    width: usize,
    streams: &EncodedTensor,
) -> Result<(SymbolTensor, SymbolTensor)> {
    check_luts(model, luts)?;
    let cfg = model.config();
    let mut escapes = BitReader::new(&streams.escapes, streams.escape_bits)?;

    let mut dec = RangeDecoder::new(&streams.hyper)?;
    let mut z = SymbolTensor::zeros(cfg.hyper_channels, height, width);
    for c in 0..cfg.hyper_channels {
        let m = PriorModel {
            prior: model.prior(),
            channel: c,
        };
        for py in 0..height {
            for px in 0..width {
                z.set(c, py, px, decode_symbol(&mut dec, &mut escapes, &m)?);
            }
        }
    }
    dec.finish()?;

    let features = model.hyper_features(&z)?;
    let mut y = SymbolTensor::zeros(cfg.latent_channels, height, width);
    let mut clipped = vec![0i32; cfg.latent_channels * height * width];
    let mut params = vec![0i32; cfg.param_channels()];
    let mut dec = RangeDecoder::new(&streams.main)?;
    for py in 0..height {
        for px in 0..width {
            model.params_at(&features, &clipped, py, px, &mut params)?;
            for (c, q) in model.queries(&params)?.iter().enumerate() {
                let v = decode_symbol(&mut dec, &mut escapes, &GmmModel { query: q, luts })?;
                y.set(c, py, px, v);
                clipped[(c * height + py) * width + px] = clip_symbol(v);
            }
        }
    }
    dec.finish()?;
    escapes.finish()?;
    Ok((z, y))
}
