use super::golomb::{read_exp_golomb, unzigzag, write_exp_golomb, zigzag, BitReader, BitWriter};
use super::range::{RangeDecoder, RangeEncoder};
use crate::cdf::{gmm_cdf_index, FactorizedPrior, GmmQuery, LutSet};
use crate::Result;

/// Integer cumulative distribution over a bounded symbol window.
///
/// `cdf(escape_symbol())` must be 0, `cdf(max_symbol() + 1)` must equal
/// `total()`, and `cdf` must be non-decreasing in between.
pub trait CumulativeModel {
    fn total(&self) -> u32;
    /// Frequency mass strictly below `y`.
    fn cdf(&self, y: i32) -> u32;
    /// Placeholder symbol coded in place of anything outside the window.
    fn escape_symbol(&self) -> i32;
    fn max_symbol(&self) -> i32;
}

/// Mixture model backed by the shared LUT set.
#[derive(Debug, Clone, Copy)]
pub struct GmmModel<'a> {
    pub query: &'a GmmQuery,
    pub luts: &'a LutSet,
}

impl CumulativeModel for GmmModel<'_> {
    fn total(&self) -> u32 {
        self.query.total(self.luts.config().cdf_max)
    }

    fn cdf(&self, y: i32) -> u32 {
        gmm_cdf_index(y, self.query, self.luts)
    }

    fn escape_symbol(&self) -> i32 {
        self.query.escape_symbol(self.luts.config().range)
    }

    fn max_symbol(&self) -> i32 {
        self.query.max_symbol(self.luts.config().range)
    }
}

/// One channel of the factorized hyper-latent prior.
#[derive(Debug, Clone, Copy)]
pub struct PriorModel<'a> {
    pub prior: &'a FactorizedPrior,
    pub channel: usize,
}

impl CumulativeModel for PriorModel<'_> {
    fn total(&self) -> u32 {
        self.prior.cdf_max()
    }

    fn cdf(&self, y: i32) -> u32 {
        self.prior.cdf(self.channel, y)
    }

    fn escape_symbol(&self) -> i32 {
        -(self.prior.range() as i32)
    }

    fn max_symbol(&self) -> i32 {
        self.prior.range() as i32 - 1
    }
}

/// How a symbol ended up in the streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolCoding {
    Direct,
    Escaped,
}

fn escape_origin<M: CumulativeModel>(model: &M) -> i32 {
    let lo = model.escape_symbol() as i64;
    let hi = model.max_symbol() as i64 + 1;
    ((lo + hi).div_euclid(2)) as i32
}

/// Code `y`, falling back to the escape section when it lies outside the
/// window or its interval has zero width.
pub fn encode_symbol<M: CumulativeModel>(
    enc: &mut RangeEncoder,
    escapes: &mut BitWriter,
    model: &M,
    y: i32,
) -> Result<SymbolCoding> {
    let total = model.total();
    let y_lo = model.escape_symbol();
    if y > y_lo && y <= model.max_symbol() {
        let low = model.cdf(y);
        let high = model.cdf(y + 1);
        if low > 0 && low < total && high > low {
            enc.encode(low, high, total)?;
            return Ok(SymbolCoding::Direct);
        }
    }
    enc.encode(0, model.cdf(y_lo + 1), total)?;
    write_exp_golomb(escapes, zigzag(y.wrapping_sub(escape_origin(model))));
    Ok(SymbolCoding::Escaped)
}

/// Decode one symbol; the symbol search is a binary search over the window.
pub fn decode_symbol<M: CumulativeModel>(
    dec: &mut RangeDecoder<'_>,
    escapes: &mut BitReader<'_>,
    model: &M,
) -> Result<i32> {
    let t = dec.decode_target(model.total())?;
    finish_symbol(dec, escapes, model, lookup_symbol(model, t))
}

/// Window symbol whose interval contains cumulative frequency `t`; the
/// escape placeholder when `t` falls in its cell.
pub fn lookup_symbol<M: CumulativeModel>(model: &M, t: u32) -> i32 {
    // Largest y with cdf(y) <= t; cdf(lo) = 0 holds throughout.
    let (mut lo, mut hi) = (model.escape_symbol(), model.max_symbol());
    while lo < hi {
        let mid = lo + (hi - lo + 1) / 2;
        if model.cdf(mid) <= t {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// Reference decoder scanning the window linearly.
pub fn decode_symbol_linear<M: CumulativeModel>(
    dec: &mut RangeDecoder<'_>,
    escapes: &mut BitReader<'_>,
    model: &M,
) -> Result<i32> {
    let t = dec.decode_target(model.total())?;
    let mut y = model.escape_symbol();
    while y < model.max_symbol() && model.cdf(y + 1) <= t {
        y += 1;
    }
    finish_symbol(dec, escapes, model, y)
}

fn finish_symbol<M: CumulativeModel>(
    dec: &mut RangeDecoder<'_>,
    escapes: &mut BitReader<'_>,
    model: &M,
    y: i32,
) -> Result<i32> {
    dec.consume(model.cdf(y), model.cdf(y + 1))?;
    if y == model.escape_symbol() {
        let u = read_exp_golomb(escapes)?;
        Ok(unzigzag(u).wrapping_add(escape_origin(model)))
    } else {
        Ok(y)
    }
}
