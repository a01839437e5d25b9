use alloc::vec::Vec;

use super::MAX_TOTAL;
use crate::{Error, Result};

const WINDOW_BITS: u32 = 56;
const TOP: u64 = 1 << WINDOW_BITS;
const BOTTOM: u64 = 1 << (WINDOW_BITS - 8);
const MASK: u64 = TOP - 1;

/// One coded interval, recorded when tracing is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEntry {
    pub low: u32,
    pub high: u32,
    pub total: u32,
}

fn check_interval(low: u32, high: u32, total: u32) -> Result<()> {
    if total == 0 || total > MAX_TOTAL {
        return Err(Error::Range(alloc::format!("coder total {total} outside [1, 2^26]")));
    }
    if low >= high || high > total {
        return Err(Error::ZeroWidthInterval { low, high });
    }
    Ok(())
}

/// Range encoder with a 56-bit window and LZMA-style carry handling.
///
/// The range never drops below `2^48`, so any total up to `2^26` leaves at
/// least `2^22` of resolution per frequency unit.
#[derive(Debug, Clone)]
pub struct RangeEncoder {
    low: u64,
    range: u64,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
    trace: Option<Vec<TraceEntry>>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: MASK,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
            trace: None,
        }
    }

    pub fn with_trace() -> Self {
        Self {
            trace: Some(Vec::new()),
            ..Self::new()
        }
    }

    /// Narrow to `[low, high)` out of `total`.
    pub fn encode(&mut self, low: u32, high: u32, total: u32) -> Result<()> {
        check_interval(low, high, total)?;
        if let Some(t) = &mut self.trace {
            t.push(TraceEntry { low, high, total });
        }
        let r = self.range / total as u64;
        self.low += r * low as u64;
        self.range = r * (high - low) as u64;
        while self.range < BOTTOM {
            self.range <<= 8;
            self.shift_low();
        }
        Ok(())
    }

    fn shift_low(&mut self) {
        if self.low < 0xFF << (WINDOW_BITS - 8) || self.low >= TOP {
            let carry = (self.low >> WINDOW_BITS) as u8;
            let mut byte = self.cache;
            loop {
                self.out.push(byte.wrapping_add(carry));
                byte = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = (self.low >> (WINDOW_BITS - 8)) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low << 8) & MASK;
    }

    pub fn trace(&self) -> Option<&[TraceEntry]> {
        self.trace.as_deref()
    }

    /// Flush the window and return the stream.
    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..8 {
            self.shift_low();
        }
        self.out
    }

    /// Flush, also returning the recorded trace.
    pub fn finish_with_trace(mut self) -> (Vec<u8>, Vec<TraceEntry>) {
        let trace = self.trace.take().unwrap_or_default();
        (self.finish(), trace)
    }
}

/// Decoder matching [`RangeEncoder`].
#[derive(Debug, Clone)]
pub struct RangeDecoder<'a> {
    data: &'a [u8],
    pos: usize,
    code: u64,
    range: u64,
    unit: u64,
    pending: Option<u32>,
    trace: Option<Vec<TraceEntry>>,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(data: &'a [u8]) -> Result<Self> {
        let mut d = Self {
            data,
            pos: 0,
            code: 0,
            range: MASK,
            unit: 0,
            pending: None,
            trace: None,
        };
        for _ in 0..8 {
            d.code = (d.code << 8) | d.next_byte()? as u64;
        }
        if d.code > MASK {
            return Err(Error::Corrupt("range stream does not start with a zero byte".into()));
        }
        Ok(d)
    }

    pub fn with_trace(data: &'a [u8]) -> Result<Self> {
        let mut d = Self::new(data)?;
        d.trace = Some(Vec::new());
        Ok(d)
    }

    fn next_byte(&mut self) -> Result<u8> {
        let b = *self.data.get(self.pos).ok_or(Error::Underrun)?;
        self.pos += 1;
        Ok(b)
    }

    /// Cumulative frequency the next symbol falls at, in `[0, total)`.
    pub fn decode_target(&mut self, total: u32) -> Result<u32> {
        if total == 0 || total > MAX_TOTAL {
            return Err(Error::Range(alloc::format!("coder total {total} outside [1, 2^26]")));
        }
        let unit = self.range / total as u64;
        let t = self.code / unit;
        if t >= total as u64 {
            return Err(Error::Corrupt("range decoder target beyond total".into()));
        }
        self.unit = unit;
        self.pending = Some(total);
        Ok(t as u32)
    }

    /// Consume the interval `[low, high)` the target fell into.
    pub fn consume(&mut self, low: u32, high: u32) -> Result<()> {
        let total = self
            .pending
            .take()
            .ok_or_else(|| Error::Contract("consume without decode_target".into()))?;
        check_interval(low, high, total)?;
        if let Some(t) = &mut self.trace {
            t.push(TraceEntry { low, high, total });
        }
        let start = self.unit * low as u64;
        let width = self.unit * (high - low) as u64;
        if self.code < start || self.code - start >= width {
            return Err(Error::Corrupt("decoded interval does not contain the code".into()));
        }
        self.code -= start;
        self.range = width;
        while self.range < BOTTOM {
            self.code = (self.code << 8) | self.next_byte()? as u64;
            self.range <<= 8;
        }
        Ok(())
    }

    pub fn trace(&self) -> Option<&[TraceEntry]> {
        self.trace.as_deref()
    }

    /// Bytes read so far.
    pub fn position(&self) -> usize {
        self.pos
    }

    /// Fail unless the whole stream was consumed.
    pub fn finish(self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::Corrupt(alloc::format!(
                "{} trailing bytes in range stream",
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}
