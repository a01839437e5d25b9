use alloc::vec::Vec;

use crate::{Error, Result};

/// Map signed to unsigned: 0, -1, 1, -2, 2, ... to 0, 1, 2, 3, 4, ...
#[inline]
pub fn zigzag(v: i32) -> u32 {
    ((v << 1) ^ (v >> 31)) as u32
}

#[inline]
pub fn unzigzag(u: u32) -> i32 {
    ((u >> 1) as i32) ^ -((u & 1) as i32)
}

/// MSB-first bit sink.
#[derive(Debug, Clone, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bits: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_bit(&mut self, bit: bool) {
        let off = (self.bits % 8) as u32;
        if off == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> off;
        }
        self.bits += 1;
    }

    /// Write the low `count` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, count: u32) {
        for i in (0..count).rev() {
            self.push_bit((value >> i) & 1 == 1);
        }
    }

    pub fn bit_len(&self) -> u64 {
        self.bits
    }

    /// Bytes with zero padding in the last one.
    pub fn finish(self) -> (Vec<u8>, u64) {
        (self.bytes, self.bits)
    }
}

/// Reader for a [`BitWriter`] section of known bit length.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    bits: u64,
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], bits: u64) -> Result<Self> {
        if bits.div_ceil(8) != bytes.len() as u64 {
            return Err(Error::Corrupt(alloc::format!(
                "{bits} escape bits do not fill {} bytes",
                bytes.len()
            )));
        }
        Ok(Self { bytes, bits, pos: 0 })
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        if self.pos >= self.bits {
            return Err(Error::Underrun);
        }
        let byte = self.bytes[(self.pos / 8) as usize];
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, count: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..count {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn remaining(&self) -> u64 {
        self.bits - self.pos
    }

    /// Fail unless every bit was consumed.
    pub fn finish(self) -> Result<()> {
        if self.pos != self.bits {
            return Err(Error::Corrupt(alloc::format!(
                "{} unread escape bits",
                self.bits - self.pos
            )));
        }
        Ok(())
    }
}

/// Order-0 Exp-Golomb code of `u`: `len - 1` zeros, then `u + 1` in binary.
pub fn write_exp_golomb(w: &mut BitWriter, u: u32) {
    let v = u as u64 + 1;
    let len = 64 - v.leading_zeros();
    w.push_bits(0, len - 1);
    w.push_bits(v, len);
}

pub fn read_exp_golomb(r: &mut BitReader<'_>) -> Result<u32> {
    let mut zeros = 0u32;
    while !r.read_bit()? {
        zeros += 1;
        if zeros > 32 {
            return Err(Error::Corrupt("Exp-Golomb prefix longer than 32 bits".into()));
        }
    }
    let v = (1u64 << zeros) | r.read_bits(zeros)?;
    u32::try_from(v - 1).map_err(|_| Error::Corrupt("Exp-Golomb value exceeds 32 bits".into()))
}
