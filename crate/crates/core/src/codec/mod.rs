//! Deterministic entropy coding: a carry-propagating range coder for the
//! main stream and a bit-level Exp-Golomb section for escaped symbols.

mod gmm;
mod golomb;
mod range;
mod tensor;

pub use gmm::{
    decode_symbol, decode_symbol_linear, encode_symbol, lookup_symbol, CumulativeModel, GmmModel,
    PriorModel, SymbolCoding,
};
pub use golomb::{read_exp_golomb, write_exp_golomb, zigzag, unzigzag, BitReader, BitWriter};
pub use range::{RangeDecoder, RangeEncoder, TraceEntry};
pub use tensor::{decode_tensor, encode_tensor, EncodeStats, EncodedTensor};

/// Largest frequency total the range coder accepts.
pub const MAX_TOTAL: u32 = 1 << 26;
