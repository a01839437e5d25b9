//! CDF table file.
//!
//! ```text
//! "DLICLUT\0" | u32 version | u32 R | u32 CDF_max | u32 L | u32 M
//! | u8 len, erf tag | u32 crc32 | 4160 * (2R + 2) u16 entries
//! ```
//!
//! The CRC covers the header bytes before it followed by the entries.

use std::path::Path;

use dlic_core::cdf::{LutConfig, LutSet, ERF_IDENTITY};
use dlic_core::discretize::{MU_LEVELS, SIGMA_LEVELS};

use crate::bytes::Reader;
use crate::error::{read_file, write_file, DlicError, Result};

const MAGIC: &[u8; 8] = b"DLICLUT\0";
pub const LUT_VERSION: u32 = 1;

pub fn luts_to_bytes(luts: &LutSet) -> Vec<u8> {
    let cfg = luts.config();
    let mut out = Vec::with_capacity(64 + luts.entries().len() * 2);
    out.extend_from_slice(MAGIC);
    for v in [LUT_VERSION, cfg.range, cfg.cdf_max, SIGMA_LEVELS as u32, MU_LEVELS as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(ERF_IDENTITY.len() as u8);
    out.extend_from_slice(ERF_IDENTITY.as_bytes());
    let header_len = out.len();
    let mut body = Vec::with_capacity(luts.entries().len() * 2);
    for e in luts.entries() {
        body.extend_from_slice(&e.to_le_bytes());
    }
    let mut h = crc32fast::Hasher::new();
    h.update(&out[..header_len]);
    h.update(&body);
    out.extend_from_slice(&h.finalize().to_le_bytes());
    out.extend_from_slice(&body);
    out
}

pub fn luts_from_bytes(data: &[u8]) -> Result<LutSet> {
    let mut r = Reader::new(data, "LUT file");
    r.expect_magic(MAGIC)?;
    let version = r.u32()?;
    if version != LUT_VERSION {
        return Err(DlicError::Version {
            kind: "LUT file",
            found: version,
        });
    }
    let range = r.u32()?;
    let cdf_max = r.u32()?;
    let (l, m) = (r.u32()?, r.u32()?);
    if l as usize != SIGMA_LEVELS || m as usize != MU_LEVELS {
        return Err(DlicError::Format(format!("LUT grid {l}x{m}, expected 65x64")));
    }
    let tag_len = r.u8()? as usize;
    let tag = r.take(tag_len)?;
    if tag != ERF_IDENTITY.as_bytes() {
        return Err(DlicError::Format(format!(
            "LUT built with erf '{}', this build uses '{ERF_IDENTITY}'",
            String::from_utf8_lossy(tag)
        )));
    }
    let header_len = r.position();
    let crc = r.u32()?;
    let config = LutConfig { range, cdf_max };
    config.validate()?;
    let count = SIGMA_LEVELS * MU_LEVELS * config.table_len();
    let body = r.take(count * 2)?;
    r.finish()?;
    let mut h = crc32fast::Hasher::new();
    h.update(&data[..header_len]);
    h.update(body);
    if h.finalize() != crc {
        return Err(DlicError::Checksum("LUT file"));
    }
    let entries = body
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    Ok(LutSet::from_entries(config, entries)?)
}

pub fn save_luts(path: &Path, luts: &LutSet) -> Result<()> {
    write_file(path, &luts_to_bytes(luts))
}

pub fn load_luts(path: &Path) -> Result<LutSet> {
    luts_from_bytes(&read_file(path)?)
}
