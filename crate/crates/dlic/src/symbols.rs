//! Symbol file holding a hyper latent and a latent.
//!
//! ```text
//! "DLSY" | u8 version | 3 * u32 hyper dims | 3 * u32 latent dims
//! | hyper i32 values | latent i32 values
//! ```

use std::path::Path;

use dlic_core::engine::SymbolTensor;

use crate::bytes::Reader;
use crate::error::{read_file, write_file, DlicError, Result};

const MAGIC: &[u8; 4] = b"DLSY";
pub const SYMBOLS_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolFile {
    pub hyper: SymbolTensor,
    pub latent: SymbolTensor,
}

impl SymbolFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(SYMBOLS_VERSION);
        for t in [&self.hyper, &self.latent] {
            for d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
        }
        for t in [&self.hyper, &self.latent] {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data, "symbol file");
        r.expect_magic(MAGIC)?;
        let version = r.u8()?;
        if version != SYMBOLS_VERSION {
            return Err(DlicError::Version {
                kind: "symbol file",
                found: version as u32,
            });
        }
        let mut dims = [[0usize; 3]; 2];
        for d in dims.iter_mut().flatten() {
            *d = r.u32()? as usize;
        }
        let mut tensors = Vec::with_capacity(2);
        for [c, h, w] in dims {
            let n = c
                .checked_mul(h)
                .and_then(|v| v.checked_mul(w))
                .filter(|&n| n <= data.len() / 4)
                .ok_or_else(|| DlicError::Format("symbol tensor larger than the file".into()))?;
            let values = (0..n).map(|_| r.i32()).collect::<Result<Vec<_>>>()?;
            tensors.push(SymbolTensor::new(c, h, w, values)?);
        }
        r.finish()?;
        let latent = tensors.pop().unwrap();
        let hyper = tensors.pop().unwrap();
        Ok(Self { hyper, latent })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}
