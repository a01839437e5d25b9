//! Bitstream container for one coded tensor.
//!
//! ```text
//! "DLIC" | u8 version | u8 ndim | ndim * u32 dims (C, H, W of the latent)
//! | u32 len, hyper stream | u32 len, main stream | u64 bit count, escape bytes
//! ```

use dlic_core::codec::EncodedTensor;

use crate::bytes::Reader;
use crate::error::{DlicError, Result};

const MAGIC: &[u8; 4] = b"DLIC";
pub const CONTAINER_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Container {
    /// Latent shape `[C, H, W]`.
    pub shape: [u32; 3],
    pub streams: EncodedTensor,
}

fn put_u32_block(out: &mut Vec<u8>, bytes: &[u8]) -> Result<()> {
    let n = u32::try_from(bytes.len()).map_err(|_| DlicError::Format("stream exceeds 4 GiB".into()))?;
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(bytes);
    Ok(())
}

impl Container {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let s = &self.streams;
        let mut out = Vec::with_capacity(32 + s.hyper.len() + s.main.len() + s.escapes.len());
        out.extend_from_slice(MAGIC);
        out.push(CONTAINER_VERSION);
        out.push(3);
        for d in self.shape {
            out.extend_from_slice(&d.to_le_bytes());
        }
        put_u32_block(&mut out, &s.hyper)?;
        put_u32_block(&mut out, &s.main)?;
        out.extend_from_slice(&s.escape_bits.to_le_bytes());
        out.extend_from_slice(&s.escapes);
        Ok(out)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data, "container");
        r.expect_magic(MAGIC)?;
        let version = r.u8()?;
        if version != CONTAINER_VERSION {
            return Err(DlicError::Version {
                kind: "container",
                found: version as u32,
            });
        }
        let ndim = r.u8()?;
        if ndim != 3 {
            return Err(DlicError::Format(format!("container has {ndim} dims, expected 3")));
        }
        let shape = [r.u32()?, r.u32()?, r.u32()?];
        let hyper = { let n = r.u32()? as usize; r.take(n)?.to_vec() };
        let main = { let n = r.u32()? as usize; r.take(n)?.to_vec() };
        let escape_bits = r.u64()?;
        let n = usize::try_from(escape_bits.div_ceil(8))
            .map_err(|_| DlicError::Format("escape section too large".into()))?;
        let escapes = r.take(n)?.to_vec();
        r.finish()?;
        Ok(Self {
            shape,
            streams: EncodedTensor {
                hyper,
                main,
                escapes,
                escape_bits,
            },
        })
    }
}
