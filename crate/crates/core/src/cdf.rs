//! Discretized Gaussian CDF lookup tables and integer GMM CDF aggregation.
//!
//! Tables are built offline in floating point and then shipped as integers;
//! only [`gmm_cdf_index`] runs on the coding path, and it is pure 32-bit
//! integer arithmetic.
//!
//! A table for one `(mu fraction, sigma level)` pair has `2R + 2` entries.
//! Entry `k` is the cumulative frequency strictly below symbol `k - R`
//! (relative to `floor(mu)`), so entry 0 is 0, entry `2R` is `CDF_max` and
//! symbols `-R..R` each own a non-empty cell. The trailing entry is reserved.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::discretize::{mu_index, sigma_index, sigma_level, MU_LEVELS, SIGMA_LEVELS};
use crate::{Error, Result};

pub const DEFAULT_RANGE: u32 = 64;
pub const DEFAULT_CDF_MAX: u32 = 1 << 12;
/// Upper bound on quantized mixture weights.
pub const MAX_WEIGHT: u32 = 1 << 12;
/// Upper bound on mixture components.
pub const MAX_MIXTURES: usize = 4;
/// Tables per set: 64 mean fractions times 65 sigma levels.
pub const TABLE_COUNT: usize = SIGMA_LEVELS * MU_LEVELS;

/// Identity of the erf used by the builder; recorded in LUT headers.
pub const ERF_IDENTITY: &str = "libm-0.2/erf";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LutConfig {
    pub range: u32,
    pub cdf_max: u32,
}

impl Default for LutConfig {
    fn default() -> Self {
        Self {
            range: DEFAULT_RANGE,
            cdf_max: DEFAULT_CDF_MAX,
        }
    }
}

impl LutConfig {
    pub fn validate(&self) -> Result<()> {
        if self.range < 4 || self.range > 1 << 12 {
            return Err(Error::InvalidArgument(format!(
                "LUT range {} outside [4, 4096]",
                self.range
            )));
        }
        if self.cdf_max != DEFAULT_CDF_MAX {
            return Err(Error::InvalidArgument(format!(
                "CDF_max must be {DEFAULT_CDF_MAX}, got {}",
                self.cdf_max
            )));
        }
        if 2 * self.range >= self.cdf_max {
            return Err(Error::InvalidArgument(
                "range too wide for every symbol to keep a non-zero frequency".into(),
            ));
        }
        Ok(())
    }

    /// Entries per table, `2R + 2`.
    pub fn table_len(&self) -> usize {
        2 * self.range as usize + 2
    }
}

/// One cumulative frequency table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CdfLut {
    pub entries: Vec<u16>,
}

/// Standard normal CDF via the pinned erf.
fn phi(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / core::f64::consts::SQRT_2))
}

/// Monotone-repaired cumulative table for a Gaussian with the given mean
/// offset (in `[0, 1)` for GMM tables) and standard deviation.
///
/// Returns `2R + 2` entries; see the module docs for the layout.
pub fn gaussian_cdf_entries(mean: f64, sigma: f64, range: u32, cdf_max: u32) -> Vec<u16> {
    let r = range as i64;
    let last = 2 * r;
    let top = cdf_max as i64;
    let mut out = Vec::with_capacity(last as usize + 2);
    let mut prev = -1i64;
    for k in 0..=last {
        let raw = if k == 0 {
            0
        } else if k == last {
            top
        } else {
            let x = (k - r) as f64 - 0.5 - mean;
            libm::round(cdf_max as f64 * phi(x / sigma)) as i64
        };
        // Leave room for one count per remaining symbol on both sides, then
        // force strict growth.
        let v = raw.clamp(k, top - (last - k)).max(prev + 1);
        out.push(v as u16);
        prev = v;
    }
    out.push((top + 1) as u16);
    out
}

/// Build the table for one `(sigma level, mean fraction)` pair.
pub fn build_gaussian_cdf(sigma_idx: u8, mu_idx: u8, config: &LutConfig) -> Result<CdfLut> {
    config.validate()?;
    if mu_idx as usize >= MU_LEVELS {
        return Err(Error::Range(format!("mean index {mu_idx} >= {MU_LEVELS}")));
    }
    let sigma = sigma_level(sigma_idx)?;
    let mean = mu_idx as f64 / MU_LEVELS as f64;
    Ok(CdfLut {
        entries: gaussian_cdf_entries(mean, sigma, config.range, config.cdf_max),
    })
}

/// Outer table index `mu_fraction * 65 + sigma_level`.
#[inline]
pub fn outer_index(sigma_idx: u8, mu_idx: u8) -> u16 {
    mu_idx as u16 * SIGMA_LEVELS as u16 + sigma_idx as u16
}

/// All 4160 tables, stored flat in outer-index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LutSet {
    config: LutConfig,
    entries: Vec<u16>,
}

impl LutSet {
    /// Build every table; mean fraction varies slowest.
    pub fn build(config: LutConfig) -> Result<Self> {
        config.validate()?;
        let mut entries = Vec::with_capacity(TABLE_COUNT * config.table_len());
        for mu in 0..MU_LEVELS as u8 {
            for sigma in 0..SIGMA_LEVELS as u8 {
                entries.extend_from_slice(&build_gaussian_cdf(sigma, mu, &config)?.entries);
            }
        }
        Ok(Self { config, entries })
    }

    /// Wrap pre-built entries, checking every table invariant.
    pub fn from_entries(config: LutConfig, entries: Vec<u16>) -> Result<Self> {
        config.validate()?;
        let len = config.table_len();
        if entries.len() != TABLE_COUNT * len {
            return Err(Error::Shape(format!(
                "expected {} LUT entries, got {}",
                TABLE_COUNT * len,
                entries.len()
            )));
        }
        let last = 2 * config.range as usize;
        for (t, table) in entries.chunks_exact(len).enumerate() {
            let ok = table[0] == 0
                && table[last] as u32 == config.cdf_max
                && table[..=last].windows(2).all(|w| w[1] > w[0]);
            if !ok {
                return Err(Error::Corrupt(format!("LUT table {t} is not a valid CDF")));
            }
        }
        Ok(Self { config, entries })
    }

    pub fn config(&self) -> &LutConfig {
        &self.config
    }

    pub fn entries(&self) -> &[u16] {
        &self.entries
    }

    pub fn table(&self, outer: u16) -> &[u16] {
        let len = self.config.table_len();
        let start = outer as usize * len;
        &self.entries[start..start + len]
    }

    #[inline]
    fn entry(&self, outer: u16, k: usize) -> u32 {
        self.entries[outer as usize * self.config.table_len() + k] as u32
    }
}

/// Raw 16-bit network outputs for one mixture component, on the `2^-6` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RawComponent {
    pub weight: i16,
    pub mean: i16,
    pub scale: i16,
}

/// One mixture component as seen by the coder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GmmComponent {
    pub outer: u16,
    pub floor_mu: i32,
    pub weight: u32,
}

/// Discretized mixture for one symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GmmQuery {
    components: [GmmComponent; MAX_MIXTURES],
    len: usize,
}

impl GmmQuery {
    pub fn new(components: &[GmmComponent]) -> Result<Self> {
        if components.is_empty() || components.len() > MAX_MIXTURES {
            return Err(Error::InvalidArgument(format!(
                "{} mixture components, expected 1..={MAX_MIXTURES}",
                components.len()
            )));
        }
        if components.iter().any(|c| c.weight > MAX_WEIGHT) {
            return Err(Error::InvalidArgument("mixture weight above 2^12".into()));
        }
        if components.iter().all(|c| c.weight == 0) {
            return Err(Error::InvalidArgument("all mixture weights are zero".into()));
        }
        if components.iter().any(|c| c.outer as usize >= TABLE_COUNT) {
            return Err(Error::Range("outer LUT index out of range".into()));
        }
        let mut all = [GmmComponent::default(); MAX_MIXTURES];
        all[..components.len()].copy_from_slice(components);
        Ok(Self {
            components: all,
            len: components.len(),
        })
    }

    /// Discretize raw 16-bit `(weight, mean, scale)` network outputs.
    ///
    /// Weights are clipped to `[0, 2^12]`; an all-zero weight vector becomes
    /// uniform.
    pub fn from_params(params: &[RawComponent]) -> Result<Self> {
        if params.is_empty() || params.len() > MAX_MIXTURES {
            return Err(Error::InvalidArgument(format!(
                "{} mixture components, expected 1..={MAX_MIXTURES}",
                params.len()
            )));
        }
        let mut all = [GmmComponent::default(); MAX_MIXTURES];
        for (c, p) in all.iter_mut().zip(params) {
            let mu = mu_index(p.mean);
            *c = GmmComponent {
                outer: outer_index(sigma_index(p.scale).combined(), mu.fraction),
                floor_mu: mu.floor_mu,
                weight: (p.weight as i32).clamp(0, MAX_WEIGHT as i32) as u32,
            };
        }
        let comps = &mut all[..params.len()];
        if comps.iter().all(|c| c.weight == 0) {
            comps.iter_mut().for_each(|c| c.weight = 1);
        }
        Ok(Self {
            components: all,
            len: params.len(),
        })
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components[..self.len]
    }

    /// Coder total `sum(weight) * CDF_max`.
    pub fn total(&self, cdf_max: u32) -> u32 {
        self.components().iter().map(|c| c.weight).sum::<u32>() * cdf_max
    }

    /// Lowest symbol the tables give zero cumulative mass to, over weighted
    /// components. It serves as the escape placeholder.
    pub fn escape_symbol(&self, range: u32) -> i32 {
        self.weighted().map(|c| c.floor_mu).min().unwrap_or(0) - range as i32
    }

    /// Highest symbol coded without escape.
    pub fn max_symbol(&self, range: u32) -> i32 {
        self.weighted().map(|c| c.floor_mu).max().unwrap_or(0) + range as i32 - 1
    }

    fn weighted(&self) -> impl Iterator<Item = &GmmComponent> {
        self.components().iter().filter(|c| c.weight > 0)
    }
}

/// Aggregate cumulative frequency below `y` under the mixture.
#[inline]
pub fn gmm_cdf_index(y: i32, query: &GmmQuery, luts: &LutSet) -> u32 {
    let r = luts.config.range as i32;
    let top = luts.config.cdf_max;
    let mut c = 0u32;
    for comp in query.components() {
        let p = y.saturating_sub(comp.floor_mu);
        let ck = if p >= r {
            top
        } else if p <= -r {
            0
        } else {
            luts.entry(comp.outer, (p + r) as usize)
        };
        c += comp.weight * ck;
    }
    c
}

/// Per-channel zero-mean Gaussian tables for the hyper latent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorizedPrior {
    range: u32,
    cdf_max: u32,
    tables: Vec<Vec<u16>>,
}

impl FactorizedPrior {
    pub fn from_scales(scales: &[f32], range: u32) -> Result<Self> {
        let config = LutConfig {
            range,
            cdf_max: DEFAULT_CDF_MAX,
        };
        config.validate()?;
        let tables = scales
            .iter()
            .map(|&s| {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::InvalidScale(s));
                }
                Ok(gaussian_cdf_entries(0.0, s as f64, range, DEFAULT_CDF_MAX))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            range,
            cdf_max: DEFAULT_CDF_MAX,
            tables,
        })
    }

    pub fn from_tables(range: u32, cdf_max: u32, tables: Vec<Vec<u16>>) -> Result<Self> {
        let config = LutConfig { range, cdf_max };
        config.validate()?;
        let last = 2 * range as usize;
        for (i, t) in tables.iter().enumerate() {
            let ok = t.len() == config.table_len()
                && t[0] == 0
                && t[last] as u32 == cdf_max
                && t[..=last].windows(2).all(|w| w[1] > w[0]);
            if !ok {
                return Err(Error::Corrupt(format!("factorized table {i} is not a valid CDF")));
            }
        }
        Ok(Self {
            range,
            cdf_max,
            tables,
        })
    }

    pub fn range(&self) -> u32 {
        self.range
    }

    pub fn cdf_max(&self) -> u32 {
        self.cdf_max
    }

    pub fn channels(&self) -> usize {
        self.tables.len()
    }

    pub fn tables(&self) -> &[Vec<u16>] {
        &self.tables
    }

    /// Cumulative frequency below `y` for `channel`.
    #[inline]
    pub fn cdf(&self, channel: usize, y: i32) -> u32 {
        let r = self.range as i32;
        if y >= r {
            self.cdf_max
        } else if y <= -r {
            0
        } else {
            self.tables[channel][(y + r) as usize] as u32
        }
    }
}
