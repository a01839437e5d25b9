//! Cross-configuration determinism check over a seeded corpus.
//!
//! Every corpus item is sampled from the model, encoded, decoded and
//! compared; the container's SHA-256 is recorded. Runs under different
//! thread counts must produce identical digests, and a golden digest file
//! written by another build (for example a release build) can be checked.

use dlic_core::cdf::LutSet;
use dlic_core::codec::{decode_tensor, encode_tensor};
use dlic_core::engine::EntropyModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::container::Container;
use crate::error::{DlicError, Result};
use crate::lut_file::luts_to_bytes;
use crate::model_file::model_to_bytes;
use crate::toy::sample_symbols;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub corpus_size: usize,
    pub height: usize,
    pub width: usize,
    pub threads: Vec<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            corpus_size: 100,
            height: 8,
            width: 8,
            threads: vec![1, 4],
        }
    }
}

/// Digests a build produced; committed as golden vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenDigests {
    pub build: String,
    pub seed: u64,
    pub corpus_size: usize,
    pub height: usize,
    pub width: usize,
    pub model_sha256: String,
    pub lut_sha256: String,
    pub digests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: String,
    pub items: usize,
    pub failures: usize,
    /// Items whose container differs from the reference run.
    pub mismatches: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub golden: GoldenDigests,
    pub runs: Vec<RunSummary>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.runs.iter().all(|r| r.failures == 0 && r.mismatches == 0)
    }

    /// One row per configuration: failures, error rate, digest mismatches.
    pub fn table(&self) -> String {
        let mut s = format!("{:<28} {:>8} {:>12} {:>10}\n", "configuration", "items", "errors", "mismatch");
        for r in &self.runs {
            let rate = 100.0 * r.failures as f64 / r.items.max(1) as f64;
            s.push_str(&format!(
                "{:<28} {:>8} {:>5}/{} ({:.1}%) {:>6}\n",
                r.config, r.items, r.failures, r.items, rate, r.mismatches
            ));
        }
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn build_name() -> &'static str {
    if cfg!(debug_assertions) {
        "debug"
    } else {
        "release"
    }
}

/// Encode and decode one corpus item; `None` on any failure.
fn process(model: &EntropyModel, luts: &LutSet, opts: &VerifyOptions, index: usize) -> Option<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(index as u64);
    let (z, y) = sample_symbols(model, luts, opts.height, opts.width, &mut rng).ok()?;
    let (streams, _) = encode_tensor(model, luts, &z, &y).ok()?;
    let container = Container {
        shape: [y.channels() as u32, opts.height as u32, opts.width as u32],
        streams,
    };
    let bytes = container.to_bytes().ok()?;
    let parsed = Container::from_bytes(&bytes).ok()?;
    let (z2, y2) = decode_tensor(model, luts, opts.height, opts.width, &parsed.streams).ok()?;
    (z2 == z && y2 == y).then(|| sha256_hex(&bytes))
}

fn run_with_threads(
    model: &EntropyModel,
    luts: &LutSet,
    opts: &VerifyOptions,
    threads: usize,
) -> Result<Vec<Option<String>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| DlicError::Usage(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        (0..opts.corpus_size)
            .into_par_iter()
            .map(|i| process(model, luts, opts, i))
            .collect()
    }))
}

fn compare(config: String, got: &[Option<String>], reference: &[String]) -> RunSummary {
    RunSummary {
        config,
        items: got.len(),
        failures: got.iter().filter(|d| d.is_none()).count(),
        mismatches: got
            .iter()
            .zip(reference)
            .filter(|(g, r)| g.as_deref() != Some(r.as_str()))
            .count()
            + reference.len().abs_diff(got.len()),
    }
}

/// Run every thread configuration, and the golden digests when given.
pub fn verify(
    model: &EntropyModel,
    luts: &LutSet,
    opts: &VerifyOptions,
    golden: Option<&GoldenDigests>,
) -> Result<VerifyReport> {
    if opts.threads.is_empty() || opts.threads.contains(&0) {
        return Err(DlicError::Usage("thread counts must be positive".into()));
    }
    if opts.corpus_size == 0 || opts.height == 0 || opts.width == 0 {
        return Err(DlicError::Usage("corpus and tensor sizes must be positive".into()));
    }
    let runs = opts
        .threads
        .iter()
        .map(|&t| run_with_threads(model, luts, opts, t).map(|d| (t, d)))
        .collect::<Result<Vec<_>>>()?;
    let reference: Vec<String> = runs[0].1.iter().map(|d| d.clone().unwrap_or_default()).collect();
    let build = build_name();
    let mut summaries: Vec<RunSummary> = runs
        .iter()
        .map(|(t, d)| compare(format!("{build}, {t} thread(s)"), d, &reference))
        .collect();
    let this = GoldenDigests {
        build: build.to_string(),
        seed: opts.seed,
        corpus_size: opts.corpus_size,
        height: opts.height,
        width: opts.width,
        model_sha256: sha256_hex(&model_to_bytes(model)?),
        lut_sha256: sha256_hex(&luts_to_bytes(luts)),
        digests: reference,
    };
    if let Some(g) = golden {
        let same_setup = g.seed == this.seed
            && g.corpus_size == this.corpus_size
            && g.height == this.height
            && g.width == this.width;
        if !same_setup {
            return Err(DlicError::Usage(
                "golden digests were produced with different corpus options".into(),
            ));
        }
        let mut s = compare(format!("{build} vs {} golden", g.build), &runs[0].1, &g.digests);
        if g.model_sha256 != this.model_sha256 || g.lut_sha256 != this.lut_sha256 {
            s.mismatches = s.items;
        }
        summaries.push(s);
    }
    Ok(VerifyReport {
        golden: this,
        runs: summaries,
    })
}
