//! Sigma discretization latency: calculation-based versus the two
//! comparison-based variants on identical inputs.

use std::hint::black_box;
use std::time::{Duration, Instant};

use dlic_core::discretize::{
    comparison_table, sigma_index_batch, sigma_index_compare_batch, sigma_index_compare_loop,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    /// Best-of-repetitions wall time for the whole batch.
    pub best_ns: u128,
    pub ns_per_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub inputs: usize,
    pub repetitions: usize,
    pub rows: Vec<BenchRow>,
    /// Whether every variant produced identical indices.
    pub agree: bool,
}

impl BenchReport {
    pub fn row(&self, method: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<28} {:>14} {:>12}\n", "method", "best (us)", "ns/value");
        for r in &self.rows {
            s.push_str(&format!(
                "{:<28} {:>14.1} {:>12.3}\n",
                r.method,
                r.best_ns as f64 / 1e3,
                r.ns_per_value
            ));
        }
        s
    }
}

pub const CALCULATION: &str = "calculation";
pub const COMPARE_VECTORIZED: &str = "comparison (vectorized)";
pub const COMPARE_LOOP: &str = "comparison (loop)";

fn best_of(reps: usize, mut f: impl FnMut()) -> Duration {
    (0..reps.max(1))
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .min()
        .unwrap()
}

/// Time the three variants on `n` random scales drawn over the clipped
/// range (plus a margin on both sides).
pub fn bench_discretize(n: usize, reps: usize, seed: u64) -> BenchReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input: Vec<i16> = (0..n).map(|_| rng.random_range(0..2200)).collect();
    let table = comparison_table();
    let mut calc = vec![0u8; n];
    let mut vec_cmp = vec![0u8; n];
    let mut loop_cmp = vec![0u8; n];
    let times = [
        (CALCULATION, best_of(reps, || sigma_index_batch(black_box(&input), black_box(&mut calc)))),
        (
            COMPARE_VECTORIZED,
            best_of(reps, || sigma_index_compare_batch(black_box(&input), &table, black_box(&mut vec_cmp))),
        ),
        (
            COMPARE_LOOP,
            best_of(reps, || sigma_index_compare_loop(black_box(&input), &table, black_box(&mut loop_cmp))),
        ),
    ];
    BenchReport {
        inputs: n,
        repetitions: reps,
        rows: times
            .iter()
            .map(|(m, d)| BenchRow {
                method: m.to_string(),
                best_ns: d.as_nanos(),
                ns_per_value: d.as_nanos() as f64 / n.max(1) as f64,
            })
            .collect(),
        agree: calc == vec_cmp && calc == loop_cmp,
    }
}
