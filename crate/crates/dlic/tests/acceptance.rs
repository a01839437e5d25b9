//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use dlic::bench::{bench_discretize, CALCULATION, COMPARE_VECTORIZED};
use dlic::model_file::load_model;
use dlic::toy::sample_symbols;
use dlic::verify::{verify, GoldenDigests, VerifyOptions};
use dlic_core::cdf::{gmm_cdf_index, GmmComponent, GmmQuery, LutSet, MAX_WEIGHT, TABLE_COUNT};
use dlic_core::codec::{
    decode_symbol, decode_tensor, encode_symbol, encode_tensor, BitReader, BitWriter, GmmModel,
    RangeDecoder, RangeEncoder, SymbolCoding,
};
use dlic_core::discretize::{
    comparison_table, sigma_index, sigma_index_oracle, sigma_level, sigma_reconstruct, SigmaIndex,
    SIGMA_LEVELS, SIGMA_Q_MAX, SIGMA_Q_MIN,
};
use dlic_core::engine::{EntropyModel, SymbolTensor};
use dlic_core::requant::derive_requant_from_m;
use dlic_core::round::round_f64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

struct Fixture {
    model: EntropyModel,
    luts: LutSet,
}

fn fixture() -> Fixture {
    let model = load_model(&golden_dir().join("model.dlm")).expect("golden model");
    let luts = LutSet::build(model.config().lut).expect("LUT build");
    Fixture { model, luts }
}

fn determinism(fx: &Fixture) -> Outcome {
    let start = Instant::now();
    let golden: GoldenDigests = serde_json::from_slice(
        &std::fs::read(golden_dir().join("verify-release.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let opts = VerifyOptions {
        seed: golden.seed,
        corpus_size: golden.corpus_size,
        height: golden.height,
        width: golden.width,
        threads: vec![1, 4],
    };
    let report = verify(&fx.model, &fx.luts, &opts, Some(&golden)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let failures: usize = report.runs.iter().map(|r| r.failures).sum();
    let mismatches: usize = report.runs.iter().map(|r| r.mismatches).sum();
    let summary = format!(
        "{} configurations ({}), {failures} decode errors over {} items, {mismatches} digest mismatches, {:.1}s",
        report.runs.len(),
        report.runs.iter().map(|r| r.config.as_str()).collect::<Vec<_>>().join("; "),
        opts.corpus_size,
        elapsed.as_secs_f64()
    );
    if report.runs.len() >= 3 && report.is_clean() && elapsed < Duration::from_secs(60) {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn roundtrip(fx: &Fixture) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = fx.model.config();
    let (mut positions, mut forced, mut escaped) = (0u64, 0u64, 0u64);
    // Whole tensors sampled from the model with forced out-of-window values.
    for _ in 0..12 {
        let (z, y) = sample_symbols(&fx.model, &fx.luts, 8, 8, &mut rng).map_err(|e| e.to_string())?;
        let mut data = y.data().to_vec();
        for v in data.iter_mut() {
            match rng.random_range(0..40) {
                0 => *v = rng.random_range(200..100_000),
                1 => *v = -rng.random_range(200..100_000),
                2 => *v = if rng.random() { i32::MAX } else { i32::MIN },
                _ => continue,
            }
            forced += 1;
        }
        let y = SymbolTensor::new(cfg.latent_channels, 8, 8, data).map_err(|e| e.to_string())?;
        let (streams, stats) = encode_tensor(&fx.model, &fx.luts, &z, &y).map_err(|e| e.to_string())?;
        let (z2, y2) = decode_tensor(&fx.model, &fx.luts, 8, 8, &streams).map_err(|e| e.to_string())?;
        if z2 != z || y2 != y {
            return Err("tensor round trip differs".into());
        }
        positions += stats.main_symbols;
        escaped += stats.main_escapes;
    }
    // Single positions under random mixtures, including the zero-width gap
    // between far-apart components.
    let r = fx.luts.config().range as i32;
    let mut enc = RangeEncoder::new();
    let mut esc = BitWriter::new();
    let mut cases = Vec::new();
    let mut gap = 0u64;
    for _ in 0..10_000 {
        let spread = if rng.random_range(0..4) == 0 { 400 } else { 20 };
        let k = rng.random_range(1..=4);
        let comps: Vec<GmmComponent> = (0..k)
            .map(|i| GmmComponent {
                outer: rng.random_range(0..TABLE_COUNT as u16),
                floor_mu: rng.random_range(-spread..=spread),
                weight: if i == 0 { rng.random_range(1..=MAX_WEIGHT) } else { rng.random_range(0..=MAX_WEIGHT) },
            })
            .collect();
        let q = GmmQuery::new(&comps).map_err(|e| e.to_string())?;
        let (lo, hi) = (q.escape_symbol(r as u32), q.max_symbol(r as u32));
        let y = match rng.random_range(0..4) {
            0 => hi + rng.random_range(1..1000),
            1 => lo - rng.random_range(0..1000),
            2 => rng.random_range(lo..=hi),
            _ => {
                let c = comps[rng.random_range(0..comps.len())].floor_mu;
                c + rng.random_range(-3..=3)
            }
        };
        let m = GmmModel { query: &q, luts: &fx.luts };
        let kind = encode_symbol(&mut enc, &mut esc, &m, y).map_err(|e| e.to_string())?;
        if kind == SymbolCoding::Escaped {
            escaped += 1;
            if y > lo && y <= hi {
                gap += 1;
            }
        }
        forced += (y <= lo || y > hi) as u64;
        cases.push((q, y));
    }
    let bytes = enc.finish();
    let (eb, bits) = esc.finish();
    let mut dec = RangeDecoder::new(&bytes).map_err(|e| e.to_string())?;
    let mut er = BitReader::new(&eb, bits).map_err(|e| e.to_string())?;
    for (q, y) in &cases {
        let got = decode_symbol(&mut dec, &mut er, &GmmModel { query: q, luts: &fx.luts })
            .map_err(|e| e.to_string())?;
        if got != *y {
            return Err(format!("decoded {got}, expected {y}"));
        }
    }
    dec.finish().map_err(|e| e.to_string())?;
    er.finish().map_err(|e| e.to_string())?;
    positions += cases.len() as u64;
    let msg = format!(
        "{positions} positions exact, {forced} forced out of window, {escaped} escapes ({gap} in zero-width gaps), {:.1}s",
        start.elapsed().as_secs_f64()
    );
    if gap > 0 && forced > 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let table = comparison_table();
    let mut checked = 0;
    for q in SIGMA_Q_MIN..=SIGMA_Q_MAX {
        let a = sigma_index(q as i16).combined();
        let b = sigma_index_oracle(q as i16, &table);
        if a != b {
            return Err(format!("q={q}: calculated {a}, oracle {b}"));
        }
        checked += 1;
    }
    let t = start.elapsed();
    let msg = format!("{checked} values identical, {:.3}s", t.as_secs_f64());
    if checked == 2041 && t < Duration::from_secs(1) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rid64(x: i64, n: u32) -> i64 {
    let d = 1i64 << n;
    let q = x.div_euclid(d);
    let r = x.rem_euclid(d);
    let half = d / 2;
    if r > half || (r == half && x >= 0) {
        q + 1
    } else {
        q
    }
}

fn overflow_freedom() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut products = 0u64;
    for _ in 0..100_000 {
        let bits = if rng.random() { 8 } else { 16 };
        let half = 1i64 << (bits - 1);
        let m = (2f64.powf(rng.random_range(-24.0..(bits - 1) as f64))).min(half as f64 * 0.999) as f32;
        let z = rng.random_range(-half..half) as i32;
        let leaky = rng.random::<bool>().then(|| rng.random_range(0.01f32..=1.0));
        let Ok(p) = derive_requant_from_m(m, z, bits, leaky) else {
            continue;
        };
        let (lo, hi) = (-half, half - 1);
        let branches = std::iter::once(&p.positive).chain(p.negative.as_ref().map(|n| &n.branch));
        for b in branches {
            for q in [b.q_min, b.q_max, 0, 1, -1] {
                if q < b.q_min || q > b.q_max {
                    continue;
                }
                let wide = b.m0 as i64 * q as i64;
                let narrow = b.m0.checked_mul(q).ok_or(format!("m0={} q={q} overflows", b.m0))?;
                if narrow as i64 != wide {
                    return Err(format!("m0={} q={q}: {narrow} vs {wide}", b.m0));
                }
                products += 1;
            }
        }
        // Accumulations that land on the clip bounds after the zero point.
        for acc in [i32::MIN, i32::MAX, 0, 1, -1, p.q_max().saturating_sub(p.p_u()), p.q_min().saturating_sub(p.p_u())] {
            let q = (acc as i64 + p.p_u() as i64).clamp(p.q_min() as i64, p.q_max() as i64);
            let want = rid64(p.m0() as i64 * q, p.shift).clamp(lo, hi);
            if p.requantize_one(acc) as i64 != want {
                return Err(format!("acc={acc}: requant differs from 64-bit oracle"));
            }
            products += 1;
        }
    }
    let t = start.elapsed();
    let msg = format!("{products} boundary products match 64-bit arithmetic, {:.2}s", t.as_secs_f64());
    if t < Duration::from_secs(10) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn requant_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let (mut exact, mut worst) = (0u64, 0i64);
    for _ in 0..n {
        let m: f32 = rng.random_range(f32::MIN_POSITIVE..1.0);
        let p = derive_requant_from_m(m, 0, 8, None).map_err(|e| e.to_string())?;
        if p.shift != 24 {
            return Err(format!("shift {} for 8-bit output", p.shift));
        }
        let q = rng.random_range(p.q_min()..=p.q_max());
        let got = dlic_core::round::rid(p.m0() * q, p.shift) as i64;
        let want = round_f64(m as f64 * q as f64) as i64;
        let err = (got - want).abs();
        worst = worst.max(err);
        exact += (err == 0) as u64;
    }
    let rate = exact as f64 / n as f64;
    let msg = format!("max error {worst}, exact on {:.3}% of {n} pairs", 100.0 * rate);
    if worst <= 1 && rate >= 0.99 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn coder_efficiency(fx: &Fixture) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut bytes, mut ideal, mut symbols, mut escapes) = (0u64, 0f64, 0u64, 0u64);
    while symbols < 20_000 {
        let (z, y) = sample_symbols(&fx.model, &fx.luts, 16, 16, &mut rng).map_err(|e| e.to_string())?;
        let (streams, stats) = encode_tensor(&fx.model, &fx.luts, &z, &y).map_err(|e| e.to_string())?;
        bytes += streams.main.len() as u64;
        ideal += stats.main_ideal_bits;
        symbols += stats.main_symbols;
        escapes += stats.main_escapes;
    }
    let actual = bytes as f64 * 8.0;
    let ratio = actual / ideal;
    let escape_rate = escapes as f64 / symbols as f64;
    let msg = format!(
        "{symbols} symbols: {actual:.0} coded bits vs {ideal:.0} ideal ({:+.2}%), escapes {:.3}%",
        100.0 * (ratio - 1.0),
        100.0 * escape_rate
    );
    if (ratio - 1.0).abs() <= 0.05 && escape_rate <= 0.001 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn gmm_monotonicity(fx: &Fixture) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let r = fx.luts.config().range as i32;
    let mut evaluated = 0u64;
    for i in 0..1000 {
        let k = rng.random_range(1..=4);
        let comps: Vec<GmmComponent> = (0..k)
            .map(|j| GmmComponent {
                outer: rng.random_range(0..TABLE_COUNT as u16),
                floor_mu: rng.random_range(-300..=300),
                weight: if j == 0 { rng.random_range(1..=MAX_WEIGHT) } else { rng.random_range(0..=MAX_WEIGHT) },
            })
            .collect();
        let q = GmmQuery::new(&comps).map_err(|e| e.to_string())?;
        let lo = comps.iter().map(|c| c.floor_mu).min().unwrap() - r - 2;
        let hi = comps.iter().map(|c| c.floor_mu).max().unwrap() + r + 2;
        let mut prev = gmm_cdf_index(lo, &q, &fx.luts);
        for y in lo + 1..=hi {
            let v = gmm_cdf_index(y, &q, &fx.luts);
            if v < prev {
                return Err(format!("query {i}: cdf({y}) = {v} < {prev}"));
            }
            prev = v;
            evaluated += 1;
        }
        if prev != q.total(fx.luts.config().cdf_max) {
            return Err(format!("query {i}: cdf does not reach the total"));
        }
    }
    Ok(format!("1000 queries, {evaluated} steps non-decreasing"))
}

fn latency_direction() -> Outcome {
    let report = bench_discretize(1_000_000, 9, 8);
    let calc = report.row(CALCULATION).unwrap().best_ns;
    let cmp = report.row(COMPARE_VECTORIZED).unwrap().best_ns;
    let msg = format!(
        "{} inputs, best of {}: calculation {:.2} ms, vectorized comparison {:.2} ms, outputs agree: {}",
        report.inputs,
        report.repetitions,
        calc as f64 / 1e6,
        cmp as f64 / 1e6,
        report.agree
    );
    if report.agree && calc < cmp {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn sigma_levels() -> Outcome {
    let lo = sigma_reconstruct(SigmaIndex { major: 0, minor: 0 });
    let hi = sigma_reconstruct(SigmaIndex { major: 8, minor: 0 });
    if lo != 0.125 || hi != 32.0 {
        return Err(format!("endpoints {lo} and {hi}"));
    }
    for i in 0..SIGMA_LEVELS as u8 {
        let level = sigma_level(i).map_err(|e| e.to_string())?;
        // idempotence: a reconstructed level maps back to itself
        let q = (level * 64.0) as i16;
        if sigma_index(q).combined() != i {
            return Err(format!("level {i} ({level}) re-indexes to {}", sigma_index(q).combined()));
        }
    }
    for q in SIGMA_Q_MIN..=SIGMA_Q_MAX {
        let idx = sigma_index(q as i16).combined();
        let sigma = q as f64 / 64.0;
        let upper = sigma_level(idx).map_err(|e| e.to_string())?;
        let above = idx == 0 || sigma_level(idx - 1).map_err(|e| e.to_string())? < sigma;
        if !(sigma <= upper && above) {
            return Err(format!("q={q} not bracketed by level {idx}"));
        }
    }
    Ok("levels 0 and 64 are 0.125 and 32.0; 65 levels idempotent; 2041 values bracketed".into())
}

fn main() {
    let fx = fixture();
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        ("determinism across builds and thread counts", Box::new(|| determinism(&fx))),
        ("lossless round trip with forced escapes", Box::new(|| roundtrip(&fx))),
        ("discretization matches comparison oracle", Box::new(oracle_equivalence)),
        ("requantization products stay in 32 bits", Box::new(overflow_freedom)),
        ("requantization fidelity at n = 24", Box::new(requant_fidelity)),
        ("coded size tracks model cross-entropy", Box::new(|| coder_efficiency(&fx))),
        ("mixture CDF is monotone", Box::new(|| gmm_monotonicity(&fx))),
        ("calculation-based discretization is faster", Box::new(latency_direction)),
        ("65 sigma levels reconstruct exactly", Box::new(sigma_levels)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("[{}] PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[{}] FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
