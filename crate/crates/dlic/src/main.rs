use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dlic::container::Container;
use dlic::error::{read_file, DlicError, Result};
use dlic::ingest::{ingest_calibration, write_calibration};
use dlic::lut_file::{load_luts, save_luts};
use dlic::model_file::{load_model, save_model};
use dlic::pipeline::calibrate_samples;
use dlic::symbols::SymbolFile;
use dlic::toy::{sample_symbols, toy_calibration, toy_float_model, ToyConfig};
use dlic::verify::{verify, GoldenDigests, VerifyOptions};
use dlic_core::cdf::{LutConfig, LutSet, DEFAULT_CDF_MAX, DEFAULT_RANGE};
use dlic_core::codec::{decode_tensor, encode_tensor};
use dlic_core::engine::{quantize_model, CalibrationReport, EntropyModel, FloatModel, PtqOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "dlic", version, about = "Deterministic integer entropy coding for learned image compression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded random float model (JSON).
    ToyModel {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a seeded calibration directory for a float model.
    ToyData {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long, default_value_t = 8)]
        height: usize,
        #[arg(long, default_value_t = 8)]
        width: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gather per-layer activation ranges (JSON report).
    Calibrate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Quantize a float model with a calibration report.
    Quantize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long = "R", default_value_t = DEFAULT_RANGE)]
        range: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the CDF table file.
    BuildLuts {
        #[arg(long = "R", default_value_t = DEFAULT_RANGE)]
        range: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a symbol file from a model's own distributions.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        luts: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        height: usize,
        #[arg(long, default_value_t = 8)]
        width: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a symbol file into a container.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        luts: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a container into a symbol file.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        luts: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode/decode a seeded corpus under several thread counts.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        luts: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        corpus_size: usize,
        #[arg(long, default_value_t = 8)]
        height: usize,
        #[arg(long, default_value_t = 8)]
        width: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,4")]
        threads: Vec<usize>,
        /// Compare against digests written by another build.
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Write this build's digests.
        #[arg(long)]
        write_golden: Option<PathBuf>,
        /// Print the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Time sigma discretization variants.
    BenchDiscretize {
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
}

fn write_json<T: serde::Serialize>(path: &std::path::Path, v: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(v)?).map_err(|e| DlicError::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    Ok(serde_json::from_slice(&read_file(path)?)?)
}

fn lut_config(range: u32) -> LutConfig {
    LutConfig {
        range,
        cdf_max: DEFAULT_CDF_MAX,
    }
}

fn load_pair(model: &std::path::Path, luts: &std::path::Path) -> Result<(EntropyModel, LutSet)> {
    let m = load_model(model)?;
    let l = load_luts(luts)?;
    if l.config() != &m.config().lut {
        return Err(DlicError::Format("LUT file does not match the model's LUT configuration".into()));
    }
    Ok((m, l))
}

fn usize_shape(s: [u32; 3]) -> Result<[usize; 3]> {
    let c = |v: u32| usize::try_from(v).map_err(|_| DlicError::Format("dimension overflow".into()));
    Ok([c(s[0])?, c(s[1])?, c(s[2])?])
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::ToyModel { seed, out } => write_json(&out, &toy_float_model(&ToyConfig::default(), seed)),
        Command::ToyData { model, seed, count, height, width, out } => {
            let m: FloatModel = read_json(&model)?;
            write_calibration(&out, &toy_calibration(&m, count, height, width, seed)?)
        }
        Command::Calibrate { model, data, out } => {
            let m: FloatModel = read_json(&model)?;
            let report = calibrate_samples(&m, &ingest_calibration(&data)?)?;
            write_json(&out, &report)
        }
        Command::Quantize { model, report, range, out } => {
            let m: FloatModel = read_json(&model)?;
            let r: CalibrationReport = read_json(&report)?;
            let q = quantize_model(&m, &r, &PtqOptions { lut: lut_config(range) })?;
            save_model(&out, &q)
        }
        Command::BuildLuts { range, out } => save_luts(&out, &LutSet::build(lut_config(range))?),
        Command::Sample { model, luts, seed, height, width, out } => {
            let (m, l) = load_pair(&model, &luts)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (hyper, latent) = sample_symbols(&m, &l, height, width, &mut rng)?;
            SymbolFile { hyper, latent }.save(&out)
        }
        Command::Encode { model, luts, input, out } => {
            let (m, l) = load_pair(&model, &luts)?;
            let s = SymbolFile::load(&input)?;
            let (streams, stats) = encode_tensor(&m, &l, &s.hyper, &s.latent)?;
            let c = Container {
                shape: s.latent.shape().map(|d| d as u32),
                streams,
            };
            let bytes = c.to_bytes()?;
            std::fs::write(&out, &bytes).map_err(|e| DlicError::io(&out, e))?;
            eprintln!(
                "{} bytes, {} symbols, {} escapes",
                bytes.len(),
                stats.hyper_symbols + stats.main_symbols,
                stats.hyper_escapes + stats.main_escapes
            );
            Ok(())
        }
        Command::Decode { model, luts, input, out } => {
            let (m, l) = load_pair(&model, &luts)?;
            let c = Container::from_bytes(&read_file(&input)?)?;
            let [ch, h, w] = usize_shape(c.shape)?;
            if ch != m.config().latent_channels {
                return Err(DlicError::Format("container channel count does not match the model".into()));
            }
            let (hyper, latent) = decode_tensor(&m, &l, h, w, &c.streams)?;
            SymbolFile { hyper, latent }.save(&out)
        }
        Command::Verify { model, luts, seed, corpus_size, height, width, threads, golden, write_golden, json } => {
            let (m, l) = load_pair(&model, &luts)?;
            let golden: Option<GoldenDigests> = golden.map(|p| read_json(&p)).transpose()?;
            let opts = VerifyOptions { seed, corpus_size, height, width, threads };
            let report = verify(&m, &l, &opts, golden.as_ref())?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.table());
            }
            if let Some(p) = write_golden {
                write_json(&p, &report.golden)?;
            }
            if !report.is_clean() {
                return Err(DlicError::Determinism("decoding failures or digest mismatches".into()));
            }
            Ok(())
        }
        Command::BenchDiscretize { n, reps, seed, json } => {
            let report = dlic::bench::bench_discretize(n, reps, seed);
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.table());
            }
            if !report.agree {
                return Err(DlicError::Determinism("discretization variants disagree".into()));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
