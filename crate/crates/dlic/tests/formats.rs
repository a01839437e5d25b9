use std::sync::LazyLock;

use dlic::container::Container;
use dlic::error::DlicError;
use dlic::ingest::{ingest_calibration, split_sample, write_calibration, SHAPES_FILE};
use dlic::lut_file::{luts_from_bytes, luts_to_bytes};
use dlic::model_file::{model_from_bytes, model_to_bytes};
use dlic::pipeline::build_toy_model;
use dlic::symbols::SymbolFile;
use dlic::toy::{sample_symbols, ToyConfig};
use dlic_core::cdf::{LutConfig, LutSet};
use dlic_core::codec::{decode_tensor, encode_tensor};
use dlic_core::engine::{EntropyModel, SymbolTensor};
use dlic_core::quant::FloatTensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SMALL: LutConfig = LutConfig { range: 16, cdf_max: 4096 };

static FIXTURE: LazyLock<(EntropyModel, LutSet)> = LazyLock::new(|| {
    let cfg = ToyConfig {
        latent_channels: 4,
        hyper_channels: 2,
        mixtures: 2,
        hidden: 8,
        context_kernel: 3,
        hyper_range: 16,
    };
    let (_, m) = build_toy_model(&cfg, SMALL, 11).unwrap();
    (m, LutSet::build(SMALL).unwrap())
});

fn sample(seed: u64) -> (SymbolTensor, SymbolTensor) {
    let (m, l) = &*FIXTURE;
    sample_symbols(m, l, 4, 5, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn flip(bytes: &[u8], at: usize) -> Vec<u8> {
    let mut b = bytes.to_vec();
    b[at] ^= 0x40;
    b
}

#[test]
fn model_file_roundtrip_and_corruption() {
    let (m, _) = &*FIXTURE;
    let bytes = model_to_bytes(m).unwrap();
    let loaded = model_from_bytes(&bytes).unwrap();
    assert_eq!(&loaded, m);
    assert_eq!(model_to_bytes(&loaded).unwrap(), bytes);

    assert!(matches!(model_from_bytes(&flip(&bytes, bytes.len() / 2)), Err(DlicError::Checksum(_) | DlicError::Format(_))));
    assert!(matches!(model_from_bytes(&flip(&bytes, bytes.len() - 1)), Err(DlicError::Checksum(_))));
    assert!(matches!(model_from_bytes(&bytes[..bytes.len() - 1]), Err(DlicError::Format(_))));
    assert!(matches!(model_from_bytes(&[bytes.as_slice(), &[0]].concat()), Err(DlicError::Format(_))));
    let mut v2 = bytes.clone();
    v2[8] = 2;
    assert!(matches!(model_from_bytes(&v2), Err(DlicError::Version { found: 2, .. })));
    assert!(model_from_bytes(b"nonsense").is_err());
}

#[test]
fn lut_file_roundtrip_and_corruption() {
    let (_, l) = &*FIXTURE;
    let bytes = luts_to_bytes(l);
    assert_eq!(bytes, luts_to_bytes(&LutSet::build(SMALL).unwrap()));
    let loaded = luts_from_bytes(&bytes).unwrap();
    assert_eq!(&loaded, l);
    assert_eq!(luts_to_bytes(&loaded), bytes);
    assert!(matches!(luts_from_bytes(&flip(&bytes, bytes.len() - 3)), Err(DlicError::Checksum(_))));
    assert!(luts_from_bytes(&bytes[..bytes.len() - 2]).is_err());
    let mut v2 = bytes.clone();
    v2[8] = 9;
    assert!(matches!(luts_from_bytes(&v2), Err(DlicError::Version { .. })));
    // erf tag starts after magic and five u32 fields plus its length byte
    assert!(matches!(luts_from_bytes(&flip(&bytes, 29)), Err(DlicError::Format(_))));
}

#[test]
fn container_roundtrip_truncation_and_trailing() {
    let (m, l) = &*FIXTURE;
    let (z, y) = sample(3);
    let (streams, _) = encode_tensor(m, l, &z, &y).unwrap();
    let c = Container { shape: [4, 4, 5], streams };
    let bytes = c.to_bytes().unwrap();
    let parsed = Container::from_bytes(&bytes).unwrap();
    assert_eq!(parsed, c);
    assert_eq!(parsed.to_bytes().unwrap(), bytes);
    let (z2, y2) = decode_tensor(m, l, 4, 5, &parsed.streams).unwrap();
    assert_eq!((z2, y2), (z, y));

    for cut in 0..bytes.len() {
        assert!(Container::from_bytes(&bytes[..cut]).is_err(), "cut {cut}");
    }
    assert!(Container::from_bytes(&[bytes.as_slice(), &[0]].concat()).is_err());
    let mut v = bytes.clone();
    v[4] = 7;
    assert!(matches!(Container::from_bytes(&v), Err(DlicError::Version { found: 7, .. })));
}

#[test]
fn damaged_streams_fail_or_differ() {
    let (m, l) = &*FIXTURE;
    let (z, y) = sample(4);
    let (streams, _) = encode_tensor(m, l, &z, &y).unwrap();
    let mut main = streams.clone();
    main.main.pop();
    assert!(decode_tensor(m, l, 4, 5, &main).is_err());
    let mut extra = streams.clone();
    extra.hyper.push(0);
    assert!(decode_tensor(m, l, 4, 5, &extra).is_err());
}

#[test]
fn symbol_file_roundtrip() {
    let (hyper, latent) = sample(5);
    let f = SymbolFile { hyper, latent };
    let bytes = f.to_bytes();
    assert_eq!(SymbolFile::from_bytes(&bytes).unwrap(), f);
    assert!(SymbolFile::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let mut huge = bytes.clone();
    huge[5..9].copy_from_slice(&u32::MAX.to_le_bytes());
    assert!(SymbolFile::from_bytes(&huge).is_err());
}

#[test]
fn ingest_ordering_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ingest_calibration(dir.path()).is_err());

    let a = FloatTensor::new(vec![6, 2, 2], (0..24).map(|v| v as f32).collect()).unwrap();
    let b = FloatTensor::new(vec![6, 2, 2], vec![-1.5; 24]).unwrap();
    write_calibration(dir.path(), &[a.clone(), b.clone()]).unwrap();
    let got = ingest_calibration(dir.path()).unwrap();
    assert_eq!(got, vec![a.clone(), b]);

    let (z, y) = split_sample(&a, 2, 4).unwrap();
    assert_eq!(z.shape(), [2, 2, 2]);
    assert_eq!(y.get(0, 0, 0), 8);
    assert!(split_sample(&a, 3, 4).is_err());

    std::fs::write(dir.path().join("sample_0001.f32"), [0u8; 12]).unwrap();
    assert!(matches!(ingest_calibration(dir.path()), Err(DlicError::Ingest(_))));

    let dir = tempfile::tempdir().unwrap();
    write_calibration(dir.path(), &[a]).unwrap();
    std::fs::write(dir.path().join("extra.f32"), [0u8; 4]).unwrap();
    assert!(matches!(ingest_calibration(dir.path()), Err(DlicError::Ingest(_))));
    std::fs::write(dir.path().join(SHAPES_FILE), b"{").unwrap();
    assert!(matches!(ingest_calibration(dir.path()), Err(DlicError::Ingest(_))));
}

#[test]
fn ingest_sorts_by_file_name() {
    let dir = tempfile::tempdir().unwrap();
    let shapes = r#"{"b.f32": [1], "a.f32": [1], "c.f32": [1]}"#;
    std::fs::write(dir.path().join(SHAPES_FILE), shapes).unwrap();
    for (name, v) in [("c.f32", 3.0f32), ("a.f32", 1.0), ("b.f32", 2.0)] {
        std::fs::write(dir.path().join(name), v.to_le_bytes()).unwrap();
    }
    let got: Vec<f32> = ingest_calibration(dir.path()).unwrap().iter().map(|t| t.data()[0]).collect();
    assert_eq!(got, [1.0, 2.0, 3.0]);
}
