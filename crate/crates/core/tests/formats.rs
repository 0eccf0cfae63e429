use std::io::{Cursor, Write};
use std::path::Path;

use flate2::write::GzEncoder;
use flate2::Compression;
use proptest::prelude::*;
use qfl_core::data::idx::{encode_idx, load_idx_images, load_idx_labels, parse_idx, read_idx};
use qfl_core::data::npy::{encode_npy, load_npz_array, parse_npy, read_npz_array, write_npz};
use qfl_core::data::{cache, Dataset, RawTensor, TensorData};
use qfl_core::Error;

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// IDX bytes assembled field by field.
fn handmade_idx(dims: &[u32], payload: &[u8]) -> Vec<u8> {
    let mut out = vec![0, 0, 0x08, dims.len() as u8];
    for d in dims {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(payload);
    out
}

#[test]
fn idx_parses_handmade_files() {
    let payload: Vec<u8> = (0..2 * 3 * 4).map(|i| (i * 11) as u8).collect();
    let bytes = handmade_idx(&[2, 3, 4], &payload);
    let t = parse_idx(&bytes).unwrap();
    assert_eq!(t.shape, vec![2, 3, 4]);
    assert_eq!(t.data, TensorData::U8(payload));
    assert_eq!(encode_idx(&t).unwrap(), bytes);
}

#[test]
fn idx_files_load_plain_and_gzipped() {
    let dir = tempfile::tempdir().unwrap();
    let images = handmade_idx(&[3, 2, 2], &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 255]);
    let labels = handmade_idx(&[3], &[7, 0, 9]);
    std::fs::write(dir.path().join("img"), &images).unwrap();
    let mut gz = GzEncoder::new(Vec::new(), Compression::default());
    gz.write_all(&labels).unwrap();
    std::fs::write(dir.path().join("lbl.gz"), gz.finish().unwrap()).unwrap();

    let img = load_idx_images(&dir.path().join("img")).unwrap();
    assert_eq!(img.shape, vec![3, 2, 2]);
    assert_eq!(load_idx_labels(&dir.path().join("lbl.gz")).unwrap(), vec![7, 0, 9]);
    assert!(matches!(load_idx_labels(&dir.path().join("img")), Err(Error::Format(_))));
    assert_eq!(read_idx(&dir.path().join("lbl.gz")).unwrap().shape, vec![3]);
}

#[test]
fn idx_rejects_bad_magic_and_truncation() {
    let good = handmade_idx(&[2, 2], &[1, 2, 3, 4]);
    for (pos, val) in [(0usize, 1u8), (1, 8), (2, 0x0D), (3, 0)] {
        let mut bad = good.clone();
        bad[pos] = val;
        assert!(matches!(parse_idx(&bad), Err(Error::Format(_))), "byte {pos}");
    }
    let cut = &good[..good.len() - 1];
    match parse_idx(cut) {
        Err(Error::Truncated { expected, actual }) => assert_eq!((expected, actual), (good.len(), good.len() - 1)),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_idx(&good[..6]), Err(Error::Truncated { .. })));
    assert!(matches!(parse_idx(&good[..2]), Err(Error::Truncated { .. })));
    let mut long = good.clone();
    long.push(0);
    assert!(matches!(parse_idx(&long), Err(Error::Format(_))));
}

#[test]
fn missing_idx_file_names_the_path() {
    let err = read_idx(Path::new("/no/such/dir/train-images-idx3-ubyte")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("/no/such/dir/train-images-idx3-ubyte"));
}

#[test]
fn npy_written_by_numpy_round_trips_byte_for_byte() {
    let bytes = std::fs::read(fixture("grid_f8.npy")).unwrap();
    let t = parse_npy(&bytes).unwrap();
    assert_eq!(t.shape, vec![5]);
    assert_eq!(t.data, TensorData::F64(vec![-1.0, -0.5, 0.0, 0.5, 1.0]));
    assert_eq!(encode_npy(&t), bytes);
}

#[test]
fn npz_written_by_numpy_loads() {
    for name in ["numpy_compressed.npz", "numpy_stored.npz"] {
        let path = fixture(name);
        let images = load_npz_array(&path, "train_images").unwrap();
        assert_eq!(images.shape, vec![2, 3, 4]);
        let expected: Vec<u8> = (0..24u32).map(|i| (i * 7) as u8).collect();
        assert_eq!(images.data, TensorData::U8(expected));
        let grid = load_npz_array(&path, "grid").unwrap();
        assert_eq!(grid.data, TensorData::F64(vec![-1.0, -0.5, 0.0, 0.5, 1.0]));
    }
    let path = fixture("numpy_compressed.npz");
    let w = load_npz_array(&path, "weights").unwrap();
    assert_eq!(w.shape, vec![2, 3]);
    assert_eq!(
        w.data,
        TensorData::F32(vec![0.5, -1.25, 3.0e-3, 1e10, -0.0, 2.5])
    );
    assert_eq!(load_npz_array(&path, "train_labels").unwrap().labels_u8().unwrap(), vec![0, 1, 1, 0]);
    match load_npz_array(&path, "val_images") {
        Err(Error::NotFound { name, available }) => {
            assert_eq!(name, "val_images");
            assert_eq!(available, vec!["grid", "train_images", "train_labels", "weights"]);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn npy_rejects_bad_magic_and_truncation() {
    let t = RawTensor::new(vec![3], TensorData::F64(vec![1.0, 2.0, 3.0])).unwrap();
    let good = encode_npy(&t);
    let mut bad = good.clone();
    bad[0] = b'X';
    assert!(matches!(parse_npy(&bad), Err(Error::Format(_))));
    let mut bad = good.clone();
    bad[1] = b'n';
    assert!(matches!(parse_npy(&bad), Err(Error::Format(_))));
    assert!(matches!(parse_npy(&good[..good.len() - 3]), Err(Error::Truncated { .. })));
    assert!(matches!(parse_npy(&good[..40]), Err(Error::Truncated { .. })));
    assert!(matches!(parse_npy(&good[..5]), Err(Error::Truncated { .. })));
}

#[test]
fn corrupt_zip_is_a_format_error() {
    let mut bytes = std::fs::read(fixture("numpy_stored.npz")).unwrap();
    bytes[0] = 0;
    bytes.truncate(40);
    let err = read_npz_array(Cursor::new(bytes), "grid", Path::new("x.npz")).unwrap_err();
    assert!(matches!(err, Error::Format(_)));
}

fn tensor_strategy() -> impl Strategy<Value = RawTensor> {
    let shape = prop::collection::vec(1usize..5, 1..4);
    (shape, 0u8..3).prop_flat_map(|(shape, kind)| {
        let n: usize = shape.iter().product();
        let data = match kind {
            0 => prop::collection::vec(any::<u8>(), n).prop_map(TensorData::U8).boxed(),
            1 => prop::collection::vec(any::<f32>(), n).prop_map(TensorData::F32).boxed(),
            _ => prop::collection::vec(any::<f64>(), n).prop_map(TensorData::F64).boxed(),
        };
        (Just(shape), data).prop_map(|(s, d)| RawTensor::new(s, d).unwrap())
    })
}

fn bits(t: &RawTensor) -> (Vec<usize>, Vec<u64>) {
    let v = match &t.data {
        TensorData::U8(v) => v.iter().map(|&x| u64::from(x)).collect(),
        TensorData::F32(v) => v.iter().map(|x| u64::from(x.to_bits())).collect(),
        TensorData::F64(v) => v.iter().map(|x| x.to_bits()).collect(),
    };
    (t.shape.clone(), v)
}

proptest! {
    #[test]
    fn npy_round_trip_is_bit_exact(t in tensor_strategy()) {
        let bytes = encode_npy(&t);
        prop_assert_eq!(bytes.len() % 64, (t.data.len() * match t.data {
            TensorData::U8(_) => 1, TensorData::F32(_) => 4, TensorData::F64(_) => 8,
        }) % 64);
        let back = parse_npy(&bytes).unwrap();
        prop_assert_eq!(bits(&back), bits(&t));
    }

    #[test]
    fn npz_round_trip_is_bit_exact(a in tensor_strategy(), b in tensor_strategy(), compress in any::<bool>()) {
        let cursor = write_npz(Cursor::new(Vec::new()), &[("a", &a), ("b", &b)], compress).unwrap();
        let bytes = cursor.into_inner();
        let got_a = read_npz_array(Cursor::new(bytes.clone()), "a", Path::new("mem")).unwrap();
        let got_b = read_npz_array(Cursor::new(bytes), "b", Path::new("mem")).unwrap();
        prop_assert_eq!(bits(&got_a), bits(&a));
        prop_assert_eq!(bits(&got_b), bits(&b));
    }

    #[test]
    fn idx_round_trip_is_bit_exact(shape in prop::collection::vec(1usize..6, 1..4), seed in any::<u8>()) {
        let n: usize = shape.iter().product();
        let data: Vec<u8> = (0..n).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect();
        let t = RawTensor::new(shape, TensorData::U8(data)).unwrap();
        prop_assert_eq!(parse_idx(&encode_idx(&t).unwrap()).unwrap(), t);
    }

    #[test]
    fn dataset_cache_round_trips(
        rows in prop::collection::vec(prop::collection::vec(any::<f64>(), 3), 1..20),
        name in "[a-z]{0,12}",
    ) {
        let labels: Vec<u8> = (0..rows.len()).map(|i| (i % 2) as u8).collect();
        let ds = Dataset::new(name, rows, labels, Some((1, 3))).unwrap();
        let back = cache::decode(&cache::encode(&ds)).unwrap();
        prop_assert_eq!(&back.name, &ds.name);
        prop_assert_eq!(&back.labels, &ds.labels);
        prop_assert_eq!(back.feature_meta, ds.feature_meta);
        let flat = |d: &Dataset| d.features.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(flat(&back), flat(&ds));
    }
}
