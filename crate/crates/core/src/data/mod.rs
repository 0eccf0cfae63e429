//! Datasets: generation, file ingestion, preprocessing and client partitioning.

pub mod cache;
pub mod idx;
pub mod images;
mod moons;
pub mod npy;
mod resize;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

pub use moons::generate_moons;
pub use resize::resize_image;

/// Element buffer of a raw tensor read from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    U8(Vec<u8>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::U8(v) => v.len(),
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            TensorData::U8(v) => v.iter().map(|&x| f64::from(x)).collect(),
            TensorData::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }
}

/// Row-major tensor with its shape.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl RawTensor {
    pub fn new(shape: Vec<usize>, data: TensorData) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {expected} elements, buffer has {}",
                data.len()
            )));
        }
        Ok(RawTensor { shape, data })
    }

    /// Rows of the leading axis, each flattened, as `f64`.
    pub fn rows_f64(&self) -> Vec<Vec<f64>> {
        let rows = self.shape.first().copied().unwrap_or(0);
        let values = self.data.to_f64();
        let width = if rows == 0 { 0 } else { values.len() / rows };
        values.chunks(width.max(1)).take(rows).map(<[f64]>::to_vec).collect()
    }

    /// Element values as labels; fails on anything outside `0..=255`.
    pub fn labels_u8(&self) -> Result<Vec<u8>> {
        match &self.data {
            TensorData::U8(v) => Ok(v.clone()),
            other => other
                .to_f64()
                .into_iter()
                .map(|x| {
                    if x.fract() == 0.0 && (0.0..=255.0).contains(&x) {
                        Ok(x as u8)
                    } else {
                        Err(Error::Format(format!("label value {x} is not a small integer")))
                    }
                })
                .collect(),
        }
    }
}

/// Labeled binary-classification samples. Rows are samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    /// Image height and width when rows are flattened images.
    pub feature_meta: Option<(usize, usize)>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Vec<Vec<f64>>,
        labels: Vec<u8>,
        feature_meta: Option<(usize, usize)>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Usage(format!("non-binary label {bad}")));
        }
        if let Some(first) = features.first() {
            if features.iter().any(|r| r.len() != first.len()) {
                return Err(Error::Shape("ragged feature matrix".into()));
            }
        }
        Ok(Dataset {
            name: name.into(),
            features,
            labels,
            feature_meta,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Copy of the rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_meta: self.feature_meta,
        }
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.len() - ones, ones]
    }

    /// `(features, label)` pairs borrowed from this dataset.
    pub fn pairs(&self) -> Vec<(&[f64], u8)> {
        self.features
            .iter()
            .map(Vec::as_slice)
            .zip(self.labels.iter().copied())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientShard {
    pub client_id: usize,
    pub train: Dataset,
    pub test: Dataset,
}

/// Keeps samples of `class_a` (relabelled 0) and `class_b` (relabelled 1),
/// preserving the original order.
pub fn make_binary_subset(
    name: impl Into<String>,
    images: &[Vec<f64>],
    labels: &[u8],
    class_a: u8,
    class_b: u8,
    feature_meta: Option<(usize, usize)>,
) -> Result<Dataset> {
    if class_a == class_b {
        return Err(Error::Usage(format!(
            "binary subset needs two distinct classes, got {class_a} twice"
        )));
    }
    if images.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    let mut features = Vec::new();
    let mut out_labels = Vec::new();
    for (row, &label) in images.iter().zip(labels) {
        let mapped = if label == class_a {
            0
        } else if label == class_b {
            1
        } else {
            continue;
        };
        features.push(row.clone());
        out_labels.push(mapped);
    }
    if out_labels.is_empty() {
        return Err(Error::Usage(format!(
            "no samples of classes {class_a} or {class_b}"
        )));
    }
    Dataset::new(name, features, out_labels, feature_meta)
}

/// Splits `total` items into `parts` contiguous blocks, remainder to the earliest.
fn block_bounds(total: usize, parts: usize) -> Vec<(usize, usize)> {
    let base = total / parts;
    let extra = total % parts;
    let mut start = 0;
    (0..parts)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let bounds = (start, start + len);
            start += len;
            bounds
        })
        .collect()
}

/// Number of training rows in the global 80/20 split.
pub fn train_split_len(total: usize) -> usize {
    total * 4 / 5
}

/// Shuffles with `seed`, takes a global 80/20 train/test split, then hands
/// each client one contiguous block of each part.
pub fn partition_for_clients(ds: &Dataset, num_clients: usize, seed: u64) -> Result<Vec<ClientShard>> {
    if num_clients == 0 {
        return Err(Error::Usage("partition needs at least one client".into()));
    }
    let n_train = train_split_len(ds.len());
    let n_test = ds.len() - n_train;
    if n_train < num_clients || n_test < num_clients {
        return Err(Error::Usage(format!(
            "{} samples cannot give {num_clients} clients a train and test sample each",
            ds.len()
        )));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, "partition", 0)));
    let (train_idx, test_idx) = order.split_at(n_train);
    let train_blocks = block_bounds(n_train, num_clients);
    let test_blocks = block_bounds(n_test, num_clients);
    Ok(train_blocks
        .into_iter()
        .zip(test_blocks)
        .enumerate()
        .map(|(client_id, ((a, b), (c, d)))| ClientShard {
            client_id,
            train: ds.select(&train_idx[a..b]),
            test: ds.select(&test_idx[c..d]),
        })
        .collect())
}

/// `k` distinct row indices drawn from `(seed, epoch_idx)`.
pub fn epoch_indices(rows: usize, k: usize, seed: u64, epoch_idx: u64) -> Result<Vec<usize>> {
    if k > rows {
        return Err(Error::Usage(format!(
            "cannot draw {k} samples without replacement from {rows}"
        )));
    }
    let mut rng = seed::rng(seed::derive(seed, "epoch", epoch_idx));
    let mut order: Vec<usize> = (0..rows).collect();
    let (chosen, _) = order.partial_shuffle(&mut rng, k);
    Ok(chosen.to_vec())
}

pub fn epoch_sample(ds: &Dataset, k: usize, seed: u64, epoch_idx: u64) -> Result<Dataset> {
    Ok(ds.select(&epoch_indices(ds.len(), k, seed, epoch_idx)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        Dataset::new(
            "toy",
            (0..n).map(|i| vec![i as f64]).collect(),
            (0..n).map(|i| (i % 2) as u8).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn binary_subset_filters_and_relabels() {
        let images = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let ds = make_binary_subset("pair", &images, &[0, 1, 2, 1], 1, 2, None).unwrap();
        assert_eq!(ds.features, vec![vec![1.0], vec![2.0], vec![3.0]]);
        assert_eq!(ds.labels, vec![0, 1, 0]);
        assert!(matches!(
            make_binary_subset("pair", &images, &[0, 1, 2, 1], 1, 1, None),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            make_binary_subset("pair", &images, &[0, 1, 2, 1], 3, 4, None),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn partition_three_clients_of_moons_size() {
        let shards = partition_for_clients(&toy(3000), 3, 5).unwrap();
        assert_eq!(shards.len(), 3);
        for s in &shards {
            assert_eq!(s.train.len(), 800);
            assert_eq!(s.test.len(), 200);
        }
    }

    #[test]
    fn partition_single_client_gets_everything() {
        let shards = partition_for_clients(&toy(10), 1, 5).unwrap();
        assert_eq!(shards[0].train.len(), 8);
        assert_eq!(shards[0].test.len(), 2);
    }

    #[test]
    fn partition_remainder_and_errors() {
        let shards = partition_for_clients(&toy(23), 3, 1).unwrap();
        // 18 train -> 6,6,6 ; 5 test -> 2,2,1
        let tests: Vec<usize> = shards.iter().map(|s| s.test.len()).collect();
        assert_eq!(tests, vec![2, 2, 1]);
        assert!(matches!(partition_for_clients(&toy(4), 3, 1), Err(Error::Usage(_))));
        assert!(matches!(partition_for_clients(&toy(4), 0, 1), Err(Error::Usage(_))));
    }

    #[test]
    fn epoch_sampling_contract() {
        let a = epoch_indices(12000, 1000, 9, 3).unwrap();
        assert_eq!(a, epoch_indices(12000, 1000, 9, 3).unwrap());
        assert_ne!(a, epoch_indices(12000, 1000, 9, 4).unwrap());
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 1000);

        let mut full = epoch_indices(50, 50, 1, 0).unwrap();
        full.sort_unstable();
        assert_eq!(full, (0..50).collect::<Vec<_>>());
        assert!(matches!(epoch_indices(5, 6, 1, 0), Err(Error::Usage(_))));
    }

    #[test]
    fn dataset_invariants() {
        assert!(Dataset::new("x", vec![vec![1.0]], vec![2], None).is_err());
        assert!(Dataset::new("x", vec![vec![1.0]], vec![], None).is_err());
    }
}
