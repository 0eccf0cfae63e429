//! Image dataset sources laid out under a data directory:
//!
//! ```text
//! <data_dir>/fashion-mnist/train-images-idx3-ubyte[.gz]
//! <data_dir>/fashion-mnist/train-labels-idx1-ubyte[.gz]
//! <data_dir>/fashion-mnist/t10k-images-idx3-ubyte[.gz]
//! <data_dir>/fashion-mnist/t10k-labels-idx1-ubyte[.gz]
//! <data_dir>/pneumoniamnist.npz      (train_/val_/test_ images and labels)
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{idx, make_binary_subset, npy, resize_image, Dataset, RawTensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageSource {
    FashionMnist,
    PneumoniaMnist,
}

impl ImageSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ImageSource::FashionMnist => "fashion-mnist",
            ImageSource::PneumoniaMnist => "pneumonia-mnist",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// FashionMNIST class names by label.
pub const FASHION_CLASSES: [&str; 10] = [
    "T-shirt/top",
    "Trouser",
    "Pullover",
    "Dress",
    "Coat",
    "Sandal",
    "Shirt",
    "Sneaker",
    "Bag",
    "Ankle boot",
];

pub const PNEUMONIA_FILE: &str = "pneumoniamnist.npz";

/// First existing of `path` and `path.gz`; otherwise the bare path for the error.
fn with_gz_fallback(path: PathBuf) -> PathBuf {
    if path.exists() {
        return path;
    }
    let mut gz = path.clone().into_os_string();
    gz.push(".gz");
    let gz = PathBuf::from(gz);
    if gz.exists() {
        gz
    } else {
        path
    }
}

pub fn fashion_paths(data_dir: &Path, split: Split) -> (PathBuf, PathBuf) {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let dir = data_dir.join("fashion-mnist");
    (
        with_gz_fallback(dir.join(format!("{prefix}-images-idx3-ubyte"))),
        with_gz_fallback(dir.join(format!("{prefix}-labels-idx1-ubyte"))),
    )
}

/// Grayscale images scaled to `[0, 1]`, with labels and image shape.
#[derive(Debug, Clone)]
pub struct ImageSet {
    pub pixels: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub height: usize,
    pub width: usize,
}

fn image_set(images: RawTensor, labels: Vec<u8>) -> Result<ImageSet> {
    if images.shape.len() < 3 {
        return Err(Error::Format(format!(
            "image tensor has shape {:?}, expected (n, h, w)",
            images.shape
        )));
    }
    let (n, height, width) = (images.shape[0], images.shape[1], images.shape[2]);
    if labels.len() != n {
        return Err(Error::Format(format!(
            "{n} images but {} labels",
            labels.len()
        )));
    }
    let scale = match images.data {
        super::TensorData::U8(_) => 1.0 / 255.0,
        _ => 1.0,
    };
    let pixels = images
        .rows_f64()
        .into_iter()
        .map(|row| row.into_iter().map(|p| p * scale).collect())
        .collect();
    Ok(ImageSet {
        pixels,
        labels,
        height,
        width,
    })
}

pub fn load(data_dir: &Path, source: ImageSource, split: Split) -> Result<ImageSet> {
    match source {
        ImageSource::FashionMnist => {
            let (img_path, lbl_path) = fashion_paths(data_dir, split);
            let images = idx::load_idx_images(&img_path)?;
            let labels = idx::load_idx_labels(&lbl_path)?;
            image_set(images, labels)
        }
        ImageSource::PneumoniaMnist => {
            let path = data_dir.join(PNEUMONIA_FILE);
            let prefix = match split {
                Split::Train => "train",
                Split::Test => "test",
            };
            let images = npy::load_npz_array(&path, &format!("{prefix}_images"))?;
            let labels = npy::load_npz_array(&path, &format!("{prefix}_labels"))?.labels_u8()?;
            image_set(images, labels)
        }
    }
}

/// Side length of the square image that fits `2^num_qubits` amplitudes,
/// capped at the native size.
pub fn side_for_qubits(num_qubits: usize, native: usize) -> usize {
    let capacity = 1usize << num_qubits.min(40);
    let mut side = 1;
    while (side + 1) * (side + 1) <= capacity && side < native {
        side += 1;
    }
    side
}

/// Binary image task: class pair `(a, b)` relabelled to `(0, 1)`, resized to
/// `side x side` and flattened. At most `limit` samples are kept, in file
/// order. All-zero images (which cannot be amplitude embedded) are dropped.
pub fn binary_task(
    set: &ImageSet,
    name: &str,
    classes: (u8, u8),
    side: usize,
    limit: Option<usize>,
) -> Result<Dataset> {
    let pixels: Vec<Vec<f64>> = set
        .pixels
        .iter()
        .map(|img| {
            if side == set.height && side == set.width {
                img.clone()
            } else {
                resize_image(img, set.height, set.width, side, side)
            }
        })
        .collect();
    let mut ds = make_binary_subset(
        name,
        &pixels,
        &set.labels,
        classes.0,
        classes.1,
        Some((side, side)),
    )?;
    let keep: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.features[i].iter().any(|&p| p != 0.0))
        .take(limit.unwrap_or(usize::MAX))
        .collect();
    if keep.len() != ds.len() {
        ds = ds.select(&keep);
    }
    if ds.is_empty() {
        return Err(Error::Usage(format!("image task `{name}` is empty")));
    }
    Ok(ds)
}

/// One line of a data directory inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileStatus {
    pub path: PathBuf,
    pub detail: std::result::Result<String, String>,
}

/// Probes every known dataset file under `data_dir`.
pub fn inventory(data_dir: &Path) -> Vec<FileStatus> {
    let mut out = Vec::new();
    for split in [Split::Train, Split::Test] {
        let (img, lbl) = fashion_paths(data_dir, split);
        out.push(FileStatus {
            detail: idx::load_idx_images(&img)
                .map(|t| format!("IDX images {:?}", t.shape))
                .map_err(|e| e.to_string()),
            path: img,
        });
        out.push(FileStatus {
            detail: idx::load_idx_labels(&lbl)
                .map(|l| format!("IDX labels [{}]", l.len()))
                .map_err(|e| e.to_string()),
            path: lbl,
        });
    }
    let npz = data_dir.join(PNEUMONIA_FILE);
    let detail = ["train", "val", "test"]
        .iter()
        .map(|split| {
            npy::load_npz_array(&npz, &format!("{split}_images"))
                .map(|t| format!("{split}_images {:?}", t.shape))
        })
        .collect::<Result<Vec<_>>>()
        .map(|parts| parts.join(", "))
        .map_err(|e| e.to_string());
    out.push(FileStatus { path: npz, detail });
    out
}
