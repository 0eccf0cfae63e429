//! Feature embeddings: angle (one RX per qubit) and amplitude (features as
//! normalized amplitudes), plus the min/max feature scaler used ahead of
//! angle embedding.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::qsim::{GateOp, StateVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingKind {
    Angle,
    Amplitude,
}

impl EmbeddingKind {
    /// Checks the feature/qubit pairing the embedding supports.
    pub fn check(self, num_features: usize, num_qubits: usize) -> Result<()> {
        match self {
            EmbeddingKind::Angle if num_features != num_qubits => Err(Error::Shape(format!(
                "angle embedding needs one feature per qubit, got {num_features} features for {num_qubits} qubits"
            ))),
            EmbeddingKind::Amplitude
                if num_features == 0 || num_features > (1usize << num_qubits.min(63)) =>
            {
                Err(Error::Shape(format!(
                    "amplitude embedding needs 1..=2^{num_qubits} features, got {num_features}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn embed(self, features: &[f64], num_qubits: usize) -> Result<StateVector> {
        match self {
            EmbeddingKind::Angle => angle_embed(features, num_qubits),
            EmbeddingKind::Amplitude => amplitude_embed(features, num_qubits),
        }
    }
}

/// `⊗_i RX(features[i]) |0>`.
pub fn angle_embed(features: &[f64], num_qubits: usize) -> Result<StateVector> {
    EmbeddingKind::Angle.check(features.len(), num_qubits)?;
    let mut state = StateVector::zero(num_qubits)?;
    for (target, &angle) in features.iter().enumerate() {
        state.apply(&GateOp::Rx { target, angle })?;
    }
    Ok(state)
}

/// Zero-pads `features` to `2^num_qubits` and L2-normalizes.
pub fn amplitude_embed(features: &[f64], num_qubits: usize) -> Result<StateVector> {
    if num_qubits == 0 || num_qubits > crate::qsim::MAX_QUBITS {
        return Err(Error::Capacity(format!(
            "register of {num_qubits} qubits outside supported range"
        )));
    }
    EmbeddingKind::Amplitude.check(features.len(), num_qubits)?;
    let norm = features.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Normalization(format!(
            "cannot normalize feature vector with L2 norm {norm}"
        )));
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
    for (slot, &x) in amplitudes.iter_mut().zip(features) {
        *slot = Complex64::new(x / norm, 0.0);
    }
    StateVector::from_amplitudes(amplitudes)
}

/// Per-column affine map from training statistics onto `[low, high]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub low: f64,
    pub high: f64,
    pub col_min: Vec<f64>,
    pub col_max: Vec<f64>,
}

impl FeatureScaler {
    /// Fits column minima and maxima on `train` rows.
    pub fn fit(train: &[Vec<f64>], low: f64, high: f64) -> Result<Self> {
        let cols = train.first().map(Vec::len).ok_or_else(|| {
            Error::Usage("cannot fit a feature scaler on an empty matrix".into())
        })?;
        let mut col_min = vec![f64::INFINITY; cols];
        let mut col_max = vec![f64::NEG_INFINITY; cols];
        for row in train {
            if row.len() != cols {
                return Err(Error::Shape(format!(
                    "ragged matrix: row of length {} in a {cols}-column matrix",
                    row.len()
                )));
            }
            for (j, &x) in row.iter().enumerate() {
                col_min[j] = col_min[j].min(x);
                col_max[j] = col_max[j].max(x);
            }
        }
        Ok(FeatureScaler {
            low,
            high,
            col_min,
            col_max,
        })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        let mid = 0.5 * (self.low + self.high);
        row.iter()
            .zip(self.col_min.iter().zip(&self.col_max))
            .map(|(&x, (&lo, &hi))| {
                if hi > lo {
                    let t = (x - lo) / (hi - lo);
                    (self.low + t * (self.high - self.low)).clamp(self.low, self.high)
                } else {
                    mid
                }
            })
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

/// Scales `raw` with the given training column statistics.
pub fn scale_features(
    raw: &[Vec<f64>],
    low: f64,
    high: f64,
    train_min: &[f64],
    train_max: &[f64],
) -> Vec<Vec<f64>> {
    FeatureScaler {
        low,
        high,
        col_min: train_min.to_vec(),
        col_max: train_max.to_vec(),
    }
    .transform(raw)
}
