//! Variational quantum classifier.
//!
//! Circuit: feature embedding, then `depth` layers of (CNOT ring, RY on every
//! qubit). The class-1 probability is read from qubit 0 as `(1 - <Z0>) / 2`.
//! Weights are stored layer-major: `index = layer * num_qubits + qubit`.
//! Gradients use the two-term parameter-shift rule.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encode::EmbeddingKind;
use crate::qsim::{GateOp, StateVector};
use crate::{seed, Error, Result};

/// Probability clip applied before the log in the cross-entropy.
pub const PROB_EPS: f64 = 1e-7;
/// Half-width of the uniform weight initialization interval.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub num_qubits: usize,
    pub depth: usize,
    pub embedding: EmbeddingKind,
    pub num_features: usize,
}

impl CircuitSpec {
    pub fn new(
        num_qubits: usize,
        depth: usize,
        embedding: EmbeddingKind,
        num_features: usize,
    ) -> Result<Self> {
        if num_qubits == 0 || num_qubits > crate::qsim::MAX_QUBITS {
            return Err(Error::Capacity(format!(
                "circuit of {num_qubits} qubits outside supported range"
            )));
        }
        embedding.check(num_features, num_qubits)?;
        Ok(CircuitSpec {
            num_qubits,
            depth,
            embedding,
            num_features,
        })
    }

    pub fn weight_count(&self) -> usize {
        self.depth * self.num_qubits
    }

    pub fn layout(&self) -> WeightLayout {
        WeightLayout {
            depth: self.depth,
            num_qubits: self.num_qubits,
        }
    }
}

/// Shape of a layer-major weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeightLayout {
    pub depth: usize,
    pub num_qubits: usize,
}

impl WeightLayout {
    pub fn len(&self) -> usize {
        self.depth * self.num_qubits
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn zeros(len: usize) -> Self {
        WeightVector(vec![0.0; len])
    }

    /// Uniform on `[-INIT_SCALE, INIT_SCALE]`, reproducible from `seed`.
    pub fn random(len: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        WeightVector(
            (0..len)
                .map(|_| rng.random_range(-INIT_SCALE..=INIT_SCALE))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for WeightVector {
    fn from(values: Vec<f64>) -> Self {
        WeightVector(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub prob_class1: f64,
    pub label: u8,
}

impl Prediction {
    pub fn from_probability(p: f64) -> Self {
        let prob_class1 = p.clamp(0.0, 1.0);
        Prediction {
            prob_class1,
            label: u8::from(prob_class1 >= 0.5),
        }
    }
}

/// One entangling layer: CNOT ring then RY on each qubit.
pub fn build_layer_ops(spec: &CircuitSpec, layer_weights: &[f64]) -> Result<Vec<GateOp>> {
    let n = spec.num_qubits;
    if layer_weights.len() != n {
        return Err(Error::Shape(format!(
            "layer needs {n} weights, got {}",
            layer_weights.len()
        )));
    }
    let mut ops = Vec::with_capacity(2 * n);
    if n >= 2 {
        ops.extend((0..n).map(|q| GateOp::Cnot {
            control: q,
            target: (q + 1) % n,
        }));
    }
    ops.extend(
        layer_weights
            .iter()
            .enumerate()
            .map(|(target, &angle)| GateOp::Ry { target, angle }),
    );
    Ok(ops)
}

fn check_weights(spec: &CircuitSpec, weights: &WeightVector) -> Result<()> {
    if weights.len() != spec.weight_count() {
        return Err(Error::Shape(format!(
            "circuit ({} qubits, depth {}) needs {} weights, got {}",
            spec.num_qubits,
            spec.depth,
            spec.weight_count(),
            weights.len()
        )));
    }
    Ok(())
}

/// Trainable part of the circuit, with the op index of every weight's RY gate.
fn trainable_ops(spec: &CircuitSpec, weights: &WeightVector) -> Result<(Vec<GateOp>, Vec<usize>)> {
    check_weights(spec, weights)?;
    let mut ops = Vec::new();
    let mut positions = Vec::with_capacity(weights.len());
    for layer in weights.0.chunks(spec.num_qubits.max(1)).take(spec.depth) {
        let layer_ops = build_layer_ops(spec, layer)?;
        let ry_start = ops.len() + layer_ops.len() - spec.num_qubits;
        positions.extend(ry_start..ry_start + spec.num_qubits);
        ops.extend(layer_ops);
    }
    Ok((ops, positions))
}

pub fn circuit_ops(spec: &CircuitSpec, weights: &WeightVector) -> Result<Vec<GateOp>> {
    trainable_ops(spec, weights).map(|(ops, _)| ops)
}

fn embed(spec: &CircuitSpec, features: &[f64]) -> Result<StateVector> {
    if features.len() != spec.num_features {
        return Err(Error::Shape(format!(
            "circuit expects {} features, got {}",
            spec.num_features,
            features.len()
        )));
    }
    spec.embedding.embed(features, spec.num_qubits)
}

/// Final statevector for one input.
pub fn final_state(spec: &CircuitSpec, weights: &WeightVector, features: &[f64]) -> Result<StateVector> {
    let ops = circuit_ops(spec, weights)?;
    let mut state = embed(spec, features)?;
    state.apply_all(&ops)?;
    Ok(state)
}

fn readout(z0: f64) -> f64 {
    0.5 * (1.0 - z0)
}

pub fn forward(spec: &CircuitSpec, weights: &WeightVector, features: &[f64]) -> Result<Prediction> {
    let state = final_state(spec, weights, features)?;
    Ok(Prediction::from_probability(readout(state.expectation_z(0)?)))
}

/// Binary cross-entropy with the probability clipped to `[PROB_EPS, 1 - PROB_EPS]`.
pub fn loss(pred: &Prediction, target: u8) -> f64 {
    bce(pred.prob_class1, target)
}

pub(crate) fn bce(p: f64, target: u8) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if target == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// `dBCE/dp`, zero where the clip is active.
pub(crate) fn bce_dp(p: f64, target: u8) -> f64 {
    if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
        return 0.0;
    }
    let y = f64::from(target);
    -y / p + (1.0 - y) / (1.0 - p)
}

/// `<Z0>` and its parameter-shift gradient for one input.
///
/// States before every RY gate are cached on the unshifted pass so each
/// shifted evaluation only replays the suffix of the circuit.
pub fn expectation_and_gradient(
    spec: &CircuitSpec,
    weights: &WeightVector,
    features: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let (ops, positions) = trainable_ops(spec, weights)?;
    let mut state = embed(spec, features)?;
    let mut snapshots = Vec::with_capacity(positions.len());
    let mut next = positions.iter().peekable();
    for (idx, op) in ops.iter().enumerate() {
        if next.peek() == Some(&&idx) {
            snapshots.push(state.clone());
            next.next();
        }
        state.apply(op)?;
    }
    let z0 = state.expectation_z(0)?;

    let mut grad = Vec::with_capacity(positions.len());
    for (snapshot, &pos) in snapshots.iter().zip(&positions) {
        let mut shifted_z = [0.0; 2];
        for (slot, delta) in shifted_z.iter_mut().zip([FRAC_PI_2, -FRAC_PI_2]) {
            let mut s = snapshot.clone();
            s.apply(&ops[pos].shifted(delta))?;
            s.apply_all(&ops[pos + 1..])?;
            *slot = s.expectation_z(0)?;
        }
        grad.push(0.5 * (shifted_z[0] - shifted_z[1]));
    }
    Ok((z0, grad))
}

/// Gradient of the mean cross-entropy over `batch` with respect to every weight.
pub fn gradient(
    spec: &CircuitSpec,
    weights: &WeightVector,
    batch: &[(&[f64], u8)],
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Usage("gradient of an empty batch".into()));
    }
    let per_sample = batch
        .par_iter()
        .map(|&(features, label)| {
            let (z0, dz) = expectation_and_gradient(spec, weights, features)?;
            // dp/dθ = -½ d<Z0>/dθ
            let scale = -0.5 * bce_dp(readout(z0), label);
            Ok(dz.into_iter().map(|g| scale * g).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![0.0; spec.weight_count()];
    for g in &per_sample {
        for (t, v) in total.iter_mut().zip(g) {
            *t += v;
        }
    }
    let n = batch.len() as f64;
    total.iter_mut().for_each(|t| *t /= n);
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalStats {
    pub mean_loss: f64,
    pub accuracy: f64,
    /// Largest `| ||psi|| - 1 |` seen over the evaluated final states.
    pub max_norm_error: f64,
}

/// Mean loss and accuracy over `rows`, in fixed row order.
pub fn evaluate(
    spec: &CircuitSpec,
    weights: &WeightVector,
    rows: &[Vec<f64>],
    labels: &[u8],
) -> Result<EvalStats> {
    if rows.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::Usage("evaluation on an empty set".into()));
    }
    let results = rows
        .par_iter()
        .zip(labels.par_iter())
        .map(|(row, &label)| {
            let state = final_state(spec, weights, row)?;
            let pred = Prediction::from_probability(readout(state.expectation_z(0)?));
            Ok((loss(&pred, label), pred.label == label, (state.norm() - 1.0).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut stats = EvalStats::default();
    for (l, correct, norm_err) in &results {
        stats.mean_loss += l;
        stats.accuracy += f64::from(u8::from(*correct));
        stats.max_norm_error = stats.max_norm_error.max(*norm_err);
    }
    let n = results.len() as f64;
    stats.mean_loss /= n;
    stats.accuracy /= n;
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Adam {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != grad.len() || params.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam state of length {} given {} params and {} gradients",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// Functional form of one Adam update.
pub fn sgd_adam_step(weights: &WeightVector, grad: &[f64], state: &mut Adam) -> Result<WeightVector> {
    let mut next = weights.clone();
    state.step(&mut next.0, grad)?;
    Ok(next)
}
