//! Non-federated reference trainers: a solo VQC on one client's data and a
//! small dense network with a logistic output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{epoch_indices, ClientShard, Dataset};
use crate::fedcore::{self, ClientState, LocalStats, RoundMetrics, TrainSchedule};
use crate::netmodel::{NodeId, NodeRole, NodeSpec};
use crate::vqc::{self, Adam, CircuitSpec, EvalStats, WeightVector};
use crate::{seed, Error, Result};

/// Result of a baseline training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub rounds: Vec<RoundMetrics>,
    pub final_test_accuracy: f64,
    pub final_params: Vec<f64>,
}

fn single_client_round(round_idx: usize, client_id: usize, local: LocalStats, test: EvalStats) -> RoundMetrics {
    RoundMetrics {
        round_idx,
        clients: vec![fedcore::ClientRoundMetrics {
            client_id,
            train_loss: local.train_loss,
            train_accuracy: local.train_accuracy,
            test_accuracy: test.accuracy,
            test_loss: test.mean_loss,
        }],
        mean_train_loss: local.train_loss,
        mean_train_accuracy: local.train_accuracy,
        mean_test_accuracy: test.accuracy,
        messages_sent: 0,
        payload_bytes: 0,
        max_norm_error: local.max_norm_error.max(test.max_norm_error),
    }
}

/// Solo VQC training for `rounds * epochs_per_round` epochs on one shard.
///
/// Initial weights and epoch sampling use the same seed derivation as a
/// star federation, so a one-client star reproduces this run exactly.
pub fn train_quantum_baseline(
    spec: CircuitSpec,
    shard: ClientShard,
    schedule: &TrainSchedule,
    rounds: usize,
    run_seed: u64,
) -> Result<BaselineRun> {
    let node = NodeSpec {
        id: NodeId(0),
        qubit_capacity: spec.num_qubits,
        role: NodeRole::Client,
    };
    let weights = WeightVector::random(spec.weight_count(), fedcore::global_init_seed(run_seed));
    let seed = fedcore::client_seed(run_seed, shard.client_id);
    let mut client = ClientState::new(&node, spec, shard, weights, schedule.adam, seed)?;
    let mut out = Vec::with_capacity(rounds);
    for round_idx in 0..rounds {
        let local = fedcore::local_train_round(&mut client, schedule)?;
        client.model_weights = client.weights.clone();
        let test = client.test_stats()?;
        out.push(single_client_round(round_idx, client.client_id, local, test));
    }
    let final_test_accuracy = client.test_stats()?.accuracy;
    Ok(BaselineRun {
        rounds: out,
        final_test_accuracy,
        final_params: client.weights.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Relu => f64::from(u8::from(a > 0.0)),
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
}

impl MlpSpec {
    /// Layer widths including input and the single logistic output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden_dims);
        w.push(1);
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|p| (p[0] + 1) * p[1]).sum()
    }
}

/// Dense network with all parameters in one flat buffer. Layer `l` stores
/// its `out x in` weight matrix row-major, followed by `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: Vec<f64>,
}

struct Trace {
    /// Activations per layer, `acts[0]` is the input.
    acts: Vec<Vec<f64>>,
    prob: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    pub fn new(spec: MlpSpec, params: Vec<f64>) -> Result<Self> {
        if spec.input_dim == 0 || spec.hidden_dims.contains(&0) {
            return Err(Error::Shape(format!("degenerate layer widths {:?}", spec.widths())));
        }
        if params.len() != spec.param_count() {
            return Err(Error::Shape(format!(
                "network needs {} parameters, got {}",
                spec.param_count(),
                params.len()
            )));
        }
        Ok(Mlp { spec, params })
    }

    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        let n = spec.param_count();
        Mlp::new(spec, vec![0.0; n])
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random(spec: MlpSpec, seed: u64) -> Result<Self> {
        let mut rng = seed::rng(seed);
        let mut params = Vec::with_capacity(spec.param_count());
        for pair in spec.widths().windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Mlp::new(spec, params)
    }

    fn trace(&self, x: &[f64]) -> Result<Trace> {
        if x.len() != self.spec.input_dim {
            return Err(Error::Shape(format!(
                "network takes {} inputs, got {}",
                self.spec.input_dim,
                x.len()
            )));
        }
        let widths = self.spec.widths();
        let last = widths.len() - 2;
        let mut acts = vec![x.to_vec()];
        let mut offset = 0;
        let mut logit = 0.0;
        for (l, pair) in widths.windows(2).enumerate() {
            let (n_in, n_out) = (pair[0], pair[1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + (n_in + 1) * n_out];
            offset += (n_in + 1) * n_out;
            let input = acts.last().expect("input layer");
            let z: Vec<f64> = (0..n_out)
                .map(|o| b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(input).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            if l == last {
                logit = z[0];
            } else {
                acts.push(z.into_iter().map(|v| self.spec.activation.apply(v)).collect());
            }
        }
        Ok(Trace {
            acts,
            prob: sigmoid(logit),
        })
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        Ok(self.trace(x)?.prob)
    }

    pub fn loss(&self, x: &[f64], y: u8) -> Result<f64> {
        Ok(vqc::bce(self.forward(x)?, y))
    }

    /// Gradient of the per-sample cross-entropy (through an unclipped sigmoid).
    pub fn backward(&self, x: &[f64], y: u8) -> Result<Vec<f64>> {
        let trace = self.trace(x)?;
        let widths = self.spec.widths();
        let mut grad = vec![0.0; self.params.len()];
        // dL/dz at the output
        let mut delta = vec![trace.prob - f64::from(y)];
        let mut offset = self.params.len();
        for l in (0..widths.len() - 1).rev() {
            let (n_in, n_out) = (widths[l], widths[l + 1]);
            offset -= (n_in + 1) * n_out;
            let input = &trace.acts[l];
            for o in 0..n_out {
                for i in 0..n_in {
                    grad[offset + o * n_in + i] = delta[o] * input[i];
                }
                grad[offset + n_in * n_out + o] = delta[o];
            }
            if l > 0 {
                let w = &self.params[offset..offset + n_in * n_out];
                delta = (0..n_in)
                    .map(|i| {
                        let back: f64 = (0..n_out).map(|o| w[o * n_in + i] * delta[o]).sum();
                        back * self.spec.activation.derivative(input[i])
                    })
                    .collect();
            }
        }
        Ok(grad)
    }

    pub fn batch_gradient(&self, batch: &[(&[f64], u8)]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(Error::Usage("gradient of an empty batch".into()));
        }
        let mut total = vec![0.0; self.params.len()];
        for &(x, y) in batch {
            for (t, g) in total.iter_mut().zip(self.backward(x, y)?) {
                *t += g;
            }
        }
        let n = batch.len() as f64;
        total.iter_mut().for_each(|t| *t /= n);
        Ok(total)
    }

    pub fn evaluate(&self, ds: &Dataset) -> Result<EvalStats> {
        if ds.is_empty() {
            return Err(Error::Usage("evaluation on an empty set".into()));
        }
        let mut stats = EvalStats::default();
        for (x, &y) in ds.features.iter().zip(&ds.labels) {
            let p = self.forward(x)?;
            stats.mean_loss += vqc::bce(p, y);
            stats.accuracy += f64::from(u8::from(u8::from(p >= 0.5) == y));
        }
        stats.mean_loss /= ds.len() as f64;
        stats.accuracy /= ds.len() as f64;
        Ok(stats)
    }
}

/// Trains an MLP on one shard with the federated runs' epoch schedule.
pub fn train_mlp(
    spec: MlpSpec,
    shard: &ClientShard,
    schedule: &TrainSchedule,
    rounds: usize,
    run_seed: u64,
) -> Result<BaselineRun> {
    let mut net = Mlp::random(spec, seed::derive(run_seed, "mlp-init", shard.client_id as u64))?;
    let mut adam = Adam::new(net.params.len(), schedule.adam);
    let sample_seed = fedcore::client_seed(run_seed, shard.client_id);
    let train = &shard.train;
    if train.is_empty() {
        return Err(Error::Usage("MLP training on an empty set".into()));
    }
    let k = schedule.samples_per_epoch.min(train.len());
    let mut epoch = 0u64;
    let mut out = Vec::with_capacity(rounds);
    for round_idx in 0..rounds {
        let mut last = None;
        for _ in 0..schedule.epochs_per_round {
            let idx = epoch_indices(train.len(), k, sample_seed, epoch)?;
            for chunk in idx.chunks(schedule.batch_size.max(1)) {
                let batch: Vec<(&[f64], u8)> = chunk
                    .iter()
                    .map(|&i| (train.features[i].as_slice(), train.labels[i]))
                    .collect();
                let grad = net.batch_gradient(&batch)?;
                adam.step(&mut net.params, &grad)?;
            }
            epoch += 1;
            last = Some(idx);
        }
        let idx = match last {
            Some(idx) => idx,
            None => epoch_indices(train.len(), k, sample_seed, epoch)?,
        };
        let tr = net.evaluate(&train.select(&idx))?;
        let te = net.evaluate(&shard.test)?;
        out.push(single_client_round(
            round_idx,
            shard.client_id,
            LocalStats {
                train_loss: tr.mean_loss,
                train_accuracy: tr.accuracy,
                max_norm_error: 0.0,
            },
            te,
        ));
    }
    Ok(BaselineRun {
        final_test_accuracy: net.evaluate(&shard.test)?.accuracy,
        rounds: out,
        final_params: net.params,
    })
}

/// Per-round means across a set of runs (tasks and/or seeds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRound {
    pub round_idx: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

pub fn aggregate_baseline_runs(runs: &[&[RoundMetrics]]) -> Result<Vec<AggregateRound>> {
    let rounds = runs
        .first()
        .map(|r| r.len())
        .ok_or_else(|| Error::Usage("no runs to aggregate".into()))?;
    if runs.iter().any(|r| r.len() != rounds) {
        return Err(Error::Usage("runs have different round counts".into()));
    }
    let n = runs.len() as f64;
    Ok((0..rounds)
        .map(|r| AggregateRound {
            round_idx: r,
            train_loss: runs.iter().map(|x| x[r].mean_train_loss).sum::<f64>() / n,
            train_accuracy: runs.iter().map(|x| x[r].mean_train_accuracy).sum::<f64>() / n,
            test_accuracy: runs.iter().map(|x| x[r].mean_test_accuracy).sum::<f64>() / n,
        })
        .collect())
}
