//! Federated orchestration over star and ring topologies.
//!
//! A round is local training on every client followed by a synchronous
//! exchange barrier:
//!
//! * **Star**: every client uploads its weights, the aggregator takes a
//!   positionwise mean over the clients that have each position, and every
//!   client downloads the prefix matching its own circuit. `2k` messages.
//! * **Ring**: every client sends its trained weights to its successor,
//!   which keeps the first `n` it needs or pads with its own trained weights
//!   when the sender had fewer. `k` messages.
//!
//! Heterogeneous weight vectors are aligned either as flat layer-major
//! prefixes or per layer (`Alignment`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{epoch_indices, ClientShard};
use crate::netmodel::{LinkLedger, NetworkTopology, NodeId, NodeSpec, TopologyKind};
use crate::vqc::{self, Adam, AdamConfig, CircuitSpec, WeightLayout, WeightVector};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    /// Positions are flat layer-major indices.
    #[default]
    FlatPrefix,
    /// Positions are `(layer, qubit)` pairs.
    PerLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub epochs_per_round: usize,
    pub batch_size: usize,
    /// Samples drawn without replacement per epoch, capped at the shard size.
    pub samples_per_epoch: usize,
    pub adam: AdamConfig,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            epochs_per_round: 1,
            batch_size: 16,
            samples_per_epoch: 1000,
            adam: AdamConfig::default(),
        }
    }
}

pub fn client_seed(run_seed: u64, client_id: usize) -> u64 {
    seed::derive(run_seed, "client", client_id as u64)
}

pub fn global_init_seed(run_seed: u64) -> u64 {
    seed::derive(run_seed, "global-init", 0)
}

pub fn ring_init_seed(run_seed: u64, client_id: usize) -> u64 {
    seed::derive(run_seed, "ring-init", client_id as u64)
}

#[derive(Debug, Clone)]
pub struct ClientState {
    pub client_id: usize,
    pub node: NodeId,
    pub spec: CircuitSpec,
    pub weights: WeightVector,
    pub optimizer: Adam,
    pub shard: ClientShard,
    /// Seed for this client's epoch sampling.
    pub seed: u64,
    pub epochs_done: u64,
    /// Weights this client is evaluated with: the distributed global prefix
    /// (star) or its own locally trained weights (ring).
    pub model_weights: WeightVector,
}

impl ClientState {
    pub fn new(
        node: &NodeSpec,
        spec: CircuitSpec,
        shard: ClientShard,
        weights: WeightVector,
        adam: AdamConfig,
        seed: u64,
    ) -> Result<Self> {
        node.admit(&spec)?;
        if weights.len() != spec.weight_count() {
            return Err(Error::Shape(format!(
                "client {} needs {} weights, got {}",
                shard.client_id,
                spec.weight_count(),
                weights.len()
            )));
        }
        if shard.train.is_empty() || shard.test.is_empty() {
            return Err(Error::Usage(format!(
                "client {} has an empty train or test set",
                shard.client_id
            )));
        }
        if shard.train.num_features() != spec.num_features {
            return Err(Error::Shape(format!(
                "client {} circuit takes {} features, shard rows have {}",
                shard.client_id,
                spec.num_features,
                shard.train.num_features()
            )));
        }
        Ok(ClientState {
            client_id: shard.client_id,
            node: node.id,
            optimizer: Adam::new(spec.weight_count(), adam),
            model_weights: weights.clone(),
            spec,
            weights,
            shard,
            seed,
            epochs_done: 0,
        })
    }

    pub fn layout(&self) -> WeightLayout {
        self.spec.layout()
    }

    fn set_weights(&mut self, w: WeightVector) -> Result<()> {
        if w.len() != self.spec.weight_count() {
            return Err(Error::Invariant(format!(
                "client {} received {} weights, needs {}",
                self.client_id,
                w.len(),
                self.spec.weight_count()
            )));
        }
        self.weights = w;
        Ok(())
    }

    pub fn test_stats(&self) -> Result<vqc::EvalStats> {
        vqc::evaluate(
            &self.spec,
            &self.model_weights,
            &self.shard.test.features,
            &self.shard.test.labels,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalStats {
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub max_norm_error: f64,
}

/// Trains `client` for `schedule.epochs_per_round` epochs of mini-batch Adam.
/// Train loss and accuracy are measured after the update on the last
/// epoch's samples.
pub fn local_train_round(client: &mut ClientState, schedule: &TrainSchedule) -> Result<LocalStats> {
    let train = &client.shard.train;
    if train.is_empty() {
        return Err(Error::Usage(format!("client {} has no training data", client.client_id)));
    }
    if schedule.batch_size == 0 {
        return Err(Error::Usage("batch size must be positive".into()));
    }
    let k = schedule.samples_per_epoch.min(train.len());
    let mut last = None;
    for _ in 0..schedule.epochs_per_round {
        let idx = epoch_indices(train.len(), k, client.seed, client.epochs_done)?;
        for chunk in idx.chunks(schedule.batch_size) {
            let batch: Vec<(&[f64], u8)> = chunk
                .iter()
                .map(|&i| (train.features[i].as_slice(), train.labels[i]))
                .collect();
            let grad = vqc::gradient(&client.spec, &client.weights, &batch)?;
            client.optimizer.step(&mut client.weights.0, &grad)?;
        }
        client.epochs_done += 1;
        last = Some(idx);
    }
    let idx = match last {
        Some(idx) => idx,
        None => epoch_indices(train.len(), k, client.seed, client.epochs_done)?,
    };
    let rows: Vec<Vec<f64>> = idx.iter().map(|&i| train.features[i].clone()).collect();
    let labels: Vec<u8> = idx.iter().map(|&i| train.labels[i]).collect();
    let stats = vqc::evaluate(&client.spec, &client.weights, &rows, &labels)?;
    Ok(LocalStats {
        train_loss: stats.mean_loss,
        train_accuracy: stats.accuracy,
        max_norm_error: stats.max_norm_error,
    })
}

/// Positionwise mean over the clients long enough to have each position.
pub fn aggregate_star(client_weights: &[&WeightVector]) -> Result<WeightVector> {
    let len = client_weights
        .iter()
        .map(|w| w.len())
        .max()
        .ok_or_else(|| Error::Usage("aggregation over zero clients".into()))?;
    let mut sum = vec![0.0; len];
    let mut count = vec![0usize; len];
    for w in client_weights {
        for (i, &v) in w.0.iter().enumerate() {
            sum[i] += v;
            count[i] += 1;
        }
    }
    Ok(WeightVector(
        sum.into_iter().zip(count).map(|(s, c)| s / c as f64).collect(),
    ))
}

/// First `client_len` entries of the global vector.
pub fn distribute_star(global: &WeightVector, client_len: usize) -> Result<WeightVector> {
    if client_len > global.len() {
        return Err(Error::Invariant(format!(
            "client needs {client_len} weights but the global model has {}",
            global.len()
        )));
    }
    Ok(WeightVector(global.0[..client_len].to_vec()))
}

/// Shrinks to the first `n = own_previous.len()` incoming weights, or pads
/// the incoming weights with the tail of `own_previous`.
pub fn ring_adapt_weights(incoming: &WeightVector, own_previous: &WeightVector) -> WeightVector {
    let n = own_previous.len();
    if incoming.len() >= n {
        WeightVector(incoming.0[..n].to_vec())
    } else {
        let mut out = incoming.0.clone();
        out.extend_from_slice(&own_previous.0[incoming.len()..]);
        WeightVector(out)
    }
}

fn per_layer_get(w: &WeightVector, layout: WeightLayout, layer: usize, qubit: usize) -> Option<f64> {
    (layer < layout.depth && qubit < layout.num_qubits).then(|| w.0[layer * layout.num_qubits + qubit])
}

/// Per-layer variant of [`ring_adapt_weights`]: slot `(layer, qubit)` comes
/// from the sender when it has that slot, otherwise from `own_previous`.
pub fn ring_adapt_per_layer(
    incoming: &WeightVector,
    incoming_layout: WeightLayout,
    own_previous: &WeightVector,
    own_layout: WeightLayout,
) -> WeightVector {
    let mut out = Vec::with_capacity(own_layout.len());
    for layer in 0..own_layout.depth {
        for qubit in 0..own_layout.num_qubits {
            out.push(
                per_layer_get(incoming, incoming_layout, layer, qubit)
                    .unwrap_or(own_previous.0[layer * own_layout.num_qubits + qubit]),
            );
        }
    }
    WeightVector(out)
}

impl Alignment {
    pub fn aggregate(self, items: &[(&WeightVector, WeightLayout)]) -> Result<(WeightVector, WeightLayout)> {
        if items.is_empty() {
            return Err(Error::Usage("aggregation over zero clients".into()));
        }
        match self {
            Alignment::FlatPrefix => {
                let weights: Vec<&WeightVector> = items.iter().map(|(w, _)| *w).collect();
                let global = aggregate_star(&weights)?;
                let widest = items
                    .iter()
                    .map(|(_, l)| *l)
                    .max_by_key(|l| l.len())
                    .expect("non-empty");
                Ok((global, widest))
            }
            Alignment::PerLayer => {
                let layout = WeightLayout {
                    depth: items.iter().map(|(_, l)| l.depth).max().unwrap_or(0),
                    num_qubits: items.iter().map(|(_, l)| l.num_qubits).max().unwrap_or(0),
                };
                let mut out = Vec::with_capacity(layout.len());
                for layer in 0..layout.depth {
                    for qubit in 0..layout.num_qubits {
                        let (mut sum, mut n) = (0.0, 0usize);
                        for (w, l) in items {
                            if let Some(v) = per_layer_get(w, *l, layer, qubit) {
                                sum += v;
                                n += 1;
                            }
                        }
                        out.push(if n == 0 { 0.0 } else { sum / n as f64 });
                    }
                }
                Ok((WeightVector(out), layout))
            }
        }
    }

    pub fn distribute(
        self,
        global: &WeightVector,
        global_layout: WeightLayout,
        target: WeightLayout,
    ) -> Result<WeightVector> {
        match self {
            Alignment::FlatPrefix => distribute_star(global, target.len()),
            Alignment::PerLayer => {
                if target.depth > global_layout.depth || target.num_qubits > global_layout.num_qubits {
                    return Err(Error::Invariant(format!(
                        "client layout {target:?} exceeds global layout {global_layout:?}"
                    )));
                }
                // Every slot exists in the global layout, so the fallback is never read.
                Ok(ring_adapt_per_layer(global, global_layout, &WeightVector::zeros(target.len()), target))
            }
        }
    }

    pub fn adapt(
        self,
        incoming: &WeightVector,
        incoming_layout: WeightLayout,
        own_previous: &WeightVector,
        own_layout: WeightLayout,
    ) -> WeightVector {
        match self {
            Alignment::FlatPrefix => ring_adapt_weights(incoming, own_previous),
            Alignment::PerLayer => ring_adapt_per_layer(incoming, incoming_layout, own_previous, own_layout),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientRoundMetrics {
    pub client_id: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub test_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round_idx: usize,
    pub clients: Vec<ClientRoundMetrics>,
    pub mean_train_loss: f64,
    pub mean_train_accuracy: f64,
    pub mean_test_accuracy: f64,
    /// Messages recorded on the ledger during this round.
    pub messages_sent: u64,
    pub payload_bytes: u64,
    /// Largest `| ||psi|| - 1 |` over all final states evaluated this round.
    pub max_norm_error: f64,
}

impl RoundMetrics {
    fn assemble(
        round_idx: usize,
        local: &[LocalStats],
        test: &[vqc::EvalStats],
        clients: &[ClientState],
        traffic: (u64, u64),
    ) -> RoundMetrics {
        let per_client: Vec<ClientRoundMetrics> = clients
            .iter()
            .zip(local.iter().zip(test))
            .map(|(c, (l, t))| ClientRoundMetrics {
                client_id: c.client_id,
                train_loss: l.train_loss,
                train_accuracy: l.train_accuracy,
                test_accuracy: t.accuracy,
                test_loss: t.mean_loss,
            })
            .collect();
        let k = per_client.len().max(1) as f64;
        RoundMetrics {
            round_idx,
            mean_train_loss: per_client.iter().map(|c| c.train_loss).sum::<f64>() / k,
            mean_train_accuracy: per_client.iter().map(|c| c.train_accuracy).sum::<f64>() / k,
            mean_test_accuracy: per_client.iter().map(|c| c.test_accuracy).sum::<f64>() / k,
            clients: per_client,
            messages_sent: traffic.0,
            payload_bytes: traffic.1,
            max_norm_error: local
                .iter()
                .map(|l| l.max_norm_error)
                .chain(test.iter().map(|t| t.max_norm_error))
                .fold(0.0, f64::max),
        }
    }
}

/// The global model held by a star aggregator.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub weights: WeightVector,
    pub layout: WeightLayout,
}

fn train_all(clients: &mut [ClientState], schedule: &TrainSchedule) -> Result<Vec<LocalStats>> {
    clients
        .par_iter_mut()
        .map(|c| local_train_round(c, schedule))
        .collect()
}

fn test_all(clients: &[ClientState]) -> Result<Vec<vqc::EvalStats>> {
    clients.par_iter().map(ClientState::test_stats).collect()
}

/// Local training, upload, aggregation, download.
pub fn run_star_round(
    clients: &mut [ClientState],
    global: &mut GlobalModel,
    topology: &NetworkTopology,
    ledger: &mut LinkLedger,
    schedule: &TrainSchedule,
    alignment: Alignment,
    round_idx: usize,
) -> Result<RoundMetrics> {
    if topology.kind != TopologyKind::Star {
        return Err(Error::Usage(format!("star round on a {:?} topology", topology.kind)));
    }
    let hub = topology
        .aggregator()
        .ok_or_else(|| Error::Invariant("star topology without aggregator".into()))?
        .id;
    let before = ledger.totals();
    let local = train_all(clients, schedule)?;

    for c in clients.iter() {
        ledger.send_weights(c.node, hub, c.weights.len())?;
    }
    let uploads: Vec<(&WeightVector, WeightLayout)> =
        clients.iter().map(|c| (&c.weights, c.layout())).collect();
    let (weights, layout) = alignment.aggregate(&uploads)?;
    *global = GlobalModel { weights, layout };
    for c in clients.iter_mut() {
        let w = alignment.distribute(&global.weights, global.layout, c.layout())?;
        ledger.send_weights(hub, c.node, w.len())?;
        c.set_weights(w)?;
        c.model_weights = c.weights.clone();
    }

    let test = test_all(clients)?;
    let after = ledger.totals();
    Ok(RoundMetrics::assemble(
        round_idx,
        &local,
        &test,
        clients,
        (
            after.messages_sent - before.messages_sent,
            after.payload_bytes - before.payload_bytes,
        ),
    ))
}

/// Local training, then simultaneous hand-off of every client's trained
/// weights to its ring successor. `clients[i]` must sit on ring node `i`.
pub fn run_ring_round(
    clients: &mut [ClientState],
    topology: &NetworkTopology,
    ledger: &mut LinkLedger,
    schedule: &TrainSchedule,
    alignment: Alignment,
    round_idx: usize,
) -> Result<RoundMetrics> {
    if topology.kind != TopologyKind::Ring {
        return Err(Error::Usage(format!("ring round on a {:?} topology", topology.kind)));
    }
    let before = ledger.totals();
    let local = train_all(clients, schedule)?;
    for c in clients.iter_mut() {
        c.model_weights = c.weights.clone();
    }
    // Test accuracy uses each client's own trained weights.
    let test = test_all(clients)?;

    let trained: Vec<(WeightVector, WeightLayout, NodeId)> = clients
        .iter()
        .map(|c| (c.weights.clone(), c.layout(), c.node))
        .collect();
    let k = clients.len();
    for (i, (weights, layout, node)) in trained.iter().enumerate() {
        let to = topology
            .successor(*node)
            .ok_or_else(|| Error::Invariant(format!("{node} has no ring successor")))?;
        let receiver = (i + 1) % k;
        if clients[receiver].node != to {
            return Err(Error::Invariant(format!(
                "client order does not follow the ring: {node} -> {to}"
            )));
        }
        ledger.send_weights(*node, to, weights.len())?;
        let own = &trained[receiver];
        let adapted = alignment.adapt(weights, *layout, &own.0, own.1);
        clients[receiver].set_weights(adapted)?;
    }
    let after = ledger.totals();
    Ok(RoundMetrics::assemble(
        round_idx,
        &local,
        &test,
        clients,
        (
            after.messages_sent - before.messages_sent,
            after.payload_bytes - before.payload_bytes,
        ),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalEvaluation {
    pub per_client: Vec<f64>,
    pub mean: f64,
}

/// Each client's test accuracy with its evaluated weights, and their unweighted mean.
pub fn evaluate_final(clients: &[ClientState]) -> Result<FinalEvaluation> {
    let per_client = test_all(clients)?
        .into_iter()
        .map(|s| s.accuracy)
        .collect::<Vec<_>>();
    let mean = per_client.iter().sum::<f64>() / per_client.len().max(1) as f64;
    Ok(FinalEvaluation { per_client, mean })
}

/// A federation ready to run: topology, clients in node order, ledger.
#[derive(Debug, Clone)]
pub struct Federation {
    pub topology: NetworkTopology,
    pub clients: Vec<ClientState>,
    pub ledger: LinkLedger,
    pub schedule: TrainSchedule,
    pub alignment: Alignment,
    pub global: Option<GlobalModel>,
    pub rounds_done: usize,
}

impl Federation {
    /// Builds clients on the topology's client nodes.
    ///
    /// Star clients start from the distributed prefix of a global model
    /// initialized from the run seed; ring clients are initialized
    /// independently.
    pub fn new(
        topology: NetworkTopology,
        specs: Vec<CircuitSpec>,
        shards: Vec<ClientShard>,
        schedule: TrainSchedule,
        alignment: Alignment,
        run_seed: u64,
    ) -> Result<Self> {
        let nodes: Vec<NodeSpec> = topology.clients().cloned().collect();
        if nodes.len() != specs.len() || nodes.len() != shards.len() {
            return Err(Error::Usage(format!(
                "{} client nodes, {} circuits, {} shards",
                nodes.len(),
                specs.len(),
                shards.len()
            )));
        }
        let mut global = None;
        let mut clients = Vec::with_capacity(nodes.len());
        match topology.kind {
            TopologyKind::Star => {
                let layouts: Vec<WeightLayout> = specs.iter().map(CircuitSpec::layout).collect();
                let layout = match alignment {
                    Alignment::FlatPrefix => *layouts.iter().max_by_key(|l| l.len()).expect("clients"),
                    Alignment::PerLayer => WeightLayout {
                        depth: layouts.iter().map(|l| l.depth).max().unwrap_or(0),
                        num_qubits: layouts.iter().map(|l| l.num_qubits).max().unwrap_or(0),
                    },
                };
                let g = GlobalModel {
                    weights: WeightVector::random(layout.len(), global_init_seed(run_seed)),
                    layout,
                };
                for ((node, spec), shard) in nodes.iter().zip(specs).zip(shards) {
                    let w = alignment.distribute(&g.weights, g.layout, spec.layout())?;
                    let id = shard.client_id;
                    clients.push(ClientState::new(node, spec, shard, w, schedule.adam, client_seed(run_seed, id))?);
                }
                global = Some(g);
            }
            TopologyKind::Ring => {
                for ((node, spec), shard) in nodes.iter().zip(specs).zip(shards) {
                    let id = shard.client_id;
                    let w = WeightVector::random(spec.weight_count(), ring_init_seed(run_seed, id));
                    clients.push(ClientState::new(node, spec, shard, w, schedule.adam, client_seed(run_seed, id))?);
                }
            }
            TopologyKind::Arbitrary => {
                return Err(Error::Usage(
                    "arbitrary topologies are representable but not executable".into(),
                ))
            }
        }
        Ok(Federation {
            ledger: LinkLedger::new(&topology),
            topology,
            clients,
            schedule,
            alignment,
            global,
            rounds_done: 0,
        })
    }

    pub fn run_round(&mut self) -> Result<RoundMetrics> {
        let round_idx = self.rounds_done;
        let metrics = match self.global.as_mut() {
            Some(global) => run_star_round(
                &mut self.clients,
                global,
                &self.topology,
                &mut self.ledger,
                &self.schedule,
                self.alignment,
                round_idx,
            )?,
            None => run_ring_round(
                &mut self.clients,
                &self.topology,
                &mut self.ledger,
                &self.schedule,
                self.alignment,
                round_idx,
            )?,
        };
        self.rounds_done += 1;
        Ok(metrics)
    }

    pub fn run(&mut self, rounds: usize) -> Result<Vec<RoundMetrics>> {
        (0..rounds).map(|_| self.run_round()).collect()
    }

    pub fn evaluate_final(&self) -> Result<FinalEvaluation> {
        evaluate_final(&self.clients)
    }
}
