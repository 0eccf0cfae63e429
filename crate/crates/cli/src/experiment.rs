//! Builds data, topology and clients from a config and executes one run per seed.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use qfl_core::data::images::{self, binary_task, side_for_qubits, ImageSet, ImageSource, Split};
use qfl_core::data::{generate_moons, partition_for_clients, ClientShard, Dataset};
use qfl_core::encode::{EmbeddingKind, FeatureScaler};
use qfl_core::fedcore::{Federation, RoundMetrics};
use qfl_core::netmodel::{build_ring, build_star, NetworkTopology};
use qfl_core::trainers::{train_mlp, train_quantum_baseline, BaselineRun};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, RunConfig, Topology, NATIVE_SIDE};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCurve {
    pub task: String,
    pub rounds: Vec<RoundMetrics>,
    pub final_test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub from: usize,
    pub to: usize,
    pub messages_sent: u64,
    pub payload_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerTotals {
    pub messages_sent: u64,
    pub payload_bytes: u64,
    pub links: Vec<LinkRecord>,
}

/// Everything recorded for one seed of one config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub rounds: Vec<RoundMetrics>,
    /// Final test accuracy per client with the weights it is evaluated with.
    pub final_test_accuracies: Vec<f64>,
    pub ledger: LedgerTotals,
    pub quantum_baseline: Vec<TaskCurve>,
    pub classical_baseline: Vec<TaskCurve>,
    pub wall_clock_s: f64,
}

impl RunRecord {
    pub fn mean_final_test_accuracy(&self) -> f64 {
        mean(&self.final_test_accuracies)
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Train/test image sets per source, loaded once per run.
type ImageCache = BTreeMap<ImageSource, (ImageSet, ImageSet)>;

fn load_set(data_dir: &Path, source: ImageSource, split: Split) -> Result<ImageSet> {
    images::load(data_dir, source, split).map_err(|e| match e {
        qfl_core::Error::NotFound { .. } => CliError::Data(format!(
            "{}: {e}",
            data_dir.join(images::PNEUMONIA_FILE).display()
        )),
        other => other.into(),
    })
}

fn load_images(cfg: &RunConfig, data_dir: &Path) -> Result<ImageCache> {
    let mut cache = ImageCache::new();
    for d in &cfg.datasets {
        if !cache.contains_key(&d.source) {
            let train = load_set(data_dir, d.source, Split::Train)?;
            let test = load_set(data_dir, d.source, Split::Test)?;
            cache.insert(d.source, (train, test));
        }
    }
    Ok(cache)
}

fn image_tasks(cfg: &RunConfig, cache: &ImageCache, qubits: &[usize]) -> Result<Vec<ClientShard>> {
    cfg.datasets
        .iter()
        .zip(qubits)
        .enumerate()
        .map(|(client_id, (d, &q))| {
            let (train, test) = &cache[&d.source];
            let side = side_for_qubits(q, NATIVE_SIDE);
            let [a, b] = d.classes();
            let name = d.task_name();
            Ok(ClientShard {
                client_id,
                train: binary_task(train, &name, (a, b), side, d.train_limit)?,
                test: binary_task(test, &name, (a, b), side, d.test_limit)?,
            })
        })
        .collect()
}

fn rescale(ds: &Dataset, scaler: &FeatureScaler) -> Dataset {
    Dataset {
        features: scaler.transform(&ds.features),
        ..ds.clone()
    }
}

/// Moons split into `k` shards. For angle embedding each shard is scaled to
/// `[0, pi]` with its own training statistics.
fn moons_shards(cfg: &RunConfig, seed: u64, k: usize) -> Result<Vec<ClientShard>> {
    let ds = generate_moons(cfg.moons.samples, cfg.moons.noise, seed)?;
    let shards = partition_for_clients(&ds, k, seed)?;
    if cfg.embedding != EmbeddingKind::Angle {
        return Ok(shards);
    }
    shards
        .into_iter()
        .map(|s| {
            let scaler = FeatureScaler::fit(&s.train.features, 0.0, std::f64::consts::PI)?;
            Ok(ClientShard {
                client_id: s.client_id,
                train: rescale(&s.train, &scaler),
                test: rescale(&s.test, &scaler),
            })
        })
        .collect()
}

pub fn build_topology(cfg: &RunConfig) -> Result<NetworkTopology> {
    Ok(match cfg.topology {
        Topology::Star => build_star(&cfg.capacities, 0)?,
        Topology::Ring => build_ring(&cfg.capacities)?,
    })
}

/// Data that does not depend on the seed.
struct Prepared {
    client_tasks: Option<Vec<ClientShard>>,
    baseline_tasks: Option<Vec<ClientShard>>,
}

fn prepare(cfg: &RunConfig, data_dir: &Path) -> Result<Prepared> {
    match cfg.experiment {
        Experiment::Mcsd => Ok(Prepared {
            client_tasks: None,
            baseline_tasks: None,
        }),
        Experiment::Mcmd => {
            let cache = load_images(cfg, data_dir)?;
            let client_tasks = image_tasks(cfg, &cache, &cfg.capacities)?;
            let baseline_tasks = if cfg.baseline.quantum || cfg.baseline.classical {
                let q = vec![cfg.baseline_qubits(); cfg.datasets.len()];
                Some(image_tasks(cfg, &cache, &q)?)
            } else {
                None
            };
            Ok(Prepared {
                client_tasks: Some(client_tasks),
                baseline_tasks,
            })
        }
    }
}

fn curve(shard: &ClientShard, run: BaselineRun) -> TaskCurve {
    TaskCurve {
        task: shard.train.name.clone(),
        rounds: run.rounds,
        final_test_accuracy: run.final_test_accuracy,
    }
}

fn run_seed(cfg: &RunConfig, prepared: &Prepared, seed: u64) -> Result<RunRecord> {
    let start = Instant::now();
    let schedule = cfg.schedule();
    let shards = match &prepared.client_tasks {
        Some(tasks) => tasks.clone(),
        None => moons_shards(cfg, seed, cfg.num_clients())?,
    };
    let mut fed = Federation::new(
        build_topology(cfg)?,
        cfg.client_specs()?,
        shards,
        schedule,
        cfg.alignment,
        seed,
    )?;
    let rounds = fed.run(cfg.rounds)?;
    let final_eval = fed.evaluate_final()?;
    let totals = fed.ledger.totals();
    let links = fed
        .topology
        .edges
        .iter()
        .zip(fed.ledger.counters())
        .map(|(e, c)| LinkRecord {
            from: e.0 .0,
            to: e.1 .0,
            messages_sent: c.messages_sent,
            payload_bytes: c.payload_bytes,
        })
        .collect();

    let baseline_tasks = match &prepared.baseline_tasks {
        Some(tasks) => tasks.clone(),
        None if cfg.baseline.quantum || cfg.baseline.classical => moons_shards(cfg, seed, 1)?,
        None => Vec::new(),
    };
    let mut quantum_baseline = Vec::new();
    let mut classical_baseline = Vec::new();
    if cfg.baseline.quantum {
        let spec = cfg.baseline_spec()?;
        for task in &baseline_tasks {
            let run = train_quantum_baseline(spec, task.clone(), &schedule, cfg.rounds, seed)?;
            quantum_baseline.push(curve(task, run));
        }
    }
    if cfg.baseline.classical {
        let spec = cfg.mlp_spec();
        for task in &baseline_tasks {
            let run = train_mlp(spec.clone(), task, &schedule, cfg.rounds, seed)?;
            classical_baseline.push(curve(task, run));
        }
    }
    Ok(RunRecord {
        name: cfg.name.clone(),
        config_hash: cfg.config_hash(),
        seed,
        rounds,
        final_test_accuracies: final_eval.per_client,
        ledger: LedgerTotals {
            messages_sent: totals.messages_sent,
            payload_bytes: totals.payload_bytes,
            links,
        },
        quantum_baseline,
        classical_baseline,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

/// One record per configured seed, in seed order. Seeds run concurrently.
pub fn run_experiment(cfg: &RunConfig, data_dir: &Path) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let prepared = prepare(cfg, data_dir)?;
    cfg.seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, &prepared, seed))
        .collect()
}
