//! Run configuration files (TOML).
//!
//! Unknown keys are rejected. Everything except `name`, `experiment`,
//! `topology`, `capacities`, `depth` and `embedding` has a default.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use qfl_core::data::images::{side_for_qubits, ImageSource};
use qfl_core::encode::EmbeddingKind;
use qfl_core::fedcore::{Alignment, TrainSchedule};
use qfl_core::qsim::MAX_QUBITS;
use qfl_core::trainers::{Activation, MlpSpec};
use qfl_core::vqc::{AdamConfig, CircuitSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Native side length of the image datasets.
pub const NATIVE_SIDE: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Mcsd,
    Mcmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Star,
    Ring,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Mcsd => "mcsd",
            Experiment::Mcmd => "mcmd",
        }
    }
}

impl Topology {
    pub fn as_str(self) -> &'static str {
        match self {
            Topology::Star => "star",
            Topology::Ring => "ring",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MoonsConfig {
    pub samples: usize,
    pub noise: f64,
}

impl Default for MoonsConfig {
    fn default() -> Self {
        MoonsConfig {
            samples: 3000,
            noise: 0.1,
        }
    }
}

/// One binary image task, assigned to the client at the same position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: ImageSource,
    /// Original labels mapped to 0 and 1. Defaults to `[0, 1]` for PneumoniaMNIST.
    #[serde(default)]
    pub classes: Option<[u8; 2]>,
    #[serde(default)]
    pub train_limit: Option<usize>,
    #[serde(default)]
    pub test_limit: Option<usize>,
}

impl DatasetConfig {
    pub fn classes(&self) -> [u8; 2] {
        self.classes.unwrap_or([0, 1])
    }

    pub fn task_name(&self) -> String {
        let [a, b] = self.classes();
        format!("{}-{a}v{b}", self.source.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub quantum: bool,
    pub classical: bool,
    /// Baseline circuit width. Defaults to 2 for moons and to the full-image
    /// width (10 qubits) for image tasks.
    pub qubits: Option<usize>,
    /// Defaults to the clients' depth.
    pub depth: Option<usize>,
    /// Defaults to `[32]` for moons and `[64]` for image tasks.
    pub mlp_hidden: Option<Vec<usize>>,
    pub mlp_activation: Activation,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            quantum: true,
            classical: true,
            qubits: None,
            depth: None,
            mlp_hidden: None,
            mlp_activation: Activation::Relu,
        }
    }
}

fn default_rounds() -> usize {
    30
}
fn default_epochs() -> usize {
    1
}
fn default_batch() -> usize {
    16
}
fn default_samples() -> usize {
    1000
}
fn default_lr() -> f64 {
    0.01
}
fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}
fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Run identifier; outputs go to `<out_dir>/<name>/`.
    pub name: String,
    /// Series label in charts. Defaults to `name`.
    #[serde(default)]
    pub label: Option<String>,
    /// Chart group. Defaults to `<experiment>-<topology>`.
    #[serde(default)]
    pub chart: Option<String>,
    pub experiment: Experiment,
    pub topology: Topology,
    /// Qubit capacity per client; clients run circuits of exactly this width.
    pub capacities: Vec<usize>,
    pub depth: usize,
    pub embedding: EmbeddingKind,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_epochs")]
    pub epochs_per_round: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_samples")]
    pub samples_per_epoch: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub alignment: Alignment,
    #[serde(default)]
    pub moons: MoonsConfig,
    #[serde(default)]
    pub datasets: Vec<DatasetConfig>,
    #[serde(default)]
    pub baseline: BaselineConfig,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses and validates a config from TOML text. `origin` names the source in errors.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(format!("{origin}: {e}")))?;
    cfg.validate().map_err(|e| match e {
        CliError::Config(m) => config_err(format!("{origin}: {m}")),
        other => other,
    })?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

impl RunConfig {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.name.clone())
    }

    pub fn chart(&self) -> String {
        self.chart
            .clone()
            .unwrap_or_else(|| format!("{}-{}", self.experiment.as_str(), self.topology.as_str()))
    }

    pub fn num_clients(&self) -> usize {
        self.capacities.len()
    }

    pub fn schedule(&self) -> TrainSchedule {
        TrainSchedule {
            epochs_per_round: self.epochs_per_round,
            batch_size: self.batch_size,
            samples_per_epoch: self.samples_per_epoch,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                ..AdamConfig::default()
            },
        }
    }

    /// Feature count for a circuit of `qubits` qubits in this experiment.
    pub fn features_for(&self, qubits: usize) -> usize {
        match self.experiment {
            Experiment::Mcsd => 2,
            Experiment::Mcmd => side_for_qubits(qubits, NATIVE_SIDE).pow(2),
        }
    }

    pub fn client_specs(&self) -> Result<Vec<CircuitSpec>> {
        self.capacities
            .iter()
            .enumerate()
            .map(|(i, &q)| {
                CircuitSpec::new(q, self.depth, self.embedding, self.features_for(q))
                    .map_err(|e| config_err(format!("client {i}: {e}")))
            })
            .collect()
    }

    pub fn baseline_qubits(&self) -> usize {
        self.baseline.qubits.unwrap_or(match self.experiment {
            Experiment::Mcsd => 2,
            Experiment::Mcmd => 10,
        })
    }

    pub fn baseline_spec(&self) -> Result<CircuitSpec> {
        let q = self.baseline_qubits();
        CircuitSpec::new(
            q,
            self.baseline.depth.unwrap_or(self.depth),
            self.embedding,
            self.features_for(q),
        )
        .map_err(|e| config_err(format!("baseline: {e}")))
    }

    pub fn mlp_spec(&self) -> MlpSpec {
        let hidden = self.baseline.mlp_hidden.clone().unwrap_or(match self.experiment {
            Experiment::Mcsd => vec![32],
            Experiment::Mcmd => vec![64],
        });
        MlpSpec {
            input_dim: self.features_for(self.baseline_qubits()),
            hidden_dims: hidden,
            activation: self.baseline.mlp_activation,
        }
    }

    /// Identity of everything that affects results: the config with
    /// `seeds`, `data_dir` and `out_dir` removed, as SHA-256 hex.
    pub fn config_hash(&self) -> String {
        let mut identity = self.clone();
        identity.seeds.clear();
        identity.data_dir = PathBuf::new();
        identity.out_dir = PathBuf::new();
        let json = serde_json::to_vec(&identity).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn validate(&self) -> Result<()> {
        let valid_name = !self.name.is_empty()
            && self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            && !self.name.starts_with('.');
        if !valid_name {
            return Err(config_err(format!(
                "name `{}` must be non-empty ASCII letters, digits, `-`, `_` or `.`",
                self.name
            )));
        }
        if let Some(label) = &self.label {
            if label.contains([',', '\n', '\r']) {
                return Err(config_err("label may not contain commas or newlines"));
            }
        }
        let k = self.num_clients();
        match self.topology {
            Topology::Star if k < 1 => return Err(config_err("capacities: a star needs at least one client")),
            Topology::Ring if k < 2 => return Err(config_err("capacities: a ring needs at least two clients")),
            _ => {}
        }
        if let Some(&bad) = self.capacities.iter().find(|&&q| q == 0 || q > MAX_QUBITS) {
            return Err(config_err(format!("capacities: {bad} outside 1..={MAX_QUBITS}")));
        }
        if self.rounds == 0 {
            return Err(config_err("rounds must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(config_err("batch_size must be at least 1"));
        }
        if self.samples_per_epoch == 0 {
            return Err(config_err("samples_per_epoch must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(config_err("learning_rate must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(config_err("seeds must not be empty"));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(config_err("seeds must be distinct"));
        }
        match self.experiment {
            Experiment::Mcsd => {
                if self.capacities.iter().any(|&q| q != self.capacities[0]) {
                    return Err(config_err(format!(
                        "capacities: MCSD clients have equal capacity, got {:?}",
                        self.capacities
                    )));
                }
                if !self.datasets.is_empty() {
                    return Err(config_err("datasets: MCSD runs on moons; remove the datasets list"));
                }
                let test_rows = self.moons.samples - qfl_core::data::train_split_len(self.moons.samples);
                if test_rows < k {
                    return Err(config_err(format!(
                        "moons.samples: {} samples cannot give {k} clients a test row each",
                        self.moons.samples
                    )));
                }
                if !(self.moons.noise.is_finite() && self.moons.noise >= 0.0) {
                    return Err(config_err("moons.noise must be a non-negative number"));
                }
            }
            Experiment::Mcmd => {
                if self.datasets.len() != k {
                    return Err(config_err(format!(
                        "datasets: {} entries for {k} clients",
                        self.datasets.len()
                    )));
                }
                if self.embedding != EmbeddingKind::Amplitude {
                    return Err(config_err("embedding: image tasks need amplitude embedding"));
                }
                for (i, d) in self.datasets.iter().enumerate() {
                    let [a, b] = d.classes();
                    let max = match d.source {
                        ImageSource::FashionMnist => 9,
                        ImageSource::PneumoniaMnist => 1,
                    };
                    if a == b || a > max || b > max {
                        return Err(config_err(format!(
                            "datasets[{i}].classes: [{a}, {b}] is not a pair of distinct labels in 0..={max}"
                        )));
                    }
                    if d.source == ImageSource::FashionMnist && d.classes.is_none() {
                        return Err(config_err(format!("datasets[{i}].classes is required for fashion-mnist")));
                    }
                    if d.train_limit == Some(0) || d.test_limit == Some(0) {
                        return Err(config_err(format!("datasets[{i}]: limits must be positive")));
                    }
                }
            }
        }
        self.client_specs()?;
        if self.baseline.quantum {
            self.baseline_spec()?;
        }
        if self.baseline.classical && self.mlp_spec().hidden_dims.contains(&0) {
            return Err(config_err("baseline.mlp_hidden: layer widths must be positive"));
        }
        Ok(())
    }
}

/// `--data-dir` flag, then the environment override, then the config value.
pub fn resolve_data_dir(cfg: &RunConfig, flag: Option<&Path>, env: Option<&std::ffi::OsStr>) -> PathBuf {
    match (flag, env) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(e)) if !e.is_empty() => PathBuf::from(e),
        _ => cfg.data_dir.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
experiment = "mcsd"
topology = "star"
capacities = [2, 2, 2]
depth = 8
embedding = "angle"
"#;

    #[test]
    fn defaults_apply() {
        let cfg = parse_config(MINIMAL, "inline").unwrap();
        assert_eq!(cfg.rounds, 30);
        assert_eq!(cfg.samples_per_epoch, 1000);
        assert_eq!(cfg.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(cfg.alignment, Alignment::FlatPrefix);
        assert_eq!(cfg.moons, MoonsConfig::default());
        assert_eq!(cfg.mlp_spec().hidden_dims, vec![32]);
        assert_eq!(cfg.baseline_spec().unwrap().weight_count(), 16);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse_config(&format!("{MINIMAL}\nroundz = 3\n"), "inline").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("roundz"), "{err}");
        let err = parse_config(&format!("{MINIMAL}\n[moons]\nnoize = 0.2\n"), "inline").unwrap_err();
        assert!(err.to_string().contains("noize"), "{err}");
    }

    #[test]
    fn mcsd_requires_equal_capacities() {
        let text = MINIMAL.replace("[2, 2, 2]", "[2, 2, 3]");
        let err = parse_config(&text, "inline").unwrap_err();
        assert!(err.to_string().contains("equal capacity"));
    }

    #[test]
    fn angle_embedding_needs_matching_width() {
        let text = MINIMAL.replace("[2, 2, 2]", "[3, 3, 3]");
        let err = parse_config(&text, "inline").unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn hash_ignores_locations_and_seeds() {
        let a = parse_config(MINIMAL, "a").unwrap();
        let mut b = a.clone();
        b.seeds = vec![9];
        b.out_dir = "elsewhere".into();
        assert_eq!(a.config_hash(), b.config_hash());
        b.rounds = 3;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }

    #[test]
    fn data_dir_precedence() {
        let cfg = parse_config(MINIMAL, "a").unwrap();
        let env = std::ffi::OsStr::new("/env");
        assert_eq!(resolve_data_dir(&cfg, Some(Path::new("/flag")), Some(env)), PathBuf::from("/flag"));
        assert_eq!(resolve_data_dir(&cfg, None, Some(env)), PathBuf::from("/env"));
        assert_eq!(resolve_data_dir(&cfg, None, None), PathBuf::from("data"));
    }
}
