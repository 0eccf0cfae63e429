mod common;

use qfl_core::data::{generate_moons, partition_for_clients, ClientShard, Dataset};
use qfl_core::encode::{EmbeddingKind, FeatureScaler};
use qfl_core::fedcore::{
    self, aggregate_star, ring_adapt_weights, Alignment, Federation, RoundMetrics, TrainSchedule,
};
use qfl_core::netmodel::{build_ring, build_star, BYTES_PER_WEIGHT};
use qfl_core::trainers::train_quantum_baseline;
use qfl_core::vqc::{CircuitSpec, WeightVector};
use qfl_core::Error;

fn scaled(ds: &Dataset, scaler: &FeatureScaler) -> Dataset {
    Dataset::new(ds.name.clone(), scaler.transform(&ds.features), ds.labels.clone(), None).unwrap()
}

fn moons_shards(n: usize, clients: usize, seed: u64) -> Vec<ClientShard> {
    let ds = generate_moons(n, 0.1, seed).unwrap();
    partition_for_clients(&ds, clients, seed)
        .unwrap()
        .into_iter()
        .map(|s| {
            let scaler = FeatureScaler::fit(&s.train.features, 0.0, std::f64::consts::PI).unwrap();
            ClientShard {
                client_id: s.client_id,
                train: scaled(&s.train, &scaler),
                test: scaled(&s.test, &scaler),
            }
        })
        .collect()
}

fn small_schedule() -> TrainSchedule {
    TrainSchedule {
        samples_per_epoch: 48,
        batch_size: 8,
        ..TrainSchedule::default()
    }
}

fn angle_spec(depth: usize) -> CircuitSpec {
    CircuitSpec::new(2, depth, EmbeddingKind::Angle, 2).unwrap()
}

fn assert_norms(rounds: &[RoundMetrics]) {
    for r in rounds {
        assert!(r.max_norm_error < 1e-10, "round {}: norm error {}", r.round_idx, r.max_norm_error);
    }
}

#[test]
fn one_client_star_reproduces_solo_training() {
    let shard = moons_shards(300, 1, 11).remove(0);
    let spec = angle_spec(4);
    let schedule = small_schedule();
    let solo = train_quantum_baseline(spec, shard.clone(), &schedule, 5, 99).unwrap();

    let mut fed = Federation::new(
        build_star(&[2], 0).unwrap(),
        vec![spec],
        vec![shard],
        schedule,
        Alignment::FlatPrefix,
        99,
    )
    .unwrap();
    let rounds = fed.run(5).unwrap();
    assert_norms(&rounds);
    for (a, b) in rounds.iter().zip(&solo.rounds) {
        assert_eq!(a.clients, b.clients);
    }
    assert_eq!(fed.clients[0].weights.0, solo.final_params);
    assert_eq!(fed.evaluate_final().unwrap().mean, solo.final_test_accuracy);
}

#[test]
fn homogeneous_star_aggregation_is_the_elementwise_mean() {
    let mut rng = qfl_core::seed::rng(5);
    use rand::Rng;
    for k in 1..=6 {
        let vectors: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..40).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let refs: Vec<WeightVector> = vectors.iter().cloned().map(WeightVector).collect();
        let borrowed: Vec<&WeightVector> = refs.iter().collect();
        let got = aggregate_star(&borrowed).unwrap();
        for (a, b) in got.0.iter().zip(common::brute_force_mean(&vectors)) {
            assert!((a - b).abs() <= 1e-15);
        }
    }
}

#[test]
fn star_with_identical_clients_keeps_weights() {
    let a = WeightVector(vec![0.1, -0.2, 0.3]);
    let mean = aggregate_star(&[&a, &a, &a]).unwrap();
    for (m, x) in mean.0.iter().zip(&a.0) {
        assert!((m - x).abs() <= 1e-15);
    }
}

fn sorted_bits(ws: &[WeightVector]) -> Vec<Vec<u64>> {
    let mut v: Vec<Vec<u64>> = ws.iter().map(|w| w.0.iter().map(|x| x.to_bits()).collect()).collect();
    v.sort();
    v
}

#[test]
fn homogeneous_ring_rotates_weights() {
    let shards = moons_shards(300, 3, 4);
    let mut fed = Federation::new(
        build_ring(&[2, 2, 2]).unwrap(),
        vec![angle_spec(3); 3],
        shards,
        small_schedule(),
        Alignment::FlatPrefix,
        4,
    )
    .unwrap();
    for _ in 0..3 {
        let metrics = fed.run_round().unwrap();
        assert_norms(std::slice::from_ref(&metrics));
        let trained: Vec<WeightVector> = fed.clients.iter().map(|c| c.model_weights.clone()).collect();
        let now: Vec<WeightVector> = fed.clients.iter().map(|c| c.weights.clone()).collect();
        for i in 0..3 {
            assert_eq!(now[(i + 1) % 3], trained[i]);
        }
        assert_eq!(sorted_bits(&now), sorted_bits(&trained));
    }
}

#[test]
fn ring_adaptation_matches_reference_for_table_lengths() {
    let lengths = [16usize, 40, 60, 100];
    for &sender in &lengths {
        for &receiver in &lengths {
            let incoming: Vec<f64> = (0..sender).map(|i| 1000.0 + i as f64).collect();
            let own: Vec<f64> = (0..receiver).map(|i| -(i as f64) - 1.0).collect();
            let got = ring_adapt_weights(&WeightVector(incoming.clone()), &WeightVector(own.clone()));
            assert_eq!(got.0, common::reference_ring_adapt(&incoming, &own));
            assert_eq!(got.len(), receiver);
            let kept = sender.min(receiver);
            assert_eq!(&got.0[..kept], &incoming[..kept]);
            assert_eq!(&got.0[kept..], &own[kept..]);
        }
    }
}

fn heterogeneous_image_like_shards(features: &[usize]) -> Vec<ClientShard> {
    let mut rng = qfl_core::seed::rng(123);
    use rand::Rng;
    features
        .iter()
        .enumerate()
        .map(|(client_id, &f)| {
            let mut make = |n: usize| {
                let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
                let rows = labels
                    .iter()
                    .map(|&y| (0..f).map(|j| rng.random_range(0.05..1.0) + if (j % 2) as u8 == y { 0.5 } else { 0.0 }).collect())
                    .collect();
                Dataset::new(format!("task{client_id}"), rows, labels, None).unwrap()
            };
            ClientShard { client_id, train: make(24), test: make(8) }
        })
        .collect()
}

#[test]
fn heterogeneous_federations_keep_each_client_length() {
    let qubits = [2usize, 3, 4];
    let specs: Vec<CircuitSpec> = qubits
        .iter()
        .map(|&q| CircuitSpec::new(q, 2 + q % 2, EmbeddingKind::Amplitude, 1 << q).unwrap())
        .collect();
    let features: Vec<usize> = qubits.iter().map(|&q| 1 << q).collect();
    for alignment in [Alignment::FlatPrefix, Alignment::PerLayer] {
        for star in [true, false] {
            let topo = if star {
                build_star(&qubits, 0).unwrap()
            } else {
                build_ring(&qubits).unwrap()
            };
            let mut fed = Federation::new(
                topo,
                specs.clone(),
                heterogeneous_image_like_shards(&features),
                small_schedule(),
                alignment,
                8,
            )
            .unwrap();
            let rounds = fed.run(3).unwrap();
            assert_norms(&rounds);
            for (c, s) in fed.clients.iter().zip(&specs) {
                assert_eq!(c.weights.len(), s.weight_count());
            }
            let k = qubits.len() as u64;
            let weights: u64 = specs.iter().map(|s| s.weight_count() as u64).sum();
            for r in &rounds {
                if star {
                    assert_eq!(r.messages_sent, 2 * k);
                    assert_eq!(r.payload_bytes, 2 * weights * BYTES_PER_WEIGHT as u64);
                } else {
                    assert_eq!(r.messages_sent, k);
                    assert_eq!(r.payload_bytes, weights * BYTES_PER_WEIGHT as u64);
                }
            }
        }
    }
}

#[test]
fn ledger_counts_follow_the_protocol() {
    let shards = moons_shards(300, 3, 1);
    let spec = angle_spec(8);
    let mut star = Federation::new(
        build_star(&[2, 2, 2], 0).unwrap(),
        vec![spec; 3],
        shards.clone(),
        small_schedule(),
        Alignment::FlatPrefix,
        1,
    )
    .unwrap();
    let rounds = star.run(4).unwrap();
    assert_norms(&rounds);
    assert!(rounds.iter().all(|r| r.messages_sent == 6 && r.payload_bytes == 768));
    assert_eq!(star.ledger.totals().messages_sent, 24);

    let mut ring = Federation::new(
        build_ring(&[2, 2, 2]).unwrap(),
        vec![spec; 3],
        shards,
        small_schedule(),
        Alignment::FlatPrefix,
        1,
    )
    .unwrap();
    let rounds = ring.run(4).unwrap();
    assert_norms(&rounds);
    assert!(rounds.iter().all(|r| r.messages_sent == 3 && r.payload_bytes == 384));
    assert_eq!(ring.ledger.totals().payload_bytes, 4 * 384);
}

#[test]
fn zero_epoch_star_round_leaves_weights_in_place() {
    let shards = moons_shards(200, 2, 3);
    let schedule = TrainSchedule {
        epochs_per_round: 0,
        ..small_schedule()
    };
    let mut fed = Federation::new(
        build_star(&[2, 2], 0).unwrap(),
        vec![angle_spec(2); 2],
        shards,
        schedule,
        Alignment::FlatPrefix,
        3,
    )
    .unwrap();
    let before = fed.clients[0].weights.clone();
    fed.run(2).unwrap();
    for c in &fed.clients {
        for (a, b) in c.weights.0.iter().zip(&before.0) {
            assert!((a - b).abs() <= 1e-15);
        }
    }
}

#[test]
fn training_lowers_loss_on_moons() {
    let shards = moons_shards(600, 2, 21);
    let mut fed = Federation::new(
        build_star(&[2, 2], 0).unwrap(),
        vec![angle_spec(4); 2],
        shards,
        TrainSchedule {
            samples_per_epoch: 200,
            ..TrainSchedule::default()
        },
        Alignment::FlatPrefix,
        21,
    )
    .unwrap();
    let rounds = fed.run(6).unwrap();
    let first = rounds.first().unwrap().mean_train_loss;
    let last = rounds.last().unwrap().mean_train_loss;
    assert!(last < first, "loss went from {first} to {last}");
    assert!(rounds.last().unwrap().mean_test_accuracy > 0.7);
}

#[test]
fn capacity_is_enforced_on_admission() {
    let shards = heterogeneous_image_like_shards(&[16, 16]);
    let spec = CircuitSpec::new(4, 1, EmbeddingKind::Amplitude, 16).unwrap();
    let err = Federation::new(
        build_star(&[4, 3], 0).unwrap(),
        vec![spec; 2],
        shards,
        small_schedule(),
        Alignment::FlatPrefix,
        0,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Capacity(_)));
}

#[test]
fn seeds_are_distinct_per_client() {
    assert_ne!(fedcore::client_seed(1, 0), fedcore::client_seed(1, 1));
    assert_ne!(fedcore::client_seed(1, 0), fedcore::client_seed(2, 0));
    assert_ne!(fedcore::ring_init_seed(1, 0), fedcore::global_init_seed(1));
}
