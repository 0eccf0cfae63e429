mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use qfl_core::data::images::{binary_task, ImageSet};
use qfl_core::data::{epoch_indices, generate_moons, make_binary_subset, partition_for_clients, resize_image, Dataset};
use qfl_core::encode::FeatureScaler;

fn indexed(n: usize) -> Dataset {
    Dataset::new(
        "ids",
        (0..n).map(|i| vec![i as f64]).collect(),
        (0..n).map(|i| (i % 2) as u8).collect(),
        None,
    )
    .unwrap()
}

fn ids(ds: &Dataset) -> Vec<usize> {
    ds.features.iter().map(|r| r[0] as usize).collect()
}

proptest! {
    #[test]
    fn partition_is_disjoint_and_exhaustive(n in 10usize..400, k in 1usize..6, seed in any::<u64>()) {
        prop_assume!(n - n * 4 / 5 >= k);
        let shards = partition_for_clients(&indexed(n), k, seed).unwrap();
        prop_assert_eq!(shards.len(), k);
        let mut all = Vec::new();
        let mut train_total = 0;
        for s in &shards {
            let train: BTreeSet<usize> = ids(&s.train).into_iter().collect();
            let test: BTreeSet<usize> = ids(&s.test).into_iter().collect();
            prop_assert!(train.is_disjoint(&test));
            train_total += s.train.len();
            all.extend(ids(&s.train));
            all.extend(ids(&s.test));
        }
        prop_assert_eq!(train_total, n * 4 / 5);
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = shards.iter().map(|s| s.train.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn epoch_draws_are_distinct(rows in 1usize..3000, frac in 0.0f64..=1.0, seed in any::<u64>(), epoch in 0u64..50) {
        let k = ((rows as f64) * frac) as usize;
        let idx = epoch_indices(rows, k, seed, epoch).unwrap();
        prop_assert_eq!(idx.len(), k);
        let set: BTreeSet<usize> = idx.iter().copied().collect();
        prop_assert_eq!(set.len(), k);
        prop_assert!(idx.iter().all(|&i| i < rows));
        prop_assert_eq!(idx, epoch_indices(rows, k, seed, epoch).unwrap());
    }

    #[test]
    fn resize_matches_reference_and_stays_in_range(
        h in 1usize..12, w in 1usize..12, oh in 1usize..12, ow in 1usize..12, seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = qfl_core::seed::rng(seed);
        let img: Vec<f64> = (0..h * w).map(|_| rng.random_range(-2.0..3.0)).collect();
        let out = resize_image(&img, h, w, oh, ow);
        let reference = common::reference_bilinear(&img, h, w, oh, ow);
        let lo = img.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = img.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (a, b) in out.iter().zip(&reference) {
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(*a >= lo - 1e-9 && *a <= hi + 1e-9);
        }
    }

    #[test]
    fn scaler_maps_train_rows_into_range(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 1..30)) {
        let s = FeatureScaler::fit(&rows, 0.0, std::f64::consts::PI).unwrap();
        for r in s.transform(&rows) {
            prop_assert!(r.iter().all(|&x| (0.0..=std::f64::consts::PI).contains(&x)));
        }
    }
}

#[test]
fn resize_28_to_8_samples_corners() {
    let img: Vec<f64> = (0..784).map(|i| i as f64).collect();
    let out = resize_image(&img, 28, 28, 8, 8);
    assert_eq!(out[0], 0.0);
    assert_eq!(out[7], 27.0);
    assert_eq!(out[63], 783.0);
    for (a, b) in out.iter().zip(common::reference_bilinear(&img, 28, 28, 8, 8)) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn moons_follow_the_two_arc_layout() {
    let ds = generate_moons(3000, 0.0, 1).unwrap();
    assert_eq!(ds.class_counts(), [1500, 1500]);
    for (x, &y) in ds.features.iter().zip(&ds.labels) {
        let r = if y == 0 {
            (x[0] * x[0] + x[1] * x[1]).sqrt()
        } else {
            ((x[0] - 1.0).powi(2) + (x[1] - 0.5).powi(2)).sqrt()
        };
        assert!((r - 1.0).abs() < 1e-12);
        if y == 0 {
            assert!(x[1] >= -1e-12);
        } else {
            assert!(x[1] <= 0.5 + 1e-12);
        }
    }
    let noisy = generate_moons(3000, 0.1, 1).unwrap();
    assert_eq!(noisy, generate_moons(3000, 0.1, 1).unwrap());
    assert_ne!(noisy, generate_moons(3000, 0.1, 2).unwrap());
}

#[test]
fn binary_subsets_keep_only_the_pair() {
    let labels: Vec<u8> = (0..100).map(|i| (i % 10) as u8).collect();
    let images: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 + 1.0; 4]).collect();
    let ds = make_binary_subset("dress-coat", &images, &labels, 3, 4, Some((2, 2))).unwrap();
    assert_eq!(ds.len(), 20);
    assert_eq!(ds.class_counts(), [10, 10]);
    let set = ImageSet { pixels: images, labels, height: 2, width: 2 };
    let task = binary_task(&set, "trouser-pullover", (1, 2), 1, Some(5)).unwrap();
    assert_eq!(task.len(), 5);
    assert_eq!(task.num_features(), 1);
    assert_eq!(task.labels, vec![0, 1, 0, 1, 0]);
}
