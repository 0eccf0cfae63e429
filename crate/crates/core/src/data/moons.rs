use std::f64::consts::PI;

use rand_distr::{Distribution, Normal};

use super::Dataset;
use crate::{seed, Error, Result};

fn linspace_pi(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if n > 1 { PI * i as f64 / (n - 1) as f64 } else { 0.0 })
}

/// Two interleaving half circles. The first `n/2` rows are the outer arc
/// (label 0), the rest the inner arc (label 1). Gaussian noise of standard
/// deviation `noise_sigma` is added to each coordinate.
pub fn generate_moons(n_samples: usize, noise_sigma: f64, seed: u64) -> Result<Dataset> {
    if n_samples < 2 {
        return Err(Error::Usage(format!(
            "moons needs at least 2 samples, got {n_samples}"
        )));
    }
    let noise = Normal::new(0.0, noise_sigma.max(0.0))
        .map_err(|e| Error::Usage(format!("invalid noise level {noise_sigma}: {e}")))?;
    let mut rng = seed::rng(seed::derive(seed, "moons", 0));
    let n_outer = n_samples / 2;
    let n_inner = n_samples - n_outer;

    let mut features = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for t in linspace_pi(n_outer) {
        features.push(vec![t.cos(), t.sin()]);
        labels.push(0);
    }
    for t in linspace_pi(n_inner) {
        features.push(vec![1.0 - t.cos(), 1.0 - t.sin() - 0.5]);
        labels.push(1);
    }
    if noise_sigma > 0.0 {
        for row in &mut features {
            for x in row.iter_mut() {
                *x += noise.sample(&mut rng);
            }
        }
    }
    Dataset::new("moons", features, labels, None)
}
