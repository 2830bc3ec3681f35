use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ranking::{Dataset, QueryGroup};

/// Shape of a synthetic ranking dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub queries: usize,
    /// Inclusive range of documents per query.
    pub docs_per_query: (usize, usize),
    pub features: usize,
    /// Probability that a label is replaced by a uniform draw from `0..=4`.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            queries: 2000,
            docs_per_query: (10, 30),
            features: 20,
            label_noise: 0.1,
            seed: 42,
        }
    }
}

/// Fraction of documents below each label boundary (labels 1, 2, 3 and 4).
const LABEL_QUANTILES: [f64; 4] = [0.50, 0.75, 0.90, 0.97];

/// Generates a learnable ranking dataset.
///
/// Features are uniform on `[0, 1)`. A hidden linear score over a random third
/// of the features is cut at global quantiles into graded labels `0..=4`, then
/// each label is replaced by a uniform grade with probability `label_noise`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    let (lo, hi) = cfg.docs_per_query;
    if cfg.queries == 0 || cfg.features == 0 || lo == 0 || lo > hi {
        return Err(Error::contract(format!(
            "synthetic data needs positive sizes, got {} queries, {lo}..={hi} docs, {} features",
            cfg.queries, cfg.features
        )));
    }
    if !(0.0..=1.0).contains(&cfg.label_noise) {
        return Err(Error::contract(format!("label noise {} outside [0, 1]", cfg.label_noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let f = cfg.features;
    let informative = (f / 3).max(1);
    let mut weights = vec![0.0; f];
    for slot in rand::seq::index::sample(&mut rng, f, informative) {
        weights[slot] = rng.sample::<f64, _>(StandardNormal);
    }

    let mut sizes = Vec::with_capacity(cfg.queries);
    let mut features = Vec::with_capacity(cfg.queries);
    let mut latent = Vec::new();
    for _ in 0..cfg.queries {
        let n = rng.random_range(lo..=hi);
        let x: Vec<f64> = (0..n * f).map(|_| rng.random::<f64>()).collect();
        latent.extend(x.chunks(f).map(|row| row.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>()));
        sizes.push(n);
        features.push(x);
    }

    let mut sorted = latent.clone();
    sorted.sort_by(f64::total_cmp);
    let thresholds = LABEL_QUANTILES.map(|q| sorted[((q * sorted.len() as f64) as usize).min(sorted.len() - 1)]);

    let mut offset = 0;
    let mut groups = Vec::with_capacity(cfg.queries);
    for (q, (n, x)) in sizes.into_iter().zip(features).enumerate() {
        let labels = latent[offset..offset + n]
            .iter()
            .map(|&s| {
                let clean = thresholds.iter().filter(|&&t| s >= t).count() as f64;
                if rng.random::<f64>() < cfg.label_noise {
                    rng.random_range(0..=4) as f64
                } else {
                    clean
                }
            })
            .collect();
        offset += n;
        groups.push(QueryGroup::new((q + 1).to_string(), f, x, labels)?);
    }
    Dataset::new(groups)
}
