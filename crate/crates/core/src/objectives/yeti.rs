//! Smoothed pair weights: YetiRank and its metric-aware variant YetiLoss.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::deltas::SwapDeltas;
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::ranking::{check_aligned, worst_case_order_into, RankPermutation};

use super::{PairwiseWeights, Smoothing, SmoothingConfig};

/// Which position the YetiRank decay `b^(p-1)` is taken at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayAnchor {
    /// The upper of the two adjacent positions. With this anchor the weight of
    /// every pair is exactly `1 / (1 - b)` times its ExpDCG swap delta.
    PairTop,
    /// The position of the more relevant document, whichever half of the pair it occupies.
    MoreRelevant,
}

/// Which pairs of a (noisy) ordering receive weight, by rank distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    /// Rank distance at most `k`.
    Within(usize),
    /// Rank distance exactly `k`.
    Exactly(usize),
    /// Every pair.
    All,
}

impl Window {
    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            Window::Within(0) | Window::Exactly(0) => {
                Err(Error::contract("neighbor window must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    /// Rank distances `d` (1-based) this window admits, given `n` documents.
    fn distances(&self, n: usize) -> std::ops::RangeInclusive<usize> {
        let max = n.saturating_sub(1);
        match *self {
            Window::Within(k) => 1..=k.min(max),
            Window::Exactly(k) => k..=if k <= max { k } else { 0 },
            Window::All => 1..=max,
        }
    }
}

impl FromStr for Window {
    type Err = Error;

    /// `all`, `K` (distance at most K) or `=K` (distance exactly K).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("bad neighbor window {s:?}"));
        let w = match s {
            "all" => Window::All,
            _ => match s.strip_prefix('=') {
                Some(k) => Window::Exactly(k.parse().map_err(|_| bad())?),
                None => Window::Within(s.parse().map_err(|_| bad())?),
            },
        };
        w.validate().map_err(|_| bad())?;
        Ok(w)
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Within(k) => write!(f, "{k}"),
            Window::Exactly(k) => write!(f, "={k}"),
            Window::All => f.write_str("all"),
        }
    }
}

/// Fills `out` with independent noise draws.
pub fn sample_noise<R: Rng + ?Sized>(distribution: Smoothing, rng: &mut R, out: &mut [f64]) {
    match distribution {
        Smoothing::Logistic => out.iter_mut().for_each(|e| {
            let u: f64 = rng.sample(Open01);
            *e = (u / (1.0 - u)).ln();
        }),
        Smoothing::Gaussian => out.iter_mut().for_each(|e| *e = rng.sample(StandardNormal)),
        Smoothing::None => out.fill(0.0),
    }
}

/// Calls `visit` with the worst-case ordering of every noisy score draw.
fn for_each_noisy_ordering(
    scores: &[f64],
    labels: &[f64],
    cfg: &SmoothingConfig,
    mut visit: impl FnMut(&RankPermutation),
) {
    let n = scores.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise = vec![0.0; n];
    let mut perturbed = vec![0.0; n];
    for _ in 0..cfg.draws() {
        sample_noise(cfg.distribution, &mut rng, &mut noise);
        for ((p, &z), &e) in perturbed.iter_mut().zip(scores).zip(&noise) {
            *p = z + e;
        }
        let mut order = Vec::with_capacity(n);
        worst_case_order_into(&perturbed, labels, &mut order);
        visit(&RankPermutation::from_order_unchecked(order));
    }
}

/// YetiRank weights: for adjacent documents of each noisy ordering,
/// `(r_better - r_worse) * b^(p - 1)`, averaged over draws.
pub fn yetirank_weights(
    scores: &[f64],
    labels: &[f64],
    decay: f64,
    anchor: DecayAnchor,
    cfg: &SmoothingConfig,
) -> Result<PairwiseWeights> {
    if !(decay > 0.0 && decay < 1.0) {
        return Err(Error::contract(format!("decay must lie in (0, 1), got {decay}")));
    }
    check_aligned(scores, labels)?;
    cfg.validate()?;
    let mut samples = Vec::new();
    for_each_noisy_ordering(scores, labels, cfg, |perm| {
        let order = perm.order();
        for (top, pair) in order.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            if labels[a] == labels[b] {
                continue;
            }
            let (better, worse) = if labels[a] > labels[b] { (a, b) } else { (b, a) };
            let exponent = match anchor {
                DecayAnchor::PairTop => top,
                DecayAnchor::MoreRelevant => perm.position_of(better) - 1,
            };
            samples.push((better, worse, (labels[better] - labels[worse]) * decay.powi(exponent as i32)));
        }
    });
    Ok(PairwiseWeights::from_samples(samples, cfg.draws()))
}

/// YetiLoss weights: the metric's swap delta at each noisy ordering, for pairs
/// whose rank distance the window admits, averaged over draws.
pub fn yetiloss_weights(
    metric: &Metric,
    scores: &[f64],
    labels: &[f64],
    window: Window,
    cfg: &SmoothingConfig,
) -> Result<PairwiseWeights> {
    metric.validate()?;
    window.validate()?;
    check_aligned(scores, labels)?;
    metric.check_labels(labels)?;
    cfg.validate()?;
    let n = scores.len();
    let mut samples = Vec::new();
    for_each_noisy_ordering(scores, labels, cfg, |perm| {
        let deltas = SwapDeltas::new(metric, labels, perm);
        let order = perm.order();
        for d in window.distances(n) {
            for top in 0..n - d {
                let (a, b) = (order[top], order[top + d]);
                if labels[a] == labels[b] {
                    continue;
                }
                let (better, worse) = if labels[a] > labels[b] { (a, b) } else { (b, a) };
                samples.push((better, worse, deltas.delta(a, b)));
            }
        }
    });
    Ok(PairwiseWeights::from_samples(samples, cfg.draws()))
}
