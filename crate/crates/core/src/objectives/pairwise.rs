use crate::deltas::SwapDeltas;
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::ranking::{check_aligned, worst_case_argsort};

use super::GradientBuffer;

/// One term `weight * ln(1 + exp(-(z_better - z_worse)))` of the pairwise surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairWeight {
    /// The more relevant document.
    pub better: usize,
    pub worse: usize,
    pub weight: f64,
}

/// Sparse pair weights for one query, sorted by `(better, worse)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairwiseWeights {
    entries: Vec<PairWeight>,
}

impl PairwiseWeights {
    pub fn entries(&self) -> &[PairWeight] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Weight of the pair, 0.0 if absent.
    pub fn get(&self, better: usize, worse: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.better, e.worse).cmp(&(better, worse)))
            .map_or(0.0, |idx| self.entries[idx].weight)
    }

    /// Builds weights from raw `(better, worse, w)` samples: duplicates are
    /// summed in sample order, every sum is divided by `draws`, zeros dropped.
    pub(crate) fn from_samples(mut samples: Vec<(usize, usize, f64)>, draws: usize) -> Self {
        // Stable sort keeps the per-pair summation order fixed.
        samples.sort_by_key(|&(i, j, _)| (i, j));
        let mut entries: Vec<PairWeight> = Vec::new();
        for (better, worse, w) in samples {
            match entries.last_mut() {
                Some(last) if last.better == better && last.worse == worse => last.weight += w,
                _ => entries.push(PairWeight {
                    better,
                    worse,
                    weight: w,
                }),
            }
        }
        let draws = draws as f64;
        entries.retain(|e| e.weight != 0.0);
        for e in &mut entries {
            e.weight /= draws;
        }
        PairwiseWeights { entries }
    }
}

/// LambdaMART weights: the metric's swap delta for every pair with
/// `r_better > r_worse`, at the unperturbed worst-case ordering.
pub fn lambdamart_weights(metric: &Metric, scores: &[f64], labels: &[f64]) -> Result<PairwiseWeights> {
    metric.validate()?;
    check_aligned(scores, labels)?;
    metric.check_labels(labels)?;
    let perm = worst_case_argsort(scores, labels)?;
    let deltas = SwapDeltas::new(metric, labels, &perm);
    let n = scores.len();
    let mut samples = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if labels[i] > labels[j] {
                samples.push((i, j, deltas.delta(i, j)));
            }
        }
    }
    Ok(PairwiseWeights::from_samples(samples, 1))
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Overwrites `grad`/`hess` with the surrogate's derivatives; returns its value.
pub(crate) fn accumulate_surrogate(
    weights: &PairwiseWeights,
    scores: &[f64],
    grad: &mut [f64],
    hess: &mut [f64],
) -> f64 {
    grad.fill(0.0);
    hess.fill(0.0);
    let mut value = 0.0;
    for e in &weights.entries {
        let margin = scores[e.better] - scores[e.worse];
        value += e.weight * softplus(-margin);
        let s = sigmoid(-margin);
        grad[e.better] -= e.weight * s;
        grad[e.worse] += e.weight * s;
        let curvature = e.weight * s * (1.0 - s);
        hess[e.better] += curvature;
        hess[e.worse] += curvature;
    }
    value
}

/// Value and derivatives of `sum w * ln(1 + exp(-(z_better - z_worse)))` with
/// the weights held fixed.
pub fn pairwise_surrogate_value_grad(
    weights: &PairwiseWeights,
    scores: &[f64],
) -> Result<(f64, GradientBuffer)> {
    if let Some(z) = scores.iter().find(|z| !z.is_finite()) {
        return Err(Error::contract(format!("non-finite score {z}")));
    }
    let n = scores.len();
    if let Some(e) = weights.entries.iter().find(|e| e.better >= n || e.worse >= n) {
        return Err(Error::contract(format!(
            "pair ({}, {}) out of range for {n} documents",
            e.better, e.worse
        )));
    }
    if let Some(e) = weights.entries.iter().find(|e| !(e.weight.is_finite() && e.weight >= 0.0)) {
        return Err(Error::contract(format!("invalid pair weight {}", e.weight)));
    }
    let mut buf = GradientBuffer::zeros(n);
    let value = accumulate_surrogate(weights, scores, &mut buf.grad, &mut buf.hess);
    Ok((value, buf))
}
