//! StochasticRank: gradients of a Gaussian-smoothed ranking loss.
//!
//! The smoothed loss is `l(z) = E L(z - mu*r + sigma*eps)` with `L = 1 - M`.
//! Conditional on the noise of every other document, `L` is a step function
//! of one document's score, so its expectation over that document's own noise
//! can be differentiated exactly: each jump contributes its height times the
//! Gaussian density at the jump. This is the coordinate conditional sampling
//! (CCS) estimate; it is unbiased and uses one noise vector per call.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::deltas::slot_metric_sweep;
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::ranking::{check_aligned, worst_case_order_into};

use super::GradientBuffer;

/// Smoothing and Langevin parameters for StochasticRank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StochasticRankConfig {
    /// Noise scale of the smoothing.
    pub sigma: f64,
    /// Label-proportional score shift.
    pub mu: f64,
    /// Per-iteration multiplicative shrinkage of existing trees.
    pub model_shrink_rate: f64,
    /// Gradient noise has standard deviation `sqrt(2 * lr / diffusion_temperature)`.
    pub diffusion_temperature: f64,
}

impl Default for StochasticRankConfig {
    fn default() -> Self {
        StochasticRankConfig {
            sigma: 1.0,
            mu: 0.0,
            model_shrink_rate: 0.0,
            diffusion_temperature: 1e9,
        }
    }
}

impl StochasticRankConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::contract(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::contract(format!("mu must be non-negative, got {}", self.mu)));
        }
        if !(0.0..1.0).contains(&self.model_shrink_rate) {
            return Err(Error::contract(format!(
                "model shrink rate must lie in [0, 1), got {}",
                self.model_shrink_rate
            )));
        }
        if !(self.diffusion_temperature > 0.0) {
            return Err(Error::contract(format!(
                "diffusion temperature must be positive, got {}",
                self.diffusion_temperature
            )));
        }
        Ok(())
    }
}

fn check_inputs(metric: &Metric, scores: &[f64], labels: &[f64], cfg: &StochasticRankConfig, eps: &[f64]) -> Result<()> {
    metric.validate()?;
    cfg.validate()?;
    check_aligned(scores, labels)?;
    metric.check_labels(labels)?;
    if eps.len() != scores.len() {
        return Err(Error::contract(format!(
            "{} noise values for {} documents",
            eps.len(),
            scores.len()
        )));
    }
    if let Some(e) = eps.iter().find(|e| !e.is_finite()) {
        return Err(Error::contract(format!("non-finite noise value {e}")));
    }
    Ok(())
}

/// Shifted scores `z - mu*r` and perturbed scores `z - mu*r + sigma*eps`.
fn shifted(scores: &[f64], labels: &[f64], cfg: &StochasticRankConfig, eps: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let base: Vec<f64> = scores.iter().zip(labels).map(|(&z, &r)| z - cfg.mu * r).collect();
    let noisy = base.iter().zip(eps).map(|(&b, &e)| b + cfg.sigma * e).collect();
    (base, noisy)
}

fn gaussian_factor(distance: f64, sigma: f64) -> f64 {
    (-distance * distance / (2.0 * sigma * sigma)).exp()
}

/// CCS estimate of the smoothed loss gradient for one query and one noise vector.
///
/// For document `i`, let `c_1 >= c_2 >= ...` be the perturbed scores of the
/// other documents and `M_k` the metric with `i` placed directly below the
/// `k`-th of them (`M_0`: on top). Then
/// `g_i = (2 pi sigma^2)^(-1/2) * sum_k exp(-(z_i - mu r_i - c_k)^2 / (2 sigma^2)) * (M_k - M_(k-1))`.
/// Entry `i` of `eps` is not used by `g_i`. Curvature is zero.
pub fn stochasticrank_ccs_gradients(
    metric: &Metric,
    scores: &[f64],
    labels: &[f64],
    cfg: &StochasticRankConfig,
    eps: &[f64],
) -> Result<GradientBuffer> {
    check_inputs(metric, scores, labels, cfg, eps)?;
    let n = scores.len();
    let (base, noisy) = shifted(scores, labels, cfg, eps);
    let mut order = Vec::with_capacity(n);
    worst_case_order_into(&noisy, labels, &mut order);

    let norm = 1.0 / (2.0 * std::f64::consts::PI * cfg.sigma * cfg.sigma).sqrt();
    let mut buf = GradientBuffer::zeros(n);
    let mut others = Vec::with_capacity(n);
    let mut scratch = Vec::with_capacity(n);
    let mut slots = Vec::with_capacity(n);
    for i in 0..n {
        others.clear();
        others.extend(order.iter().copied().filter(|&d| d != i));
        slot_metric_sweep(metric, labels, i, &others, &mut scratch, &mut slots);
        let mut g = 0.0;
        for (k, &other) in others.iter().enumerate() {
            let jump = slots[k + 1] - slots[k];
            if jump != 0.0 {
                g += jump * gaussian_factor(base[i] - noisy[other], cfg.sigma);
            }
        }
        buf.grad[i] = norm * g;
    }
    Ok(buf)
}

/// The Gaussian factors `exp(-(z_i - mu r_i - c_k)^2 / (2 sigma^2))` that weight
/// the jumps of document `doc`'s gradient, as `(other document, factor)` pairs
/// from the top of the perturbed ranking down.
pub fn ccs_boundary_factors(
    metric: &Metric,
    scores: &[f64],
    labels: &[f64],
    cfg: &StochasticRankConfig,
    eps: &[f64],
    doc: usize,
) -> Result<Vec<(usize, f64)>> {
    check_inputs(metric, scores, labels, cfg, eps)?;
    if doc >= scores.len() {
        return Err(Error::contract(format!(
            "document {doc} out of range for {} documents",
            scores.len()
        )));
    }
    let (base, noisy) = shifted(scores, labels, cfg, eps);
    let mut order = Vec::new();
    worst_case_order_into(&noisy, labels, &mut order);
    Ok(order
        .into_iter()
        .filter(|&d| d != doc)
        .map(|d| (d, gaussian_factor(base[doc] - noisy[d], cfg.sigma)))
        .collect())
}

/// CCS gradients with a standard normal noise vector drawn from `seed`.
pub(crate) fn stochasticrank_ccs_seeded(
    metric: &Metric,
    scores: &[f64],
    labels: &[f64],
    cfg: &StochasticRankConfig,
    seed: u64,
) -> Result<GradientBuffer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps: Vec<f64> = (0..scores.len()).map(|_| rng.sample(StandardNormal)).collect();
    stochasticrank_ccs_gradients(metric, scores, labels, cfg, &eps)
}
