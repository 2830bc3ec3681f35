//! Per-iteration gradient providers.
//!
//! Each boosting iteration asks the configured [`Objective`] for first and
//! second derivatives of its loss at the current scores. Pairwise objectives
//! (LambdaMART, YetiRank, YetiLoss) first build [`PairwiseWeights`] and then
//! differentiate the weighted pairwise logistic loss with the weights held
//! fixed. StochasticRank differentiates a Gaussian-smoothed ranking loss
//! directly and supplies no curvature.

mod pairwise;
mod stochastic;
mod yeti;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::ranking::Dataset;

pub use pairwise::{lambdamart_weights, pairwise_surrogate_value_grad, PairWeight, PairwiseWeights};
pub use stochastic::{ccs_boundary_factors, stochasticrank_ccs_gradients, StochasticRankConfig};
pub use yeti::{sample_noise, yetiloss_weights, yetirank_weights, DecayAnchor, Window};

/// Per-document derivatives of the active loss.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl GradientBuffer {
    pub fn zeros(n: usize) -> Self {
        GradientBuffer {
            grad: vec![0.0; n],
            hess: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.grad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grad.is_empty()
    }
}

/// Noise distribution used to randomize orderings when estimating weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothing {
    /// `ln(u / (1 - u))` with `u` uniform on `(0, 1)`.
    Logistic,
    /// Standard normal.
    Gaussian,
    /// No noise: a single deterministic ordering.
    None,
}

impl std::str::FromStr for Smoothing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(Smoothing::Logistic),
            "gaussian" => Ok(Smoothing::Gaussian),
            "none" => Ok(Smoothing::None),
            _ => Err(Error::config(format!("unknown smoothing {s:?}"))),
        }
    }
}

impl fmt::Display for Smoothing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Smoothing::Logistic => "logistic",
            Smoothing::Gaussian => "gaussian",
            Smoothing::None => "none",
        })
    }
}

/// How many noisy orderings to average over, and from which seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    pub distribution: Smoothing,
    pub permutation_count: usize,
    pub seed: u64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            distribution: Smoothing::Logistic,
            permutation_count: 10,
            seed: 0,
        }
    }
}

impl SmoothingConfig {
    fn validate(&self) -> Result<()> {
        if self.permutation_count == 0 {
            return Err(Error::contract("permutation_count must be at least 1"));
        }
        Ok(())
    }

    /// Number of orderings actually sampled: one when there is no noise.
    fn draws(&self) -> usize {
        match self.distribution {
            Smoothing::None => 1,
            _ => self.permutation_count,
        }
    }
}

/// A training objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Squared error against the labels, averaged per query then over queries.
    QueryRmse,
    /// Pairwise logistic loss weighted by the metric's swap deltas at the current scores.
    LambdaMart { metric: Metric },
    /// Pairwise logistic loss over adjacent pairs of noisy orderings, weighted by
    /// label difference and an exponential position decay.
    YetiRank {
        decay: f64,
        anchor: DecayAnchor,
        smoothing: Smoothing,
        permutations: usize,
    },
    /// YetiRank with the weights replaced by the target metric's swap deltas.
    YetiLoss {
        metric: Metric,
        window: Window,
        smoothing: Smoothing,
        permutations: usize,
    },
    /// Gaussian-smoothed ranking loss differentiated by coordinate conditional sampling.
    StochasticRank {
        metric: Metric,
        config: StochasticRankConfig,
    },
}

impl Objective {
    pub fn yetirank() -> Self {
        Objective::YetiRank {
            decay: crate::metrics::DEFAULT_DECAY,
            anchor: DecayAnchor::PairTop,
            smoothing: Smoothing::Logistic,
            permutations: 10,
        }
    }

    pub fn yetiloss(metric: Metric) -> Self {
        Objective::YetiLoss {
            metric,
            window: Window::Within(1),
            smoothing: Smoothing::Logistic,
            permutations: 10,
        }
    }

    pub fn stochasticrank(metric: Metric) -> Self {
        Objective::StochasticRank {
            metric,
            config: StochasticRankConfig::default(),
        }
    }

    /// Metric the objective targets, if any.
    pub fn metric(&self) -> Option<Metric> {
        match *self {
            Objective::QueryRmse | Objective::YetiRank { .. } => None,
            Objective::LambdaMart { metric }
            | Objective::YetiLoss { metric, .. }
            | Objective::StochasticRank { metric, .. } => Some(metric),
        }
    }

    /// False for gradient-only objectives; the booster then uses unit curvature.
    pub fn has_curvature(&self) -> bool {
        !matches!(self, Objective::StochasticRank { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(m) = self.metric() {
            m.validate().map_err(|e| Error::config(e.to_string()))?;
        }
        match *self {
            Objective::YetiRank {
                decay, permutations, ..
            } => {
                if !(decay > 0.0 && decay < 1.0) {
                    return Err(Error::config(format!("YetiRank decay must lie in (0, 1), got {decay}")));
                }
                if permutations == 0 {
                    return Err(Error::config("permutation count must be at least 1"));
                }
            }
            Objective::YetiLoss {
                window,
                permutations,
                ..
            } => {
                window.validate().map_err(|e| Error::config(e.to_string()))?;
                if permutations == 0 {
                    return Err(Error::config("permutation count must be at least 1"));
                }
            }
            Objective::StochasticRank { metric, config } => {
                if metric == Metric::AveragePrecision {
                    return Err(Error::config(
                        "stochasticrank does not support map: no efficient gradient estimate exists for it",
                    ));
                }
                config.validate().map_err(|e| Error::config(e.to_string()))?;
            }
            _ => {}
        }
        Ok(())
    }

    /// Derivatives for one query, written into `grad` and `hess`.
    ///
    /// `query_count` is the number of queries in the training set; `seed`
    /// drives any noise and should differ per query and iteration.
    pub fn query_gradients(
        &self,
        scores: &[f64],
        labels: &[f64],
        query_count: usize,
        seed: u64,
        grad: &mut [f64],
        hess: &mut [f64],
    ) -> Result<()> {
        let smoothing = |distribution, permutation_count| SmoothingConfig {
            distribution,
            permutation_count,
            seed,
        };
        let weights = match *self {
            Objective::QueryRmse => {
                let scale = 2.0 / (query_count as f64 * scores.len() as f64);
                for (i, (&z, &r)) in scores.iter().zip(labels).enumerate() {
                    grad[i] = scale * (z - r);
                    hess[i] = scale;
                }
                return Ok(());
            }
            Objective::StochasticRank { metric, config } => {
                let buf = stochastic::stochasticrank_ccs_seeded(&metric, scores, labels, &config, seed)?;
                grad.copy_from_slice(&buf.grad);
                hess.copy_from_slice(&buf.hess);
                return Ok(());
            }
            Objective::LambdaMart { metric } => lambdamart_weights(&metric, scores, labels)?,
            Objective::YetiRank {
                decay,
                anchor,
                smoothing: dist,
                permutations,
            } => yetirank_weights(scores, labels, decay, anchor, &smoothing(dist, permutations))?,
            Objective::YetiLoss {
                metric,
                window,
                smoothing: dist,
                permutations,
            } => yetiloss_weights(&metric, scores, labels, window, &smoothing(dist, permutations))?,
        };
        pairwise::accumulate_surrogate(&weights, scores, grad, hess);
        Ok(())
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::QueryRmse => f.write_str("query-rmse"),
            Objective::LambdaMart { metric } => write!(f, "lambdamart:{metric}"),
            Objective::YetiRank { .. } => f.write_str("yetirank"),
            Objective::YetiLoss { metric, .. } => write!(f, "yetiloss:{metric}"),
            Objective::StochasticRank { metric, .. } => write!(f, "stochasticrank:{metric}"),
        }
    }
}

/// Mixes a base seed with two stream coordinates (splitmix64 finalizer).
pub fn stream_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut x = base
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F).rotate_left(31);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Gradients for a whole dataset at the given per-query scores.
///
/// Query `q` at iteration `iteration` draws its noise from
/// `stream_seed(seed, q, iteration)`, so results do not depend on evaluation order.
pub fn compute_gradients(
    objective: &Objective,
    dataset: &Dataset,
    scores: &[Vec<f64>],
    seed: u64,
    iteration: u64,
) -> Result<GradientBuffer> {
    let mut buf = GradientBuffer::zeros(dataset.document_count());
    let mut offset = 0;
    for (q, (group, z)) in dataset.groups().iter().zip(scores).enumerate() {
        let n = group.len();
        objective.query_gradients(
            z,
            group.labels(),
            dataset.query_count(),
            stream_seed(seed, q as u64, iteration),
            &mut buf.grad[offset..offset + n],
            &mut buf.hess[offset..offset + n],
        )?;
        offset += n;
    }
    Ok(buf)
}

/// QueryRMSE derivatives for a whole dataset.
pub fn query_rmse_gradients(dataset: &Dataset, scores: &[Vec<f64>]) -> Result<GradientBuffer> {
    compute_gradients(&Objective::QueryRmse, dataset, scores, 0, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::QueryGroup;

    fn dataset(labels: &[&[f64]]) -> Dataset {
        let groups = labels
            .iter()
            .enumerate()
            .map(|(q, l)| QueryGroup::new(q.to_string(), 0, vec![], l.to_vec()).unwrap())
            .collect();
        Dataset::new(groups).unwrap()
    }

    #[test]
    fn query_rmse_examples() {
        let d = dataset(&[&[1.0, 2.0], &[0.0]]);
        let at_labels = query_rmse_gradients(&d, &[vec![1.0, 2.0], vec![0.0]]).unwrap();
        assert!(at_labels.grad.iter().all(|&g| g == 0.0));

        let single = dataset(&[&[0.0]]);
        let g = query_rmse_gradients(&single, &[vec![1.0]]).unwrap();
        assert_eq!(g.grad, vec![2.0]);
        assert_eq!(g.hess, vec![2.0]);

        // Two queries, sizes 2 and 1: N * n_q = 4 and 2.
        let g = query_rmse_gradients(&d, &[vec![0.0, 0.0], vec![3.0]]).unwrap();
        assert_eq!(g.grad, vec![2.0 * -1.0 / 4.0, 2.0 * -2.0 / 4.0, 2.0 * 3.0 / 2.0]);
        assert_eq!(g.hess, vec![0.5, 0.5, 1.0]);
    }

    #[test]
    fn stochasticrank_map_is_rejected() {
        let o = Objective::stochasticrank(Metric::AveragePrecision);
        assert!(matches!(o.validate(), Err(Error::Config(_))));
        assert!(Objective::stochasticrank(Metric::ReciprocalRank).validate().is_ok());
    }

    #[test]
    fn stream_seeds_differ() {
        let a = stream_seed(1, 0, 0);
        assert_ne!(a, stream_seed(1, 1, 0));
        assert_ne!(a, stream_seed(1, 0, 1));
        assert_ne!(a, stream_seed(2, 0, 0));
        assert_eq!(a, stream_seed(1, 0, 0));
    }
}
