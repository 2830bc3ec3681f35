//! Ranking quality functions.
//!
//! Every metric is evaluated on the ranking produced by
//! [`worst_case_argsort`](crate::ranking::worst_case_argsort), so tied scores
//! never flatter a model. Values are in `[0, 1]` (except raw DCG and ExpDCG);
//! dataset-level reports multiply the mean by 100.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::{check_aligned, worst_case_order_into, Dataset};

/// Decay used by ExpDCG and YetiRank unless configured otherwise.
pub const DEFAULT_DECAY: f64 = 0.85;

/// A ranking quality function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Metric {
    /// Normalized DCG over the top `k` positions (`None` = whole list).
    Ndcg { k: Option<usize> },
    /// DCG with the `2^4` gain normalizer.
    Dcg { k: Option<usize> },
    /// Reciprocal rank of the first relevant document; binary labels.
    ReciprocalRank,
    /// Average precision; binary labels.
    AveragePrecision,
    /// Expected reciprocal rank; labels in `[0, 1]`.
    ExpectedReciprocalRank,
    /// Linear gain with exponential position discount `decay^(i-1)`.
    ExpDcg { decay: f64 },
}

/// Which label scale a metric expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelScale {
    /// Raw graded labels in `[0, 4]`.
    Graded,
    /// `{0, 1}`.
    Binary,
    /// `[0, 1]`.
    Unit,
}

impl Metric {
    pub fn ndcg(k: usize) -> Self {
        Metric::Ndcg { k: Some(k) }
    }

    pub fn label_scale(&self) -> LabelScale {
        match self {
            Metric::Ndcg { .. } | Metric::Dcg { .. } | Metric::ExpDcg { .. } => LabelScale::Graded,
            Metric::ReciprocalRank | Metric::AveragePrecision => LabelScale::Binary,
            Metric::ExpectedReciprocalRank => LabelScale::Unit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Metric::Ndcg { k: Some(0) } | Metric::Dcg { k: Some(0) } => {
                Err(Error::contract("metric cutoff k must be at least 1"))
            }
            Metric::ExpDcg { decay } if !(decay > 0.0 && decay < 1.0) => Err(Error::contract(
                format!("ExpDCG decay must lie in (0, 1), got {decay}"),
            )),
            _ => Ok(()),
        }
    }

    pub(crate) fn check_labels(&self, labels: &[f64]) -> Result<()> {
        let bad = match self {
            Metric::Ndcg { .. } | Metric::Dcg { .. } => {
                labels.iter().find(|&&r| !(0.0..=4.0).contains(&r))
            }
            Metric::ReciprocalRank | Metric::AveragePrecision => {
                labels.iter().find(|&&r| r != 0.0 && r != 1.0)
            }
            Metric::ExpectedReciprocalRank => labels.iter().find(|&&r| !(0.0..=1.0).contains(&r)),
            Metric::ExpDcg { .. } => None,
        };
        match bad {
            Some(r) => Err(Error::contract(format!("label {r} is invalid for {self}"))),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Metric::Ndcg { k: Some(k) } => write!(f, "ndcg@{k}"),
            Metric::Ndcg { k: None } => f.write_str("ndcg"),
            Metric::Dcg { k: Some(k) } => write!(f, "dcg@{k}"),
            Metric::Dcg { k: None } => f.write_str("dcg"),
            Metric::ReciprocalRank => f.write_str("mrr"),
            Metric::AveragePrecision => f.write_str("map"),
            Metric::ExpectedReciprocalRank => f.write_str("err"),
            Metric::ExpDcg { decay } if decay == DEFAULT_DECAY => f.write_str("expdcg"),
            Metric::ExpDcg { decay } => write!(f, "expdcg:{decay}"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    /// Accepts `ndcg`, `ndcg@K`, `dcg`, `dcg@K`, `mrr`, `map`, `err`, `expdcg`, `expdcg:B`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, arg) = match lower.split_once(['@', ':']) {
            Some((name, arg)) => (name, Some(arg)),
            None => (lower.as_str(), None),
        };
        let cutoff = |arg: Option<&str>| -> Result<Option<usize>> {
            arg.map(|a| {
                a.parse::<usize>()
                    .map_err(|_| Error::config(format!("bad cutoff in metric {s:?}")))
            })
            .transpose()
        };
        let metric = match (name, arg) {
            ("ndcg", a) => Metric::Ndcg { k: cutoff(a)? },
            ("dcg", a) => Metric::Dcg { k: cutoff(a)? },
            ("mrr", None) => Metric::ReciprocalRank,
            ("map", None) => Metric::AveragePrecision,
            ("err", None) => Metric::ExpectedReciprocalRank,
            ("expdcg", None) => Metric::ExpDcg {
                decay: DEFAULT_DECAY,
            },
            ("expdcg", Some(b)) => Metric::ExpDcg {
                decay: b
                    .parse()
                    .map_err(|_| Error::config(format!("bad decay in metric {s:?}")))?,
            },
            _ => return Err(Error::config(format!("unknown metric {s:?}"))),
        };
        metric.validate().map_err(|e| Error::config(e.to_string()))?;
        Ok(metric)
    }
}

/// `(2^r - 1) / 2^4`.
#[inline]
pub(crate) fn dcg_gain(r: f64) -> f64 {
    (r.exp2() - 1.0) / 16.0
}

/// `1 / log2(1 + position)` for a 1-based position.
#[inline]
pub(crate) fn log_discount(position: usize) -> f64 {
    1.0 / ((position + 1) as f64).log2()
}

fn effective_cutoff(k: Option<usize>, n: usize) -> usize {
    k.map_or(n, |k| k.min(n))
}

pub(crate) fn dcg_of_order(order: &[usize], labels: &[f64], k: Option<usize>) -> f64 {
    order[..effective_cutoff(k, order.len())]
        .iter()
        .enumerate()
        .map(|(i, &d)| dcg_gain(labels[d]) * log_discount(i + 1))
        .sum()
}

/// DCG of the best possible ordering.
pub(crate) fn ideal_dcg(labels: &[f64], k: Option<usize>) -> f64 {
    let mut sorted = labels.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    sorted[..effective_cutoff(k, sorted.len())]
        .iter()
        .enumerate()
        .map(|(i, &r)| dcg_gain(r) * log_discount(i + 1))
        .sum()
}

fn average_precision_of_order(order: &[usize], labels: &[f64]) -> f64 {
    let total: f64 = labels.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut hits = 0.0;
    let mut sum = 0.0;
    for (i, &d) in order.iter().enumerate() {
        hits += labels[d];
        sum += hits / (i + 1) as f64 * labels[d];
    }
    sum / total
}

/// Cascade sum `sum_i r_{s_i} / i * prod_{j<i} (1 - r_{s_j})`; reciprocal rank
/// for binary labels.
fn cascade_of_order(order: &[usize], labels: &[f64]) -> f64 {
    let mut survive = 1.0;
    let mut sum = 0.0;
    for (i, &d) in order.iter().enumerate() {
        sum += survive * labels[d] / (i + 1) as f64;
        survive *= 1.0 - labels[d];
    }
    sum
}

fn exp_dcg_of_order(order: &[usize], labels: &[f64], decay: f64) -> f64 {
    let mut discount = 1.0;
    let mut sum = 0.0;
    for &d in order {
        sum += discount * labels[d];
        discount *= decay;
    }
    sum
}

/// Evaluates `metric` on an explicit ranking. No validation.
pub(crate) fn evaluate_order(metric: &Metric, order: &[usize], labels: &[f64]) -> f64 {
    match *metric {
        Metric::Ndcg { k } => {
            let ideal = ideal_dcg(labels, k);
            if ideal == 0.0 {
                1.0
            } else {
                dcg_of_order(order, labels, k) / ideal
            }
        }
        Metric::Dcg { k } => dcg_of_order(order, labels, k),
        Metric::AveragePrecision => average_precision_of_order(order, labels),
        Metric::ReciprocalRank | Metric::ExpectedReciprocalRank => cascade_of_order(order, labels),
        Metric::ExpDcg { decay } => exp_dcg_of_order(order, labels, decay),
    }
}

/// Like [`evaluate`] but skips validation; for use on data that has already
/// been checked.
pub(crate) fn evaluate_unchecked(metric: &Metric, scores: &[f64], labels: &[f64]) -> f64 {
    let mut order = Vec::with_capacity(scores.len());
    worst_case_order_into(scores, labels, &mut order);
    evaluate_order(metric, &order, labels)
}

/// Evaluates `metric` for one query.
pub fn evaluate(metric: &Metric, scores: &[f64], labels: &[f64]) -> Result<f64> {
    metric.validate()?;
    check_aligned(scores, labels)?;
    metric.check_labels(labels)?;
    Ok(evaluate_unchecked(metric, scores, labels))
}

pub fn dcg_at_k(scores: &[f64], labels: &[f64], k: usize) -> Result<f64> {
    evaluate(&Metric::Dcg { k: Some(k) }, scores, labels)
}

/// NDCG@k; a query whose labels are all zero scores 1.0.
pub fn ndcg_at_k(scores: &[f64], labels: &[f64], k: usize) -> Result<f64> {
    evaluate(&Metric::ndcg(k), scores, labels)
}

/// Average precision; 0.0 when no document is relevant.
pub fn average_precision(scores: &[f64], labels: &[f64]) -> Result<f64> {
    evaluate(&Metric::AveragePrecision, scores, labels)
}

pub fn reciprocal_rank(scores: &[f64], labels: &[f64]) -> Result<f64> {
    evaluate(&Metric::ReciprocalRank, scores, labels)
}

pub fn expected_reciprocal_rank(scores: &[f64], labels: &[f64]) -> Result<f64> {
    evaluate(&Metric::ExpectedReciprocalRank, scores, labels)
}

pub fn exp_dcg(scores: &[f64], labels: &[f64], decay: f64) -> Result<f64> {
    evaluate(&Metric::ExpDcg { decay }, scores, labels)
}

/// Per-query metric values, in dataset order.
pub fn per_query(scores: &[Vec<f64>], dataset: &Dataset, metric: &Metric) -> Result<Vec<f64>> {
    if scores.len() != dataset.query_count() {
        return Err(Error::contract(format!(
            "{} score vectors for {} queries",
            scores.len(),
            dataset.query_count()
        )));
    }
    scores
        .iter()
        .zip(dataset.groups())
        .map(|(z, g)| evaluate(metric, z, g.labels()))
        .collect()
}

/// Unweighted mean over queries, multiplied by 100.
pub fn mean_metric(scores: &[Vec<f64>], dataset: &Dataset, metric: &Metric) -> Result<f64> {
    let values = per_query(scores, dataset, metric)?;
    Ok(100.0 * values.iter().sum::<f64>() / values.len() as f64)
}
