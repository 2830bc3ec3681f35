//! Swap and move deltas.
//!
//! A swap delta `|M(swapped) - M(current)|` measures how much the quality of a
//! ranking changes when two documents exchange rank positions. A move delta
//! `L(moved) - L(current)` (with loss `L = 1 - M`) measures the effect of
//! repositioning a single document while everything else keeps its relative
//! order.
//!
//! [`swap_delta_oracle`] recomputes the metric from scratch and is the
//! reference. The closed forms (NDCG/DCG, reciprocal rank, ExpDCG) and the
//! range-local evaluations (AP, ERR) used by [`swap_delta`] are checked against
//! it in tests.

use crate::error::{Error, Result};
use crate::metrics::{dcg_gain, evaluate_order, ideal_dcg, log_discount, Metric};
use crate::ranking::{check_aligned, worst_case_argsort, RankPermutation};

fn check_pair(n: usize, i: usize, j: usize) -> Result<()> {
    if i == j {
        return Err(Error::contract(format!("swap needs two distinct documents, got {i} twice")));
    }
    if i >= n || j >= n {
        return Err(Error::contract(format!("document index out of range for {n} documents")));
    }
    Ok(())
}

fn prepare(metric: &Metric, scores: &[f64], labels: &[f64]) -> Result<RankPermutation> {
    metric.validate()?;
    check_aligned(scores, labels)?;
    metric.check_labels(labels)?;
    worst_case_argsort(scores, labels)
}

/// Swaps the rank positions of documents `i` and `j` in the worst-case ordering
/// and recomputes the metric.
pub fn swap_delta_oracle(
    metric: &Metric,
    scores: &[f64],
    labels: &[f64],
    i: usize,
    j: usize,
) -> Result<f64> {
    check_pair(scores.len(), i, j)?;
    let perm = prepare(metric, scores, labels)?;
    Ok(swap_delta_recompute(metric, &perm, labels, i, j))
}

pub(crate) fn swap_delta_recompute(
    metric: &Metric,
    perm: &RankPermutation,
    labels: &[f64],
    i: usize,
    j: usize,
) -> f64 {
    let before = evaluate_order(metric, perm.order(), labels);
    let mut swapped = perm.order().to_vec();
    swapped.swap(perm.position_of(i) - 1, perm.position_of(j) - 1);
    (evaluate_order(metric, &swapped, labels) - before).abs()
}

/// Per-ranking precomputation for fast swap deltas.
pub(crate) struct SwapDeltas<'a> {
    metric: Metric,
    labels: &'a [f64],
    perm: &'a RankPermutation,
    /// Ideal DCG for NDCG; 1 for raw DCG.
    dcg_norm: f64,
    /// First and second relevant positions (1-based), `usize::MAX` if absent.
    first_relevant: usize,
    second_relevant: usize,
}

impl<'a> SwapDeltas<'a> {
    pub(crate) fn new(metric: &Metric, labels: &'a [f64], perm: &'a RankPermutation) -> Self {
        let dcg_norm = match *metric {
            Metric::Ndcg { k } => ideal_dcg(labels, k),
            _ => 1.0,
        };
        let (mut first_relevant, mut second_relevant) = (usize::MAX, usize::MAX);
        if matches!(metric, Metric::ReciprocalRank) {
            let mut relevant = perm
                .order()
                .iter()
                .enumerate()
                .filter(|(_, &d)| labels[d] == 1.0)
                .map(|(p, _)| p + 1);
            first_relevant = relevant.next().unwrap_or(usize::MAX);
            second_relevant = relevant.next().unwrap_or(usize::MAX);
        }
        SwapDeltas {
            metric: *metric,
            labels,
            perm,
            dcg_norm,
            first_relevant,
            second_relevant,
        }
    }

    /// `|Δ_ij M|` at the precomputed ranking. `i != j`.
    pub(crate) fn delta(&self, i: usize, j: usize) -> f64 {
        let (pi, pj) = (self.perm.position_of(i), self.perm.position_of(j));
        let (ri, rj) = (self.labels[i], self.labels[j]);
        match self.metric {
            Metric::Ndcg { k } | Metric::Dcg { k } => {
                if self.dcg_norm == 0.0 {
                    return 0.0;
                }
                let discount = |p: usize| match k {
                    Some(k) if p > k => 0.0,
                    _ => log_discount(p),
                };
                ((dcg_gain(ri) - dcg_gain(rj)) * (discount(pj) - discount(pi))).abs()
                    / self.dcg_norm
            }
            Metric::ExpDcg { decay } => {
                ((decay.powi(pi as i32 - 1) - decay.powi(pj as i32 - 1)) * (ri - rj)).abs()
            }
            Metric::ReciprocalRank => {
                if ri == rj {
                    return 0.0;
                }
                let (top, bottom) = (pi.min(pj), pi.max(pj));
                if top > self.first_relevant {
                    return 0.0;
                }
                let top_is_relevant = self.labels[self.perm.at(top)] == 1.0;
                let new_first = if top_is_relevant {
                    // top == first_relevant; the next relevant document takes over.
                    bottom.min(self.second_relevant)
                } else {
                    top
                };
                let old_first = self.first_relevant;
                (1.0 / old_first as f64 - 1.0 / new_first as f64).abs()
            }
            Metric::AveragePrecision => self.average_precision_local(pi.min(pj), pi.max(pj)),
            Metric::ExpectedReciprocalRank => self.cascade_local(pi.min(pj), pi.max(pj)),
        }
    }

    /// AP change from swapping positions `a < b`, evaluating only `a..=b`.
    fn average_precision_local(&self, a: usize, b: usize) -> f64 {
        let total: f64 = self.labels.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        let order = self.perm.order();
        let hits_above: f64 = order[..a - 1].iter().map(|&d| self.labels[d]).sum();
        let segment = |swapped: bool| {
            let mut hits = hits_above;
            let mut sum = 0.0;
            for p in a..=b {
                let d = match (swapped, p) {
                    (true, p) if p == a => order[b - 1],
                    (true, p) if p == b => order[a - 1],
                    _ => order[p - 1],
                };
                hits += self.labels[d];
                sum += hits / p as f64 * self.labels[d];
            }
            sum
        };
        (segment(true) - segment(false)).abs() / total
    }

    /// ERR change from swapping positions `a < b`, evaluating only `a..=b`.
    fn cascade_local(&self, a: usize, b: usize) -> f64 {
        let order = self.perm.order();
        let survive_above: f64 = order[..a - 1].iter().map(|&d| 1.0 - self.labels[d]).product();
        let segment = |swapped: bool| {
            let mut survive = survive_above;
            let mut sum = 0.0;
            for p in a..=b {
                let d = match (swapped, p) {
                    (true, p) if p == a => order[b - 1],
                    (true, p) if p == b => order[a - 1],
                    _ => order[p - 1],
                };
                sum += survive * self.labels[d] / p as f64;
                survive *= 1.0 - self.labels[d];
            }
            sum
        };
        (segment(true) - segment(false)).abs()
    }
}

/// Closed-form `|Δ_ij NDCG@k|` with discounts truncated beyond `k`.
pub fn delta_ndcg_closed(
    scores: &[f64],
    labels: &[f64],
    k: usize,
    i: usize,
    j: usize,
) -> Result<f64> {
    closed(&Metric::ndcg(k), scores, labels, i, j)
}

/// Closed-form `|Δ_ij RR|` for binary labels.
pub fn delta_mrr_closed(scores: &[f64], labels: &[f64], i: usize, j: usize) -> Result<f64> {
    closed(&Metric::ReciprocalRank, scores, labels, i, j)
}

/// Closed-form `|Δ_ij ExpDCG|`.
pub fn delta_exp_dcg_closed(
    scores: &[f64],
    labels: &[f64],
    decay: f64,
    i: usize,
    j: usize,
) -> Result<f64> {
    closed(&Metric::ExpDcg { decay }, scores, labels, i, j)
}

fn closed(metric: &Metric, scores: &[f64], labels: &[f64], i: usize, j: usize) -> Result<f64> {
    check_pair(scores.len(), i, j)?;
    let perm = prepare(metric, scores, labels)?;
    Ok(SwapDeltas::new(metric, labels, &perm).delta(i, j))
}

/// `|Δ_ij M|` for any supported metric: closed forms for DCG-family, reciprocal
/// rank and ExpDCG, range-local recomputation for AP and ERR.
pub fn swap_delta(metric: &Metric, scores: &[f64], labels: &[f64], i: usize, j: usize) -> Result<f64> {
    closed(metric, scores, labels, i, j)
}

/// Loss change `L(moved) - L(current)` (with `L = 1 - M`) from moving `doc`
/// directly below the document currently at 1-based rank `target`, or to the
/// top when `target == 0`. Targets that leave the ranking unchanged give 0.
pub fn move_delta(
    metric: &Metric,
    scores: &[f64],
    labels: &[f64],
    doc: usize,
    target: usize,
) -> Result<f64> {
    let n = scores.len();
    if doc >= n {
        return Err(Error::contract(format!("document {doc} out of range for {n} documents")));
    }
    if target > n {
        return Err(Error::contract(format!("move target rank {target} out of range 0..={n}")));
    }
    let perm = prepare(metric, scores, labels)?;
    let moved = moved_order(&perm, doc, target);
    Ok(evaluate_order(metric, perm.order(), labels) - evaluate_order(metric, &moved, labels))
}

fn moved_order(perm: &RankPermutation, doc: usize, target: usize) -> Vec<usize> {
    let mut order: Vec<usize> = perm.order().iter().copied().filter(|&d| d != doc).collect();
    let insert_at = if target == 0 {
        0
    } else {
        let anchor = perm.at(target);
        if anchor == doc {
            return perm.order().to_vec();
        }
        order.iter().position(|&d| d == anchor).unwrap() + 1
    };
    order.insert(insert_at, doc);
    order
}

/// Metric values with `doc` placed into every slot among the other documents.
///
/// `others` lists the remaining documents top-down; entry `k` of the result is
/// the metric with `doc` directly below `others[k-1]` (entry 0: on top). Each
/// step from slot `k` to `k + 1` is a single adjacent swap, so the whole sweep
/// costs `O(n)` after evaluating slot 0.
pub(crate) fn slot_metric_sweep(
    metric: &Metric,
    labels: &[f64],
    doc: usize,
    others: &[usize],
    scratch: &mut Vec<usize>,
    out: &mut Vec<f64>,
) {
    out.clear();
    scratch.clear();
    scratch.push(doc);
    scratch.extend_from_slice(others);
    let mut value = evaluate_order(metric, scratch, labels);
    out.push(value);

    let rx = labels[doc];
    let dcg_norm = match *metric {
        Metric::Ndcg { k } => ideal_dcg(labels, k),
        _ => 1.0,
    };
    let total_relevant: f64 = match metric {
        Metric::AveragePrecision => labels.iter().sum(),
        _ => 0.0,
    };
    // Running quantities over the documents already placed above `doc`.
    let mut survive = 1.0;
    let mut hits = 0.0;
    for (idx, &y) in others.iter().enumerate() {
        // `doc` sits at 1-based position t; `y` directly below it moves up.
        let t = idx + 1;
        let ry = labels[y];
        let step = match *metric {
            Metric::Ndcg { k } | Metric::Dcg { k } => {
                if dcg_norm == 0.0 {
                    0.0
                } else {
                    let discount = |p: usize| match k {
                        Some(k) if p > k => 0.0,
                        _ => log_discount(p),
                    };
                    (dcg_gain(ry) - dcg_gain(rx)) * (discount(t) - discount(t + 1)) / dcg_norm
                }
            }
            Metric::ExpDcg { decay } => {
                (ry - rx) * (decay.powi(t as i32 - 1) - decay.powi(t as i32))
            }
            Metric::ReciprocalRank | Metric::ExpectedReciprocalRank => {
                let before = rx / t as f64 + (1.0 - rx) * ry / (t + 1) as f64;
                let after = ry / t as f64 + (1.0 - ry) * rx / (t + 1) as f64;
                survive * (after - before)
            }
            Metric::AveragePrecision => {
                if total_relevant == 0.0 {
                    0.0
                } else {
                    let both = hits + rx + ry;
                    let before = rx * (hits + rx) / t as f64 + ry * both / (t + 1) as f64;
                    let after = ry * (hits + ry) / t as f64 + rx * both / (t + 1) as f64;
                    (after - before) / total_relevant
                }
            }
        };
        value += step;
        out.push(value);
        survive *= 1.0 - ry;
        hits += ry;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn oracle_examples() {
        let ndcg2 = Metric::ndcg(2);
        assert_eq!(swap_delta_oracle(&ndcg2, &[2.0, 1.0], &[1.0, 1.0], 0, 1).unwrap(), 0.0);
        let v = swap_delta_oracle(&ndcg2, &[2.0, 1.0], &[0.0, 4.0], 0, 1).unwrap();
        assert!(close(v, 1.0 - 1.0 / 3f64.log2()));
        assert!((v - 0.36907).abs() < 1e-5);
        // Documents at positions 3 and 4 sit below the cutoff.
        let v = swap_delta_oracle(&ndcg2, &[4.0, 3.0, 2.0, 1.0], &[1.0, 0.0, 4.0, 2.0], 2, 3)
            .unwrap();
        assert_eq!(v, 0.0);
        assert!(swap_delta_oracle(&ndcg2, &[1.0, 2.0], &[0.0, 1.0], 1, 1).is_err());
    }

    #[test]
    fn ndcg_closed_examples() {
        let v = delta_ndcg_closed(&[2.0, 1.0], &[4.0, 0.0], 2, 0, 1).unwrap();
        assert!(close(v, (16.0 - 1.0) / (16.0 * (15.0 / 16.0)) * (1.0 / 3f64.log2() - 1.0).abs()));
        assert_eq!(
            delta_ndcg_closed(&[4.0, 3.0, 2.0, 1.0], &[1.0, 0.0, 4.0, 2.0], 2, 2, 3).unwrap(),
            0.0
        );
        assert_eq!(delta_ndcg_closed(&[2.0, 1.0, 0.0], &[2.0, 1.0, 2.0], 3, 0, 2).unwrap(), 0.0);
    }

    #[test]
    fn mrr_closed_examples() {
        assert_eq!(delta_mrr_closed(&[3.0, 2.0, 1.0], &[1.0, 1.0, 0.0], 0, 1).unwrap(), 0.0);
        assert_eq!(delta_mrr_closed(&[3.0, 2.0, 1.0], &[1.0, 0.0, 0.0], 1, 2).unwrap(), 0.0);
        let v = delta_mrr_closed(&[3.0, 2.0, 1.0], &[0.0, 1.0, 0.0], 0, 1).unwrap();
        assert!(close(v, 0.5));
        assert!(delta_mrr_closed(&[1.0, 0.0], &[2.0, 0.0], 0, 1).is_err());
    }

    #[test]
    fn mrr_closed_handles_relevant_documents_between_the_pair() {
        // Ranking: irrelevant, relevant, relevant. Swapping positions 1 and 3
        // lifts RR from 1/2 to 1, not 1 - 1/3.
        let scores = [3.0, 2.0, 1.0];
        let labels = [0.0, 1.0, 1.0];
        let closed = delta_mrr_closed(&scores, &labels, 0, 2).unwrap();
        let oracle = swap_delta_oracle(&Metric::ReciprocalRank, &scores, &labels, 0, 2).unwrap();
        assert!(close(closed, 0.5));
        assert!(close(closed, oracle));
    }

    #[test]
    fn exp_dcg_adjacent_swap() {
        let b = 0.7;
        let scores = [5.0, 4.0, 3.0, 2.0];
        let labels = [1.0, 3.0, 0.0, 2.0];
        // Positions t = 3, 4 hold documents 2 and 3.
        let v = delta_exp_dcg_closed(&scores, &labels, b, 2, 3).unwrap();
        assert!(close(v, (b.powi(2) - b.powi(3)).abs() * 2.0));
    }

    #[test]
    fn swap_delta_dispatch() {
        assert_eq!(
            swap_delta(&Metric::AveragePrecision, &[1.0, 2.0, 3.0], &[0.0; 3], 0, 2).unwrap(),
            0.0
        );
        assert!(swap_delta(&Metric::ExpectedReciprocalRank, &[1.0, 2.0], &[0.5, 0.2], 0, 0).is_err());
        let scores = [0.3, 0.9, 0.1, 0.5];
        let labels = [1.0, 0.0, 1.0, 0.0];
        for (i, j) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
            let fast = swap_delta(&Metric::AveragePrecision, &scores, &labels, i, j).unwrap();
            let slow = swap_delta_oracle(&Metric::AveragePrecision, &scores, &labels, i, j).unwrap();
            assert!(close(fast, slow), "({i},{j}) {fast} vs {slow}");
        }
    }

    #[test]
    fn move_delta_examples() {
        let m = Metric::ReciprocalRank;
        let v = move_delta(&m, &[1.0, 2.0, 3.0], &[1.0, 0.0, 0.0], 0, 0).unwrap();
        assert!(close(v, -2.0 / 3.0));
        // Document 0 sits at rank 3 under document 1 (rank 2): moving it there again is a no-op.
        assert_eq!(move_delta(&m, &[1.0, 2.0, 3.0], &[1.0, 0.0, 0.0], 0, 2).unwrap(), 0.0);
        assert_eq!(move_delta(&m, &[1.0, 2.0, 3.0], &[1.0, 0.0, 0.0], 0, 3).unwrap(), 0.0);
        assert_eq!(move_delta(&m, &[1.0], &[1.0], 0, 0).unwrap(), 0.0);
        assert!(move_delta(&m, &[1.0, 2.0], &[1.0, 0.0], 0, 3).is_err());
    }

    #[test]
    fn slot_sweep_matches_full_recompute() {
        let labels = [2.0, 0.0, 4.0, 1.0, 3.0];
        let unit: Vec<f64> = labels.iter().map(|r| r / 4.0).collect();
        let binary: Vec<f64> = labels.iter().map(|&r| if r > 1.0 { 1.0 } else { 0.0 }).collect();
        let cases: Vec<(Metric, &[f64])> = vec![
            (Metric::ndcg(3), &labels),
            (Metric::Ndcg { k: None }, &labels),
            (Metric::Dcg { k: Some(2) }, &labels),
            (Metric::ExpDcg { decay: 0.6 }, &labels),
            (Metric::ExpectedReciprocalRank, &unit),
            (Metric::ReciprocalRank, &binary),
            (Metric::AveragePrecision, &binary),
        ];
        let others = [3, 0, 4, 1];
        for (metric, labels) in cases {
            let (mut scratch, mut out) = (Vec::new(), Vec::new());
            slot_metric_sweep(&metric, labels, 2, &others, &mut scratch, &mut out);
            for (slot, &value) in out.iter().enumerate() {
                let mut order = others.to_vec();
                order.insert(slot, 2);
                let expect = evaluate_order(&metric, &order, labels);
                assert!((value - expect).abs() < 1e-12, "{metric} slot {slot}");
            }
        }
    }
}
