//! Queries, datasets and the tie-aware sort every metric is evaluated through.
//!
//! Document indices are 0-based. Rank positions are 1-based, so the document on
//! top of the list has position 1.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The documents retrieved for one query: a dense feature matrix plus one
/// relevance label per document.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    query_id: String,
    feature_count: usize,
    /// Row-major, `labels.len()` rows of `feature_count` values.
    features: Vec<f64>,
    labels: Vec<f64>,
}

impl QueryGroup {
    pub fn new(
        query_id: impl Into<String>,
        feature_count: usize,
        features: Vec<f64>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::contract("a query group needs at least one document"));
        }
        if features.len() != labels.len() * feature_count {
            return Err(Error::contract(format!(
                "feature matrix has {} values, expected {} rows x {} features",
                features.len(),
                labels.len(),
                feature_count
            )));
        }
        if let Some(bad) = labels.iter().find(|l| !l.is_finite()) {
            return Err(Error::contract(format!("non-finite relevance label {bad}")));
        }
        if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::contract(format!("non-finite feature value {bad}")));
        }
        Ok(QueryGroup {
            query_id: query_id.into(),
            feature_count,
            features,
            labels,
        })
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, doc: usize) -> &[f64] {
        &self.features[doc * self.feature_count..(doc + 1) * self.feature_count]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics; a zero-feature group still has one (empty) row per document.
        let width = self.feature_count;
        (0..self.len()).map(move |d| &self.features[d * width..(d + 1) * width])
    }

    /// Same documents and features with a different label vector.
    pub fn with_labels(&self, labels: Vec<f64>) -> Result<Self> {
        QueryGroup::new(
            self.query_id.clone(),
            self.feature_count,
            self.features.clone(),
            labels,
        )
    }
}

/// An ordered collection of query groups sharing one feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    groups: Vec<QueryGroup>,
    feature_count: usize,
}

impl Dataset {
    pub fn new(groups: Vec<QueryGroup>) -> Result<Self> {
        let Some(first) = groups.first() else {
            return Err(Error::contract("a dataset needs at least one query group"));
        };
        let feature_count = first.feature_count;
        let mut seen = HashSet::with_capacity(groups.len());
        for g in &groups {
            if g.feature_count != feature_count {
                return Err(Error::contract(format!(
                    "query {} has {} features, expected {}",
                    g.query_id, g.feature_count, feature_count
                )));
            }
            if !seen.insert(g.query_id.as_str()) {
                return Err(Error::contract(format!("duplicate query id {}", g.query_id)));
            }
        }
        Ok(Dataset {
            groups,
            feature_count,
        })
    }

    pub fn groups(&self) -> &[QueryGroup] {
        &self.groups
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn query_count(&self) -> usize {
        self.groups.len()
    }

    pub fn document_count(&self) -> usize {
        self.groups.iter().map(QueryGroup::len).sum()
    }

    /// Applies `transform` to every group's label vector.
    pub fn map_labels(&self, transform: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let groups = self
            .groups
            .iter()
            .map(|g| g.with_labels(transform(g.labels())))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(groups)
    }
}

/// A ranking of one query's documents together with its inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankPermutation {
    order: Vec<usize>,
    positions: Vec<usize>,
}

impl RankPermutation {
    /// Builds a permutation from the document order (top document first).
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut positions = vec![0; n];
        for (rank, &doc) in order.iter().enumerate() {
            if doc >= n || positions[doc] != 0 {
                return Err(Error::contract(format!(
                    "order {order:?} is not a permutation of 0..{n}"
                )));
            }
            positions[doc] = rank + 1;
        }
        Ok(RankPermutation { order, positions })
    }

    pub(crate) fn from_order_unchecked(order: Vec<usize>) -> Self {
        let mut positions = vec![0; order.len()];
        for (rank, &doc) in order.iter().enumerate() {
            positions[doc] = rank + 1;
        }
        RankPermutation { order, positions }
    }

    /// Document indices from the top of the list down.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `positions()[doc]` is the 1-based rank of `doc`.
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    /// Document at the 1-based rank `position`.
    pub fn at(&self, position: usize) -> usize {
        self.order[position - 1]
    }

    pub fn position_of(&self, doc: usize) -> usize {
        self.positions[doc]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Descending score; equal scores put the less relevant document first; equal
/// score and relevance fall back to ascending document index.
pub(crate) fn worst_case_cmp(scores: &[f64], labels: &[f64], a: usize, b: usize) -> Ordering {
    scores[b]
        .total_cmp(&scores[a])
        .then_with(|| labels[a].total_cmp(&labels[b]))
        .then_with(|| a.cmp(&b))
}

/// Fills `order` with the worst-case tie-resolved ranking. No validation.
pub(crate) fn worst_case_order_into(scores: &[f64], labels: &[f64], order: &mut Vec<usize>) {
    order.clear();
    order.extend(0..scores.len());
    // The comparator is a total order with no equal elements, so an unstable sort is deterministic.
    order.sort_unstable_by(|&a, &b| worst_case_cmp(scores, labels, a, b));
}

pub(crate) fn check_aligned(scores: &[f64], labels: &[f64]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::contract(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::contract("empty query"));
    }
    if let Some(bad) = scores.iter().find(|z| !z.is_finite()) {
        return Err(Error::contract(format!("non-finite score {bad}")));
    }
    if let Some(bad) = labels.iter().find(|r| !r.is_finite()) {
        return Err(Error::contract(format!("non-finite label {bad}")));
    }
    Ok(())
}

/// Sorts documents by descending score, resolving ties pessimistically: among
/// equal scores the less relevant document is ranked higher.
///
/// ```
/// use rankforge::ranking::worst_case_argsort;
///
/// let perm = worst_case_argsort(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
/// assert_eq!(perm.order(), &[1, 0]);
/// assert_eq!(perm.positions(), &[2, 1]);
/// ```
pub fn worst_case_argsort(scores: &[f64], labels: &[f64]) -> Result<RankPermutation> {
    check_aligned(scores, labels)?;
    let mut order = Vec::with_capacity(scores.len());
    worst_case_order_into(scores, labels, &mut order);
    Ok(RankPermutation::from_order_unchecked(order))
}

/// Maps graded labels to `{0, 1}`: anything above zero is relevant.
pub fn binarize_labels(labels: &[f64]) -> Vec<f64> {
    labels
        .iter()
        .map(|&r| if r > 0.0 { 1.0 } else { 0.0 })
        .collect()
}

/// Maps graded `[0, 4]` labels onto `[0, 1]`.
pub fn scale_labels_unit(labels: &[f64]) -> Vec<f64> {
    labels.iter().map(|&r| r / 4.0).collect()
}

/// Splits a dataset at query level into two non-empty parts.
///
/// Queries are shuffled with a generator seeded from `seed` and the first
/// `round(train_fraction * N)` of them (clamped to `1..N`) form the first part.
pub fn split_dataset(
    dataset: &Dataset,
    fractions: (f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let (train, valid) = fractions;
    let n = dataset.query_count();
    if n < 2 {
        return Err(Error::contract("splitting needs at least two query groups"));
    }
    if !(train > 0.0 && valid > 0.0) || ((train + valid) - 1.0).abs() > 1e-9 {
        return Err(Error::contract(format!(
            "split fractions ({train}, {valid}) must be positive and sum to 1"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((train * n as f64).round() as usize).clamp(1, n - 1);

    let pick = |idx: &[usize]| {
        Dataset::new(idx.iter().map(|&i| dataset.groups[i].clone()).collect())
    };
    Ok((pick(&indices[..cut])?, pick(&indices[cut..])?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(id: &str, labels: &[f64]) -> QueryGroup {
        QueryGroup::new(id, 1, labels.to_vec(), labels.to_vec()).unwrap()
    }

    #[test]
    fn argsort_examples() {
        let p = worst_case_argsort(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert_eq!(p.order(), &[1, 0]);
        let p = worst_case_argsort(&[3.0, 1.0, 2.0], &[0.0; 3]).unwrap();
        assert_eq!(p.order(), &[0, 2, 1]);
        let p = worst_case_argsort(&[1.0; 3], &[2.0, 0.0, 1.0]).unwrap();
        assert_eq!(p.order(), &[1, 2, 0]);
    }

    #[test]
    fn argsort_breaks_full_ties_by_index() {
        let p = worst_case_argsort(&[1.0, 2.0, 1.0, 1.0], &[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(p.order(), &[1, 3, 0, 2]);
        assert_eq!(p.positions(), &[3, 1, 4, 2]);
    }

    #[test]
    fn argsort_rejects_mismatch_and_empty() {
        assert!(matches!(
            worst_case_argsort(&[1.0], &[1.0, 2.0]),
            Err(Error::Contract(_))
        ));
        assert!(worst_case_argsort(&[], &[]).is_err());
        assert!(worst_case_argsort(&[f64::NAN], &[0.0]).is_err());
    }

    #[test]
    fn label_transforms() {
        assert_eq!(binarize_labels(&[0.0, 1.0, 4.0]), vec![0.0, 1.0, 1.0]);
        assert_eq!(binarize_labels(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(binarize_labels(&[0.5]), vec![1.0]);
        assert_eq!(scale_labels_unit(&[4.0]), vec![1.0]);
        assert_eq!(scale_labels_unit(&[0.0]), vec![0.0]);
        assert_eq!(scale_labels_unit(&[2.0, 1.0]), vec![0.5, 0.25]);
    }

    #[test]
    fn permutation_from_order_validates() {
        assert!(RankPermutation::from_order(vec![1, 0, 2]).is_ok());
        assert!(RankPermutation::from_order(vec![1, 1, 2]).is_err());
        assert!(RankPermutation::from_order(vec![0, 3]).is_err());
    }

    #[test]
    fn dataset_rejects_duplicates_and_mixed_widths() {
        assert!(Dataset::new(vec![]).is_err());
        assert!(Dataset::new(vec![group("a", &[1.0]), group("a", &[0.0])]).is_err());
        let wide = QueryGroup::new("b", 2, vec![0.0, 0.0], vec![1.0]).unwrap();
        assert!(Dataset::new(vec![group("a", &[1.0]), wide]).is_err());
        assert!(QueryGroup::new("c", 2, vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let groups: Vec<_> = (0..10).map(|i| group(&i.to_string(), &[i as f64])).collect();
        let d = Dataset::new(groups).unwrap();
        let (a, b) = split_dataset(&d, (0.8, 0.2), 1).unwrap();
        assert_eq!((a.query_count(), b.query_count()), (8, 2));
        let (a2, b2) = split_dataset(&d, (0.8, 0.2), 1).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
        let ids: HashSet<_> = a
            .groups()
            .iter()
            .chain(b.groups())
            .map(|g| g.query_id().to_string())
            .collect();
        assert_eq!(ids.len(), 10);

        let two = Dataset::new(vec![group("x", &[1.0]), group("y", &[0.0])]).unwrap();
        let (a, b) = split_dataset(&two, (0.5, 0.5), 9).unwrap();
        assert_eq!((a.query_count(), b.query_count()), (1, 1));

        let one = Dataset::new(vec![group("x", &[1.0])]).unwrap();
        assert!(split_dataset(&one, (0.5, 0.5), 0).is_err());
    }
}
