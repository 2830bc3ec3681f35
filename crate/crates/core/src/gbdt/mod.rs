//! Histogram-binned oblivious trees, the boosting loop and model files.

mod bins;
mod boost;
mod model_io;
mod tree;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ranking::Dataset;

pub use bins::{build_bins, BinnedFeatures, FeatureBins};
pub use boost::{train, BoostConfig, IterationRecord, TrainingOutcome};
pub use model_io::{load_model, parse_model, save_model, write_model, FORMAT_VERSION};
pub use tree::{fit_tree, ObliviousTree, Split, TreeParams, MAX_DEPTH};

/// A sum of scaled oblivious trees.
#[derive(Debug, Clone, PartialEq)]
pub struct ObliviousEnsemble {
    feature_count: usize,
    trees: Vec<ObliviousTree>,
    /// Multiplier of each tree's leaves, in `(0, 1]`.
    scales: Vec<f64>,
    metadata: BTreeMap<String, String>,
}

impl ObliviousEnsemble {
    /// An ensemble without trees, predicting 0 everywhere.
    pub fn empty(feature_count: usize) -> Self {
        ObliviousEnsemble {
            feature_count,
            trees: Vec::new(),
            scales: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    /// Appends a tree with scale 1.
    pub fn push(&mut self, tree: ObliviousTree) -> Result<()> {
        if let Some(s) = tree.splits().iter().find(|s| !s.is_null() && s.feature >= self.feature_count) {
            return Err(Error::contract(format!(
                "split on feature {} but the model has {} features",
                s.feature, self.feature_count
            )));
        }
        self.trees.push(tree);
        self.scales.push(1.0);
        Ok(())
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn trees(&self) -> &[ObliviousTree] {
        &self.trees
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn set_metadata(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.insert(key.into(), value.to_string());
    }

    /// Multiplies every existing tree's scale by `factor`.
    pub(crate) fn shrink(&mut self, factor: f64) {
        for s in &mut self.scales {
            *s *= factor;
        }
    }

    pub(crate) fn truncate(&mut self, len: usize) {
        self.trees.truncate(len);
        self.scales.truncate(len);
    }

    pub(crate) fn set_scales(&mut self, scales: Vec<f64>) {
        debug_assert_eq!(scales.len(), self.trees.len());
        self.scales = scales;
    }

    /// Folds every scale into its tree's leaves, leaving all scales at 1.
    /// Predictions are unchanged bit for bit since `1 * x == x`.
    pub(crate) fn bake_scales(&mut self) {
        for (tree, s) in self.trees.iter_mut().zip(&mut self.scales) {
            for v in tree.leaf_values_mut() {
                *v *= *s;
            }
            *s = 1.0;
        }
    }

    /// Tree `t`'s contribution for a given leaf.
    pub(crate) fn contribution(&self, t: usize, leaf: usize) -> f64 {
        self.scales[t] * self.trees[t].leaf_values()[leaf]
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.feature_count {
            return Err(Error::contract(format!(
                "row has {} features, the model expects {}",
                row.len(),
                self.feature_count
            )));
        }
        Ok(())
    }

    /// Sum over trees of `scale * leaf value`, in tree order.
    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        self.check_row(row)?;
        Ok(self.predict_row_unchecked(row))
    }

    fn predict_row_unchecked(&self, row: &[f64]) -> f64 {
        let mut score = 0.0;
        for (t, tree) in self.trees.iter().enumerate() {
            score += self.contribution(t, tree.leaf_index(row));
        }
        score
    }

    /// Scores every document, grouped like the dataset.
    pub fn predict(&self, dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
        if dataset.feature_count() != self.feature_count {
            return Err(Error::contract(format!(
                "dataset has {} features, the model expects {}",
                dataset.feature_count(),
                self.feature_count
            )));
        }
        Ok(dataset
            .groups()
            .iter()
            .map(|g| g.rows().map(|r| self.predict_row_unchecked(r)).collect())
            .collect())
    }
}
