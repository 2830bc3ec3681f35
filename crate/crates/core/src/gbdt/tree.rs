use crate::error::{Error, Result};
use crate::objectives::GradientBuffer;

use super::bins::BinnedFeatures;

/// Maximum supported tree depth.
pub const MAX_DEPTH: usize = 16;

/// One level of an oblivious tree: documents with `x[feature] > border` go right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub border: f64,
}

impl Split {
    /// Sends every document left; used when no split improves the objective.
    pub const NULL: Split = Split {
        feature: 0,
        border: f64::INFINITY,
    };

    pub fn is_null(&self) -> bool {
        self.border == f64::INFINITY
    }

    fn goes_right(&self, row: &[f64]) -> bool {
        !self.is_null() && row[self.feature] > self.border
    }
}

/// A decision tree whose nodes share one split per level.
///
/// Bit `t` of a document's leaf index is set when it goes right at level `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObliviousTree {
    splits: Vec<Split>,
    leaf_values: Vec<f64>,
}

impl ObliviousTree {
    pub fn new(splits: Vec<Split>, leaf_values: Vec<f64>) -> Result<Self> {
        if splits.len() > MAX_DEPTH {
            return Err(Error::contract(format!("tree depth {} exceeds {MAX_DEPTH}", splits.len())));
        }
        if leaf_values.len() != 1 << splits.len() {
            return Err(Error::contract(format!(
                "depth {} tree needs {} leaves, got {}",
                splits.len(),
                1usize << splits.len(),
                leaf_values.len()
            )));
        }
        if let Some(v) = leaf_values.iter().find(|v| !v.is_finite()) {
            return Err(Error::contract(format!("non-finite leaf value {v}")));
        }
        if splits.iter().any(|s| s.border.is_nan() || s.border == f64::NEG_INFINITY) {
            return Err(Error::contract("split borders must be finite (or +inf for a null split)"));
        }
        Ok(ObliviousTree { splits, leaf_values })
    }

    pub fn depth(&self) -> usize {
        self.splits.len()
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn leaf_values(&self) -> &[f64] {
        &self.leaf_values
    }

    pub(crate) fn leaf_values_mut(&mut self) -> &mut [f64] {
        &mut self.leaf_values
    }

    pub fn leaf_index(&self, row: &[f64]) -> usize {
        self.splits
            .iter()
            .enumerate()
            .fold(0, |leaf, (t, s)| leaf | (usize::from(s.goes_right(row)) << t))
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.leaf_values[self.leaf_index(row)]
    }
}

#[derive(Clone, Copy, Default)]
struct Stats {
    g: f64,
    h: f64,
    count: usize,
}

impl Stats {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.count += 1;
    }

    fn score(&self, l2: f64) -> f64 {
        let denom = self.h + l2;
        if denom > 0.0 {
            self.g * self.g / denom
        } else {
            0.0
        }
    }

    fn minus(&self, other: &Stats) -> Stats {
        Stats {
            g: self.g - other.g,
            h: self.h - other.h,
            count: self.count - other.count,
        }
    }
}

/// Tree growth parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub depth: usize,
    pub l2_leaf_reg: f64,
    /// Splits leaving any non-empty leaf with fewer documents are skipped.
    pub min_data_in_leaf: usize,
}

/// A fitted tree plus the leaf each training document landed in.
pub(crate) struct FittedTree {
    pub tree: ObliviousTree,
    pub leaves: Vec<u32>,
}

/// Grows an oblivious tree level by level with Newton leaf values `-G / (H + l2)`.
///
/// Each level takes the `(feature, border)` maximizing `sum_leaf G^2 / (H + l2)`,
/// preferring the lowest pair on ties; if nothing beats the unsplit score the
/// level gets [`Split::NULL`].
pub fn fit_tree(grad: &GradientBuffer, binned: &BinnedFeatures, params: &TreeParams) -> Result<ObliviousTree> {
    Ok(fit_tree_with_leaves(&grad.grad, &grad.hess, binned, params)?.tree)
}

pub(crate) fn fit_tree_with_leaves(
    grad: &[f64],
    hess: &[f64],
    binned: &BinnedFeatures,
    params: &TreeParams,
) -> Result<FittedTree> {
    let n = binned.document_count();
    if grad.len() != n || hess.len() != n {
        return Err(Error::contract(format!(
            "{} gradients and {} hessians for {n} documents",
            grad.len(),
            hess.len()
        )));
    }
    if !(1..=MAX_DEPTH).contains(&params.depth) {
        return Err(Error::contract(format!("depth must lie in 1..={MAX_DEPTH}, got {}", params.depth)));
    }
    if !(params.l2_leaf_reg >= 0.0) {
        return Err(Error::contract(format!("l2_leaf_reg must be non-negative, got {}", params.l2_leaf_reg)));
    }
    let l2 = params.l2_leaf_reg;
    let min_data = params.min_data_in_leaf;
    let too_small = |s: &Stats| s.count > 0 && s.count < min_data;

    let mut leaves = vec![0u32; n];
    let mut splits = Vec::with_capacity(params.depth);
    let mut leaf_stats = vec![Stats::default()];
    for (&g, &h) in grad.iter().zip(hess) {
        leaf_stats[0].add(g, h);
    }
    let mut hist: Vec<Stats> = Vec::new();
    for level in 0..params.depth {
        let leaf_count = 1usize << level;
        let base: f64 = leaf_stats.iter().map(|s| s.score(l2)).sum();
        let mut best: Option<(f64, usize, usize)> = None;
        for f in 0..binned.feature_count() {
            let borders = binned.bins().borders(f).len();
            if borders == 0 {
                continue;
            }
            let nb = borders + 1;
            hist.clear();
            hist.resize(leaf_count * nb, Stats::default());
            for (d, &b) in binned.column(f).iter().enumerate() {
                hist[leaves[d] as usize * nb + b as usize].add(grad[d], hess[d]);
            }
            // Running left-side sums per leaf as the border moves right.
            let mut left = vec![Stats::default(); leaf_count];
            for k in 0..borders {
                let mut gain = 0.0;
                let mut admissible = true;
                for leaf in 0..leaf_count {
                    let bin = &hist[leaf * nb + k];
                    left[leaf].g += bin.g;
                    left[leaf].h += bin.h;
                    left[leaf].count += bin.count;
                    let right = leaf_stats[leaf].minus(&left[leaf]);
                    if too_small(&left[leaf]) || too_small(&right) {
                        admissible = false;
                    }
                    gain += left[leaf].score(l2) + right.score(l2);
                }
                if admissible && gain > base && best.map_or(true, |(g, _, _)| gain > g) {
                    best = Some((gain, f, k));
                }
            }
        }
        let split = match best {
            Some((_, f, k)) => {
                let column = binned.column(f);
                for (leaf, &b) in leaves.iter_mut().zip(column) {
                    if b as usize > k {
                        *leaf |= 1 << level;
                    }
                }
                Split {
                    feature: f,
                    border: binned.bins().borders(f)[k],
                }
            }
            None => Split::NULL,
        };
        splits.push(split);
        leaf_stats = vec![Stats::default(); leaf_count * 2];
        for (d, &leaf) in leaves.iter().enumerate() {
            leaf_stats[leaf as usize].add(grad[d], hess[d]);
        }
    }
    let leaf_values = leaf_stats
        .iter()
        .map(|s| {
            let denom = s.h + l2;
            if denom > 0.0 {
                -s.g / denom
            } else {
                0.0
            }
        })
        .collect();
    Ok(FittedTree {
        tree: ObliviousTree::new(splits, leaf_values)?,
        leaves,
    })
}
