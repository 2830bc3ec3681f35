use crate::error::{Error, Result};
use crate::ranking::Dataset;

/// Per-feature split borders. A value falls into bin `b` when exactly `b`
/// borders are strictly below it, so it lies right of border `k` iff `x > border[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBins {
    borders: Vec<Vec<f64>>,
}

impl FeatureBins {
    /// Wraps explicit borders, which must be finite and strictly increasing.
    pub fn from_borders(borders: Vec<Vec<f64>>) -> Result<Self> {
        for (f, b) in borders.iter().enumerate() {
            if b.len() > 255 {
                return Err(Error::contract(format!("feature {f} has {} borders, at most 255 allowed", b.len())));
            }
            if b.iter().any(|x| !x.is_finite()) || b.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::contract(format!("borders of feature {f} are not finite and strictly increasing")));
            }
        }
        Ok(FeatureBins { borders })
    }

    pub fn feature_count(&self) -> usize {
        self.borders.len()
    }

    pub fn borders(&self, feature: usize) -> &[f64] {
        &self.borders[feature]
    }

    pub fn bin(&self, feature: usize, value: f64) -> u8 {
        self.borders[feature].partition_point(|&b| b < value) as u8
    }

    /// Bins every document of `dataset`, in group order.
    pub fn bin_dataset(&self, dataset: &Dataset) -> Result<BinnedFeatures> {
        if dataset.feature_count() != self.feature_count() {
            return Err(Error::contract(format!(
                "dataset has {} features, bins were built for {}",
                dataset.feature_count(),
                self.feature_count()
            )));
        }
        let docs = dataset.document_count();
        let mut columns = vec![Vec::with_capacity(docs); self.feature_count()];
        for row in dataset.groups().iter().flat_map(|g| g.rows()) {
            for (f, &x) in row.iter().enumerate() {
                columns[f].push(self.bin(f, x));
            }
        }
        Ok(BinnedFeatures {
            bins: self.clone(),
            columns,
            docs,
        })
    }
}

/// Column-major bin indices for a fixed document order.
#[derive(Debug, Clone)]
pub struct BinnedFeatures {
    bins: FeatureBins,
    columns: Vec<Vec<u8>>,
    docs: usize,
}

impl BinnedFeatures {
    pub fn bins(&self) -> &FeatureBins {
        &self.bins
    }

    pub fn column(&self, feature: usize) -> &[u8] {
        &self.columns[feature]
    }

    pub fn document_count(&self) -> usize {
        self.docs
    }

    pub fn feature_count(&self) -> usize {
        self.columns.len()
    }
}

/// A border strictly between `a < b` that keeps `a` left and `b` right.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b || !m.is_finite() {
        a
    } else {
        m
    }
}

fn feature_borders(mut values: Vec<f64>, max_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    // Distinct values with the number of values <= each.
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match distinct.last_mut() {
            Some(last) if last.0 == v => last.1 = i + 1,
            _ => distinct.push((v, i + 1)),
        }
    }
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| midpoint(w[0].0, w[1].0)).collect();
    }
    // Cut after the distinct value whose cumulative count is nearest each quantile.
    let n = values.len() as f64;
    let mut cuts: Vec<usize> = Vec::with_capacity(max_bins - 1);
    for q in 1..max_bins {
        let target = q as f64 * n / max_bins as f64;
        let k = distinct[..distinct.len() - 1].partition_point(|&(_, c)| (c as f64) < target);
        let k = if k > 0 && target - distinct[k - 1].1 as f64 <= distinct[k].1 as f64 - target {
            k - 1
        } else {
            k.min(distinct.len() - 2)
        };
        if cuts.last() != Some(&k) {
            cuts.push(k);
        }
    }
    cuts.into_iter().map(|k| midpoint(distinct[k].0, distinct[k + 1].0)).collect()
}

/// Quantile borders from the training documents, at most `max_bins - 1` per feature.
/// Features with at most `max_bins` distinct values get a border between each pair.
pub fn build_bins(train: &Dataset, max_bins: usize) -> Result<FeatureBins> {
    if !(2..=256).contains(&max_bins) {
        return Err(Error::contract(format!("max_bins must lie in [2, 256], got {max_bins}")));
    }
    if train.document_count() == 0 {
        return Err(Error::contract("cannot build bins from an empty dataset"));
    }
    let borders = (0..train.feature_count())
        .map(|f| {
            let values = train.groups().iter().flat_map(|g| g.rows().map(move |r| r[f])).collect();
            feature_borders(values, max_bins)
        })
        .collect();
    Ok(FeatureBins { borders })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::QueryGroup;

    fn column(values: &[f64]) -> Dataset {
        let g = QueryGroup::new("q", 1, values.to_vec(), vec![0.0; values.len()]).unwrap();
        Dataset::new(vec![g]).unwrap()
    }

    #[test]
    fn small_examples() {
        assert!(build_bins(&column(&[2.0, 2.0, 2.0]), 255).unwrap().borders(0).is_empty());
        assert_eq!(build_bins(&column(&[3.0, 1.0, 2.0, 1.0]), 4).unwrap().borders(0), &[1.5, 2.5]);
        assert!(build_bins(&column(&[1.0]), 1).is_err());
        assert!(build_bins(&column(&[1.0]), 257).is_err());
    }

    #[test]
    fn bins_follow_strict_comparison() {
        let b = FeatureBins::from_borders(vec![vec![1.5, 2.5]]).unwrap();
        assert_eq!(b.bin(0, 1.0), 0);
        assert_eq!(b.bin(0, 1.5), 0);
        assert_eq!(b.bin(0, 2.0), 1);
        assert_eq!(b.bin(0, 9.0), 2);
        assert!(FeatureBins::from_borders(vec![vec![2.0, 1.0]]).is_err());
    }

    #[test]
    fn adjacent_floats_stay_separated() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let bins = build_bins(&column(&[a, b]), 4).unwrap();
        assert_eq!(bins.bin(0, a), 0);
        assert_eq!(bins.bin(0, b), 1);
    }

    #[test]
    fn quantile_borders_are_equal_frequency() {
        let n = 100_000;
        let values: Vec<f64> = (0..n).map(|i| ((i * 7919) % n) as f64 / n as f64).collect();
        let bins = build_bins(&column(&values), 255).unwrap();
        assert_eq!(bins.borders(0).len(), 254);
        let mut counts = [0usize; 255];
        for &v in &values {
            counts[bins.bin(0, v) as usize] += 1;
        }
        let ideal = n as f64 / 255.0;
        assert!(counts.iter().all(|&c| (c as f64 - ideal).abs() <= 0.01 * n as f64));
    }
}
