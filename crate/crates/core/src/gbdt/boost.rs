use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{mean_metric, Metric};
use crate::objectives::{compute_gradients, stream_seed, Objective};
use crate::ranking::Dataset;

use super::bins::build_bins;
use super::tree::{fit_tree_with_leaves, TreeParams, MAX_DEPTH};
use super::ObliviousEnsemble;

/// Boosting hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub depth: usize,
    pub l2_leaf_reg: f64,
    pub min_data_in_leaf: usize,
    /// Histogram resolution, at most 256.
    pub max_bins: usize,
    pub objective: Objective,
    /// Metric logged and used for model selection; defaults to the
    /// objective's target metric, or NDCG@10.
    pub eval_metric: Option<Metric>,
    /// Stop after this many iterations without a better validation score.
    pub early_stopping_patience: Option<usize>,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            iterations: 1000,
            learning_rate: 0.1,
            depth: 6,
            l2_leaf_reg: 3.0,
            min_data_in_leaf: 10,
            max_bins: 255,
            objective: Objective::yetirank(),
            eval_metric: None,
            early_stopping_patience: None,
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn eval_metric(&self) -> Metric {
        self.eval_metric
            .or_else(|| self.objective.metric())
            .unwrap_or(Metric::ndcg(10))
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("iterations must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(1..=MAX_DEPTH).contains(&self.depth) {
            return Err(Error::config(format!("depth must lie in 1..={MAX_DEPTH}, got {}", self.depth)));
        }
        if !(self.l2_leaf_reg >= 0.0 && self.l2_leaf_reg.is_finite()) {
            return Err(Error::config(format!("l2-leaf-reg must be non-negative, got {}", self.l2_leaf_reg)));
        }
        if !(2..=256).contains(&self.max_bins) {
            return Err(Error::config(format!("max bins must lie in [2, 256], got {}", self.max_bins)));
        }
        if self.early_stopping_patience == Some(0) {
            return Err(Error::config("early stopping patience must be at least 1"));
        }
        self.objective.validate()?;
        self.eval_metric().validate().map_err(|e| Error::config(e.to_string()))
    }
}

/// Metric values (x100) after `iteration` trees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub train: f64,
    pub valid: Option<f64>,
}

/// A trained model with its learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    /// Truncated to `best_iteration` trees when a validation set was given.
    pub model: ObliviousEnsemble,
    /// One record per iteration, starting with the empty model at iteration 0.
    pub log: Vec<IterationRecord>,
    pub best_iteration: usize,
    pub eval_metric: Metric,
}

fn check_labels(dataset: &Dataset, metrics: &[Metric], which: &str) -> Result<()> {
    for m in metrics {
        for g in dataset.groups() {
            m.check_labels(g.labels()).map_err(|e| {
                Error::config(format!("{which} query {}: {e}; transform labels for this metric first", g.query_id()))
            })?;
        }
    }
    Ok(())
}

/// Scores of every query, recomputed from cached leaf indices.
fn recompute(model: &ObliviousEnsemble, leaves: &[Vec<u16>], preds: &mut [Vec<f64>]) {
    let mut d = 0;
    for query in preds.iter_mut() {
        for z in query.iter_mut() {
            let mut score = 0.0;
            for (t, tree_leaves) in leaves.iter().enumerate() {
                score += model.contribution(t, tree_leaves[d] as usize);
            }
            *z = score;
            d += 1;
        }
    }
}

fn record_metadata(model: &mut ObliviousEnsemble, cfg: &BoostConfig, metric: &Metric) {
    model.set_metadata("objective", cfg.objective);
    model.set_metadata("eval_metric", metric);
    model.set_metadata("iterations", cfg.iterations);
    model.set_metadata("learning_rate", cfg.learning_rate);
    model.set_metadata("depth", cfg.depth);
    model.set_metadata("l2_leaf_reg", cfg.l2_leaf_reg);
    model.set_metadata("min_data_in_leaf", cfg.min_data_in_leaf);
    model.set_metadata("seed", cfg.seed);
    match cfg.objective {
        Objective::YetiRank {
            decay,
            anchor,
            smoothing,
            permutations,
        } => {
            model.set_metadata("decay", decay);
            model.set_metadata("decay_anchor", format!("{anchor:?}"));
            model.set_metadata("smoothing", smoothing);
            model.set_metadata("permutations", permutations);
        }
        Objective::YetiLoss {
            window,
            smoothing,
            permutations,
            ..
        } => {
            model.set_metadata("neighbor_window", window);
            model.set_metadata("smoothing", smoothing);
            model.set_metadata("permutations", permutations);
        }
        Objective::StochasticRank { config, .. } => {
            model.set_metadata("sigma", config.sigma);
            model.set_metadata("mu", config.mu);
            model.set_metadata("model_shrink_rate", config.model_shrink_rate);
            model.set_metadata("diffusion_temperature", config.diffusion_temperature);
        }
        Objective::QueryRmse | Objective::LambdaMart { .. } => {}
    }
}

/// Gradient boosting with oblivious trees.
///
/// Every iteration computes the objective's derivatives at the current
/// training scores, fits one tree and appends it with its leaves multiplied by
/// the learning rate. Objectives without curvature use unit hessians. The L2
/// penalty is scaled by the mean hessian so it is comparable across objectives.
///
/// StochasticRank additionally shrinks all earlier trees by
/// `1 - model_shrink_rate` and adds `N(0, 2 lr / diffusion_temperature)` noise
/// to the gradients at every iteration.
///
/// With a validation set the model is cut back to the iteration with the best
/// validation metric (the earliest one on ties).
pub fn train(train: &Dataset, valid: Option<&Dataset>, cfg: &BoostConfig) -> Result<TrainingOutcome> {
    cfg.validate()?;
    let metric = cfg.eval_metric();
    if let Some(v) = valid {
        if v.feature_count() != train.feature_count() {
            return Err(Error::contract(format!(
                "validation set has {} features, training set {}",
                v.feature_count(),
                train.feature_count()
            )));
        }
    }
    let mut needed = vec![metric];
    needed.extend(cfg.objective.metric());
    check_labels(train, &needed, "training")?;
    if let Some(v) = valid {
        check_labels(v, &[metric], "validation")?;
    }

    let (shrink, noise_sd) = match cfg.objective {
        Objective::StochasticRank { config, .. } => (
            config.model_shrink_rate,
            (2.0 * cfg.learning_rate / config.diffusion_temperature).sqrt(),
        ),
        _ => (0.0, 0.0),
    };

    let bins = build_bins(train, cfg.max_bins)?;
    let binned = bins.bin_dataset(train)?;
    let params = TreeParams {
        depth: cfg.depth,
        l2_leaf_reg: 0.0,
        min_data_in_leaf: cfg.min_data_in_leaf,
    };
    let mut model = ObliviousEnsemble::empty(train.feature_count());
    let zeros = |d: &Dataset| -> Vec<Vec<f64>> { d.groups().iter().map(|g| vec![0.0; g.len()]).collect() };
    let mut train_preds = zeros(train);
    let mut valid_preds = valid.map(zeros);
    let mut train_leaves: Vec<Vec<u16>> = Vec::new();
    let mut valid_leaves: Vec<Vec<u16>> = Vec::new();

    let evaluate = |preds: &[Vec<f64>], valid_preds: &Option<Vec<Vec<f64>>>, iteration| -> Result<IterationRecord> {
        Ok(IterationRecord {
            iteration,
            train: mean_metric(preds, train, &metric)?,
            valid: match (valid, valid_preds) {
                (Some(v), Some(p)) => Some(mean_metric(p, v, &metric)?),
                _ => None,
            },
        })
    };
    let mut log = vec![evaluate(&train_preds, &valid_preds, 0)?];
    let mut best = 0;

    for iteration in 1..=cfg.iterations {
        if shrink > 0.0 {
            model.shrink(1.0 - shrink);
            recompute(&model, &train_leaves, &mut train_preds);
            if let Some(p) = valid_preds.as_mut() {
                recompute(&model, &valid_leaves, p);
            }
        }

        let mut buf = compute_gradients(&cfg.objective, train, &train_preds, cfg.seed, iteration as u64)?;
        if !cfg.objective.has_curvature() {
            buf.hess.fill(1.0);
        }
        if noise_sd > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, u64::MAX, iteration as u64));
            for g in &mut buf.grad {
                *g += noise_sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let mean_hess = buf.hess.iter().sum::<f64>() / buf.hess.len() as f64;
        let fitted = fit_tree_with_leaves(
            &buf.grad,
            &buf.hess,
            &binned,
            &TreeParams {
                l2_leaf_reg: cfg.l2_leaf_reg * mean_hess,
                ..params
            },
        )?;
        let mut tree = fitted.tree;
        for v in tree.leaf_values_mut() {
            *v *= cfg.learning_rate;
        }

        let mut d = 0;
        for query in train_preds.iter_mut() {
            for z in query.iter_mut() {
                *z += tree.leaf_values()[fitted.leaves[d] as usize];
                d += 1;
            }
        }
        if let (Some(v), Some(p)) = (valid, valid_preds.as_mut()) {
            let mut cache = Vec::new();
            for (g, query) in v.groups().iter().zip(p.iter_mut()) {
                for (row, z) in g.rows().zip(query.iter_mut()) {
                    let leaf = tree.leaf_index(row);
                    *z += tree.leaf_values()[leaf];
                    if shrink > 0.0 {
                        cache.push(leaf as u16);
                    }
                }
            }
            if shrink > 0.0 {
                valid_leaves.push(cache);
            }
        }
        if shrink > 0.0 {
            train_leaves.push(fitted.leaves.iter().map(|&l| l as u16).collect());
        }
        model.push(tree)?;

        let record = evaluate(&train_preds, &valid_preds, iteration)?;
        let improved = match (record.valid, log[best].valid) {
            (Some(now), Some(before)) => now > before,
            _ => true,
        };
        log.push(record);
        if improved {
            best = iteration;
        }
        if let Some(patience) = cfg.early_stopping_patience {
            if valid.is_some() && iteration - best >= patience {
                break;
            }
        }
    }

    if valid.is_some() && best < model.len() {
        model.truncate(best);
        if shrink > 0.0 {
            let mut scales = Vec::with_capacity(best);
            for _ in 0..best {
                scales.iter_mut().for_each(|s| *s *= 1.0 - shrink);
                scales.push(1.0);
            }
            model.set_scales(scales);
        }
    }
    record_metadata(&mut model, cfg, &metric);
    model.set_metadata("best_iteration", best);
    Ok(TrainingOutcome {
        model,
        log,
        best_iteration: best,
        eval_metric: metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};
    use crate::metrics::per_query;
    use crate::objectives::StochasticRankConfig;
    use crate::ranking::QueryGroup;

    fn small() -> Dataset {
        generate_synthetic(&SyntheticConfig {
            queries: 40,
            docs_per_query: (5, 12),
            features: 6,
            label_noise: 0.0,
            seed: 3,
        })
        .unwrap()
    }

    fn cfg(objective: Objective, iterations: usize) -> BoostConfig {
        BoostConfig {
            iterations,
            depth: 4,
            objective,
            ..Default::default()
        }
    }

    #[test]
    fn one_document_one_tree() {
        let d = Dataset::new(vec![QueryGroup::new("q", 1, vec![0.5], vec![2.0]).unwrap()]).unwrap();
        let out = train(&d, None, &cfg(Objective::QueryRmse, 1)).unwrap();
        assert_eq!(out.model.len(), 1);
        assert_eq!(out.log.len(), 2);
        assert!(train(&d, None, &cfg(Objective::QueryRmse, 0)).is_err());
    }

    #[test]
    fn query_rmse_fits_labels() {
        let d = small();
        let mut c = cfg(Objective::QueryRmse, 200);
        c.learning_rate = 1.0;
        c.depth = 10;
        c.min_data_in_leaf = 1;
        c.l2_leaf_reg = 0.0;
        c.eval_metric = Some(Metric::ndcg(10));
        let out = train(&d, None, &c).unwrap();
        let preds = out.model.predict(&d).unwrap();
        let worst = preds
            .iter()
            .zip(d.groups())
            .flat_map(|(z, g)| z.iter().zip(g.labels()).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "max residual {worst}");
    }

    #[test]
    fn logged_metric_matches_predict() {
        let d = small();
        let (tr, va) = crate::ranking::split_dataset(&d, (0.7, 0.3), 1).unwrap();
        let out = train(&tr, Some(&va), &cfg(Objective::yetirank(), 30)).unwrap();
        assert_eq!(out.model.len(), out.best_iteration);
        let rec = out.log[out.best_iteration];
        let m = out.eval_metric;
        assert_eq!(mean_metric(&out.model.predict(&tr).unwrap(), &tr, &m).unwrap(), rec.train);
        assert_eq!(mean_metric(&out.model.predict(&va).unwrap(), &va, &m).unwrap(), rec.valid.unwrap());
        let best = out.log.iter().filter_map(|r| r.valid).fold(f64::MIN, f64::max);
        assert_eq!(rec.valid, Some(best));
    }

    #[test]
    fn shrinkage_replay_matches_log() {
        let d = small();
        let (tr, va) = crate::ranking::split_dataset(&d, (0.7, 0.3), 1).unwrap();
        let objective = Objective::StochasticRank {
            metric: Metric::ndcg(5),
            config: StochasticRankConfig {
                model_shrink_rate: 0.01,
                diffusion_temperature: 1e6,
                ..Default::default()
            },
        };
        let out = train(&tr, Some(&va), &cfg(objective, 25)).unwrap();
        let rec = out.log[out.best_iteration];
        let m = out.eval_metric;
        let scores = out.model.predict(&va).unwrap();
        assert_eq!(mean_metric(&scores, &va, &m).unwrap(), rec.valid.unwrap());
        assert_eq!(per_query(&scores, &va, &m).unwrap().len(), va.query_count());
        assert!(out.model.scales().iter().all(|&s| s > 0.0 && s <= 1.0));
    }

    #[test]
    fn patience_stops_early() {
        let d = small();
        let (tr, va) = crate::ranking::split_dataset(&d, (0.7, 0.3), 1).unwrap();
        let mut c = cfg(Objective::yetirank(), 500);
        c.early_stopping_patience = Some(3);
        let out = train(&tr, Some(&va), &c).unwrap();
        let last = out.log.last().unwrap().iteration;
        assert!(last < 500);
        assert_eq!(last - out.best_iteration, 3);
    }

    #[test]
    fn incompatible_labels_are_a_config_error() {
        let d = small();
        let c = cfg(Objective::LambdaMart { metric: Metric::AveragePrecision }, 2);
        assert!(matches!(train(&d, None, &c), Err(Error::Config(_))));
    }
}
