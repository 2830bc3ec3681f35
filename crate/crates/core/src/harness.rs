//! Experiment helpers: label transforms, loss specs, model comparison,
//! generalization gaps and random-search tuning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gbdt::{train, BoostConfig, ObliviousEnsemble};
use crate::metrics::{mean_metric, per_query, LabelScale, Metric, DEFAULT_DECAY};
use crate::objectives::{stream_seed, DecayAnchor, Objective, Smoothing, StochasticRankConfig, Window};
use crate::ranking::{binarize_labels, scale_labels_unit, Dataset};
use crate::stats::{paired_t_test, PairedTTest};

/// Relabels a graded dataset for `metric`: binary for MRR and MAP, divided by
/// 4 for ERR, unchanged otherwise.
pub fn transform_for_metric(dataset: &Dataset, metric: &Metric) -> Result<Dataset> {
    match metric.label_scale() {
        LabelScale::Graded => Ok(dataset.clone()),
        LabelScale::Binary => dataset.map_labels(binarize_labels),
        LabelScale::Unit => dataset.map_labels(scale_labels_unit),
    }
}

/// Objective hyperparameters not named in the loss spec itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveOptions {
    pub permutations: usize,
    pub decay: f64,
    pub anchor: DecayAnchor,
    pub smoothing: Smoothing,
    pub window: Window,
    pub stochastic: StochasticRankConfig,
}

impl Default for ObjectiveOptions {
    fn default() -> Self {
        ObjectiveOptions {
            permutations: 10,
            decay: DEFAULT_DECAY,
            anchor: DecayAnchor::PairTop,
            smoothing: Smoothing::Logistic,
            window: Window::Within(1),
            stochastic: StochasticRankConfig::default(),
        }
    }
}

/// Parses `query-rmse`, `lambdamart:<metric>`, `yetirank`, `yetiloss:<metric>`
/// or `stochasticrank:<metric>`.
pub fn parse_loss(spec: &str, options: &ObjectiveOptions) -> Result<Objective> {
    let (name, metric) = match spec.split_once(':') {
        Some((name, m)) => (name, Some(m.parse::<Metric>()?)),
        None => (spec, None),
    };
    let objective = match (name, metric) {
        ("query-rmse", None) => Objective::QueryRmse,
        ("yetirank", None) => Objective::YetiRank {
            decay: options.decay,
            anchor: options.anchor,
            smoothing: options.smoothing,
            permutations: options.permutations,
        },
        ("lambdamart", Some(metric)) => Objective::LambdaMart { metric },
        ("yetiloss", Some(metric)) => Objective::YetiLoss {
            metric,
            window: options.window,
            smoothing: options.smoothing,
            permutations: options.permutations,
        },
        ("stochasticrank", Some(metric)) => Objective::StochasticRank {
            metric,
            config: options.stochastic,
        },
        _ => return Err(Error::config(format!("unknown loss {spec:?}"))),
    };
    objective.validate()?;
    Ok(objective)
}

/// The metric whose label scale training data is converted to: the
/// objective's own metric, else the evaluation metric.
pub fn target_metric(objective: &Objective, eval_metric: Option<Metric>) -> Result<Metric> {
    let target = objective.metric().or(eval_metric).unwrap_or(Metric::ndcg(10));
    if let Some(eval) = eval_metric {
        if eval.label_scale() != target.label_scale() {
            return Err(Error::config(format!(
                "evaluation metric {eval} and training target {target} need different label scales"
            )));
        }
    }
    Ok(target)
}

/// One row of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricValue {
    pub metric: String,
    /// Mean over queries, x100.
    pub value: f64,
    /// Per-query values in `[0, 1]` (or raw DCG units), in dataset order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_query: Option<Vec<(String, f64)>>,
}

/// Scores `dataset` with `model` and evaluates each metric on labels
/// transformed for it.
pub fn evaluate_model(
    model: &ObliviousEnsemble,
    dataset: &Dataset,
    metrics: &[Metric],
    with_per_query: bool,
) -> Result<Vec<MetricValue>> {
    let scores = model.predict(dataset)?;
    metrics
        .iter()
        .map(|m| {
            let data = transform_for_metric(dataset, m)?;
            let per = with_per_query
                .then(|| -> Result<Vec<(String, f64)>> {
                    let values = per_query(&scores, &data, m)?;
                    Ok(data.groups().iter().map(|g| g.query_id().to_string()).zip(values).collect())
                })
                .transpose()?;
            Ok(MetricValue {
                metric: m.to_string(),
                value: mean_metric(&scores, &data, m)?,
                per_query: per,
            })
        })
        .collect()
}

/// Paired comparison of two models on one test set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub metric: String,
    /// Mean metric of model A, x100.
    pub value_a: f64,
    pub value_b: f64,
    pub t: f64,
    pub p: f64,
    pub significant: bool,
    #[serde(skip)]
    pub test: PairedTTest,
}

/// One-tailed paired t-test of "A beats B" on per-query metric values.
pub fn compare_models(
    a: &ObliviousEnsemble,
    b: &ObliviousEnsemble,
    dataset: &Dataset,
    metric: &Metric,
) -> Result<Comparison> {
    let data = transform_for_metric(dataset, metric)?;
    let va = per_query(&a.predict(&data)?, &data, metric)?;
    let vb = per_query(&b.predict(&data)?, &data, metric)?;
    let test = paired_t_test(&va, &vb)?;
    Ok(Comparison {
        metric: metric.to_string(),
        value_a: 100.0 * test.mean_a,
        value_b: 100.0 * test.mean_b,
        t: test.t,
        p: test.p,
        significant: test.significant,
        test,
    })
}

/// Train and test metric of one model; smaller gaps mean better generalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapReport {
    pub train: f64,
    pub test: f64,
    /// `train - test`, x100 like both metrics.
    pub gap: f64,
}

pub fn generalization_gap(
    model: &ObliviousEnsemble,
    train_set: &Dataset,
    test_set: &Dataset,
    metric: &Metric,
) -> Result<GapReport> {
    let score = |d: &Dataset| -> Result<f64> {
        let data = transform_for_metric(d, metric)?;
        mean_metric(&model.predict(&data)?, &data, metric)
    };
    let (train_value, test_value) = (score(train_set)?, score(test_set)?);
    Ok(GapReport {
        train: train_value,
        test: test_value,
        gap: train_value - test_value,
    })
}

/// Hyperparameters drawn for one tuning trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialParams {
    pub learning_rate: f64,
    pub l2_leaf_reg: f64,
    pub depth: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_shrink_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion_temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub params: TrialParams,
    pub best_iteration: usize,
    /// Best validation metric, x100.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneOutcome {
    pub metric: String,
    pub trials: Vec<TrialResult>,
    /// Index into `trials`.
    pub best: usize,
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..=hi.ln())).exp().clamp(lo, hi)
}

/// Draws the hyperparameters of trial `trial` from a generator seeded by
/// `(seed, trial)`, so trials are independent of execution order.
pub fn sample_trial(objective: &Objective, seed: u64, trial: usize) -> TrialParams {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, trial as u64, 0));
    let stochastic = matches!(objective, Objective::StochasticRank { .. });
    let learning_rate = log_uniform(&mut rng, 1e-3, 1.0);
    let l2_leaf_reg = log_uniform(&mut rng, 1e-3, 100.0);
    let depth = rng.random_range(6..=if stochastic { 10 } else { 8 });
    let (mut model_shrink_rate, mut diffusion_temperature, mut mu) = (None, None, None);
    if stochastic {
        model_shrink_rate = Some(log_uniform(&mut rng, 1e-5, 1e-2));
        diffusion_temperature = Some(log_uniform(&mut rng, 1e8, 1e11));
        mu = Some(log_uniform(&mut rng, 1e-2, 10.0));
    }
    TrialParams {
        learning_rate,
        l2_leaf_reg,
        depth,
        model_shrink_rate,
        diffusion_temperature,
        mu,
    }
}

/// Applies a trial's draws to a base configuration.
pub fn apply_trial(base: &BoostConfig, params: &TrialParams) -> BoostConfig {
    let mut cfg = base.clone();
    cfg.learning_rate = params.learning_rate;
    cfg.l2_leaf_reg = params.l2_leaf_reg;
    cfg.depth = params.depth;
    if let Objective::StochasticRank { config, .. } = &mut cfg.objective {
        config.model_shrink_rate = params.model_shrink_rate.unwrap_or(config.model_shrink_rate);
        config.diffusion_temperature = params.diffusion_temperature.unwrap_or(config.diffusion_temperature);
        config.mu = params.mu.unwrap_or(config.mu);
    }
    cfg
}

/// Random search over learning rate, L2 regularization, depth and the
/// StochasticRank parameters; each trial keeps its best validation iteration.
/// `train_set` and `valid_set` must already carry the target metric's labels.
pub fn tune(
    train_set: &Dataset,
    valid_set: &Dataset,
    base: &BoostConfig,
    budget: usize,
    seed: u64,
) -> Result<TuneOutcome> {
    if budget == 0 {
        return Err(Error::config("tuning budget must be at least 1"));
    }
    base.validate()?;
    let mut trials = Vec::with_capacity(budget);
    for trial in 0..budget {
        let params = sample_trial(&base.objective, seed, trial);
        let out = train(train_set, Some(valid_set), &apply_trial(base, &params))?;
        let value = out.log[out.best_iteration].valid.unwrap_or(f64::NAN);
        trials.push(TrialResult {
            trial,
            params,
            best_iteration: out.best_iteration,
            value,
        });
    }
    let best = (0..trials.len())
        .fold(0, |best, i| if trials[i].value > trials[best].value { i } else { best });
    Ok(TuneOutcome {
        metric: base.eval_metric().to_string(),
        trials,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_specs() {
        let o = ObjectiveOptions::default();
        assert_eq!(parse_loss("query-rmse", &o).unwrap(), Objective::QueryRmse);
        assert_eq!(parse_loss("yetirank", &o).unwrap(), Objective::yetirank());
        assert_eq!(
            parse_loss("lambdamart:ndcg@10", &o).unwrap(),
            Objective::LambdaMart { metric: Metric::ndcg(10) }
        );
        assert_eq!(parse_loss("yetiloss:map", &o).unwrap(), Objective::yetiloss(Metric::AveragePrecision));
        assert!(matches!(parse_loss("stochasticrank:map", &o), Err(Error::Config(m)) if m.contains("map")));
        assert!(parse_loss("stochasticrank:mrr", &o).is_ok());
        assert!(parse_loss("yetirank:ndcg", &o).is_err());
        assert!(parse_loss("lambdamart:foo", &o).is_err());
        assert!(parse_loss("bogus", &o).is_err());
    }

    #[test]
    fn trials_respect_ranges() {
        for objective in [Objective::yetirank(), Objective::stochasticrank(Metric::ndcg(10))] {
            let stochastic = matches!(objective, Objective::StochasticRank { .. });
            for trial in 0..500 {
                let p = sample_trial(&objective, 7, trial);
                assert!((1e-3..=1.0).contains(&p.learning_rate));
                assert!((1e-3..=100.0).contains(&p.l2_leaf_reg));
                assert!((6..=if stochastic { 10 } else { 8 }).contains(&p.depth));
                assert_eq!(p.mu.is_some(), stochastic);
                if stochastic {
                    assert!((1e-5..=1e-2).contains(&p.model_shrink_rate.unwrap()));
                    assert!((1e8..=1e11).contains(&p.diffusion_temperature.unwrap()));
                    assert!((1e-2..=10.0).contains(&p.mu.unwrap()));
                }
            }
            assert_eq!(sample_trial(&objective, 7, 3), sample_trial(&objective, 7, 3));
        }
    }

    #[test]
    fn target_metric_rules() {
        assert_eq!(target_metric(&Objective::yetirank(), Some(Metric::ReciprocalRank)).unwrap(), Metric::ReciprocalRank);
        assert_eq!(target_metric(&Objective::yetirank(), None).unwrap(), Metric::ndcg(10));
        let lm = Objective::LambdaMart { metric: Metric::ndcg(5) };
        assert!(target_metric(&lm, Some(Metric::AveragePrecision)).is_err());
        assert_eq!(target_metric(&lm, Some(Metric::ndcg(10))).unwrap(), Metric::ndcg(5));
    }
}
