use std::io::{BufRead, BufReader};
use std::path::Path;

use rankforge::data::{generate_synthetic, parse_letor, SyntheticConfig};
use rankforge::gbdt::{build_bins, fit_tree, train, BoostConfig, ObliviousEnsemble, ObliviousTree, TreeParams};
use rankforge::harness::{generalization_gap, transform_for_metric};
use rankforge::metrics::mean_metric;
use rankforge::objectives::{compute_gradients, Objective, StochasticRankConfig};
use rankforge::ranking::split_dataset;
use rankforge::{Dataset, Metric};

fn small(seed: u64, label_noise: f64) -> Dataset {
    generate_synthetic(&SyntheticConfig {
        queries: 150,
        docs_per_query: (5, 15),
        features: 8,
        label_noise,
        seed,
    })
    .unwrap()
}

fn stochastic(temperature: f64) -> Objective {
    Objective::StochasticRank {
        metric: Metric::ndcg(10),
        config: StochasticRankConfig {
            sigma: 0.5,
            mu: 0.0,
            model_shrink_rate: 0.0,
            diffusion_temperature: temperature,
        },
    }
}

/// Plain gradient boosting on the CCS gradients, written against the public
/// tree-fitting API.
fn plain_boosting(data: &Dataset, cfg: &BoostConfig) -> ObliviousEnsemble {
    let binned = build_bins(data, cfg.max_bins).unwrap().bin_dataset(data).unwrap();
    let params = TreeParams {
        depth: cfg.depth,
        l2_leaf_reg: cfg.l2_leaf_reg,
        min_data_in_leaf: cfg.min_data_in_leaf,
    };
    let mut model = ObliviousEnsemble::empty(data.feature_count());
    let mut preds: Vec<Vec<f64>> = data.groups().iter().map(|g| vec![0.0; g.len()]).collect();
    for iteration in 1..=cfg.iterations {
        let mut buf = compute_gradients(&cfg.objective, data, &preds, cfg.seed, iteration as u64).unwrap();
        buf.hess.fill(1.0);
        let raw = fit_tree(&buf, &binned, &params).unwrap();
        let leaves = raw.leaf_values().iter().map(|v| v * cfg.learning_rate).collect();
        let tree = ObliviousTree::new(raw.splits().to_vec(), leaves).unwrap();
        for (g, z) in data.groups().iter().zip(preds.iter_mut()) {
            for (row, z) in g.rows().zip(z.iter_mut()) {
                *z += tree.predict_row(row);
            }
        }
        model.push(tree).unwrap();
    }
    model
}

#[test]
fn stochasticrank_without_diffusion_is_plain_boosting() {
    let data = small(1, 0.1);
    let cfg = BoostConfig {
        iterations: 15,
        depth: 4,
        objective: stochastic(f64::INFINITY),
        seed: 3,
        ..Default::default()
    };
    let sglb = train(&data, None, &cfg).unwrap().model;
    let plain = plain_boosting(&data, &cfg);
    assert_eq!(sglb.trees(), plain.trees());
    assert!(sglb.scales().iter().all(|&s| s == 1.0));

    // At a finite but huge temperature the injected noise is below 1e-15:
    // same splits, leaves equal to within 1e-12.
    let hot = train(
        &data,
        None,
        &BoostConfig {
            objective: stochastic(1e30),
            ..cfg.clone()
        },
    )
    .unwrap()
    .model;
    for (a, b) in hot.trees().iter().zip(plain.trees()) {
        assert_eq!(a.splits(), b.splits());
        for (x, y) in a.leaf_values().iter().zip(b.leaf_values()) {
            assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
        }
    }
}

fn rmse_loss(model: &ObliviousEnsemble, trees: usize, data: &Dataset) -> f64 {
    let mut total = 0.0;
    for g in data.groups() {
        let mut sum = 0.0;
        for (row, &r) in g.rows().zip(g.labels()) {
            let z: f64 = model.trees()[..trees].iter().map(|t| t.predict_row(row)).sum();
            sum += (z - r) * (z - r);
        }
        total += sum / g.len() as f64;
    }
    total / data.query_count() as f64
}

#[test]
fn query_rmse_training_loss_never_increases() {
    let data = small(2, 0.1);
    for lr in [0.3, 1.0] {
        let cfg = BoostConfig {
            iterations: 30,
            depth: 4,
            learning_rate: lr,
            objective: Objective::QueryRmse,
            ..Default::default()
        };
        let model = train(&data, None, &cfg).unwrap().model;
        let losses: Vec<f64> = (0..=model.len()).map(|t| rmse_loss(&model, t, &data)).collect();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "lr {lr}: {} -> {}", w[0], w[1]);
        }
        assert!(losses.last().unwrap() < &(0.5 * losses[0]));
    }
}

#[test]
fn early_stopping_keeps_the_best_validation_iteration() {
    let data = small(3, 0.3);
    let (tr, va) = split_dataset(&data, (0.6, 0.4), 3).unwrap();
    for objective in [Objective::yetirank(), stochastic(1e6)] {
        let out = train(
            &tr,
            Some(&va),
            &BoostConfig {
                iterations: 60,
                depth: 5,
                learning_rate: 0.3,
                objective,
                ..Default::default()
            },
        )
        .unwrap();
        let vals: Vec<f64> = out.log.iter().map(|r| r.valid.unwrap()).collect();
        let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let first = vals.iter().position(|&v| v == best).unwrap();
        assert_eq!(out.best_iteration, first);
        assert_eq!(out.model.len(), first);
        // The truncated model reproduces the logged validation score.
        let va_scores = out.model.predict(&va).unwrap();
        let again = mean_metric(&va_scores, &va, &out.eval_metric).unwrap();
        assert!((again - best).abs() <= 1e-9, "{again} vs {best}");
    }
}

#[test]
fn noiseless_labels_are_learnable() {
    let data = small(4, 0.0);
    let out = train(
        &data,
        None,
        &BoostConfig {
            iterations: 150,
            depth: 6,
            learning_rate: 0.3,
            objective: Objective::yetirank(),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(out.log.last().unwrap().train >= 95.0, "{:?}", out.log.last());

    // Pure noise: nothing generalizes, but training still runs.
    let noise = small(4, 1.0);
    let (tr, te) = split_dataset(&noise, (0.5, 0.5), 4).unwrap();
    let cfg = BoostConfig {
        iterations: 40,
        depth: 4,
        ..Default::default()
    };
    let model = train(&tr, None, &cfg).unwrap().model;
    let gap = generalization_gap(&model, &tr, &te, &Metric::ndcg(10)).unwrap();
    assert!(gap.gap > 0.0, "{gap:?}");
}

#[test]
fn generalization_gap_is_train_minus_test() {
    // Reference figures for YetiRank on Web10K: train 56.88, test 50.75, gap 6.13.
    assert!((56.88f64 - 50.75 - 6.13).abs() < 1e-9);

    let data = small(5, 0.2);
    let (tr, te) = split_dataset(&data, (0.7, 0.3), 5).unwrap();
    let model = train(&tr, None, &BoostConfig { iterations: 30, depth: 4, ..Default::default() }).unwrap().model;
    for metric in [Metric::ndcg(10), Metric::AveragePrecision, Metric::ExpectedReciprocalRank] {
        let r = generalization_gap(&model, &tr, &te, &metric).unwrap();
        let t = transform_for_metric(&tr, &metric).unwrap();
        let train_value = mean_metric(&model.predict(&t).unwrap(), &t, &metric).unwrap();
        assert_eq!(r.train, train_value);
        assert_eq!(r.gap, r.train - r.test);
    }
}

#[test]
fn every_trained_tree_is_oblivious() {
    let data = small(6, 0.1);
    for depth in [1, 3, 7] {
        let model = train(&data, None, &BoostConfig { iterations: 5, depth, ..Default::default() }).unwrap().model;
        for t in model.trees() {
            assert_eq!(t.depth(), depth);
            assert_eq!(t.splits().len(), depth);
            assert_eq!(t.leaf_values().len(), 1 << depth);
            for (g, _) in data.groups().iter().zip(0..3) {
                for row in g.rows() {
                    let leaf = t.leaf_index(row);
                    for (bit, s) in t.splits().iter().enumerate() {
                        assert_eq!(leaf >> bit & 1 == 1, row[s.feature] > s.border);
                    }
                }
            }
        }
    }
}

/// Feature counts of public benchmarks, checked on the first 100 lines of a
/// local copy when the corresponding variable points at one.
#[test]
fn benchmark_feature_counts() {
    for (var, file, features) in [
        ("RANKFORGE_WEB10K_DIR", "train.txt", 136),
        ("RANKFORGE_YAHOO_DIR", "set1.train.txt", 699),
        ("RANKFORGE_ISTELLA_DIR", "train.txt", 220),
    ] {
        let Ok(dir) = std::env::var(var) else { continue };
        let f = std::fs::File::open(Path::new(&dir).join(file)).unwrap();
        let head: String = BufReader::new(f).lines().take(100).map(|l| l.unwrap() + "\n").collect();
        let data = parse_letor(head.as_bytes()).unwrap();
        assert_eq!(data.feature_count(), features, "{var}");
    }
}
