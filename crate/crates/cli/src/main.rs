//! `rankforge` command-line interface.

use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use rankforge::data::{generate_synthetic, read_letor, save_letor, SyntheticConfig};
use rankforge::gbdt::{load_model, save_model, train, BoostConfig};
use rankforge::harness::{
    compare_models, evaluate_model, generalization_gap, parse_loss, target_metric, transform_for_metric, tune,
    ObjectiveOptions,
};
use rankforge::objectives::{DecayAnchor, Smoothing, StochasticRankConfig, Window};
use rankforge::ranking::split_dataset;
use rankforge::{Error, Metric};

#[derive(Parser)]
#[command(name = "rankforge", version, about = "Gradient-boosted oblivious trees for learning to rank")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and print the per-iteration metric log
    Train(TrainArgs),
    /// Print one score per document
    Predict(PredictArgs),
    /// Evaluate a model (metrics are x100)
    Evaluate(EvaluateArgs),
    /// Paired one-tailed t-test: does model A beat model B?
    Compare(CompareArgs),
    /// Train metric, test metric and their difference
    Gap(GapArgs),
    /// Random search over learning rate, L2, depth (and StochasticRank parameters)
    Tune(TuneArgs),
    /// Write a synthetic LETOR dataset
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AnchorArg {
    PairTop,
    MoreRelevant,
}

#[derive(Args)]
struct ObjectiveArgs {
    /// query-rmse | lambdamart:<metric> | yetirank | yetiloss:<metric> | stochasticrank:<metric>
    #[arg(long, default_value = "yetirank")]
    loss: String,
    /// Evaluation metric: ndcg@K | mrr | map | err | expdcg (default: the loss's metric, else ndcg@10)
    #[arg(long)]
    metric: Option<Metric>,
    #[arg(long, default_value_t = 10)]
    permutations: usize,
    #[arg(long, default_value_t = 0.85)]
    decay_b: f64,
    #[arg(long, value_enum, default_value_t = AnchorArg::PairTop)]
    decay_anchor: AnchorArg,
    /// logistic | gaussian | none
    #[arg(long, default_value = "logistic")]
    smoothing: Smoothing,
    /// 1 | 2 | 3 | all, or =K for exactly distance K
    #[arg(long, default_value = "1")]
    neighbor_window: Window,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long, default_value_t = 0.0)]
    model_shrink_rate: f64,
    #[arg(long, default_value_t = 1e9)]
    diffusion_temperature: f64,
}

#[derive(Args)]
struct BoostArgs {
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 6)]
    depth: usize,
    #[arg(long, default_value_t = 3.0)]
    l2_leaf_reg: f64,
    #[arg(long, default_value_t = 10)]
    min_data_in_leaf: usize,
    #[arg(long, default_value_t = 255)]
    max_bins: usize,
    /// Stop after this many iterations without validation improvement
    #[arg(long)]
    early_stopping_patience: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Where to write the model
    #[arg(long, short)]
    output: PathBuf,
    #[command(flatten)]
    objective: ObjectiveArgs,
    #[command(flatten)]
    boost: BoostArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Repeatable or comma-separated
    #[arg(long, value_delimiter = ',', default_value = "ndcg@10")]
    metric: Vec<Metric>,
    /// Also print one line per query
    #[arg(long)]
    per_query: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    model_a: PathBuf,
    #[arg(long)]
    model_b: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "ndcg@10")]
    metric: Metric,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GapArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "ndcg@10")]
    metric: Metric,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    valid: PathBuf,
    #[arg(long, default_value_t = 20)]
    budget: usize,
    #[command(flatten)]
    objective: ObjectiveArgs,
    #[command(flatten)]
    boost: BoostArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 2000)]
    queries: usize,
    #[arg(long, default_value_t = 10)]
    min_docs: usize,
    #[arg(long, default_value_t = 30)]
    max_docs: usize,
    #[arg(long, default_value_t = 20)]
    features: usize,
    #[arg(long, default_value_t = 0.1)]
    label_noise: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output file; with --split, a prefix for <prefix>.train/.valid/.test
    #[arg(long, short)]
    output: PathBuf,
    /// Also split queries 60/20/20 into train, valid and test files
    #[arg(long)]
    split: bool,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn objective_options(a: &ObjectiveArgs) -> ObjectiveOptions {
    ObjectiveOptions {
        permutations: a.permutations,
        decay: a.decay_b,
        anchor: match a.decay_anchor {
            AnchorArg::PairTop => DecayAnchor::PairTop,
            AnchorArg::MoreRelevant => DecayAnchor::MoreRelevant,
        },
        smoothing: a.smoothing,
        window: a.neighbor_window,
        stochastic: StochasticRankConfig {
            sigma: a.sigma,
            mu: a.mu,
            model_shrink_rate: a.model_shrink_rate,
            diffusion_temperature: a.diffusion_temperature,
        },
    }
}

/// Boosting config plus the metric whose label scale the data must be converted to.
fn boost_config(o: &ObjectiveArgs, b: &BoostArgs) -> Result<(BoostConfig, Metric), Failure> {
    let objective = parse_loss(&o.loss, &objective_options(o))?;
    let target = target_metric(&objective, o.metric)?;
    let cfg = BoostConfig {
        iterations: b.iterations,
        learning_rate: b.learning_rate,
        depth: b.depth,
        l2_leaf_reg: b.l2_leaf_reg,
        min_data_in_leaf: b.min_data_in_leaf,
        max_bins: b.max_bins,
        objective,
        eval_metric: o.metric,
        early_stopping_patience: b.early_stopping_patience,
        seed: b.seed,
    };
    cfg.validate()?;
    Ok((cfg, target))
}

fn print_json(value: &serde_json::Value) -> Outcome {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure::Data(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn fmt2(x: f64) -> String {
    format!("{x:.2}")
}

fn cmd_train(a: TrainArgs) -> Outcome {
    let (cfg, target) = boost_config(&a.objective, &a.boost)?;
    let train_set = transform_for_metric(&read_letor(&a.train)?, &target)?;
    let valid_set = match &a.valid {
        Some(p) => Some(transform_for_metric(&read_letor(p)?, &target)?),
        None => None,
    };
    let out = train(&train_set, valid_set.as_ref(), &cfg)?;
    save_model(&out.model, &a.output)?;
    let best = out.log[out.best_iteration];
    let value = best.valid.unwrap_or(best.train);
    if a.json {
        return print_json(&json!({
            "metric": out.eval_metric.to_string(),
            "value": value,
            "best_iteration": out.best_iteration,
            "log": out.log,
        }));
    }
    let mut w = BufWriter::new(io::stdout().lock());
    writeln!(w, "{:>9}  {:>10}  {:>10}", "iteration", format!("train {}", out.eval_metric), "valid")?;
    for r in &out.log {
        let valid = r.valid.map_or_else(|| "-".to_string(), fmt2);
        writeln!(w, "{:>9}  {:>10}  {:>10}", r.iteration, fmt2(r.train), valid)?;
    }
    writeln!(w, "best_iteration {}  {} {}", out.best_iteration, out.eval_metric, fmt2(value))?;
    w.flush()?;
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Outcome {
    let model = load_model(&a.model)?;
    let data = read_letor(&a.data)?;
    let scores = model.predict(&data)?;
    let mut w = BufWriter::new(io::stdout().lock());
    for z in scores.iter().flatten() {
        writeln!(w, "{z}")?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Outcome {
    let model = load_model(&a.model)?;
    let data = read_letor(&a.data)?;
    let report = evaluate_model(&model, &data, &a.metric, a.per_query)?;
    if a.json {
        return print_json(&json!(report));
    }
    let mut w = BufWriter::new(io::stdout().lock());
    writeln!(w, "{:<10}  {:>8}", "metric", "value")?;
    for m in &report {
        writeln!(w, "{:<10}  {:>8}", m.metric, fmt2(m.value))?;
    }
    let empty = data.groups().iter().filter(|g| g.labels().iter().all(|&r| r == 0.0)).count();
    if empty > 0 {
        writeln!(w, "note: {empty} queries have no relevant document; they count as NDCG 1 and AP/RR/ERR 0")?;
    }
    for m in &report {
        for (qid, v) in m.per_query.iter().flatten() {
            writeln!(w, "{} {qid} {v}", m.metric)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Outcome {
    let model_a = load_model(&a.model_a)?;
    let model_b = load_model(&a.model_b)?;
    let data = read_letor(&a.data)?;
    let c = compare_models(&model_a, &model_b, &data, &a.metric)?;
    if a.json {
        return print_json(&json!({
            "metric": c.metric,
            "value": c.value_a - c.value_b,
            "value_a": c.value_a,
            "value_b": c.value_b,
            "t": c.t,
            "p": c.p,
            "significant": c.significant,
        }));
    }
    let mut w = io::stdout().lock();
    writeln!(w, "{:<10}  {:>8}  {:>8}  {:>9}  {:>10}  significant", "metric", "A", "B", "t", "p")?;
    writeln!(
        w,
        "{:<10}  {:>8}  {:>8}  {:>9.4}  {:>10.3e}  {}",
        c.metric,
        fmt2(c.value_a),
        fmt2(c.value_b),
        c.t,
        c.p,
        if c.significant { "yes" } else { "no" }
    )?;
    Ok(())
}

fn cmd_gap(a: GapArgs) -> Outcome {
    let model = load_model(&a.model)?;
    let g = generalization_gap(&model, &read_letor(&a.train)?, &read_letor(&a.test)?, &a.metric)?;
    if a.json {
        return print_json(&json!({
            "metric": a.metric.to_string(),
            "value": g.gap,
            "train": g.train,
            "test": g.test,
            "gap": g.gap,
        }));
    }
    let mut w = io::stdout().lock();
    writeln!(w, "{:<10}  {:>8}  {:>8}  {:>8}", "metric", "train", "test", "gap")?;
    writeln!(w, "{:<10}  {:>8}  {:>8}  {:>8}", a.metric, fmt2(g.train), fmt2(g.test), fmt2(g.gap))?;
    Ok(())
}

fn cmd_tune(a: TuneArgs) -> Outcome {
    let (cfg, target) = boost_config(&a.objective, &a.boost)?;
    let train_set = transform_for_metric(&read_letor(&a.train)?, &target)?;
    let valid_set = transform_for_metric(&read_letor(&a.valid)?, &target)?;
    let out = tune(&train_set, &valid_set, &cfg, a.budget, a.boost.seed)?;
    let best = &out.trials[out.best];
    if a.json {
        return print_json(&json!({
            "metric": out.metric,
            "value": best.value,
            "best_iteration": best.best_iteration,
            "best_trial": best.trial,
            "trials": out.trials,
        }));
    }
    let mut w = BufWriter::new(io::stdout().lock());
    writeln!(
        w,
        "{:>5}  {:>10}  {:>10}  {:>5}  {:>9}  {:>8}",
        "trial", "lr", "l2", "depth", "best_iter", "value"
    )?;
    for t in &out.trials {
        writeln!(
            w,
            "{:>5}  {:>10.5}  {:>10.5}  {:>5}  {:>9}  {:>8}",
            t.trial,
            t.params.learning_rate,
            t.params.l2_leaf_reg,
            t.params.depth,
            t.best_iteration,
            fmt2(t.value)
        )?;
    }
    writeln!(w, "best trial {} ({} {})", best.trial, out.metric, fmt2(best.value))?;
    w.flush()?;
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Outcome {
    let data = generate_synthetic(&SyntheticConfig {
        queries: a.queries,
        docs_per_query: (a.min_docs, a.max_docs),
        features: a.features,
        label_noise: a.label_noise,
        seed: a.seed,
    })?;
    if !a.split {
        save_letor(&data, &a.output)?;
        return Ok(());
    }
    let (train_set, rest) = split_dataset(&data, (0.6, 0.4), a.seed)?;
    let (valid_set, test_set) = split_dataset(&rest, (0.5, 0.5), a.seed.wrapping_add(1))?;
    for (suffix, part) in [("train", &train_set), ("valid", &valid_set), ("test", &test_set)] {
        let mut path = a.output.clone().into_os_string();
        path.push(format!(".{suffix}"));
        save_letor(part, PathBuf::from(path))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Gap(a) => cmd_gap(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
