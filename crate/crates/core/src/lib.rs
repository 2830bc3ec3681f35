//! Gradient-boosted oblivious decision trees for learning to rank.
//!
//! The crate is organised bottom-up:
//!
//! - [`ranking`]: query groups, datasets and the worst-case tie-resolving sort
//! - [`metrics`]: NDCG/DCG, reciprocal rank, average precision, ERR and ExpDCG
//! - [`deltas`]: swap and move deltas with a brute-force oracle
//! - [`objectives`]: QueryRMSE, LambdaMART, YetiRank, YetiLoss and StochasticRank gradients
//! - [`gbdt`]: histogram binning, oblivious trees, the boosting loop and model files
//! - [`data`]: LETOR/SVMlight parsing and a synthetic dataset generator
//! - [`stats`] and [`harness`]: paired t-tests, generalization gaps and random search

pub mod data;
pub mod deltas;
pub mod error;
pub mod gbdt;
pub mod harness;
pub mod metrics;
pub mod objectives;
pub mod ranking;
pub mod stats;

pub use error::{Error, Result};
pub use metrics::Metric;
pub use ranking::{Dataset, QueryGroup, RankPermutation};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ranking.md")]
    mod ranking {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/deltas.md")]
    mod deltas {}
    #[doc = include_str!("../../../book/src/objectives.md")]
    mod objectives {}
    #[doc = include_str!("../../../book/src/stochasticrank.md")]
    mod stochasticrank {}
    #[doc = include_str!("../../../book/src/boosting.md")]
    mod boosting {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
