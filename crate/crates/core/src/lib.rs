//! Multi-label classification with classifier chains.
//!
//! A chain arranges one probabilistic binary classifier per label over a DAG
//! of label nodes; each node sees the instance features plus the values of
//! its parent labels. The crate covers:
//!
//! - [`data`]: dense datasets, CSV ingestion and splitting.
//! - [`learners`]: logistic regression and CART trees emitting clipped probabilities.
//! - [`structure`]: chain/DAG structures and their combinatorics.
//! - [`chain`]: per-node dataset transformation, training, greedy prediction.
//! - [`inference`]: greedy, exhaustive, beam and epsilon-approximate MAP search.
//! - [`search`]: random orders, dependence heuristics, order search, dynamic selection.
//! - [`relatives`]: ensembles of chains, dependency networks with Gibbs
//!   sampling, stacked binary relevance, two-pass chains, label powerset.
//! - [`eval`]: multi-label metrics, cross-validated payoff and order sweeps.
//! - [`io`]: plain-text model records.
//! - [`synth`]: synthetic generators used by tests, benches and the demo.

pub mod chain;
pub mod data;
pub mod error;
pub mod eval;
pub mod inference;
pub mod io;
pub mod learners;
pub mod relatives;
pub mod search;
pub mod structure;
pub mod synth;

mod parallel;

pub use chain::{ChainModel, Prediction, Propagation};
pub use data::{Dataset, Matrix};
pub use error::{Error, Result};
pub use inference::{ConditionalModel, InferenceConfig, InferenceMethod, TabularJoint};
pub use learners::{Classifier, LearnerConfig, LearnerKind, Regularization};
pub use structure::ChainStructure;

/// Anything that maps an instance to a multi-label prediction.
pub trait Predictor {
    fn n_labels(&self) -> usize;
    fn predict(&self, x: &[f64]) -> Prediction;
}
