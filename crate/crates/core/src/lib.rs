//! Bagged decision-tree ensembles whose bootstrap bags are evolved by a
//! genetic algorithm, plus the bagging, random-forest and extra-trees
//! baselines, classification metrics and diversity measures.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod evobag;
pub mod metrics;
pub mod rng;
pub mod tree;

pub use data::{Dataset, LabelColumn, SplitPair};
pub use ensemble::{Ensemble, Voting};
pub use error::{Error, Result};
pub use evobag::{EvoConfig, GenerationStats};
pub use tree::{DecisionTree, SplitMode, TreeConfig};
