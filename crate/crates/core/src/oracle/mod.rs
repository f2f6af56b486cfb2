//! Independent ground truth for pre- and post-selected statistics.

pub mod script;
pub mod tsv;

pub use script::{ExperimentScript, ScriptStep};
pub use tsv::{abl_probabilities, branch_weights, run_direct, DirectResult, TwoStateVector};
