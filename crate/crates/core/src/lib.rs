//! Percussion stroke classification: clip ingestion, spectral feature
//! extraction, tree learners (CART, ID3, random forest) and evaluation.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio_io;
pub mod cli;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod forest;
pub mod model_io;
pub mod preset;
pub mod trees;

pub use audio_io::{AudioClip, StrokeSpec};
pub use dataset::Dataset;
pub use eval::{EvalReport, RocCurve};
pub use features::{AnalysisConfig, FeatureVector};
pub use forest::{ForestModel, ForestParams};
pub use trees::{ClassDistribution, Criterion, TreeModel, TreeParams};
