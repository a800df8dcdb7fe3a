//! Sum-product network density models over mixed tabular data, used to
//! score outliers by negative log-density and to explain them by searching
//! feature subspaces with exact marginal inference.
//!
//! The crate is organised bottom-up:
//!
//! * [`spn`]: the circuit itself, its structural validation, joint and
//!   marginal log-density evaluation, and the JSON model format.
//! * [`learn`]: LearnSPN-style structure learning (RDC column splits,
//!   2-component GMM row splits, Gaussian/categorical leaves).
//! * [`explain`]: outlier scores, forward beam search, backward
//!   elimination, and elbow / z-score dimensionality selection.
//! * [`datagen`]: seeded synthetic data with outliers planted in known
//!   subspaces.
//! * [`data`] and [`eval`]: CSV ingestion, detection, F1 of retrieved
//!   dimensions, and benchmark orchestration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod explain;
pub mod fmt;
pub mod learn;
pub mod schema;
pub mod spn;
pub mod subspace;

mod numeric;

pub use data::Dataset;
pub use datagen::{GenConfig, LabeledDataset};
pub use error::{Error, Result};
pub use eval::{EvalReport, OutlierEval};
pub use explain::{ExplainConfig, ExplanationTrace, Selection, SizeBest, Strategy};
pub use learn::{learn_spn, LearnConfig};
pub use schema::{Feature, FeatureKind, Schema};
pub use spn::{Node, NodeId, Query, SpnModel, Value};
pub use subspace::Subspace;
