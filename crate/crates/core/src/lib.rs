//! Teacher-student mitigation of missing labels in multi-label classification.
//!
//! A teacher trained on the original labels scores the training set. The
//! top-scored implicit negatives of every class are flagged as suspected
//! missing positives, and a student is trained with their negative-term loss
//! masked out. Synthetic corpora with oracle-known injected missing labels let
//! the whole pipeline be measured end to end.
//!
//! Modules, bottom-up:
//! - [`corpus`]: label states, synthetic corpora, file formats.
//! - [`netcore`]: linear and one-hidden-layer classifiers, masked binary
//!   cross-entropy, analytic gradients, Adam training, checkpoints.
//! - [`relabel`]: scoring, per-class thresholds, enhanced label sets, masks.
//! - [`metrics`]: ROC AUC, d′, lωlrap and evaluation reports.
//! - [`sweep`]: discard-fraction sweeps, operating points, curves, reports.
//! - [`config`]: the `section.key = value` configuration format.

pub mod config;
pub mod corpus;
pub mod error;
pub mod fmt;
pub mod metrics;
pub mod netcore;
pub mod relabel;
pub mod sweep;

pub use error::{Error, Result};
