//! Temporal relation (TLINK) classification over TimeML with signal-word
//! features.
//!
//! The pipeline: [`timeml`] parses annotated documents, [`relations`] folds
//! relation types onto a reduced label set, [`features`] turns event-event
//! links into categorical feature vectors, [`classifier`] trains a
//! maximum-entropy model, and [`eval`] runs cross-validation, held-out and
//! subset experiments. [`stats`] produces corpus tables and [`synth`]
//! generates deterministic synthetic corpora.

pub mod relations;
pub mod timeml;
pub mod features;
pub mod classifier;
pub mod eval;
pub mod stats;
pub mod synth;
