//! W2KPE: keyphrase extraction as single-class word-pair grid tagging.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`preprocess`]: stutter removal, lexicon segmentation, stop-word
//!    removal and sentence fusion into model-sized segments.
//! 2. [`encoding`]: locate full, gapped and partial keyphrase appearances
//!    and encode them as NNW / THW word-pair grids with completeness targets.
//! 3. [`model`]: a small bidirectional recurrent grid scorer trained with
//!    focal loss plus a score regression term.
//! 4. [`decode`]: grid decoding, per-document score summation and top-k.
//! 5. [`metrics`]: exact and partial F1@k averaged over k.
//!
//! [`pipeline`] wires the stages together for the `w2kpe` binary.

pub mod corpus;
pub mod decode;
pub mod encoding;
pub mod error;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
