//! Similarity structure over target words from the contexts they appear in.
//!
//! Given a corpus with documents per target word, this crate
//!
//! 1. cleans the documents up and collects fixed-width context windows
//!    around each target into one bag of words per target ([`corpus`]),
//! 2. scores every pair of targets by the overlap of their bags — a cosine
//!    over sparse integer count vectors — and builds the normalized
//!    similarity matrix, alongside a shuffled null model and rank-order
//!    statistics ([`sim`]),
//! 3. embeds the targets with classical multidimensional scaling (principal
//!    coordinates from the spectral decomposition, with a stress-based elbow
//!    curve) ([`spectral`]), and
//! 4. groups them with Ward's minimum-variance hierarchical clustering
//!    ([`cluster`]).
//!
//! All randomness flows through explicit seeds and every artifact is
//! byte-reproducible; see the `lexsim` CLI crate for the staged pipeline.

pub mod cluster;
pub mod config;
pub mod corpus;
pub mod error;
pub mod mat;
pub mod sim;
pub mod spectral;
pub mod synth;

pub use config::PipelineConfig;
pub use error::{Error, Result};
