//! Traffic and mobility behavior modeling from mobile-network event records.
//!
//! The pipeline reads per-slot XDR events and a cell catalog ([`ingest`]),
//! derives per-user features and population tables ([`features`]), assigns
//! behavioral profiles ([`profiles`]), encodes every user as a sequence of
//! discretized step behaviors ([`step`]), and trains a Markov model over those
//! states ([`markov`]) that scores, samples and matches traffic and mobility
//! sequences. [`eval`] holds the metrics, [`synthgen`] generates populations
//! with known ground truth, and [`pipeline`] wires the stages to files.

pub mod eval;
pub mod features;
pub mod ingest;
pub mod markov;
pub mod pipeline;
pub mod profiles;
pub mod step;
pub mod synthgen;
