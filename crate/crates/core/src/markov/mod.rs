//! First-order Markov model over discretized behavior states: training,
//! likelihood scoring, conditional sampling and traffic/mobility matching.

mod counts;
mod likelihood;
mod matching;
mod model;
mod sample;
mod state;

pub use counts::TransitionCounts;
pub use likelihood::{pair_likelihood, sequence_likelihood, LikelihoodBreakdown};
pub use matching::{match_datasets, split_halves, zip_halves, Candidate, MatchResult, MobilityHalf, TrafficHalf};
pub use model::{count_corpus, train, MarkovModel, ModelConfig};
pub use sample::{observe, sample_conditional, Direction, FallbackCounts, KnownHalf, ObservedStep, SampleOutcome};
pub use state::{RtMode, StateKey, TimeMode, BEHAVIORS_PER_TOKEN};

#[derive(Debug, thiserror::Error)]
pub enum MarkovError {
    #[error("training corpus contains no behaviors")]
    EmptyCorpus,
    #[error("likelihood needs at least two steps")]
    TooShort,
    #[error("nothing observed to condition on")]
    EmptyObservation,
    #[error("sequences are not aligned: {0}")]
    Misaligned(String),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
