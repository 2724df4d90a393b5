use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::MarkovModel;
use super::state::{encode, TimeMode};
use super::MarkovError;
use crate::step::{MobilityTuple, RefinedBehavior, TrafficClass};

/// Which half of the behavior is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    MobilityGivenTraffic,
    TrafficGivenMobility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnownHalf {
    Traffic(TrafficClass),
    Mobility(MobilityTuple),
}

/// One observed step: its slot and the known half of the behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservedStep {
    pub slot: u16,
    pub known: KnownHalf,
}

/// Strips the half of each step that `direction` predicts.
pub fn observe(seq: &[RefinedBehavior], direction: Direction) -> Vec<ObservedStep> {
    seq.iter()
        .map(|b| ObservedStep {
            slot: b.slot,
            known: match direction {
                Direction::MobilityGivenTraffic => KnownHalf::Traffic(b.trc),
                Direction::TrafficGivenMobility => KnownHalf::Mobility(b.mobility()),
            },
        })
        .collect()
}

/// How often each rung of the fallback ladder was used.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FallbackCounts {
    /// Frequency-weighted draw over states matching time and known half.
    pub same_time: usize,
    /// Frequency-weighted draw over states matching the known half at any time.
    pub any_time: usize,
    /// Uniform draw over the unknown half.
    pub uniform: usize,
}

impl FallbackCounts {
    pub fn add(&mut self, o: &FallbackCounts) {
        self.same_time += o.same_time;
        self.any_time += o.any_time;
        self.uniform += o.uniform;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub sequence: Vec<RefinedBehavior>,
    pub fallbacks: FallbackCounts,
}

/// Number of values the unknown half can take.
fn unknown_arity(direction: Direction) -> usize {
    match direction {
        Direction::MobilityGivenTraffic => MobilityTuple::COUNT,
        Direction::TrafficGivenMobility => TrafficClass::ALL.len(),
    }
}

fn compose(step: &ObservedStep, unknown: usize) -> Result<(TrafficClass, MobilityTuple), MarkovError> {
    match step.known {
        KnownHalf::Traffic(trc) => Ok((trc, MobilityTuple::from_index(unknown).expect("index < 12"))),
        KnownHalf::Mobility(m) => Ok((TrafficClass::ALL[unknown], m)),
    }
}

fn check_direction(step: &ObservedStep, direction: Direction) -> Result<(), MarkovError> {
    match (step.known, direction) {
        (KnownHalf::Traffic(_), Direction::MobilityGivenTraffic)
        | (KnownHalf::Mobility(_), Direction::TrafficGivenMobility) => Ok(()),
        _ => Err(MarkovError::Config("observed half does not match the direction".into())),
    }
}

/// Draws an index with probability proportional to its weight.
fn pick_weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut target = rng.gen::<f64>() * total;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if target < w {
                return Some(i);
            }
            target -= w;
            last = Some(i);
        }
    }
    last
}

/// Generates the unknown half of every observed step.
pub fn sample_conditional(
    model: &MarkovModel,
    observed: &[ObservedStep],
    direction: Direction,
    seed: u64,
) -> Result<SampleOutcome, MarkovError> {
    if observed.is_empty() {
        return Err(MarkovError::EmptyObservation);
    }
    let mode = model.config().time_mode;
    let arity = unknown_arity(direction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fallbacks = FallbackCounts::default();
    let mut sequence = Vec::with_capacity(observed.len());
    let mut prev: Option<usize> = None;
    let mut weights = vec![0.0; arity];
    let mut ids: Vec<Option<usize>> = vec![None; arity];

    for (i, step) in observed.iter().enumerate() {
        check_direction(step, direction)?;
        let tt = mode.token(step.slot);
        for (u, id) in ids.iter_mut().enumerate() {
            let (trc, mob) = compose(step, u)?;
            *id = model.id_of_code_checked(encode(tt, trc, mob));
        }
        let primary = |w: &mut [f64]| {
            for u in 0..arity {
                w[u] = match (ids[u], i, prev) {
                    (Some(id), 0, _) => model.start_count(id) as f64,
                    (Some(id), _, Some(p)) => model.prob(p, id),
                    _ => 0.0,
                };
            }
        };
        primary(&mut weights);
        let mut choice = pick_weighted(&mut rng, &weights);
        if choice.is_none() {
            for u in 0..arity {
                weights[u] = ids[u].map_or(0.0, |id| model.state_freq(id) as f64);
            }
            choice = pick_weighted(&mut rng, &weights);
            if choice.is_some() {
                fallbacks.same_time += 1;
            }
        }
        if choice.is_none() {
            any_time_weights(model, step, mode, arity, &mut weights)?;
            choice = pick_weighted(&mut rng, &weights);
            if choice.is_some() {
                fallbacks.any_time += 1;
            }
        }
        let unknown = match choice {
            Some(u) => u,
            None => {
                fallbacks.uniform += 1;
                rng.gen_range(0..arity)
            }
        };
        let (trc, mob) = compose(step, unknown)?;
        prev = model.id_of_code_checked(encode(tt, trc, mob));
        sequence.push(RefinedBehavior::new(step.slot, trc, mob));
    }
    Ok(SampleOutcome { sequence, fallbacks })
}

fn any_time_weights(
    model: &MarkovModel,
    step: &ObservedStep,
    mode: TimeMode,
    arity: usize,
    weights: &mut [f64],
) -> Result<(), MarkovError> {
    weights.iter_mut().for_each(|w| *w = 0.0);
    for tt in 0..mode.n_tokens() as u8 {
        for (u, w) in weights.iter_mut().enumerate().take(arity) {
            let (trc, mob) = compose(step, u)?;
            if let Some(id) = model.id_of_code_checked(encode(tt, trc, mob)) {
                *w += model.state_freq(id) as f64;
            }
        }
    }
    Ok(())
}
