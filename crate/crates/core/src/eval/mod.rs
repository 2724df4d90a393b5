//! Evaluation metrics for the three inference use cases.

mod usecases;

pub use usecases::{
    derive_seed, discrimination_from_scores, discrimination_report, likelihood_pairs, matching_report,
    prediction_report, DiscriminationReport, LikelihoodPairs, PredictionReport, UseCaseError, UserPrediction,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::markov::{Direction, MarkovModel, MatchResult, MobilityHalf};
use crate::step::{MobilityTuple, RefinedBehavior, TrafficClass};

pub const DEFAULT_BINS: usize = 64;
pub const DEFAULT_REPEATS: usize = 10;
pub const TOP_K_PERCENTS: [u32; 4] = [5, 10, 15, 20];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("a derangement needs at least two users, got {0}")]
    TooFewUsers(usize),
    #[error("histogram needs at least one bin and one value")]
    EmptyHistogram,
    #[error("histograms have different binning ({0} vs {1} bins)")]
    BinningMismatch(usize, usize),
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no sampled sequences to score")]
    NoRepeats,
    #[error("ground truth candidate {truth} missing from ranking of traffic sequence {user}")]
    TruthNotRanked { user: usize, truth: usize },
}

/// Uniformly random permutation without fixed points: `pairing[u] != u`.
pub fn shuffle_pairing(n: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    if n < 2 {
        return Err(EvalError::TooFewUsers(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(&mut rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return Ok(perm);
        }
    }
}

/// Equal-width histogram of likelihood values over [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LikelihoodHistogram {
    pub counts: Vec<u64>,
    pub mass: Vec<f64>,
}

impl LikelihoodHistogram {
    pub fn new(values: &[f64], bins: usize) -> Result<Self, EvalError> {
        if bins == 0 || values.is_empty() {
            return Err(EvalError::EmptyHistogram);
        }
        let mut counts = vec![0u64; bins];
        for &v in values {
            let b = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let n = values.len() as f64;
        let mass = counts.iter().map(|&c| c as f64 / n).collect();
        Ok(Self { counts, mass })
    }

    pub fn from_mass(mass: Vec<f64>) -> Self {
        Self {
            counts: vec![0; mass.len()],
            mass,
        }
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }
}

/// Hellinger distance, in [0, 1].
pub fn hellinger(p: &LikelihoodHistogram, q: &LikelihoodHistogram) -> Result<f64, EvalError> {
    if p.bins() != q.bins() {
        return Err(EvalError::BinningMismatch(p.bins(), q.bins()));
    }
    let s: f64 = p
        .mass
        .iter()
        .zip(&q.mass)
        .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    Ok((s / 2.0).sqrt().min(1.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation; zeros for an empty slice.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// Fraction of correctly predicted steps for one sampled sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepAccuracy {
    /// Whole predicted half: mobility tuple or traffic class depending on direction.
    pub overall: f64,
    pub trc: f64,
    pub disc: f64,
    pub rep: f64,
    pub sta: f64,
}

pub fn step_accuracy(
    truth: &[RefinedBehavior],
    sampled: &[RefinedBehavior],
    direction: Direction,
) -> Result<StepAccuracy, EvalError> {
    if truth.len() != sampled.len() {
        return Err(EvalError::LengthMismatch(truth.len(), sampled.len()));
    }
    if truth.is_empty() {
        return Ok(StepAccuracy::default());
    }
    let n = truth.len() as f64;
    let frac = |f: &dyn Fn(&RefinedBehavior, &RefinedBehavior) -> bool| {
        truth.iter().zip(sampled).filter(|(a, b)| f(a, b)).count() as f64 / n
    };
    let trc = frac(&|a, b| a.trc == b.trc);
    let disc = frac(&|a, b| a.disc == b.disc);
    let rep = frac(&|a, b| a.rep == b.rep);
    let sta = frac(&|a, b| a.sta == b.sta);
    let overall = match direction {
        Direction::MobilityGivenTraffic => frac(&|a, b| a.mobility() == b.mobility()),
        Direction::TrafficGivenMobility => trc,
    };
    Ok(StepAccuracy {
        overall,
        trc,
        disc,
        rep,
        sta,
    })
}

/// Accuracy components summarized as mean ± std.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AccuracySummary {
    pub overall: MeanStd,
    pub trc: MeanStd,
    pub disc: MeanStd,
    pub rep: MeanStd,
    pub sta: MeanStd,
}

impl AccuracySummary {
    pub fn of(items: &[StepAccuracy]) -> Self {
        let pick = |f: fn(&StepAccuracy) -> f64| MeanStd::of(&items.iter().map(f).collect::<Vec<_>>());
        Self {
            overall: pick(|a| a.overall),
            trc: pick(|a| a.trc),
            disc: pick(|a| a.disc),
            rep: pick(|a| a.rep),
            sta: pick(|a| a.sta),
        }
    }

    /// Per-component means, as a single accuracy point.
    pub fn means(&self) -> StepAccuracy {
        StepAccuracy {
            overall: self.overall.mean,
            trc: self.trc.mean,
            disc: self.disc.mean,
            rep: self.rep.mean,
            sta: self.sta.mean,
        }
    }
}

/// Accuracy of `repeats` sampled sequences against the truth, mean ± std across repeats.
pub fn prediction_accuracy(
    truth: &[RefinedBehavior],
    sampled: &[Vec<RefinedBehavior>],
    direction: Direction,
) -> Result<AccuracySummary, EvalError> {
    if sampled.is_empty() {
        return Err(EvalError::NoRepeats);
    }
    let per = sampled
        .iter()
        .map(|s| step_accuracy(truth, s, direction))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AccuracySummary::of(&per))
}

/// Expected accuracy of guessing the unknown half from its time-of-day
/// marginal in the training data: mean over test steps of Σ_x P(x | time)².
pub fn marginal_guess_baseline(model: &MarkovModel, test: &[Vec<RefinedBehavior>], direction: Direction) -> f64 {
    let mode = model.config().time_mode;
    let arity = match direction {
        Direction::MobilityGivenTraffic => MobilityTuple::COUNT,
        Direction::TrafficGivenMobility => TrafficClass::ALL.len(),
    };
    let mut table = vec![vec![0.0f64; arity]; mode.n_tokens()];
    for (id, s) in model.states().iter().enumerate() {
        let x = match direction {
            Direction::MobilityGivenTraffic => s.mobility().index(),
            Direction::TrafficGivenMobility => s.trc.index(),
        };
        table[s.time_token as usize][x] += model.state_freq(id) as f64;
    }
    let collision: Vec<f64> = table
        .iter()
        .map(|row| {
            let t: f64 = row.iter().sum();
            if t == 0.0 {
                1.0 / arity as f64
            } else {
                row.iter().map(|c| (c / t).powi(2)).sum()
            }
        })
        .collect();
    let (mut sum, mut n) = (0.0, 0usize);
    for seq in test {
        for b in seq {
            sum += collision[mode.token(b.slot) as usize];
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TopK {
    pub percent: u32,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchMetrics {
    pub users: usize,
    pub top1: f64,
    pub top_k: Vec<TopK>,
    /// Zero-based rank of the true mobility sequence per traffic sequence.
    pub true_rank: Vec<usize>,
    pub hamming: Vec<f64>,
    pub mean_hamming: f64,
    pub minmax_gt: Vec<f64>,
    pub mean_minmax_gt: f64,
}

/// Number of leading candidates that count as a hit for a top-k% metric.
pub fn top_k_cutoff(percent: u32, candidates: usize) -> usize {
    (percent as usize * candidates).div_ceil(100)
}

/// Fraction of positions where two mobility halves differ.
pub fn normalized_hamming(a: &[(u16, MobilityTuple)], b: &[(u16, MobilityTuple)]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let diff = a.iter().zip(b).filter(|(x, y)| x.1 != y.1).count();
    Ok(diff as f64 / a.len() as f64)
}

/// Scores a matching run. `truth[u]` is the index of traffic sequence u's true
/// mobility sequence in `mobility`.
pub fn match_metrics(
    result: &MatchResult,
    truth: &[usize],
    mobility: &[MobilityHalf],
) -> Result<MatchMetrics, EvalError> {
    let users = result.rankings.len();
    let mut true_rank = Vec::with_capacity(users);
    let mut hamming = Vec::with_capacity(users);
    let mut minmax_gt = Vec::with_capacity(users);
    for (u, ranking) in result.rankings.iter().enumerate() {
        let t = truth[u];
        let rank = ranking
            .iter()
            .position(|c| c.index == t)
            .ok_or(EvalError::TruthNotRanked { user: u, truth: t })?;
        true_rank.push(rank);
        let chosen = ranking[0].index;
        hamming.push(normalized_hamming(&mobility[chosen], &mobility[t])?);
        let gt = ranking[rank].pi;
        let max = ranking[0].pi;
        let min = ranking.last().map_or(gt, |c| c.pi);
        minmax_gt.push(if max > min { (gt - min) / (max - min) } else { 1.0 });
    }
    let frac = |hits: usize| if users == 0 { 0.0 } else { hits as f64 / users as f64 };
    let top1 = frac(true_rank.iter().filter(|&&r| r == 0).count());
    let top_k = TOP_K_PERCENTS
        .iter()
        .map(|&percent| TopK {
            percent,
            accuracy: frac(
                true_rank
                    .iter()
                    .zip(&result.rankings)
                    .filter(|(&r, ranking)| r < top_k_cutoff(percent, ranking.len()))
                    .count(),
            ),
        })
        .collect();
    Ok(MatchMetrics {
        users,
        top1,
        top_k,
        mean_hamming: MeanStd::of(&hamming).mean,
        mean_minmax_gt: MeanStd::of(&minmax_gt).mean,
        true_rank,
        hamming,
        minmax_gt,
    })
}

#[cfg(test)]
mod tests;
