use rayon::prelude::*;
use serde::Serialize;

use super::{
    hellinger, marginal_guess_baseline, match_metrics, prediction_accuracy, shuffle_pairing, AccuracySummary,
    EvalError, LikelihoodHistogram, MatchMetrics, MeanStd,
};
use crate::markov::{
    match_datasets, observe, pair_likelihood, sample_conditional, sequence_likelihood, split_halves, Direction,
    FallbackCounts, MarkovError, MarkovModel,
};
use crate::step::RefinedBehavior;

#[derive(Debug, thiserror::Error)]
pub enum UseCaseError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

/// Mixes extra values into a base seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mix = |mut x: u64| {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^ (x >> 31)
    };
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserPrediction {
    pub user: usize,
    pub accuracy: AccuracySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionReport {
    pub direction: Direction,
    pub users: usize,
    pub repeats: usize,
    /// Per-user mean accuracy, summarized across users.
    pub accuracy: AccuracySummary,
    pub marginal_baseline: f64,
    pub fallbacks: FallbackCounts,
    pub per_user: Vec<UserPrediction>,
}

/// Use case 1: predict one half of each test sequence from the other.
pub fn prediction_report(
    model: &MarkovModel,
    test: &[Vec<RefinedBehavior>],
    direction: Direction,
    repeats: usize,
    seed: u64,
) -> Result<PredictionReport, UseCaseError> {
    let dir_tag = direction as u64;
    let per: Vec<(AccuracySummary, FallbackCounts)> = test
        .par_iter()
        .enumerate()
        .map(|(u, truth)| {
            let obs = observe(truth, direction);
            let mut fb = FallbackCounts::default();
            let mut samples = Vec::with_capacity(repeats);
            for r in 0..repeats {
                let out = sample_conditional(
                    model,
                    &obs,
                    direction,
                    derive_seed(seed, &[dir_tag, u as u64, r as u64]),
                )?;
                fb.add(&out.fallbacks);
                samples.push(out.sequence);
            }
            Ok((prediction_accuracy(truth, &samples, direction)?, fb))
        })
        .collect::<Result<_, UseCaseError>>()?;
    let mut fallbacks = FallbackCounts::default();
    for (_, f) in &per {
        fallbacks.add(f);
    }
    let means: Vec<_> = per.iter().map(|(a, _)| a.means()).collect();
    Ok(PredictionReport {
        direction,
        users: test.len(),
        repeats,
        accuracy: AccuracySummary::of(&means),
        marginal_baseline: marginal_guess_baseline(model, test, direction),
        fallbacks,
        per_user: per
            .into_iter()
            .enumerate()
            .map(|(user, (accuracy, _))| UserPrediction { user, accuracy })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscriminationReport {
    pub users: usize,
    pub bins: usize,
    pub regular_pi: Vec<f64>,
    pub shuffled_pi: Vec<f64>,
    pub pairing: Vec<usize>,
    pub mean_regular: f64,
    pub mean_shuffled: f64,
    pub regular_hist: LikelihoodHistogram,
    pub shuffled_hist: LikelihoodHistogram,
    pub hellinger: f64,
}

/// Regular scores, shuffled scores, and the derangement used for shuffling.
pub type LikelihoodPairs = (Vec<f64>, Vec<f64>, Vec<usize>);

/// Likelihood of each sequence as recorded and of each traffic half paired
/// with another user's mobility half.
pub fn likelihood_pairs(
    model: &MarkovModel,
    test: &[Vec<RefinedBehavior>],
    seed: u64,
) -> Result<LikelihoodPairs, UseCaseError> {
    let pairing = shuffle_pairing(test.len(), seed)?;
    let halves: Vec<_> = test.iter().map(|s| split_halves(s)).collect();
    let regular = test
        .par_iter()
        .map(|s| sequence_likelihood(model, s).map(|l| l.pi))
        .collect::<Result<Vec<_>, _>>()?;
    let shuffled = (0..test.len())
        .into_par_iter()
        .map(|u| pair_likelihood(model, &halves[u].0, &halves[pairing[u]].1).map(|l| l.pi))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((regular, shuffled, pairing))
}

/// Use case 2: separate realistic sequences from shuffled ones.
pub fn discrimination_report(
    model: &MarkovModel,
    test: &[Vec<RefinedBehavior>],
    bins: usize,
    seed: u64,
) -> Result<DiscriminationReport, UseCaseError> {
    let (regular_pi, shuffled_pi, pairing) = likelihood_pairs(model, test, seed)?;
    discrimination_from_scores(regular_pi, shuffled_pi, pairing, bins)
}

pub fn discrimination_from_scores(
    regular_pi: Vec<f64>,
    shuffled_pi: Vec<f64>,
    pairing: Vec<usize>,
    bins: usize,
) -> Result<DiscriminationReport, UseCaseError> {
    let regular_hist = LikelihoodHistogram::new(&regular_pi, bins)?;
    let shuffled_hist = LikelihoodHistogram::new(&shuffled_pi, bins)?;
    Ok(DiscriminationReport {
        users: regular_pi.len(),
        bins,
        mean_regular: MeanStd::of(&regular_pi).mean,
        mean_shuffled: MeanStd::of(&shuffled_pi).mean,
        hellinger: hellinger(&regular_hist, &shuffled_hist)?,
        regular_hist,
        shuffled_hist,
        regular_pi,
        shuffled_pi,
        pairing,
    })
}

/// Use case 3: link each traffic half to the mobility half that makes the
/// most likely sequence. Ground truth is the identity pairing.
pub fn matching_report(model: &MarkovModel, test: &[Vec<RefinedBehavior>]) -> Result<MatchMetrics, UseCaseError> {
    let (traffic, mobility): (Vec<_>, Vec<_>) = test.iter().map(|s| split_halves(s)).unzip();
    let result = match_datasets(model, &traffic, &mobility);
    let truth: Vec<usize> = (0..test.len()).collect();
    Ok(match_metrics(&result, &truth, &mobility)?)
}
