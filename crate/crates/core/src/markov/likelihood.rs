use serde::Serialize;

use super::model::MarkovModel;
use super::state::{encode, RtMode, StateKey};
use super::MarkovError;
use crate::step::{MobilityTuple, RefinedBehavior, TrafficClass};

/// Components of the sequence likelihood score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LikelihoodBreakdown {
    pub n_valid: usize,
    pub n_total: usize,
    /// Fraction of transitions seen in training.
    pub r_t: f64,
    /// Geometric mean probability of the valid transitions.
    pub p_all_t: f64,
    /// `alpha * r_t + (1 - alpha) * p_all_t`.
    pub pi: f64,
}

pub fn sequence_likelihood(model: &MarkovModel, seq: &[RefinedBehavior]) -> Result<LikelihoodBreakdown, MarkovError> {
    let mode = model.config().time_mode;
    score_codes(model, seq.iter().map(|b| StateKey::from_behavior(b, mode).code()))
}

/// Likelihood of the sequence formed by zipping a traffic half with a mobility half.
///
/// Both halves must have the same length and the same time tokens.
pub fn pair_likelihood(
    model: &MarkovModel,
    traffic: &[(u16, TrafficClass)],
    mobility: &[(u16, MobilityTuple)],
) -> Result<LikelihoodBreakdown, MarkovError> {
    let mode = model.config().time_mode;
    if traffic.len() != mobility.len() {
        return Err(MarkovError::Misaligned(format!(
            "lengths differ: {} vs {}",
            traffic.len(),
            mobility.len()
        )));
    }
    if let Some(((s, _), (m, _))) = traffic
        .iter()
        .zip(mobility)
        .find(|((s, _), (m, _))| mode.token(*s) != mode.token(*m))
    {
        return Err(MarkovError::Misaligned(format!(
            "time tokens differ at slots {s} and {m}"
        )));
    }
    score_codes(
        model,
        traffic
            .iter()
            .zip(mobility)
            .map(|(&(slot, trc), &(_, mob))| encode(mode.token(slot), trc, mob)),
    )
}

pub(crate) fn score_codes<I>(model: &MarkovModel, codes: I) -> Result<LikelihoodBreakdown, MarkovError>
where
    I: Iterator<Item = usize>,
{
    let (n_valid, n_total, sum_log) = match model.config().rt_mode {
        RtMode::All => {
            let (mut n_valid, mut n_total, mut sum_log) = (0usize, 0usize, 0.0f64);
            let mut prev: Option<Option<usize>> = None;
            for code in codes {
                let cur = model.id_of_code_checked(code);
                if let Some(p) = prev {
                    n_total += 1;
                    if let (Some(i), Some(j)) = (p, cur) {
                        let lp = model.log_prob(i, j);
                        if lp.is_finite() {
                            n_valid += 1;
                            sum_log += lp;
                        }
                    }
                }
                prev = Some(cur);
            }
            (n_valid, n_total, sum_log)
        }
        RtMode::Unique => {
            let codes: Vec<usize> = codes.collect();
            let mut pairs: Vec<(usize, usize)> = codes.windows(2).map(|w| (w[0], w[1])).collect();
            pairs.sort_unstable();
            pairs.dedup();
            let (mut n_valid, mut sum_log) = (0usize, 0.0f64);
            for &(a, b) in &pairs {
                if let (Some(i), Some(j)) = (model.id_of_code_checked(a), model.id_of_code_checked(b)) {
                    let lp = model.log_prob(i, j);
                    if lp.is_finite() {
                        n_valid += 1;
                        sum_log += lp;
                    }
                }
            }
            (n_valid, pairs.len(), sum_log)
        }
    };
    if n_total == 0 {
        return Err(MarkovError::TooShort);
    }
    let r_t = n_valid as f64 / n_total as f64;
    let p_all_t = if n_valid == 0 {
        0.0
    } else {
        (sum_log / n_valid as f64).exp().min(1.0)
    };
    let alpha = model.config().alpha;
    let pi = (alpha * r_t + (1.0 - alpha) * p_all_t).clamp(0.0, 1.0);
    Ok(LikelihoodBreakdown {
        n_valid,
        n_total,
        r_t,
        p_all_t,
        pi,
    })
}
