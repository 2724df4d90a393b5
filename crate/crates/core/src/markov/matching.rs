use rayon::prelude::*;
use serde::Serialize;

use super::likelihood::pair_likelihood;
use super::model::MarkovModel;
use crate::step::{MobilityTuple, RefinedBehavior, TrafficClass};

pub type TrafficHalf = Vec<(u16, TrafficClass)>;
pub type MobilityHalf = Vec<(u16, MobilityTuple)>;

pub fn split_halves(seq: &[RefinedBehavior]) -> (TrafficHalf, MobilityHalf) {
    seq.iter().map(|b| ((b.slot, b.trc), (b.slot, b.mobility()))).unzip()
}

/// Zips halves back into behaviors, taking slots from the traffic half.
pub fn zip_halves(traffic: &[(u16, TrafficClass)], mobility: &[(u16, MobilityTuple)]) -> Vec<RefinedBehavior> {
    traffic
        .iter()
        .zip(mobility)
        .map(|(&(slot, trc), &(_, m))| RefinedBehavior::new(slot, trc, m))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub index: usize,
    pub pi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    /// Per traffic sequence, scored candidates by descending π (ties by index).
    pub rankings: Vec<Vec<Candidate>>,
    /// Best candidate per traffic sequence, `None` when every pair was skipped.
    pub assignment: Vec<Option<usize>>,
    pub skipped_pairs: usize,
}

/// Scores every (traffic, mobility) pair and picks the best mobility sequence
/// for each traffic sequence independently.
pub fn match_datasets(model: &MarkovModel, traffic: &[TrafficHalf], mobility: &[MobilityHalf]) -> MatchResult {
    let rows: Vec<(Vec<Candidate>, usize)> = traffic
        .par_iter()
        .map(|t| {
            let mut skipped = 0;
            let mut row: Vec<Candidate> = mobility
                .iter()
                .enumerate()
                .filter_map(|(index, m)| match pair_likelihood(model, t, m) {
                    Ok(l) => Some(Candidate { index, pi: l.pi }),
                    Err(_) => {
                        skipped += 1;
                        None
                    }
                })
                .collect();
            row.sort_by(|a, b| b.pi.total_cmp(&a.pi).then(a.index.cmp(&b.index)));
            (row, skipped)
        })
        .collect();
    let skipped_pairs = rows.iter().map(|r| r.1).sum();
    if skipped_pairs > 0 {
        log::warn!("matching skipped {skipped_pairs} misaligned or too-short pairs");
    }
    let assignment = rows.iter().map(|(r, _)| r.first().map(|c| c.index)).collect();
    MatchResult {
        rankings: rows.into_iter().map(|r| r.0).collect(),
        assignment,
        skipped_pairs,
    }
}
