use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::markov::{train, Candidate, ModelConfig};
use crate::step::{DistanceClass, MobilityTuple, RefinedBehavior, TrafficClass};

#[test]
fn derangement_of_two_is_a_swap() {
    assert_eq!(shuffle_pairing(2, 5).unwrap(), vec![1, 0]);
    assert_eq!(shuffle_pairing(1, 5), Err(EvalError::TooFewUsers(1)));
    assert_eq!(shuffle_pairing(0, 5), Err(EvalError::TooFewUsers(0)));
}

#[test]
fn derangement_is_seeded() {
    assert_eq!(shuffle_pairing(50, 3).unwrap(), shuffle_pairing(50, 3).unwrap());
    assert_ne!(shuffle_pairing(50, 3).unwrap(), shuffle_pairing(50, 4).unwrap());
}

#[test]
fn derangements_of_three_are_uniform() {
    // the two 3-cycles are the only derangements of 3 elements
    let mut first = 0;
    for seed in 0..2000 {
        if shuffle_pairing(3, seed).unwrap() == vec![1, 2, 0] {
            first += 1;
        }
    }
    assert!((900..1100).contains(&first), "{first}");
}

#[test]
fn histogram_edges() {
    let h = LikelihoodHistogram::new(&[0.0, 1.0, 0.5, 1.0 / 64.0], 64).unwrap();
    assert_eq!(h.counts[0], 1);
    assert_eq!(h.counts[1], 1);
    assert_eq!(h.counts[32], 1);
    assert_eq!(h.counts[63], 1);
    assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(LikelihoodHistogram::new(&[], 64).is_err());
}

#[test]
fn hellinger_examples() {
    let mut p = vec![0.0; 64];
    p[0] = 0.5;
    p[1] = 0.5;
    let mut q = vec![0.0; 64];
    q[1] = 0.5;
    q[2] = 0.5;
    let (p, q) = (LikelihoodHistogram::from_mass(p), LikelihoodHistogram::from_mass(q));
    assert!((hellinger(&p, &q).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    assert_eq!(hellinger(&p, &p).unwrap(), 0.0);
    let a = LikelihoodHistogram::new(&[0.1], 8).unwrap();
    let b = LikelihoodHistogram::new(&[0.9], 8).unwrap();
    assert!((hellinger(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(hellinger(&a, &p), Err(EvalError::BinningMismatch(8, 64)));
}

fn hist_strategy() -> impl Strategy<Value = LikelihoodHistogram> {
    prop::collection::vec(0.0f64..=1.0, 1..200).prop_map(|v| LikelihoodHistogram::new(&v, 16).unwrap())
}

proptest! {
    #[test]
    fn hellinger_is_a_bounded_metric(p in hist_strategy(), q in hist_strategy(), r in hist_strategy()) {
        let pq = hellinger(&p, &q).unwrap();
        prop_assert!((0.0..=1.0).contains(&pq));
        prop_assert_eq!(pq, hellinger(&q, &p).unwrap());
        let pr = hellinger(&p, &r).unwrap();
        let rq = hellinger(&r, &q).unwrap();
        prop_assert!(pq <= pr + rq + 1e-12);
    }

    #[test]
    fn derangement_has_no_fixed_points(n in 2usize..200, seed in any::<u64>()) {
        let p = shuffle_pairing(n, seed).unwrap();
        let mut sorted = p.clone();
        sorted.sort();
        prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        prop_assert!(p.iter().enumerate().all(|(i, &x)| i != x));
    }

    #[test]
    fn top_k_is_monotone(ranks in prop::collection::vec(0usize..100, 1..50)) {
        let (result, truth, mobility) = ranked(&ranks, 100);
        let m = match_metrics(&result, &truth, &mobility).unwrap();
        let mut prev = m.top1;
        for t in &m.top_k {
            prop_assert!(t.accuracy >= prev);
            prev = t.accuracy;
        }
    }
}

fn mob(i: usize) -> MobilityTuple {
    MobilityTuple::from_index(i % 12).unwrap()
}

fn beh(slot: u16, trc: usize, m: usize) -> RefinedBehavior {
    RefinedBehavior::new(slot, TrafficClass::ALL[trc], mob(m))
}

#[test]
fn accuracy_identity_and_components() {
    let truth: Vec<_> = (0..10).map(|i| beh(i, i as usize % 3, i as usize)).collect();
    let a = step_accuracy(&truth, &truth, Direction::MobilityGivenTraffic).unwrap();
    assert_eq!(
        a,
        StepAccuracy {
            overall: 1.0,
            trc: 1.0,
            disc: 1.0,
            rep: 1.0,
            sta: 1.0
        }
    );
    let wrong_disc: Vec<_> = truth
        .iter()
        .map(|b| {
            let d = DistanceClass::ALL[(b.disc.index() + 1) % 3];
            RefinedBehavior::new(b.slot, b.trc, MobilityTuple::new(d, b.rep, b.sta))
        })
        .collect();
    let a = step_accuracy(&truth, &wrong_disc, Direction::MobilityGivenTraffic).unwrap();
    assert_eq!((a.overall, a.disc, a.rep, a.sta), (0.0, 0.0, 1.0, 1.0));
    assert_eq!(
        step_accuracy(&truth, &truth[1..], Direction::MobilityGivenTraffic),
        Err(EvalError::LengthMismatch(10, 9))
    );
    let s = prediction_accuracy(&truth, &[truth.clone(), wrong_disc], Direction::MobilityGivenTraffic).unwrap();
    assert_eq!(s.overall, MeanStd { mean: 0.5, std: 0.5 });
    assert_eq!(s.rep, MeanStd { mean: 1.0, std: 0.0 });
}

#[test]
fn uniform_guessing_approaches_one_twelfth() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 200_000;
    let truth: Vec<_> = (0..n).map(|i| beh((i % 336) as u16, 0, rng.gen_range(0..12))).collect();
    let guess: Vec<_> = (0..n).map(|i| beh((i % 336) as u16, 0, rng.gen_range(0..12))).collect();
    let a = step_accuracy(&truth, &guess, Direction::MobilityGivenTraffic).unwrap();
    assert!((a.overall - 1.0 / 12.0).abs() < 0.003, "{}", a.overall);
}

#[test]
fn mean_std_population() {
    let m = MeanStd::of(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
    assert_eq!(m, MeanStd { mean: 5.0, std: 2.0 });
}

#[test]
fn baseline_of_uniform_and_degenerate_marginals() {
    // every hour sees all 12 tuples equally often -> 1/12
    let seqs: Vec<Vec<_>> = (0..12).map(|u| (0..48).map(|s| beh(s, 0, u)).collect()).collect();
    let m = train(&seqs, ModelConfig::default()).unwrap();
    let b = marginal_guess_baseline(&m, &seqs[..2], Direction::MobilityGivenTraffic);
    assert!((b - 1.0 / 12.0).abs() < 1e-12);
    let b = marginal_guess_baseline(&m, &seqs[..2], Direction::TrafficGivenMobility);
    assert!((b - 1.0).abs() < 1e-12);
}

/// Rankings where traffic sequence u's truth (index u) sits at `ranks[u]`.
fn ranked(ranks: &[usize], m: usize) -> (MatchResult, Vec<usize>, Vec<MobilityHalf>) {
    let users = ranks.len();
    let n_cand = m.max(users);
    let mobility: Vec<MobilityHalf> = (0..n_cand).map(|i| vec![(0, mob(i)), (1, mob(i / 12))]).collect();
    let rankings: Vec<Vec<Candidate>> = ranks
        .iter()
        .enumerate()
        .map(|(u, &r)| {
            let mut others: Vec<usize> = (0..n_cand).filter(|&i| i != u).collect();
            others.insert(r.min(n_cand - 1), u);
            others
                .into_iter()
                .enumerate()
                .map(|(pos, index)| Candidate {
                    index,
                    pi: 1.0 - pos as f64 / n_cand as f64,
                })
                .collect()
        })
        .collect();
    let assignment = rankings.iter().map(|r| Some(r[0].index)).collect();
    (
        MatchResult {
            rankings,
            assignment,
            skipped_pairs: 0,
        },
        (0..users).collect(),
        mobility,
    )
}

#[test]
fn perfect_matching_metrics() {
    let (r, t, mobility) = ranked(&[0, 0, 0, 0], 100);
    let m = match_metrics(&r, &t, &mobility).unwrap();
    assert_eq!(m.top1, 1.0);
    assert!(m.top_k.iter().all(|k| k.accuracy == 1.0));
    assert_eq!(m.mean_hamming, 0.0);
    assert_eq!(m.mean_minmax_gt, 1.0);
}

#[test]
fn third_of_hundred_counts_for_top5_only() {
    let (r, t, mobility) = ranked(&[2], 100);
    let m = match_metrics(&r, &t, &mobility).unwrap();
    assert_eq!(m.top1, 0.0);
    assert_eq!(
        m.top_k[0],
        TopK {
            percent: 5,
            accuracy: 1.0
        }
    );
    assert_eq!(top_k_cutoff(5, 100), 5);
    assert_eq!(top_k_cutoff(5, 30), 2);
    let (r, t, mobility) = ranked(&[5], 100);
    let m = match_metrics(&r, &t, &mobility).unwrap();
    assert_eq!(m.top_k[0].accuracy, 0.0);
    assert_eq!(m.top_k[1].accuracy, 1.0);
}

#[test]
fn hamming_seven_of_336() {
    let a: Vec<_> = (0..336u16).map(|s| (s, mob(0))).collect();
    let mut b = a.clone();
    for i in [0, 10, 50, 100, 200, 300, 335] {
        b[i].1 = mob(5);
    }
    let h = normalized_hamming(&a, &b).unwrap();
    assert!((h - 7.0 / 336.0).abs() < 1e-15);
    assert!((h - 0.0208).abs() < 1e-4);
}

#[test]
fn flat_scores_give_minmax_one_and_missing_truth_errors() {
    let mobility: Vec<MobilityHalf> = vec![vec![(0, mob(0))], vec![(0, mob(1))]];
    let flat = MatchResult {
        rankings: vec![vec![Candidate { index: 0, pi: 0.2 }, Candidate { index: 1, pi: 0.2 }]],
        assignment: vec![Some(0)],
        skipped_pairs: 0,
    };
    let m = match_metrics(&flat, &[1], &mobility).unwrap();
    assert_eq!(m.minmax_gt, vec![1.0]);
    assert_eq!(m.hamming, vec![1.0]);
    let partial = MatchResult {
        rankings: vec![vec![Candidate { index: 0, pi: 0.2 }]],
        assignment: vec![Some(0)],
        skipped_pairs: 1,
    };
    assert_eq!(
        match_metrics(&partial, &[1], &mobility),
        Err(EvalError::TruthNotRanked { user: 0, truth: 1 })
    );
}
