//! Sequence-structure statistics of a location trajectory.

use std::collections::HashSet;
use std::hash::Hash;

/// Minimum trajectory length for the entropy-based predictability.
pub const MIN_PREDICTABILITY_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StructuralFeatures {
    pub repetitiveness: f64,
    pub stationarity: f64,
    pub diversity: f64,
    pub predictability: f64,
    /// False when the trajectory was too short for the estimator.
    pub predictability_defined: bool,
    pub n_succ_ret: u32,
    pub n_succ_expl: u32,
}

/// `1 - distinct / n`.
pub fn repetitiveness<T: Eq + Hash>(seq: &[T]) -> f64 {
    if seq.is_empty() {
        return 0.0;
    }
    let distinct: HashSet<&T> = seq.iter().collect();
    1.0 - distinct.len() as f64 / seq.len() as f64
}

/// Share of consecutive pairs that stay at the same location.
pub fn stationarity<T: Eq>(seq: &[T]) -> f64 {
    if seq.len() < 2 {
        return 0.0;
    }
    let stays = seq.windows(2).filter(|w| w[0] == w[1]).count();
    stays as f64 / (seq.len() - 1) as f64
}

/// Distinct sub-trajectories of length `window` over the number of windows.
pub fn diversity<T: Eq + Hash>(seq: &[T], window: usize) -> f64 {
    let window = window.max(1);
    if seq.len() < window.max(2) {
        return 0.0;
    }
    let distinct: HashSet<&[T]> = seq.windows(window).collect();
    distinct.len() as f64 / (seq.len() - window + 1) as f64
}

/// Counts adjacent step pairs both labelled "return" and both labelled
/// "exploration". Steps after the first are labelled by whether their
/// location was seen earlier in the sequence.
pub fn successive_counts<T: Eq + Hash>(seq: &[T]) -> (u32, u32) {
    let mut seen: HashSet<&T> = HashSet::new();
    let mut labels = Vec::with_capacity(seq.len());
    for (i, x) in seq.iter().enumerate() {
        let returned = !seen.insert(x);
        if i > 0 {
            labels.push(returned);
        }
    }
    let mut ret = 0;
    let mut expl = 0;
    for w in labels.windows(2) {
        match (w[0], w[1]) {
            (true, true) => ret += 1,
            (false, false) => expl += 1,
            _ => {}
        }
    }
    (ret, expl)
}

/// Match lengths of the non-parametric entropy estimator: for each position,
/// the length of the shortest substring starting there that does not occur
/// inside the preceding prefix. The first entry is 1.
pub fn match_lengths<T: Eq>(seq: &[T]) -> Vec<usize> {
    let n = seq.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut longest = 0;
        for j in 0..i {
            let mut k = 0;
            while j + k < i && i + k < n && seq[j + k] == seq[i + k] {
                k += 1;
            }
            longest = longest.max(k);
            if i + longest == n {
                break;
            }
        }
        out.push(longest + 1);
    }
    out
}

/// Entropy rate in bits: `n log2 n / sum(match lengths)`.
pub fn entropy_rate<T: Eq>(seq: &[T]) -> f64 {
    let n = seq.len();
    if n < 2 {
        return 0.0;
    }
    let total: usize = match_lengths(seq).iter().sum();
    n as f64 * (n as f64).log2() / total as f64
}

fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Solves `entropy = H(p) + (1 - p) log2(n_symbols - 1)` for `p` in `[1/N, 1]`
/// by bisection down to adjacent floats. The right-hand side decreases from `log2 N` to 0 on that
/// interval, so the root is unique.
pub fn fano_predictability(entropy: f64, n_symbols: usize) -> f64 {
    if n_symbols <= 1 {
        return 1.0;
    }
    let n = n_symbols as f64;
    let fano = |p: f64| binary_entropy(p) + (1.0 - p) * (n - 1.0).log2();
    if entropy >= n.log2() {
        return 1.0 / n;
    }
    if entropy <= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (1.0 / n, 1.0);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fano(mid) > entropy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn structural_features<T: Eq + Hash>(seq: &[T], diversity_window: usize) -> StructuralFeatures {
    let distinct = seq.iter().collect::<HashSet<_>>().len();
    let (predictability, predictability_defined) = if distinct == 1 {
        (1.0, true)
    } else if seq.len() < MIN_PREDICTABILITY_LEN {
        (0.0, false)
    } else {
        (fano_predictability(entropy_rate(seq), distinct), true)
    };
    let (n_succ_ret, n_succ_expl) = successive_counts(seq);
    StructuralFeatures {
        repetitiveness: repetitiveness(seq),
        stationarity: stationarity(seq),
        diversity: diversity(seq, diversity_window),
        predictability,
        predictability_defined,
        n_succ_ret,
        n_succ_expl,
    }
}
