use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features examined per split; `None` means ⌊√d⌋.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            max_features: None,
            seed: 0,
        }
    }
}

struct Tree<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    n_root: f64,
    max_depth: usize,
    mtry: usize,
    importance: Vec<f64>,
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>()
}

impl Tree<'_> {
    fn grow<R: Rng>(&mut self, samples: &mut [usize], depth: usize, rng: &mut R) {
        let n = samples.len() as f64;
        let mut counts = vec![0.0; self.n_classes];
        for &i in samples.iter() {
            counts[self.y[i]] += 1.0;
        }
        let impurity = gini(&counts, n);
        if depth >= self.max_depth || samples.len() < 2 || impurity <= 0.0 {
            return;
        }
        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(rng);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut visited = 0;
        let mut order: Vec<usize> = samples.to_vec();
        for &f in &features {
            if visited >= self.mtry {
                break;
            }
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let (lo, hi) = (self.x[order[0]][f], self.x[*order.last().unwrap()][f]);
            if lo == hi {
                continue;
            }
            visited += 1;
            let mut left = vec![0.0; self.n_classes];
            let mut right = counts.clone();
            for pos in 0..order.len() - 1 {
                let c = self.y[order[pos]];
                left[c] += 1.0;
                right[c] -= 1.0;
                let (v, next) = (self.x[order[pos]][f], self.x[order[pos + 1]][f]);
                if v == next {
                    continue;
                }
                let nl = (pos + 1) as f64;
                let nr = n - nl;
                let child = (nl * gini(&left, nl) + nr * gini(&right, nr)) / n;
                let gain = impurity - child;
                if best.is_none_or(|b| gain > b.0) {
                    let threshold = v + (next - v) / 2.0;
                    best = Some((gain, f, threshold));
                }
            }
        }
        let Some((gain, f, threshold)) = best else { return };
        if gain <= 0.0 {
            return;
        }
        self.importance[f] += n / self.n_root * gain;
        let mut split = 0;
        for i in 0..samples.len() {
            if self.x[samples[i]][f] <= threshold {
                samples.swap(i, split);
                split += 1;
            }
        }
        let (l, r) = samples.split_at_mut(split);
        self.grow(l, depth + 1, rng);
        self.grow(r, depth + 1, rng);
    }
}

/// Mean decrease in Gini impurity per feature of a bootstrapped CART forest,
/// normalized per tree and then overall. Rows of `x` are samples.
pub fn gini_importance(x: &[Vec<f64>], y: &[usize], n_classes: usize, config: &ForestConfig) -> Vec<f64> {
    let d = x.first().map_or(0, Vec::len);
    if x.is_empty() || d == 0 {
        return vec![0.0; d];
    }
    let mtry = config
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
        .clamp(1, d);
    let per_tree: Vec<Vec<f64>> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let mut samples: Vec<usize> = (0..x.len()).map(|_| rng.gen_range(0..x.len())).collect();
            let mut tree = Tree {
                x,
                y,
                n_classes,
                n_root: x.len() as f64,
                max_depth: config.max_depth,
                mtry,
                importance: vec![0.0; d],
            };
            tree.grow(&mut samples, 0, &mut rng);
            let total: f64 = tree.importance.iter().sum();
            if total > 0.0 {
                tree.importance.iter_mut().for_each(|v| *v /= total);
            }
            tree.importance
        })
        .collect();
    let mut out = vec![0.0; d];
    for imp in &per_tree {
        for (o, v) in out.iter_mut().zip(imp) {
            *o += v;
        }
    }
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        out.iter_mut().for_each(|v| *v /= total);
    }
    out
}
