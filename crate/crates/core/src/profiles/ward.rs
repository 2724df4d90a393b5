/// Agglomerative clustering with Ward linkage, returning flat labels for `k` clusters.
///
/// Uses a nearest-neighbour chain over cluster centroids, so memory stays linear.
/// Labels are numbered in order of each cluster's lowest point index.
pub fn ward_labels<const D: usize>(points: &[[f64; D]], k: usize) -> Vec<usize> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let k = k.clamp(1, n);
    let mut merges = nn_chain(points);
    merges.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut uf = UnionFind::new(n);
    for &(a, b, _) in merges.iter().take(n - k) {
        uf.union(a, b);
    }
    let mut label_of_root = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let r = uf.find(i);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect()
}

/// Increase in within-cluster sum of squares when merging two clusters.
#[inline]
fn ward_cost<const D: usize>(a: &[f64; D], na: f64, b: &[f64; D], nb: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    na * nb / (na + nb) * d2
}

/// Returns merges as (slot a, slot b, cost), in the order they were found.
fn nn_chain<const D: usize>(points: &[[f64; D]]) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    let mut centroid: Vec<[f64; D]> = points.to_vec();
    let mut size = vec![1.0f64; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut position = (0..n).collect::<Vec<usize>>();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut chain: Vec<usize> = Vec::new();

    while active.len() > 1 {
        if chain.is_empty() {
            chain.push(active[0]);
        }
        let a = *chain.last().unwrap();
        let prev = if chain.len() >= 2 {
            Some(chain[chain.len() - 2])
        } else {
            None
        };
        let mut best = prev;
        let mut best_cost = prev.map_or(f64::INFINITY, |p| {
            ward_cost(&centroid[a], size[a], &centroid[p], size[p])
        });
        for &c in &active {
            if c == a || Some(c) == prev {
                continue;
            }
            let cost = ward_cost(&centroid[a], size[a], &centroid[c], size[c]);
            if cost < best_cost {
                best_cost = cost;
                best = Some(c);
            }
        }
        let b = best.expect("at least two active clusters");
        if Some(b) == prev {
            chain.pop();
            chain.pop();
            let (lo, hi) = (a.min(b), a.max(b));
            let (nl, nh) = (size[lo], size[hi]);
            let mut merged = [0.0; D];
            for (d, m) in merged.iter_mut().enumerate() {
                *m = (centroid[lo][d] * nl + centroid[hi][d] * nh) / (nl + nh);
            }
            centroid[lo] = merged;
            size[lo] = nl + nh;
            let pos = position[hi];
            active.swap_remove(pos);
            if pos < active.len() {
                position[active[pos]] = pos;
            }
            merges.push((lo, hi, best_cost));
        } else {
            chain.push(b);
        }
    }
    merges
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Naive O(n^3) Ward clustering: repeatedly merge the cheapest pair.
    fn naive_ward(points: &[[f64; 2]], k: usize) -> Vec<usize> {
        let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
        let centroid = |c: &Vec<usize>| {
            let n = c.len() as f64;
            [
                c.iter().map(|&i| points[i][0]).sum::<f64>() / n,
                c.iter().map(|&i| points[i][1]).sum::<f64>() / n,
            ]
        };
        while clusters.len() > k {
            let mut best = (f64::INFINITY, 0, 0);
            for i in 0..clusters.len() {
                for j in i + 1..clusters.len() {
                    let c = ward_cost(
                        &centroid(&clusters[i]),
                        clusters[i].len() as f64,
                        &centroid(&clusters[j]),
                        clusters[j].len() as f64,
                    );
                    if c < best.0 {
                        best = (c, i, j);
                    }
                }
            }
            let moved = clusters.remove(best.2);
            clusters[best.1].extend(moved);
        }
        let mut labels = vec![0; points.len()];
        let mut order: Vec<&Vec<usize>> = clusters.iter().collect();
        order.sort_by_key(|c| *c.iter().min().unwrap());
        for (l, c) in order.iter().enumerate() {
            for &i in c.iter() {
                labels[i] = l;
            }
        }
        labels
    }

    #[test]
    fn matches_naive_ward() {
        let mut s = 7u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for trial in 0..5 {
            let pts: Vec<[f64; 2]> = (0..40 + trial * 7).map(|_| [rnd() * 10.0, rnd() * 3.0]).collect();
            for k in [1, 2, 4, 7] {
                assert_eq!(ward_labels(&pts, k), naive_ward(&pts, k), "trial {trial} k {k}");
            }
        }
    }

    #[test]
    fn small_inputs() {
        assert!(ward_labels::<2>(&[], 4).is_empty());
        assert_eq!(ward_labels(&[[0.0, 0.0], [1.0, 1.0]], 4), vec![0, 1]);
        assert_eq!(ward_labels(&[[0.0, 0.0], [0.1, 0.0], [5.0, 5.0]], 2), vec![0, 0, 1]);
    }
}
