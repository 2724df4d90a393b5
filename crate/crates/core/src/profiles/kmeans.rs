use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit<const D: usize> {
    pub centroids: Vec<[f64; D]>,
    pub labels: Vec<usize>,
    /// Within-cluster sum of squares.
    pub inertia: f64,
    /// Inertia after each assignment step of the winning restart.
    pub history: Vec<f64>,
}

fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest<const D: usize>(p: &[f64; D], centroids: &[[f64; D]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn plus_plus_init<const D: usize, R: Rng>(points: &[[f64; D]], k: usize, rng: &mut R) -> Vec<[f64; D]> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total <= 0.0 {
            rng.gen_range(0..points.len())
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        };
        centroids.push(points[idx]);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &points[idx]));
        }
    }
    centroids
}

fn lloyd<const D: usize>(points: &[[f64; D]], mut centroids: Vec<[f64; D]>) -> KMeansFit<D> {
    let k = centroids.len();
    let mut labels = vec![usize::MAX; points.len()];
    let mut history = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        let mut inertia = 0.0;
        for (l, p) in labels.iter_mut().zip(points) {
            let (c, d) = nearest(p, &centroids);
            inertia += d;
            if *l != c {
                *l = c;
                changed = true;
            }
        }
        history.push(inertia);
        if !changed {
            break;
        }
        let mut sums = vec![[0.0; D]; k];
        let mut counts = vec![0usize; k];
        for (&l, p) in labels.iter().zip(points) {
            counts[l] += 1;
            for d in 0..D {
                sums[l][d] += p[d];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..D {
                    centroids[c][d] = sums[c][d] / counts[c] as f64;
                }
            }
        }
    }
    let inertia = labels.iter().zip(points).map(|(&l, p)| dist2(p, &centroids[l])).sum();
    KMeansFit {
        centroids,
        labels,
        inertia,
        history,
    }
}

/// Lloyd's k-means with k-means++ seeding; keeps the restart with the lowest inertia.
pub fn kmeans<const D: usize>(points: &[[f64; D]], k: usize, restarts: usize, seed: u64) -> KMeansFit<D> {
    assert!(k >= 1 && points.len() >= k, "k-means needs at least k points");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansFit<D>> = None;
    for _ in 0..restarts.max(1) {
        let init = plus_plus_init(points, k, &mut rng);
        let fit = lloyd(points, init);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    best.expect("at least one restart")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> Vec<[f64; 2]> {
        let mut s = 3u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut pts = Vec::new();
        for c in [[0.0, 0.0], [5.0, 5.0], [10.0, 0.0]] {
            for _ in 0..30 {
                pts.push([c[0] + rnd(), c[1] + rnd()]);
            }
        }
        pts
    }

    #[test]
    fn recovers_blobs_and_is_monotone() {
        let pts = blobs();
        let fit = kmeans(&pts, 3, 10, 1);
        for b in 0..3 {
            let l = fit.labels[b * 30];
            assert!(fit.labels[b * 30..(b + 1) * 30].iter().all(|&x| x == l));
        }
        assert!(fit.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!((fit.inertia - fit.history.last().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn best_restart_is_minimal() {
        let pts = blobs();
        let best = kmeans(&pts, 3, 20, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let fit = lloyd(&pts, plus_plus_init(&pts, 3, &mut rng));
            assert!(best.inertia <= fit.inertia);
        }
        assert_eq!(kmeans(&pts, 3, 20, 9), best);
    }
}
