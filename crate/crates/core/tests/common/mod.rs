//! Naive feature reimplementation and fixtures shared by integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xdr_mobility::features::UserFeatures;
use xdr_mobility::ingest::{CellCatalog, Event, UserSequence};

const R_KM: f64 = 6371.0088;

pub const FEATURE_NAMES: [&str; 13] = [
    "avg_events_per_day",
    "avg_session_volume",
    "avg_step_distance_km",
    "rg_unique_km",
    "rg_event_km",
    "repetitiveness",
    "stationarity",
    "diversity",
    "predictability",
    "n_succ_ret",
    "n_succ_expl",
    "popularity_influence",
    "flow_measurement",
];

pub fn as_array(f: &UserFeatures) -> [f64; 13] {
    [
        f.avg_events_per_day,
        f.avg_session_volume,
        f.avg_step_distance_km,
        f.rg_unique_km,
        f.rg_event_km,
        f.repetitiveness,
        f.stationarity,
        f.diversity,
        f.predictability,
        f.n_succ_ret as f64,
        f.n_succ_expl as f64,
        f.popularity_influence,
        f.flow_measurement,
    ]
}

/// Relative error, or the absolute error when that is smaller, so that
/// quantities equal to zero in exact arithmetic compare with a 1e-9 floor.
pub fn rel_error(a: f64, b: f64) -> f64 {
    let abs = (a - b).abs();
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (abs / scale).min(abs)
    }
}

/// Users with random slots over a small catalog so that cells, slots and moves collide.
pub fn random_population(seed: u64, n_users: usize, max_len: usize) -> (CellCatalog, Vec<UserSequence>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut catalog = CellCatalog::new();
    let n_cells = 25;
    for c in 0..n_cells {
        let lat = -33.45 + rng.gen_range(-0.15..0.15);
        let lon = -70.65 + rng.gen_range(-0.15..0.15);
        catalog.insert(&format!("k{c:02}"), lat, lon, "P").unwrap();
    }
    let users = (0..n_users)
        .map(|u| {
            let len = rng.gen_range(1..=max_len);
            let home = rng.gen_range(0..n_cells);
            let slots: BTreeSet<u16> = (0..len).map(|_| rng.gen_range(0..24u16) * 14 / 3).collect();
            let events = slots
                .into_iter()
                .map(|slot| {
                    if rng.gen_bool(0.1) {
                        return Event::new(slot, 0, None);
                    }
                    let cell = if rng.gen_bool(0.5) {
                        home
                    } else {
                        rng.gen_range(0..n_cells)
                    };
                    Event::new(slot, rng.gen_range(1..5_000_000), Some(&format!("k{cell:02}")))
                })
                .collect();
            let mut s = UserSequence::new(format!("u{u:04}"), events);
            s.province = Some("P".into());
            s
        })
        .collect();
    (catalog, users)
}

fn unit(catalog: &CellCatalog, code: &str) -> [f64; 3] {
    let c = catalog.get(code).unwrap();
    let (phi, lam) = (c.lat.to_radians(), c.lon.to_radians());
    [phi.cos() * lam.cos(), phi.cos() * lam.sin(), phi.sin()]
}

/// Arc length from the chord between two unit vectors.
fn arc_km(a: [f64; 3], b: [f64; 3]) -> f64 {
    let chord = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    2.0 * R_KM * (chord / 2.0).min(1.0).asin()
}

fn rg(points: &[[f64; 3]]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mut m = [0.0; 3];
    for p in points {
        for k in 0..3 {
            m[k] += p[k];
        }
    }
    let norm = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
    let center = [m[0] / norm, m[1] / norm, m[2] / norm];
    let ms: f64 = points.iter().map(|p| arc_km(*p, center).powi(2)).sum::<f64>() / points.len() as f64;
    ms.sqrt()
}

/// Shortest-unseen-substring lengths, by brute-force substring search.
fn naive_entropy(s: &[&str]) -> f64 {
    let n = s.len();
    let mut total = 0usize;
    for i in 0..n {
        let mut l = 1;
        loop {
            if i + l > n {
                break;
            }
            let sub = &s[i..i + l];
            let seen = (0..i).any(|j| j + l <= i && &s[j..j + l] == sub);
            if !seen {
                break;
            }
            l += 1;
        }
        total += l;
    }
    n as f64 * (n as f64).log2() / total as f64
}

/// Safeguarded Newton solve of the Fano equation.
fn naive_fano(entropy: f64, n: usize) -> f64 {
    let nf = n as f64;
    if entropy >= nf.log2() {
        return 1.0 / nf;
    }
    if entropy <= 0.0 {
        return 1.0;
    }
    let h = |p: f64| -> f64 {
        let t = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
        t(p) + t(1.0 - p) + (1.0 - p) * (nf - 1.0).log2() - entropy
    };
    let dh = |p: f64| ((1.0 - p) / p).log2() - (nf - 1.0).log2();
    let (mut lo, mut hi) = (1.0 / nf, 1.0);
    let mut p = 0.5 * (lo + hi);
    for _ in 0..500 {
        let v = h(p);
        if v > 0.0 {
            lo = p;
        } else {
            hi = p;
        }
        let d = dh(p);
        let mut next = p - v / d;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - p).abs() <= 1e-16 * p {
            return next;
        }
        p = next;
    }
    p
}

/// All thirteen features of every user, computed pairwise from scratch.
pub fn oracle_features(catalog: &CellCatalog, users: &[UserSequence]) -> Vec<[f64; 13]> {
    let located: Vec<Vec<(u16, &str)>> = users
        .iter()
        .map(|u| {
            u.events
                .iter()
                .filter(|e| e.volume > 0)
                .filter_map(|e| e.cell.as_deref().map(|c| (e.slot, c)))
                .collect()
        })
        .collect();
    users
        .iter()
        .zip(&located)
        .map(|(u, loc)| {
            let traffic: Vec<u64> = u.events.iter().map(|e| e.volume).filter(|&v| v > 0).collect();
            let per_day = traffic.len() as f64 / 7.0;
            let vol = if traffic.is_empty() {
                0.0
            } else {
                traffic.iter().map(|&v| v as f64).sum::<f64>() / traffic.len() as f64
            };
            let cells: Vec<&str> = loc.iter().map(|l| l.1).collect();
            let n = cells.len();
            let vecs: Vec<[f64; 3]> = cells.iter().map(|c| unit(catalog, c)).collect();
            let (step, rg_u, rg_e) = if n < 2 {
                (0.0, 0.0, 0.0)
            } else {
                let step = (1..n).map(|i| arc_km(vecs[i - 1], vecs[i])).sum::<f64>() / (n - 1) as f64;
                let distinct: BTreeSet<&str> = cells.iter().copied().collect();
                let uv: Vec<[f64; 3]> = distinct.iter().map(|c| unit(catalog, c)).collect();
                (step, rg(&uv), rg(&vecs))
            };
            let distinct = cells.iter().collect::<BTreeSet<_>>().len();
            let rep = if n == 0 { 0.0 } else { 1.0 - distinct as f64 / n as f64 };
            let sta = if n < 2 {
                0.0
            } else {
                (1..n).filter(|&i| cells[i] == cells[i - 1]).count() as f64 / (n - 1) as f64
            };
            let div = if n < 2 {
                0.0
            } else {
                (1..n).map(|i| (cells[i - 1], cells[i])).collect::<BTreeSet<_>>().len() as f64 / (n - 1) as f64
            };
            let pred = if distinct == 1 {
                1.0
            } else if n < 10 {
                0.0
            } else {
                naive_fano(naive_entropy(&cells), distinct)
            };
            let returned: Vec<bool> = (1..n).map(|i| cells[..i].contains(&cells[i])).collect();
            let mut ret = 0;
            let mut expl = 0;
            for i in 1..returned.len() {
                if returned[i] && returned[i - 1] {
                    ret += 1;
                }
                if !returned[i] && !returned[i - 1] {
                    expl += 1;
                }
            }
            let pop = if n == 0 {
                0.0
            } else {
                loc.iter()
                    .map(|&(slot, cell)| located.iter().filter(|o| o.contains(&(slot, cell))).count() as f64)
                    .sum::<f64>()
                    / n as f64
            };
            let flow = if n < 2 {
                0.0
            } else {
                (1..n)
                    .map(|i| {
                        let key = (loc[i - 1].1, loc[i].1, loc[i - 1].0);
                        located
                            .iter()
                            .filter(|o| o.windows(2).any(|w| (w[0].1, w[1].1, w[0].0) == key))
                            .count() as f64
                    })
                    .sum::<f64>()
                    / (n - 1) as f64
            };
            [
                per_day,
                vol,
                step,
                rg_u,
                rg_e,
                rep,
                sta,
                div,
                pred,
                ret as f64,
                expl as f64,
                pop,
                flow,
            ]
        })
        .collect()
}

/// Worst relative disagreement per feature.
pub fn worst_errors(got: &[[f64; 13]], want: &[[f64; 13]]) -> BTreeMap<&'static str, f64> {
    let mut out = BTreeMap::new();
    for (g, w) in got.iter().zip(want) {
        for k in 0..13 {
            let err = rel_error(g[k], w[k]);
            let e = out.entry(FEATURE_NAMES[k]).or_insert(0.0f64);
            *e = e.max(err);
        }
    }
    out
}
