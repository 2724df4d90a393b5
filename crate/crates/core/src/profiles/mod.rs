//! Traffic and mobility profiles, and Gini importance of mobility features
//! for predicting the traffic profile.

mod forest;
mod kmeans;
mod ward;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use forest::{gini_importance, ForestConfig};
pub use kmeans::{kmeans, KMeansFit};
pub use ward::ward_labels;

use crate::features::{UserFeatures, MOBILITY_FEATURES};

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("degenerate population: {0}")]
    Degenerate(String),
    #[error("feature importance needs at least {needed} labeled users, got {got}")]
    TooFewUsers { needed: usize, got: usize },
    #[error("all users share one traffic profile; importances would all be zero")]
    SingleClass,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrafficProfile {
    LO,
    LF,
    HO,
    HF,
}

impl TrafficProfile {
    pub const ALL: [TrafficProfile; 4] = [Self::LO, Self::LF, Self::HO, Self::HF];

    pub fn new(heavy: bool, frequent: bool) -> Self {
        match (heavy, frequent) {
            (false, false) => Self::LO,
            (false, true) => Self::LF,
            (true, false) => Self::HO,
            (true, true) => Self::HF,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TrafficProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MobilityProfile {
    Routiner,
    Regular,
    Scouter,
}

impl MobilityProfile {
    pub const ALL: [MobilityProfile; 3] = [Self::Routiner, Self::Regular, Self::Scouter];
}

impl fmt::Display for MobilityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Routiner => "routiner",
            Self::Regular => "regular",
            Self::Scouter => "scouter",
        })
    }
}

impl FromStr for MobilityProfile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| format!("unknown mobility profile {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileAssignment {
    pub user_id: String,
    pub traffic_profile: TrafficProfile,
    pub mobility_profile: MobilityProfile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileConfig {
    pub seed: u64,
    pub kmeans_restarts: usize,
    /// Largest population clustered directly by Ward; the rest join the nearest centroid.
    pub ward_cap: usize,
    pub min_importance_users: usize,
    pub forest: ForestConfig,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            kmeans_restarts: 50,
            ward_cap: 20_000,
            min_importance_users: 100,
            forest: ForestConfig::default(),
        }
    }
}

/// Z-scores each column; constant columns become 0.
fn zscore<const D: usize>(points: &[[f64; D]]) -> Vec<[f64; D]> {
    let n = points.len() as f64;
    let mut mean = [0.0; D];
    let mut std = [0.0; D];
    for p in points {
        for d in 0..D {
            mean[d] += p[d] / n;
        }
    }
    for p in points {
        for d in 0..D {
            std[d] += (p[d] - mean[d]).powi(2) / n;
        }
    }
    points
        .iter()
        .map(|p| {
            let mut z = [0.0; D];
            for d in 0..D {
                let s = std[d].sqrt();
                z[d] = if s > 0.0 { (p[d] - mean[d]) / s } else { 0.0 };
            }
            z
        })
        .collect()
}

fn distinct_points<const D: usize>(points: &[[f64; D]]) -> usize {
    let mut keys: Vec<[u64; D]> = points.iter().map(|p| p.map(f64::to_bits)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn centroids<const D: usize>(points: &[[f64; D]], labels: &[usize], k: usize) -> Vec<[f64; D]> {
    let mut sums = vec![[0.0; D]; k];
    let mut counts = vec![0.0; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1.0;
        for d in 0..D {
            sums[l][d] += p[d];
        }
    }
    for (s, c) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= c);
    }
    sums
}

/// Ward clustering on standardized usage frequency and log volume, cut at four
/// clusters, each labeled against the population medians.
pub fn traffic_profiles(
    features: &[UserFeatures],
    config: &ProfileConfig,
) -> Result<Vec<TrafficProfile>, ProfileError> {
    const K: usize = 4;
    let raw: Vec<[f64; 2]> = features
        .iter()
        .map(|f| [f.avg_events_per_day, (1.0 + f.avg_session_volume).log10()])
        .collect();
    if distinct_points(&raw) < K {
        return Err(ProfileError::Degenerate(format!(
            "traffic clustering needs {K} distinct users, got {}",
            distinct_points(&raw)
        )));
    }
    let z = zscore(&raw);
    let labels = if z.len() <= config.ward_cap {
        ward_labels(&z, K)
    } else {
        let mut order: Vec<usize> = (0..z.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
        order.truncate(config.ward_cap);
        order.sort_unstable();
        let sample: Vec<[f64; 2]> = order.iter().map(|&i| z[i]).collect();
        let sample_labels = ward_labels(&sample, K);
        let c = centroids(&sample, &sample_labels, K);
        z.iter()
            .map(|p| {
                (0..K)
                    .min_by(|&a, &b| {
                        let da = (p[0] - c[a][0]).powi(2) + (p[1] - c[a][1]).powi(2);
                        let db = (p[0] - c[b][0]).powi(2) + (p[1] - c[b][1]).powi(2);
                        da.total_cmp(&db)
                    })
                    .unwrap()
            })
            .collect()
    };
    let c = centroids(&z, &labels, K);
    let med_freq = median(&mut z.iter().map(|p| p[0]).collect::<Vec<_>>());
    let med_vol = median(&mut z.iter().map(|p| p[1]).collect::<Vec<_>>());
    let cluster_profile: Vec<TrafficProfile> = c
        .iter()
        .map(|c| TrafficProfile::new(c[1] > med_vol, c[0] > med_freq))
        .collect();
    Ok(labels.iter().map(|&l| cluster_profile[l]).collect())
}

/// k-means (k = 3) on standardized successive-return and successive-exploration counts.
pub fn mobility_profiles(
    features: &[UserFeatures],
    config: &ProfileConfig,
) -> Result<Vec<MobilityProfile>, ProfileError> {
    const K: usize = 3;
    let raw: Vec<[f64; 2]> = features
        .iter()
        .map(|f| [f.n_succ_ret as f64, f.n_succ_expl as f64])
        .collect();
    if distinct_points(&raw) < K {
        return Err(ProfileError::Degenerate(format!(
            "mobility clustering needs {K} distinct users, got {}",
            distinct_points(&raw)
        )));
    }
    let z = zscore(&raw);
    let fit = kmeans(&z, K, config.kmeans_restarts, config.seed);
    let by = |dim: usize, among: &[usize]| -> usize {
        *among
            .iter()
            .max_by(|&&a, &&b| fit.centroids[a][dim].total_cmp(&fit.centroids[b][dim]).then(b.cmp(&a)))
            .unwrap()
    };
    let all = [0, 1, 2];
    let scouter = by(1, &all);
    let rest: Vec<usize> = all.into_iter().filter(|&c| c != scouter).collect();
    let routiner = by(0, &rest);
    let cluster_profile: Vec<MobilityProfile> = (0..K)
        .map(|c| {
            if c == scouter {
                MobilityProfile::Scouter
            } else if c == routiner {
                MobilityProfile::Routiner
            } else {
                MobilityProfile::Regular
            }
        })
        .collect();
    Ok(fit.labels.iter().map(|&l| cluster_profile[l]).collect())
}

pub fn assign_profiles(
    features: &[UserFeatures],
    config: &ProfileConfig,
) -> Result<Vec<ProfileAssignment>, ProfileError> {
    let traffic = traffic_profiles(features, config)?;
    let mobility = mobility_profiles(features, config)?;
    Ok(features
        .iter()
        .zip(traffic.into_iter().zip(mobility))
        .map(|(f, (t, m))| ProfileAssignment {
            user_id: f.user_id.clone(),
            traffic_profile: t,
            mobility_profile: m,
        })
        .collect())
}

/// Importance of each mobility feature for predicting the traffic profile,
/// sorted descending (ties by feature order).
pub fn feature_importance(
    features: &[UserFeatures],
    labels: &[TrafficProfile],
    config: &ProfileConfig,
) -> Result<Vec<(String, f64)>, ProfileError> {
    if features.len() < config.min_importance_users {
        return Err(ProfileError::TooFewUsers {
            needed: config.min_importance_users,
            got: features.len(),
        });
    }
    let y: Vec<usize> = labels.iter().map(|l| l.index()).collect();
    if y.iter().all(|&c| c == y[0]) {
        return Err(ProfileError::SingleClass);
    }
    let x: Vec<Vec<f64>> = features.iter().map(|f| f.mobility_vector().to_vec()).collect();
    let imp = gini_importance(&x, &y, TrafficProfile::ALL.len(), &config.forest);
    let mut out: Vec<(String, f64)> = MOBILITY_FEATURES.iter().map(|s| s.to_string()).zip(imp).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(out)
}

pub fn write_profiles<W: Write>(writer: W, profiles: &[ProfileAssignment]) -> Result<(), ProfileError> {
    let mut w = csv::Writer::from_writer(writer);
    for p in profiles {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_profiles<R: Read>(reader: R) -> Result<Vec<ProfileAssignment>, ProfileError> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_importance<W: Write>(writer: W, importance: &[(String, f64)]) -> Result<(), ProfileError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "importance"])?;
    for (name, v) in importance {
        w.write_record([name.as_str(), &v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
