use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{coupling_class, user_name, SynthError};
use crate::ingest::{SLOTS_PER_DAY, SLOTS_PER_WEEK};
use crate::step::{DistanceClass, MobilityTuple, RefinedBehavior, TrafficClass};

/// Which half of the behavior follows the other under coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingDirection {
    /// Mobility tuple = map(hour, traffic class) with probability κ.
    MobilityFromTraffic,
    /// Traffic class = map(hour, mobility tuple) with probability κ.
    TrafficFromMobility,
}

/// Behavior-level generator: produces refined behavior sequences directly,
/// without cells or volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledSpec {
    pub n_users: usize,
    /// Independent full-week sequences per user.
    pub weeks: usize,
    pub kappa: f64,
    pub direction: CouplingDirection,
    /// Give every user a private map instead of one shared by the population.
    pub per_user_maps: bool,
    /// Probability that an uncoupled mobility step is a stay at a known place.
    pub stay_prob: f64,
    /// Probability that traffic repeats the previous class when drawn independently.
    pub traffic_persistence: f64,
    pub seed: u64,
}

impl Default for CoupledSpec {
    fn default() -> Self {
        Self {
            n_users: 200,
            weeks: 1,
            kappa: 1.0,
            direction: CouplingDirection::MobilityFromTraffic,
            per_user_maps: false,
            stay_prob: 0.7,
            traffic_persistence: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledUser {
    pub user_id: String,
    pub weeks: Vec<Vec<RefinedBehavior>>,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mobility tuple assigned to (hour, traffic class). `user` selects a private
/// map; `None` gives the population-wide one.
pub fn mobility_map(seed: u64, user: Option<usize>, hour: u8, trc: TrafficClass) -> MobilityTuple {
    let salt = user.map_or(u64::MAX, |u| u as u64);
    let h = splitmix(splitmix(seed ^ splitmix(salt)) ^ ((hour as u64) << 8 | trc.index() as u64));
    MobilityTuple::from_index((h % MobilityTuple::COUNT as u64) as usize).expect("index < 12")
}

pub(crate) fn stay() -> MobilityTuple {
    MobilityTuple::new(DistanceClass::Close, true, true)
}

pub fn generate_coupled(spec: &CoupledSpec) -> Result<Vec<CoupledUser>, SynthError> {
    if spec.n_users == 0 || spec.weeks == 0 {
        return Err(SynthError::Spec("coupled generator needs users and weeks".into()));
    }
    for (name, v) in [
        ("kappa", spec.kappa),
        ("stay_prob", spec.stay_prob),
        ("traffic_persistence", spec.traffic_persistence),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(SynthError::Spec(format!("{name} {v} outside [0, 1]")));
        }
    }
    Ok((0..spec.n_users)
        .into_par_iter()
        .map(|u| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(u as u64);
            let map_user = spec.per_user_maps.then_some(u);
            let weeks = (0..spec.weeks)
                .map(|_| {
                    let mut trc = TrafficClass::ALL[rng.gen_range(0..3)];
                    (0..SLOTS_PER_WEEK as u16)
                        .map(|slot| {
                            let hour = ((slot as usize % SLOTS_PER_DAY) / 2) as u8;
                            if rng.gen::<f64>() >= spec.traffic_persistence {
                                trc = TrafficClass::ALL[rng.gen_range(0..3)];
                            }
                            let background = if rng.gen::<f64>() < spec.stay_prob {
                                stay()
                            } else {
                                let i = rng.gen_range(0..MobilityTuple::COUNT - 1);
                                let m = MobilityTuple::from_index(i).unwrap();
                                if m == stay() {
                                    MobilityTuple::from_index(MobilityTuple::COUNT - 1).unwrap()
                                } else {
                                    m
                                }
                            };
                            let coupled = rng.gen::<f64>() < spec.kappa;
                            match spec.direction {
                                CouplingDirection::MobilityFromTraffic => {
                                    let mob = if coupled {
                                        mobility_map(spec.seed, map_user, hour, trc)
                                    } else {
                                        background
                                    };
                                    RefinedBehavior::new(slot, trc, mob)
                                }
                                CouplingDirection::TrafficFromMobility => {
                                    let t = if coupled {
                                        coupling_class(hour, background, spec.seed)
                                    } else {
                                        trc
                                    };
                                    RefinedBehavior::new(slot, t, background)
                                }
                            }
                        })
                        .collect()
                })
                .collect();
            CoupledUser {
                user_id: user_name(u),
                weeks,
            }
        })
        .collect())
}
