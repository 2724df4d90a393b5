//! Synthetic XDR populations with known ground truth and tunable coupling
//! between traffic and mobility.

mod coupled;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use coupled::{generate_coupled, mobility_map, CoupledSpec, CoupledUser, CouplingDirection};

use crate::features::geo::{haversine_km, LatLon};
use crate::ingest::{write_xdr, CellCatalog, Event, IngestError, UserSequence, SLOTS_PER_DAY, SLOTS_PER_WEEK};
use crate::profiles::MobilityProfile;
use crate::step::{nearest_rank_tertiles, DistanceClass, MobilityTuple, RefinedBehavior, TrafficClass};

const KM_PER_DEGREE: f64 = 111.32;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("infeasible generator spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_users: usize,
    pub n_cells: usize,
    pub grid_extent_km: f64,
    pub n_provinces: usize,
    /// Fractions of routiners, regulars and scouters.
    pub profile_mix: [f64; 3],
    /// κ: probability that a step's traffic class follows the (hour, mobility) map.
    pub coupling: f64,
    /// Half-open byte ranges of light, medium and heavy volumes.
    pub volume_bands: [(u64, u64); 3],
    /// Class probabilities of the independent draw.
    pub class_weights: [f64; 3],
    /// Fraction of users who skip some slots and so never have a full sequence.
    pub sparse_fraction: f64,
    /// South-west corner of the grid.
    pub origin: (f64, f64),
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_cells: 400,
            grid_extent_km: 30.0,
            n_provinces: 1,
            profile_mix: [0.25, 0.6, 0.15],
            coupling: 0.5,
            volume_bands: [(2_000, 50_000), (50_000, 1_000_000), (1_000_000, 50_000_000)],
            class_weights: [1.0 / 3.0; 3],
            sparse_fraction: 0.0,
            origin: (-36.8, -73.05),
            seed: 0,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Spec(m));
        if self.n_users == 0 {
            return bad("n_users must be positive".into());
        }
        if self.n_provinces == 0 {
            return bad("n_provinces must be positive".into());
        }
        if self.n_cells < 2 * self.n_provinces {
            return bad(format!(
                "need at least two cells per province, got {} cells",
                self.n_cells
            ));
        }
        if self.grid_extent_km <= 0.0 {
            return bad("grid_extent_km must be positive".into());
        }
        let mix: f64 = self.profile_mix.iter().sum();
        if self.profile_mix.iter().any(|&p| p < 0.0) || (mix - 1.0).abs() > 1e-9 {
            return bad(format!(
                "profile fractions must be non-negative and sum to 1, got {mix}"
            ));
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return bad(format!("coupling {} outside [0, 1]", self.coupling));
        }
        if self.class_weights.iter().any(|&w| w < 0.0) || self.class_weights.iter().sum::<f64>() <= 0.0 {
            return bad("class weights must be non-negative with a positive sum".into());
        }
        if self.volume_bands.iter().any(|&(lo, hi)| lo == 0 || lo >= hi) {
            return bad("volume bands must satisfy 0 < lo < hi".into());
        }
        if !(0.0..=1.0).contains(&self.sparse_fraction) {
            return bad("sparse_fraction outside [0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTruth {
    pub province: String,
    pub mobility_profile: MobilityProfile,
    /// User whose mobility belongs with this user's traffic.
    pub pairing: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub kappa: f64,
    pub seed: u64,
    pub users: BTreeMap<String, UserTruth>,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub catalog: CellCatalog,
    pub users: Vec<UserSequence>,
    /// Generator-side behavior of every event, aligned with `users`.
    pub behaviors: Vec<Vec<RefinedBehavior>>,
    pub truth: GroundTruth,
}

impl SyntheticData {
    /// Writes `xdr.csv`, `catalog.csv` and `ground_truth.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), SynthError> {
        std::fs::create_dir_all(dir)?;
        write_xdr(BufWriter::new(File::create(dir.join("xdr.csv"))?), &self.users, false)?;
        self.catalog
            .write(BufWriter::new(File::create(dir.join("catalog.csv"))?))?;
        let mut w = BufWriter::new(File::create(dir.join("ground_truth.json"))?);
        serde_json::to_writer_pretty(&mut w, &self.truth)?;
        Ok(())
    }
}

/// Traffic class a step gets under full coupling. Every mobility tuple cycles
/// through the three classes over the day, so classes stay balanced.
pub fn coupling_class(hour: u8, mobility: MobilityTuple, seed: u64) -> TrafficClass {
    TrafficClass::ALL[(hour as usize + 5 * mobility.index() + (seed % 3) as usize) % 3]
}

struct Grid {
    positions: Vec<LatLon>,
    province_cells: Vec<Vec<usize>>,
}

fn build_grid(spec: &GeneratorSpec) -> Result<(CellCatalog, Grid), SynthError> {
    let side = (spec.n_cells as f64).sqrt().ceil() as usize;
    let spacing = spec.grid_extent_km / side as f64;
    let (lat0, lon0) = spec.origin;
    let km_per_lon = KM_PER_DEGREE * lat0.to_radians().cos();
    let mut catalog = CellCatalog::new();
    let mut positions = Vec::with_capacity(spec.n_cells);
    let mut province_cells = vec![Vec::new(); spec.n_provinces];
    for i in 0..spec.n_cells {
        let (col, row) = (i % side, i / side);
        let lat = lat0 + (row as f64 + 0.5) * spacing / KM_PER_DEGREE;
        let lon = lon0 + (col as f64 + 0.5) * spacing / km_per_lon;
        let p = (col * spec.n_provinces / side).min(spec.n_provinces - 1);
        catalog.insert(&cell_code(i), lat, lon, &province_name(p))?;
        positions.push(LatLon::new(lat, lon));
        province_cells[p].push(i);
    }
    if let Some(p) = province_cells.iter().position(|c| c.len() < 2) {
        return Err(SynthError::Spec(format!(
            "province {} has fewer than two cells",
            province_name(p)
        )));
    }
    Ok((
        catalog,
        Grid {
            positions,
            province_cells,
        },
    ))
}

pub fn cell_code(i: usize) -> String {
    format!("c{i:05}")
}

pub fn province_name(p: usize) -> String {
    format!("P{p}")
}

pub fn user_name(u: usize) -> String {
    format!("u{u:05}")
}

struct Habits {
    deviate: f64,
    explore: f64,
}

fn habits(p: MobilityProfile) -> Habits {
    match p {
        MobilityProfile::Routiner => Habits {
            deviate: 0.03,
            explore: 0.15,
        },
        MobilityProfile::Regular => Habits {
            deviate: 0.10,
            explore: 0.35,
        },
        MobilityProfile::Scouter => Habits {
            deviate: 0.22,
            explore: 0.8,
        },
    }
}

const DWELL_CONTINUE: f64 = 0.5;
const WAKE_SLOT: usize = 14;
const WORK_SLOTS: std::ops::Range<usize> = 18..36;
const WORK_DAYS: usize = 5;

struct Trajectory {
    province: usize,
    profile: MobilityProfile,
    slots: Vec<u16>,
    cells: Vec<usize>,
}

fn user_rng(seed: u64, user: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(user as u64 * 2 + stream);
    rng
}

fn simulate(spec: &GeneratorSpec, grid: &Grid, u: usize) -> Trajectory {
    let mut rng = user_rng(spec.seed, u, 0);
    let province = u % spec.n_provinces;
    let cells = &grid.province_cells[province];
    let r: f64 = rng.gen();
    let profile = if r < spec.profile_mix[0] {
        MobilityProfile::Routiner
    } else if r < spec.profile_mix[0] + spec.profile_mix[1] {
        MobilityProfile::Regular
    } else {
        MobilityProfile::Scouter
    };
    let h = habits(profile);
    let home = *cells.choose(&mut rng).unwrap();
    let work = loop {
        let c = *cells.choose(&mut rng).unwrap();
        if c != home {
            break c;
        }
    };
    let mut known = vec![home, work];
    let mut seen: HashSet<usize> = known.iter().copied().collect();
    let sparse = rng.gen::<f64>() < spec.sparse_fraction;
    let mut detour: Option<(usize, bool)> = None;
    let (mut slots, mut out_cells) = (Vec::new(), Vec::new());
    for slot in 0..SLOTS_PER_WEEK {
        let (day, of_day) = (slot / SLOTS_PER_DAY, slot % SLOTS_PER_DAY);
        let scheduled = if day < WORK_DAYS && WORK_SLOTS.contains(&of_day) {
            work
        } else {
            home
        };
        let here = match detour {
            Some((cell, _)) if rng.gen::<f64>() < DWELL_CONTINUE => cell,
            _ => {
                detour = None;
                if of_day >= WAKE_SLOT && rng.gen::<f64>() < h.deviate {
                    let explore = rng.gen::<f64>() < h.explore || known.len() <= 2;
                    let cell = if explore && seen.len() < cells.len() {
                        loop {
                            let c = *cells.choose(&mut rng).unwrap();
                            if !seen.contains(&c) {
                                break c;
                            }
                        }
                    } else {
                        *known.choose(&mut rng).unwrap()
                    };
                    if seen.insert(cell) {
                        known.push(cell);
                    }
                    detour = Some((cell, explore));
                    cell
                } else {
                    scheduled
                }
            }
        };
        if sparse && rng.gen::<f64>() < 0.3 {
            continue;
        }
        slots.push(slot as u16);
        out_cells.push(here);
    }
    if slots.is_empty() {
        slots.push(0);
        out_cells.push(home);
    }
    Trajectory {
        province,
        profile,
        slots,
        cells: out_cells,
    }
}

fn step_distances(grid: &Grid, cells: &[usize]) -> Vec<f64> {
    let mut d: Vec<f64> = cells
        .windows(2)
        .map(|w| haversine_km(grid.positions[w[0]], grid.positions[w[1]]))
        .collect();
    d.push(0.0);
    d
}

fn mobility_tuples(grid: &Grid, t: &Trajectory, thresholds: (f64, f64)) -> Vec<MobilityTuple> {
    let distances = step_distances(grid, &t.cells);
    let mut visited = HashSet::new();
    (0..t.cells.len())
        .map(|i| {
            let d = distances[i];
            let disc = if d <= thresholds.0 {
                DistanceClass::Close
            } else if d <= thresholds.1 {
                DistanceClass::Medium
            } else {
                DistanceClass::Far
            };
            let rep = !visited.insert(t.cells[i]);
            let sta = t.cells.get(i + 1).is_none_or(|&n| n == t.cells[i]);
            MobilityTuple::new(disc, rep, sta)
        })
        .collect()
}

fn draw_volume<R: Rng>(rng: &mut R, (lo, hi): (u64, u64)) -> u64 {
    let v = rng.gen_range((lo as f64).ln()..(hi as f64).ln()).exp() as u64;
    v.clamp(lo, hi - 1)
}

/// Generates a population. Deterministic in `spec`.
pub fn generate(spec: &GeneratorSpec) -> Result<SyntheticData, SynthError> {
    spec.validate()?;
    let (catalog, grid) = build_grid(spec)?;
    let trajectories: Vec<Trajectory> = (0..spec.n_users)
        .into_par_iter()
        .map(|u| simulate(spec, &grid, u))
        .collect();

    let mut thresholds = Vec::with_capacity(spec.n_provinces);
    for p in 0..spec.n_provinces {
        let mut d: Vec<f64> = trajectories
            .iter()
            .filter(|t| t.province == p)
            .flat_map(|t| step_distances(&grid, &t.cells).into_iter().filter(|&d| d > 0.0))
            .collect();
        thresholds.push(nearest_rank_tertiles(&mut d).unwrap_or((f64::INFINITY, f64::INFINITY)));
    }

    let weight_total: f64 = spec.class_weights.iter().sum();
    let generated: Vec<(UserSequence, Vec<RefinedBehavior>)> = trajectories
        .par_iter()
        .enumerate()
        .map(|(u, t)| {
            let mut rng = user_rng(spec.seed, u, 1);
            let tuples = mobility_tuples(&grid, t, thresholds[t.province]);
            let mut events = Vec::with_capacity(t.slots.len());
            let mut behaviors = Vec::with_capacity(t.slots.len());
            for ((&slot, &cell), &mob) in t.slots.iter().zip(&t.cells).zip(&tuples) {
                let hour = ((slot as usize % SLOTS_PER_DAY) / 2) as u8;
                let trc = if rng.gen::<f64>() < spec.coupling {
                    coupling_class(hour, mob, spec.seed)
                } else {
                    let mut r = rng.gen::<f64>() * weight_total;
                    let mut k = 2;
                    for (i, &w) in spec.class_weights.iter().enumerate() {
                        if r < w {
                            k = i;
                            break;
                        }
                        r -= w;
                    }
                    TrafficClass::ALL[k]
                };
                let volume = draw_volume(&mut rng, spec.volume_bands[trc.index()]);
                events.push(Event::new(slot, volume, Some(&cell_code(cell))));
                behaviors.push(RefinedBehavior::new(slot, trc, mob));
            }
            (UserSequence::new(user_name(u), events), behaviors)
        })
        .collect();

    let truth = GroundTruth {
        kappa: spec.coupling,
        seed: spec.seed,
        users: trajectories
            .iter()
            .enumerate()
            .map(|(u, t)| {
                (
                    user_name(u),
                    UserTruth {
                        province: province_name(t.province),
                        mobility_profile: t.profile,
                        pairing: user_name(u),
                    },
                )
            })
            .collect(),
    };
    let (users, behaviors) = generated.into_iter().unzip();
    Ok(SyntheticData {
        catalog,
        users,
        behaviors,
        truth,
    })
}
