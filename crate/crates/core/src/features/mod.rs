//! Per-user traffic and mobility features.
//!
//! Traffic: events per day and mean session volume. Spatial: mean step
//! distance and two radii of gyration. Structural: repetitiveness,
//! stationarity, diversity, entropy-based predictability, successive
//! returns/explorations. Social: popularity and flow of the visited
//! (cell, slot) pairs against the province population.

pub mod geo;
mod population;
pub mod structural;

use std::collections::HashMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use geo::{haversine_km, radius_of_gyration, LatLon};
pub use population::{build_population_tables, FlowTable, PopularityTable};
pub use structural::{entropy_rate, fano_predictability, structural_features, StructuralFeatures};

use crate::ingest::{CellCatalog, CellId, UserSequence, DAYS_PER_WEEK};

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("cell {0:?} is not in the catalog")]
    UnknownCell(String),
    #[error("user {user}: {what} missing from the population tables")]
    TableMismatch { user: String, what: String },
    #[error("malformed table: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Sub-trajectory length used by the diversity index.
    pub diversity_window: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { diversity_window: 2 }
    }
}

/// The located part of a user's week: slots with traffic and their cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocatedTrajectory {
    pub user_id: String,
    pub slots: Vec<u16>,
    pub cells: Vec<CellId>,
}

impl LocatedTrajectory {
    pub fn from_user(user: &UserSequence, catalog: &CellCatalog) -> Result<Self, FeatureError> {
        let mut slots = Vec::with_capacity(user.events.len());
        let mut cells = Vec::with_capacity(user.events.len());
        for (slot, code) in user.located() {
            let id = catalog
                .id(code)
                .ok_or_else(|| FeatureError::UnknownCell(code.to_string()))?;
            slots.push(slot);
            cells.push(id);
        }
        Ok(Self {
            user_id: user.user_id.clone(),
            slots,
            cells,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Great-circle distance from each located event to the next one.
    pub fn step_distances(&self, catalog: &CellCatalog) -> Vec<f64> {
        self.cells
            .windows(2)
            .map(|w| haversine_km(position(catalog, w[0]), position(catalog, w[1])))
            .collect()
    }
}

pub(crate) fn position(catalog: &CellCatalog, id: CellId) -> LatLon {
    let c = catalog.cell(id);
    LatLon::new(c.lat, c.lon)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UserFeatures {
    pub user_id: String,
    pub province: String,
    pub avg_events_per_day: f64,
    pub avg_session_volume: f64,
    pub avg_step_distance_km: f64,
    pub rg_unique_km: f64,
    pub rg_event_km: f64,
    pub repetitiveness: f64,
    pub stationarity: f64,
    pub diversity: f64,
    pub predictability: f64,
    pub n_succ_ret: u32,
    pub n_succ_expl: u32,
    pub popularity_influence: f64,
    pub flow_measurement: f64,
    #[serde(skip)]
    pub predictability_defined: bool,
}

/// Names of the eleven mobility features, in `features.csv` column order.
pub const MOBILITY_FEATURES: [&str; 11] = [
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

impl UserFeatures {
    pub fn mobility_vector(&self) -> [f64; 11] {
        [
            self.avg_step_distance_km,
            self.rg_unique_km,
            self.rg_event_km,
            self.repetitiveness,
            self.stationarity,
            self.diversity,
            self.predictability,
            self.n_succ_ret as f64,
            self.n_succ_expl as f64,
            self.popularity_influence,
            self.flow_measurement,
        ]
    }
}

/// Events per day (traffic slots only) and mean volume of those events.
pub fn traffic_features(user: &UserSequence) -> (f64, f64) {
    let (n, total) = user
        .events
        .iter()
        .filter(|e| e.volume > 0)
        .fold((0u64, 0u128), |(n, t), e| (n + 1, t + e.volume as u128));
    if n == 0 {
        return (0.0, 0.0);
    }
    (n as f64 / DAYS_PER_WEEK as f64, total as f64 / n as f64)
}

/// Mean step distance, radius of gyration over distinct cells, and
/// radius of gyration weighted by visit counts.
pub fn spatial_features(traj: &LocatedTrajectory, catalog: &CellCatalog) -> (f64, f64, f64) {
    if traj.len() < 2 {
        return (0.0, 0.0, 0.0);
    }
    let steps = traj.step_distances(catalog);
    let avg_step = steps.iter().sum::<f64>() / steps.len() as f64;

    let mut visits: Vec<(CellId, f64)> = Vec::new();
    let mut index: HashMap<CellId, usize> = HashMap::new();
    for &c in &traj.cells {
        let slot = *index.entry(c).or_insert_with(|| {
            visits.push((c, 0.0));
            visits.len() - 1
        });
        visits[slot].1 += 1.0;
    }
    let unique: Vec<(LatLon, f64)> = visits.iter().map(|&(c, _)| (position(catalog, c), 1.0)).collect();
    let weighted: Vec<(LatLon, f64)> = visits.iter().map(|&(c, m)| (position(catalog, c), m)).collect();
    (avg_step, radius_of_gyration(&unique), radius_of_gyration(&weighted))
}

/// Mean popularity over located events and mean flow over consecutive pairs.
pub fn social_features(
    traj: &LocatedTrajectory,
    pop: &PopularityTable,
    flow: &FlowTable,
) -> Result<(f64, f64), FeatureError> {
    if traj.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut pop_sum = 0.0;
    for (&slot, &cell) in traj.slots.iter().zip(&traj.cells) {
        pop_sum += pop.get(cell, slot).ok_or_else(|| FeatureError::TableMismatch {
            user: traj.user_id.clone(),
            what: format!("popularity (cell {cell}, slot {slot})"),
        })? as f64;
    }
    let mut flow_sum = 0.0;
    for i in 1..traj.len() {
        let key = (traj.cells[i - 1], traj.cells[i], traj.slots[i - 1]);
        flow_sum += flow
            .get(key.0, key.1, key.2)
            .ok_or_else(|| FeatureError::TableMismatch {
                user: traj.user_id.clone(),
                what: format!("flow {key:?}"),
            })? as f64;
    }
    let flow_mean = if traj.len() > 1 {
        flow_sum / (traj.len() - 1) as f64
    } else {
        0.0
    };
    Ok((pop_sum / traj.len() as f64, flow_mean))
}

/// All thirteen features of one user.
pub fn extract_features(
    user: &UserSequence,
    traj: &LocatedTrajectory,
    catalog: &CellCatalog,
    pop: &PopularityTable,
    flow: &FlowTable,
    config: &FeatureConfig,
) -> Result<UserFeatures, FeatureError> {
    let (avg_events_per_day, avg_session_volume) = traffic_features(user);
    let (avg_step_distance_km, rg_unique_km, rg_event_km) = spatial_features(traj, catalog);
    let s = structural_features(&traj.cells, config.diversity_window);
    let (popularity_influence, flow_measurement) = social_features(traj, pop, flow)?;
    Ok(UserFeatures {
        user_id: user.user_id.clone(),
        province: user.province.clone().unwrap_or_default(),
        avg_events_per_day,
        avg_session_volume,
        avg_step_distance_km,
        rg_unique_km,
        rg_event_km,
        repetitiveness: s.repetitiveness,
        stationarity: s.stationarity,
        diversity: s.diversity,
        predictability: s.predictability,
        n_succ_ret: s.n_succ_ret,
        n_succ_expl: s.n_succ_expl,
        popularity_influence,
        flow_measurement,
        predictability_defined: s.predictability_defined,
    })
}

/// Tables plus per-user features for one province.
#[derive(Debug, Clone)]
pub struct ProvinceFeatures {
    pub popularity: PopularityTable,
    pub flow: FlowTable,
    pub users: Vec<UserFeatures>,
}

/// Builds the population tables, then extracts every user's features in parallel.
pub fn province_features(
    province: &str,
    users: &[UserSequence],
    catalog: &CellCatalog,
    config: &FeatureConfig,
) -> Result<ProvinceFeatures, FeatureError> {
    let trajectories: Vec<LocatedTrajectory> = users
        .par_iter()
        .map(|u| LocatedTrajectory::from_user(u, catalog))
        .collect::<Result<_, _>>()?;
    let (popularity, flow) = build_population_tables(province, &trajectories);
    let features = users
        .par_iter()
        .zip(&trajectories)
        .map(|(u, t)| extract_features(u, t, catalog, &popularity, &flow, config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProvinceFeatures {
        popularity,
        flow,
        users: features,
    })
}

pub fn write_features<W: Write>(writer: W, features: &[UserFeatures]) -> Result<(), FeatureError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for f in features {
        wtr.serialize(f)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_features<R: Read>(reader: R) -> Result<Vec<UserFeatures>, FeatureError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out: Vec<UserFeatures> = Vec::new();
    for row in rdr.deserialize() {
        let mut f: UserFeatures = row?;
        f.predictability_defined = true;
        out.push(f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Event;

    fn catalog_line(n: usize, spacing_deg: f64) -> CellCatalog {
        let mut c = CellCatalog::new();
        for i in 0..n {
            c.insert(&format!("C{i}"), 0.0, i as f64 * spacing_deg, "P").unwrap();
        }
        c
    }

    fn user(cells: &[&str], volumes: &[u64]) -> UserSequence {
        let events = volumes
            .iter()
            .zip(cells.iter().chain(std::iter::repeat(&"")))
            .enumerate()
            .map(|(i, (&v, c))| Event::new(i as u16, v, (v > 0).then_some(*c)))
            .collect();
        let mut u = UserSequence::new("u", events);
        u.province = Some("P".into());
        u
    }

    #[test]
    fn uniform_traffic() {
        let u = user(&["C0"; 336], &[1000; 336]);
        assert_eq!(traffic_features(&u), (48.0, 1000.0));
    }

    #[test]
    fn sparse_traffic() {
        let u = user(&["", "", "C0", "C0"], &[0, 0, 2000, 4000]);
        let (per_day, vol) = traffic_features(&u);
        assert!((per_day - 2.0 / 7.0).abs() < 1e-15);
        assert_eq!(vol, 3000.0);
        let empty = user(&[], &[0, 0]);
        assert_eq!(traffic_features(&empty), (0.0, 0.0));
    }

    #[test]
    fn spatial_degenerate() {
        let cat = catalog_line(2, 0.1);
        let u = user(&["C0"; 5], &[1; 5]);
        let t = LocatedTrajectory::from_user(&u, &cat).unwrap();
        assert_eq!(spatial_features(&t, &cat), (0.0, 0.0, 0.0));
    }

    #[test]
    fn spatial_two_points_ten_km() {
        // Spacing chosen so the two cells are 10 km apart on the equator.
        let deg = 10.0 / (geo::EARTH_RADIUS_KM * std::f64::consts::PI / 180.0);
        let cat = catalog_line(2, deg);
        let cells: Vec<&str> = (0..20).map(|i| if i % 2 == 0 { "C0" } else { "C1" }).collect();
        let u = user(&cells, &[1; 20]);
        let t = LocatedTrajectory::from_user(&u, &cat).unwrap();
        let (step, rgu, rge) = spatial_features(&t, &cat);
        assert!((step - 10.0).abs() < 1e-6);
        assert!((rgu - 5.0).abs() < 0.01);
        assert!((rge - 5.0).abs() < 0.01);
    }

    #[test]
    fn visit_weighting_pulls_centroid() {
        let deg = 8.0 / (geo::EARTH_RADIUS_KM * std::f64::consts::PI / 180.0);
        let cat = catalog_line(2, deg);
        let u = user(&["C0", "C0", "C0", "C1"], &[1; 4]);
        let t = LocatedTrajectory::from_user(&u, &cat).unwrap();
        let (_, rgu, rge) = spatial_features(&t, &cat);
        assert!((rgu - 4.0).abs() < 0.01);
        // Weighted: centroid at 2 km from A, rms = sqrt(3/4*4 + 1/4*36) = sqrt(12)
        assert!((rge - 12f64.sqrt()).abs() < 0.01, "{rge}");
        assert!(rge < rgu);
    }

    #[test]
    fn lone_user_social_features() {
        let cat = catalog_line(3, 0.01);
        let u = user(&["C0", "C1", "C2", "C2"], &[5; 4]);
        let t = LocatedTrajectory::from_user(&u, &cat).unwrap();
        let (pop, flow) = build_population_tables("P", std::slice::from_ref(&t));
        assert_eq!(social_features(&t, &pop, &flow).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn shared_slots_raise_popularity() {
        let cat = catalog_line(3, 0.01);
        let make = |id: &str| {
            let mut u = user(&["C0", "C1", "C2"], &[5; 3]);
            u.user_id = id.to_string();
            LocatedTrajectory::from_user(&u, &cat).unwrap()
        };
        let trajs: Vec<_> = (0..5).map(|i| make(&format!("u{i}"))).collect();
        let (pop, flow) = build_population_tables("P", &trajs);
        let (p0, f0) = social_features(&trajs[0], &pop, &flow).unwrap();
        assert_eq!((p0, f0), (5.0, 5.0));
        assert_eq!(social_features(&trajs[3], &pop, &flow).unwrap(), (p0, f0));
    }

    #[test]
    fn missing_table_key_is_error() {
        let cat = catalog_line(2, 0.01);
        let u = user(&["C0", "C1"], &[5; 2]);
        let t = LocatedTrajectory::from_user(&u, &cat).unwrap();
        let err = social_features(&t, &PopularityTable::default(), &FlowTable::default());
        assert!(matches!(err, Err(FeatureError::TableMismatch { .. })));
    }

    #[test]
    fn features_csv_header_and_round_trip() {
        let cat = catalog_line(3, 0.01);
        let users = vec![user(&["C0", "C1", "C0", "C2"], &[10, 20, 30, 40])];
        let pf = province_features("P", &users, &cat, &FeatureConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_features(&mut buf, &pf.users).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "user_id,province,avg_events_per_day,avg_session_volume,avg_step_distance_km,rg_unique_km,rg_event_km,repetitiveness,stationarity,diversity,predictability,n_succ_ret,n_succ_expl,popularity_influence,flow_measurement"
        );
        let back = read_features(buf.as_slice()).unwrap();
        assert_eq!(back[0].avg_step_distance_km, pf.users[0].avg_step_distance_km);
        assert_eq!(back[0].n_succ_expl, pf.users[0].n_succ_expl);
    }
}
