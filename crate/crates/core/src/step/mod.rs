//! Step-level behavior encoding: each located event becomes a tuple of
//! traffic class, distance class, return flag, stay flag, diversity change,
//! popularity and flow. [`refine`] keeps the four behavior components the
//! Markov model uses.

mod thresholds;

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

pub use thresholds::{fit_thresholds, nearest_rank_tertiles, Thresholds};

use crate::features::{FlowTable, LocatedTrajectory, PopularityTable};
use crate::ingest::{CellCatalog, CellId, UserSequence};

#[derive(Debug, thiserror::Error)]
pub enum StepError {
    #[error("cannot fit thresholds: {0}")]
    ThresholdFit(String),
    #[error("province mismatch: user in {user:?}, {artifact} fitted for {artifact_province:?}")]
    ProvinceMismatch {
        user: String,
        artifact: &'static str,
        artifact_province: String,
    },
    #[error("user {user}: popularity missing for (cell {cell}, slot {slot})")]
    MissingPopularity { user: String, cell: CellId, slot: u16 },
    #[error("user {user}: flow missing for departure slot {slot}")]
    MissingFlow { user: String, slot: u16 },
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed behaviors file: {0}")]
    Format(String),
}

macro_rules! three_level {
    ($name:ident { $a:ident = $ca:literal, $b:ident = $cb:literal, $c:ident = $cc:literal }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $a,
            $b,
            $c,
        }

        impl $name {
            pub const ALL: [$name; 3] = [$name::$a, $name::$b, $name::$c];

            pub fn index(self) -> usize {
                self as usize
            }

            pub fn from_index(i: usize) -> Option<Self> {
                Self::ALL.get(i).copied()
            }

            pub fn symbol(self) -> char {
                match self {
                    $name::$a => $ca,
                    $name::$b => $cb,
                    $name::$c => $cc,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.symbol())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                Self::ALL
                    .into_iter()
                    .find(|v| s.len() == 1 && s.starts_with(v.symbol()))
                    .ok_or_else(|| format!("invalid {}: {s:?}", stringify!($name)))
            }
        }
    };
}

three_level!(TrafficClass { Light = 'l', Medium = 'm', Heavy = 'h' });
three_level!(DistanceClass { Close = 'c', Medium = 'm', Far = 'f' });

/// Distance class, return flag and stay flag of one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MobilityTuple {
    pub disc: DistanceClass,
    pub rep: bool,
    pub sta: bool,
}

impl MobilityTuple {
    pub const COUNT: usize = 12;

    pub fn new(disc: DistanceClass, rep: bool, sta: bool) -> Self {
        Self { disc, rep, sta }
    }

    pub fn index(self) -> usize {
        self.disc.index() * 4 + (self.rep as usize) * 2 + self.sta as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        (i < Self::COUNT).then(|| Self {
            disc: DistanceClass::ALL[i / 4],
            rep: i % 4 >= 2,
            sta: i % 2 == 1,
        })
    }

    pub fn all() -> impl Iterator<Item = MobilityTuple> {
        (0..Self::COUNT).filter_map(Self::from_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepBehavior {
    pub slot: u16,
    pub trc: TrafficClass,
    pub disc: DistanceClass,
    pub rep: bool,
    pub sta: bool,
    pub delta_div: f64,
    pub popularity: u32,
    pub flow: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorSequence {
    pub user_id: String,
    pub steps: Vec<StepBehavior>,
}

/// The behavior components kept by the inference model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RefinedBehavior {
    pub slot: u16,
    pub trc: TrafficClass,
    pub disc: DistanceClass,
    pub rep: bool,
    pub sta: bool,
}

impl RefinedBehavior {
    pub fn new(slot: u16, trc: TrafficClass, mobility: MobilityTuple) -> Self {
        Self {
            slot,
            trc,
            disc: mobility.disc,
            rep: mobility.rep,
            sta: mobility.sta,
        }
    }

    pub fn mobility(&self) -> MobilityTuple {
        MobilityTuple::new(self.disc, self.rep, self.sta)
    }
}

impl From<&StepBehavior> for RefinedBehavior {
    fn from(s: &StepBehavior) -> Self {
        Self {
            slot: s.slot,
            trc: s.trc,
            disc: s.disc,
            rep: s.rep,
            sta: s.sta,
        }
    }
}

/// Incremental diversity of growing prefixes.
struct PrefixDiversity<'a> {
    window: usize,
    seen: HashSet<&'a [CellId]>,
}

impl<'a> PrefixDiversity<'a> {
    fn new(window: usize) -> Self {
        Self {
            window: window.max(1),
            seen: HashSet::new(),
        }
    }

    /// Diversity of `cells[..=i]` given all earlier prefixes were pushed.
    fn push(&mut self, cells: &'a [CellId], i: usize) -> f64 {
        let len = i + 1;
        if len >= self.window {
            self.seen.insert(&cells[len - self.window..len]);
        }
        if len < self.window.max(2) {
            return 0.0;
        }
        self.seen.len() as f64 / (len - self.window + 1) as f64
    }
}

/// Encodes one accepted user. Only events with traffic produce steps.
pub fn encode_sequence(
    user: &UserSequence,
    thresholds: &Thresholds,
    pop: &PopularityTable,
    flow: &FlowTable,
    catalog: &CellCatalog,
    diversity_window: usize,
) -> Result<BehaviorSequence, StepError> {
    let province = user.province.clone().unwrap_or_default();
    let check = |artifact: &'static str, p: &str| {
        if p != province {
            Err(StepError::ProvinceMismatch {
                user: province.clone(),
                artifact,
                artifact_province: p.to_string(),
            })
        } else {
            Ok(())
        }
    };
    check("thresholds", &thresholds.province)?;
    check("popularity table", &pop.province)?;
    check("flow table", &flow.province)?;

    let traj = LocatedTrajectory::from_user(user, catalog)?;
    let volumes: Vec<u64> = user
        .events
        .iter()
        .filter(|e| e.volume > 0 && e.cell.is_some())
        .map(|e| e.volume)
        .collect();
    let distances = traj.step_distances(catalog);
    let n = traj.len();
    let mut visited: HashSet<CellId> = HashSet::with_capacity(n);
    let mut diversity = PrefixDiversity::new(diversity_window);
    let mut prev_div = 0.0;
    let mut steps = Vec::with_capacity(n);
    for i in 0..n {
        let (slot, cell) = (traj.slots[i], traj.cells[i]);
        let next = traj.cells.get(i + 1).copied();
        let distance = distances.get(i).copied().unwrap_or(0.0);
        let div = diversity.push(&traj.cells, i);
        let delta_div = if i == 0 { 0.0 } else { div - prev_div };
        prev_div = div;
        let popularity = pop.get(cell, slot).ok_or_else(|| StepError::MissingPopularity {
            user: user.user_id.clone(),
            cell,
            slot,
        })?;
        let flow_count = match next {
            Some(to) => flow.get(cell, to, slot).ok_or_else(|| StepError::MissingFlow {
                user: user.user_id.clone(),
                slot,
            })?,
            None => 0,
        };
        steps.push(StepBehavior {
            slot,
            trc: thresholds.traffic_class(volumes[i]),
            disc: thresholds.distance_class(distance),
            rep: !visited.insert(cell),
            sta: next.is_none_or(|to| to == cell),
            delta_div,
            popularity,
            flow: flow_count,
        });
    }
    Ok(BehaviorSequence {
        user_id: user.user_id.clone(),
        steps,
    })
}

/// Drops diversity change, popularity and flow.
pub fn refine(seq: &[StepBehavior]) -> Vec<RefinedBehavior> {
    seq.iter().map(RefinedBehavior::from).collect()
}

const BEHAVIOR_HEADER: [&str; 9] = [
    "user_id",
    "slot",
    "trc",
    "disc",
    "rep",
    "sta",
    "delta_div",
    "popularity",
    "flow",
];

pub fn write_behaviors<W: Write>(writer: W, sequences: &[BehaviorSequence]) -> Result<(), StepError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(BEHAVIOR_HEADER)?;
    for seq in sequences {
        for s in &seq.steps {
            wtr.write_record([
                seq.user_id.clone(),
                s.slot.to_string(),
                s.trc.to_string(),
                s.disc.to_string(),
                (s.rep as u8).to_string(),
                (s.sta as u8).to_string(),
                s.delta_div.to_string(),
                s.popularity.to_string(),
                s.flow.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn parse_bool(s: &str) -> Result<bool, StepError> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(StepError::Format(format!("expected 0/1, got {s:?}"))),
    }
}

fn parse_field<T: FromStr>(s: &str) -> Result<T, StepError> {
    s.parse().map_err(|_| StepError::Format(format!("invalid value {s:?}")))
}

/// Reads `behaviors.csv`; rows of one user must be contiguous.
pub fn read_behaviors<R: Read>(reader: R) -> Result<Vec<BehaviorSequence>, StepError> {
    let mut rdr = csv::Reader::from_reader(reader);
    if rdr.headers()?.iter().collect::<Vec<_>>() != BEHAVIOR_HEADER {
        return Err(StepError::Format("unexpected header".into()));
    }
    let mut out: Vec<BehaviorSequence> = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != BEHAVIOR_HEADER.len() {
            return Err(StepError::Format(format!("expected 9 fields, found {}", row.len())));
        }
        let step = StepBehavior {
            slot: parse_field(&row[1])?,
            trc: row[2].parse().map_err(StepError::Format)?,
            disc: row[3].parse().map_err(StepError::Format)?,
            rep: parse_bool(&row[4])?,
            sta: parse_bool(&row[5])?,
            delta_div: parse_field(&row[6])?,
            popularity: parse_field(&row[7])?,
            flow: parse_field(&row[8])?,
        };
        match out.last_mut() {
            Some(last) if last.user_id == row[0] => last.steps.push(step),
            _ => out.push(BehaviorSequence {
                user_id: row[0].to_string(),
                steps: vec![step],
            }),
        }
    }
    Ok(out)
}
