use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::SLOTS_PER_DAY;
use crate::step::{DistanceClass, MobilityTuple, RefinedBehavior, TrafficClass};

/// Granularity of the time component of a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    /// Hour of day, 0..24.
    Hour,
    /// Half-hour slot of day, 0..48.
    Slot,
}

impl TimeMode {
    pub fn token(self, slot_of_week: u16) -> u8 {
        let of_day = (slot_of_week as usize % SLOTS_PER_DAY) as u8;
        match self {
            TimeMode::Hour => of_day / 2,
            TimeMode::Slot => of_day,
        }
    }

    pub fn n_tokens(self) -> usize {
        match self {
            TimeMode::Hour => SLOTS_PER_DAY / 2,
            TimeMode::Slot => SLOTS_PER_DAY,
        }
    }
}

impl fmt::Display for TimeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeMode::Hour => "hour",
            TimeMode::Slot => "slot",
        })
    }
}

impl FromStr for TimeMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "hour" => Ok(TimeMode::Hour),
            "slot" => Ok(TimeMode::Slot),
            _ => Err(format!("invalid time mode {s:?} (expected hour or slot)")),
        }
    }
}

/// How the valid-transition rate counts transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RtMode {
    /// Every consecutive transition.
    All,
    /// Distinct (from, to) pairs of the sequence.
    Unique,
}

impl fmt::Display for RtMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RtMode::All => "all",
            RtMode::Unique => "unique",
        })
    }
}

impl FromStr for RtMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(RtMode::All),
            "unique" => Ok(RtMode::Unique),
            _ => Err(format!("invalid rt mode {s:?} (expected all or unique)")),
        }
    }
}

/// Number of (traffic, mobility) combinations per time token.
pub const BEHAVIORS_PER_TOKEN: usize = 3 * MobilityTuple::COUNT;

/// Time token plus the refined traffic and mobility behavior.
///
/// Field order makes the derived ordering agree with [`StateKey::code`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey {
    pub time_token: u8,
    pub trc: TrafficClass,
    pub disc: DistanceClass,
    pub rep: bool,
    pub sta: bool,
}

impl StateKey {
    pub fn new(time_token: u8, trc: TrafficClass, mobility: MobilityTuple) -> Self {
        Self {
            time_token,
            trc,
            disc: mobility.disc,
            rep: mobility.rep,
            sta: mobility.sta,
        }
    }

    pub fn from_behavior(b: &RefinedBehavior, mode: TimeMode) -> Self {
        Self::new(mode.token(b.slot), b.trc, b.mobility())
    }

    pub fn mobility(&self) -> MobilityTuple {
        MobilityTuple::new(self.disc, self.rep, self.sta)
    }

    /// Dense index in `0..n_tokens * 36`.
    pub fn code(&self) -> usize {
        encode(self.time_token, self.trc, self.mobility())
    }

    pub fn from_code(code: usize) -> Self {
        let time_token = (code / BEHAVIORS_PER_TOKEN) as u8;
        let rest = code % BEHAVIORS_PER_TOKEN;
        let trc = TrafficClass::ALL[rest / MobilityTuple::COUNT];
        let mob = MobilityTuple::from_index(rest % MobilityTuple::COUNT).expect("index < 12");
        Self::new(time_token, trc, mob)
    }
}

#[inline]
pub(crate) fn encode(time_token: u8, trc: TrafficClass, mobility: MobilityTuple) -> usize {
    time_token as usize * BEHAVIORS_PER_TOKEN + trc.index() * MobilityTuple::COUNT + mobility.index()
}
