use std::io::{Read, Write};

use super::{DistanceClass, StepError, TrafficClass};
use crate::features::LocatedTrajectory;
use crate::ingest::{CellCatalog, UserSequence};

/// Tertile boundaries of session volumes and of positive step distances.
/// Classes are inclusive on the left: `v <= q1` is light, `v <= q2` medium.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub province: String,
    pub volume: (u64, u64),
    pub distance: (f64, f64),
}

impl Thresholds {
    pub fn traffic_class(&self, volume: u64) -> TrafficClass {
        if volume <= self.volume.0 {
            TrafficClass::Light
        } else if volume <= self.volume.1 {
            TrafficClass::Medium
        } else {
            TrafficClass::Heavy
        }
    }

    pub fn distance_class(&self, km: f64) -> DistanceClass {
        if km <= self.distance.0 {
            DistanceClass::Close
        } else if km <= self.distance.1 {
            DistanceClass::Medium
        } else {
            DistanceClass::Far
        }
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<(), StepError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["province", "axis", "q1", "q2"])?;
        wtr.write_record([
            &self.province,
            "volume_bytes",
            &self.volume.0.to_string(),
            &self.volume.1.to_string(),
        ])?;
        wtr.write_record([
            &self.province,
            "distance_km",
            &self.distance.0.to_string(),
            &self.distance.1.to_string(),
        ])?;
        wtr.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(reader: R) -> Result<Self, StepError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let rows: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>()?;
        let bad = |m: &str| StepError::Format(format!("thresholds: {m}"));
        let find = |axis: &str| {
            rows.iter()
                .find(|r| r.len() == 4 && &r[1] == axis)
                .ok_or_else(|| bad(&format!("missing {axis} row")))
        };
        let v = find("volume_bytes")?;
        let d = find("distance_km")?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("invalid number {s:?}")));
        let int = |s: &str| s.parse::<u64>().map_err(|_| bad(&format!("invalid integer {s:?}")));
        Ok(Thresholds {
            province: v[0].to_string(),
            volume: (int(&v[2])?, int(&v[3])?),
            distance: (num(&d[2])?, num(&d[3])?),
        })
    }
}

/// Nearest-rank tertiles: the `ceil(n/3)`-th and `ceil(2n/3)`-th smallest values.
pub fn nearest_rank_tertiles<T: PartialOrd + Copy>(values: &mut [T]) -> Option<(T, T)> {
    let n = values.len();
    if n < 3 {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("values must be comparable"));
    let rank = |num: usize| (num * n).div_ceil(3);
    Some((values[rank(1) - 1], values[rank(2) - 1]))
}

/// Fits both tertile pairs on the training population of one province.
pub fn fit_thresholds(province: &str, users: &[UserSequence], catalog: &CellCatalog) -> Result<Thresholds, StepError> {
    let mut volumes: Vec<u64> = Vec::new();
    let mut distances: Vec<f64> = Vec::new();
    for u in users {
        volumes.extend(
            u.events
                .iter()
                .filter(|e| e.volume > 0 && e.cell.is_some())
                .map(|e| e.volume),
        );
        let t = LocatedTrajectory::from_user(u, catalog)?;
        distances.extend(t.step_distances(catalog).into_iter().filter(|&d| d > 0.0));
    }
    let volume = nearest_rank_tertiles(&mut volumes)
        .ok_or_else(|| StepError::ThresholdFit(format!("{} nonzero volumes, need at least 3", volumes.len())))?;
    let distance = nearest_rank_tertiles(&mut distances).ok_or_else(|| {
        StepError::ThresholdFit(format!("{} positive step distances, need at least 3", distances.len()))
    })?;
    Ok(Thresholds {
        province: province.to_string(),
        volume,
        distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_to_nine() {
        let mut v: Vec<u64> = (1..=9).rev().collect();
        assert_eq!(nearest_rank_tertiles(&mut v), Some((3, 6)));
    }

    #[test]
    fn too_few_values() {
        assert_eq!(nearest_rank_tertiles(&mut [1u64, 2]), None);
    }

    #[test]
    fn equal_values_leave_medium_empty() {
        let mut v = vec![7u64; 10];
        let (q1, q2) = nearest_rank_tertiles(&mut v).unwrap();
        assert_eq!((q1, q2), (7, 7));
        let t = Thresholds {
            province: String::new(),
            volume: (q1, q2),
            distance: (1.0, 1.0),
        };
        assert_eq!(t.traffic_class(7), TrafficClass::Light);
        assert_eq!(t.traffic_class(8), TrafficClass::Heavy);
    }

    #[test]
    fn continuous_samples_split_in_thirds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..100_000).map(|_| rng.gen::<f64>().powi(3) * 50.0).collect();
        let (q1, q2) = nearest_rank_tertiles(&mut samples.clone()).unwrap();
        let t = Thresholds {
            province: String::new(),
            volume: (0, 0),
            distance: (q1, q2),
        };
        let mut counts = [0usize; 3];
        for &s in &samples {
            counts[t.distance_class(s).index()] += 1;
        }
        for c in counts {
            let share = c as f64 / samples.len() as f64;
            assert!((share - 1.0 / 3.0).abs() <= 0.02, "{counts:?}");
        }
    }

    #[test]
    fn file_round_trip() {
        let t = Thresholds {
            province: "Elqui".into(),
            volume: (12, 3400),
            distance: (0.25, 3.5),
        };
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        assert_eq!(Thresholds::read(buf.as_slice()).unwrap(), t);
    }

    proptest! {
        #[test]
        fn boundaries_fall_left(mut v in proptest::collection::vec(1u64..1000, 3..200)) {
            let (q1, q2) = nearest_rank_tertiles(&mut v).unwrap();
            prop_assert!(q1 <= q2);
            let t = Thresholds { province: String::new(), volume: (q1, q2), distance: (0.0, 0.0) };
            prop_assert_eq!(t.traffic_class(q1), TrafficClass::Light);
            if q2 > q1 {
                prop_assert_eq!(t.traffic_class(q2), TrafficClass::Medium);
            }
            prop_assert_eq!(t.traffic_class(q2 + 1), TrafficClass::Heavy);
        }
    }
}
