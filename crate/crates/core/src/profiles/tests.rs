use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr_free::normal;

use super::*;

/// Box-Muller without an extra dependency.
mod rand_distr_free {
    use rand::Rng;
    pub fn normal<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = rng.gen::<f64>().max(1e-300);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

fn user(id: usize, events: f64, volume: f64) -> UserFeatures {
    UserFeatures {
        user_id: format!("u{id:04}"),
        avg_events_per_day: events,
        avg_session_volume: volume,
        ..Default::default()
    }
}

/// Four blobs: (light|heavy) x (occasional|frequent), returns features and true blob.
fn traffic_blobs(per: usize, seed: u64) -> (Vec<UserFeatures>, Vec<TrafficProfile>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut feats = Vec::new();
    let mut truth = Vec::new();
    for (heavy, frequent) in [(false, false), (false, true), (true, false), (true, true)] {
        for _ in 0..per {
            let ev = if frequent { 40.0 } else { 5.0 } + normal(&mut rng);
            let lv = if heavy { 7.0 } else { 4.0 } + 0.1 * normal(&mut rng);
            feats.push(user(feats.len(), ev, 10f64.powf(lv)));
            truth.push(TrafficProfile::new(heavy, frequent));
        }
    }
    (feats, truth)
}

#[test]
fn traffic_blobs_are_recovered_and_labeled() {
    let (feats, truth) = traffic_blobs(50, 1);
    let got = traffic_profiles(&feats, &ProfileConfig::default()).unwrap();
    let agree = got.iter().zip(&truth).filter(|(a, b)| a == b).count();
    assert!(agree as f64 / truth.len() as f64 >= 0.99, "{agree}");
}

#[test]
fn traffic_subsampling_assigns_remaining_users() {
    let (feats, truth) = traffic_blobs(60, 2);
    let cfg = ProfileConfig {
        ward_cap: 50,
        ..Default::default()
    };
    let got = traffic_profiles(&feats, &cfg).unwrap();
    assert_eq!(got, truth);
}

#[test]
fn traffic_labels_depend_only_on_memberships_and_medians() {
    // a monotone rescaling that keeps clusters well separated keeps labels
    let (feats, _) = traffic_blobs(30, 3);
    let base = traffic_profiles(&feats, &ProfileConfig::default()).unwrap();
    let rescaled: Vec<_> = feats
        .iter()
        .map(|f| user(0, f.avg_events_per_day * 3.0 + 1.0, f.avg_session_volume.powf(1.1)))
        .collect();
    assert_eq!(traffic_profiles(&rescaled, &ProfileConfig::default()).unwrap(), base);
}

#[test]
fn identical_users_are_degenerate() {
    let feats: Vec<_> = (0..10).map(|i| user(i, 3.0, 1000.0)).collect();
    assert!(matches!(
        traffic_profiles(&feats, &ProfileConfig::default()),
        Err(ProfileError::Degenerate(_))
    ));
    assert!(matches!(
        mobility_profiles(&feats, &ProfileConfig::default()),
        Err(ProfileError::Degenerate(_))
    ));
}

fn mobility_user(id: usize, ret: u32, expl: u32) -> UserFeatures {
    UserFeatures {
        user_id: format!("m{id}"),
        n_succ_ret: ret,
        n_succ_expl: expl,
        ..Default::default()
    }
}

#[test]
fn mobility_blobs_are_labeled() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut feats = Vec::new();
    let mut truth = Vec::new();
    for (ret, expl, p) in [
        (200, 10, MobilityProfile::Routiner),
        (20, 150, MobilityProfile::Scouter),
        (90, 60, MobilityProfile::Regular),
    ] {
        for _ in 0..40 {
            feats.push(mobility_user(
                feats.len(),
                ret + rng.gen_range(0..10),
                expl + rng.gen_range(0..10),
            ));
            truth.push(p);
        }
    }
    let cfg = ProfileConfig::default();
    let got = mobility_profiles(&feats, &cfg).unwrap();
    assert_eq!(got, truth);
    assert_eq!(mobility_profiles(&feats, &cfg).unwrap(), got);
}

#[test]
fn informative_feature_dominates_importance() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 1000;
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let class = i % 2;
        let mut f = mobility_user(i, rng.gen_range(0..100), rng.gen_range(0..100));
        f.stationarity = class as f64 + rng.gen::<f64>() * 0.9;
        f.avg_step_distance_km = rng.gen();
        f.rg_unique_km = rng.gen();
        f.rg_event_km = rng.gen();
        f.repetitiveness = rng.gen();
        f.diversity = 0.5;
        f.predictability = rng.gen();
        f.popularity_influence = rng.gen();
        f.flow_measurement = rng.gen();
        feats.push(f);
        labels.push(TrafficProfile::ALL[class]);
    }
    let cfg = ProfileConfig::default();
    let imp = feature_importance(&feats, &labels, &cfg).unwrap();
    assert_eq!(imp[0].0, "stationarity");
    assert!(imp[0].1 >= 0.9, "{imp:?}");
    let diversity = imp.iter().find(|(n, _)| n == "diversity").unwrap().1;
    assert_eq!(diversity, 0.0);
    assert!((imp.iter().map(|(_, v)| v).sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(imp.iter().all(|(_, v)| *v >= 0.0));
    assert_eq!(feature_importance(&feats, &labels, &cfg).unwrap(), imp);
}

#[test]
fn importance_errors() {
    let feats: Vec<_> = (0..150).map(|i| mobility_user(i, i as u32, 0)).collect();
    let cfg = ProfileConfig::default();
    assert!(matches!(
        feature_importance(&feats, &vec![TrafficProfile::LO; 150], &cfg),
        Err(ProfileError::SingleClass)
    ));
    assert!(matches!(
        feature_importance(&feats[..10], &vec![TrafficProfile::LO; 10], &cfg),
        Err(ProfileError::TooFewUsers { .. })
    ));
}

#[test]
fn forest_importance_follows_feature_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x: Vec<Vec<f64>> = (0..300).map(|_| (0..4).map(|_| rng.gen::<f64>()).collect()).collect();
    let y: Vec<usize> = x
        .iter()
        .map(|r| (r[1] > 0.5) as usize + (r[3] > 0.7) as usize)
        .collect();
    // every feature is examined per split; only ties between equal-gain splits depend on order
    let cfg = ForestConfig {
        n_trees: 20,
        max_features: Some(4),
        ..Default::default()
    };
    let a = gini_importance(&x, &y, 3, &cfg);
    let perm = [2usize, 0, 3, 1];
    let xp: Vec<Vec<f64>> = x.iter().map(|r| perm.iter().map(|&p| r[p]).collect()).collect();
    let b = gini_importance(&xp, &y, 3, &cfg);
    for (j, &p) in perm.iter().enumerate() {
        assert!((b[j] - a[p]).abs() < 0.02, "{a:?} {b:?}");
    }
    assert!(a[1] > a[0] && a[3] > a[2]);
}

#[test]
fn profiles_csv_round_trip() {
    let p = vec![
        ProfileAssignment {
            user_id: "a".into(),
            traffic_profile: TrafficProfile::HF,
            mobility_profile: MobilityProfile::Scouter,
        },
        ProfileAssignment {
            user_id: "b".into(),
            traffic_profile: TrafficProfile::LO,
            mobility_profile: MobilityProfile::Regular,
        },
    ];
    let mut buf = Vec::new();
    write_profiles(&mut buf, &p).unwrap();
    assert_eq!(
        String::from_utf8(buf.clone()).unwrap(),
        "user_id,traffic_profile,mobility_profile\na,HF,scouter\nb,LO,regular\n"
    );
    assert_eq!(read_profiles(&buf[..]).unwrap(), p);
}
