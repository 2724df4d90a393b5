//! Great-circle distances and radius of gyration on the sphere.

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// A WGS84 coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    fn to_unit_vector(self) -> [f64; 3] {
        let (lat, lon) = (self.lat.to_radians(), self.lon.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    }

    fn from_vector(v: [f64; 3]) -> Self {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let z = (v[2] / norm).clamp(-1.0, 1.0);
        LatLon {
            lat: z.asin().to_degrees(),
            lon: v[1].atan2(v[0]).to_degrees(),
        }
    }
}

/// Haversine distance in kilometres.
pub fn haversine_km(a: LatLon, b: LatLon) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Weighted centroid: mean of unit vectors projected back onto the sphere.
/// Falls back to the first point when the mean vanishes (antipodal sets).
pub fn spherical_centroid(points: &[(LatLon, f64)]) -> Option<LatLon> {
    let first = points.first()?.0;
    let mut acc = [0.0; 3];
    for &(p, w) in points {
        let v = p.to_unit_vector();
        for k in 0..3 {
            acc[k] += w * v[k];
        }
    }
    let norm = (acc[0] * acc[0] + acc[1] * acc[1] + acc[2] * acc[2]).sqrt();
    if norm < 1e-12 {
        return Some(first);
    }
    Some(LatLon::from_vector(acc))
}

/// Weighted RMS great-circle distance to the weighted spherical centroid.
pub fn radius_of_gyration(points: &[(LatLon, f64)]) -> f64 {
    let Some(center) = spherical_centroid(points) else {
        return 0.0;
    };
    let total: f64 = points.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let sq: f64 = points.iter().map(|&(p, w)| w * haversine_km(p, center).powi(2)).sum();
    (sq / total).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_points() {
        let a = LatLon::new(-33.45, -70.66);
        assert_eq!(haversine_km(a, a), 0.0);
    }

    #[test]
    fn one_degree_along_meridian() {
        // R * pi / 180
        let expected = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
        let d = haversine_km(LatLon::new(0.0, 0.0), LatLon::new(1.0, 0.0));
        assert!((d - 111.195).abs() < 0.01, "{d}");
        assert!((d - expected).abs() < 1e-9);
    }

    #[test]
    fn centroid_crosses_antimeridian() {
        let pts = [(LatLon::new(0.0, 179.0), 1.0), (LatLon::new(0.0, -179.0), 1.0)];
        let c = spherical_centroid(&pts).unwrap();
        assert!(c.lon.abs() > 179.9, "{c:?}");
    }

    #[test]
    fn symmetric_pair_gyration_is_half_distance() {
        let a = LatLon::new(10.0, 20.0);
        let b = LatLon::new(10.05, 20.05);
        let d = haversine_km(a, b);
        let rg = radius_of_gyration(&[(a, 1.0), (b, 1.0)]);
        assert!((rg - d / 2.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn haversine_is_symmetric(
            lat1 in -90.0f64..=90.0, lon1 in -180.0f64..=180.0,
            lat2 in -90.0f64..=90.0, lon2 in -180.0f64..=180.0,
        ) {
            let a = LatLon::new(lat1, lon1);
            let b = LatLon::new(lat2, lon2);
            let ab = haversine_km(a, b);
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - haversine_km(b, a)).abs() < 1e-9);
            prop_assert!(ab <= EARTH_RADIUS_KM * std::f64::consts::PI + 1e-9);
        }
    }
}
