//! Great-circle distance, county containment, credit sharing and per-capita
//! normalization.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::registry::{GeoLevel, Registry};

/// Mean Earth radius in statute miles.
pub const EARTH_RADIUS_MILES: f64 = 3958.7613;

/// Default per-capita scale (counts per 100,000 residents).
pub const PER_CAPITA_SCALE: f64 = 100_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("coordinate out of range: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("unknown geo unit `{0}`")]
    UnknownUnit(String),
    #[error("unit `{0}` has zero population")]
    ZeroPopulation(String),
    #[error("shared unit `{unit}` member `{member}` has no population")]
    MissingMemberPopulation { unit: String, member: String },
    #[error("distance must be a nonnegative number, got {0}")]
    NegativeDistance(f64),
}

/// A WGS84 coordinate pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn validate(self) -> Result<Self, GeoError> {
        if self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
        {
            Ok(self)
        } else {
            Err(GeoError::InvalidCoordinate {
                lat: self.lat,
                lon: self.lon,
            })
        }
    }
}

/// Haversine great-circle distance in miles.
pub fn geodesic_miles(a: LatLon, b: LatLon) -> Result<f64, GeoError> {
    a.validate()?;
    b.validate()?;
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_MILES * h.sqrt().min(1.0).asin())
}

/// Minimum distance from `from` to any of `sites`; `None` when `sites` is empty.
pub fn min_distance_miles(from: LatLon, sites: &[LatLon]) -> Result<Option<f64>, GeoError> {
    let mut best: Option<f64> = None;
    for &site in sites {
        let d = geodesic_miles(from, site)?;
        best = Some(best.map_or(d, |b| b.min(d)));
    }
    Ok(best)
}

fn on_segment(p: LatLon, a: LatLon, b: LatLon) -> bool {
    let cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
    let scale = (b.lon - a.lon).abs() + (b.lat - a.lat).abs();
    if cross.abs() > 1e-12 * scale.max(1.0) {
        return false;
    }
    p.lon >= a.lon.min(b.lon) - 1e-12
        && p.lon <= a.lon.max(b.lon) + 1e-12
        && p.lat >= a.lat.min(b.lat) - 1e-12
        && p.lat <= a.lat.max(b.lat) + 1e-12
}

/// Even-odd ray casting in the (lon, lat) plane. Points on an edge or vertex
/// count as inside.
pub fn point_in_polygon(p: LatLon, ring: &[LatLon]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if on_segment(p, a, b) {
            return true;
        }
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = a.lon + (p.lat - a.lat) / (b.lat - a.lat) * (b.lon - a.lon);
            if p.lon < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Outcome of assigning a sampling location to a county.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CountyAssignment {
    Contained { county: String },
    Nearest { county: String, miles: f64 },
    Unassigned,
}

impl CountyAssignment {
    pub fn county(&self) -> Option<&str> {
        match self {
            CountyAssignment::Contained { county } | CountyAssignment::Nearest { county, .. } => {
                Some(county)
            }
            CountyAssignment::Unassigned => None,
        }
    }
}

/// Assign a point to the county whose polygon contains it. Ties on shared
/// boundaries go to the lexicographically smallest county id. Points outside
/// every polygon fall back to the nearest county centroid within `max_miles`.
pub fn assign_sample_to_county(
    point: LatLon,
    registry: &Registry,
    max_miles: f64,
) -> Result<CountyAssignment, GeoError> {
    point.validate()?;
    // units are iterated in id order, so the first hit is the tie-break winner
    for unit in registry.units_at(GeoLevel::County) {
        if let Some(ring) = &unit.polygon {
            if point_in_polygon(point, ring) {
                return Ok(CountyAssignment::Contained {
                    county: unit.id.clone(),
                });
            }
        }
    }
    let mut best: Option<(f64, &str)> = None;
    for unit in registry.units_at(GeoLevel::County) {
        let d = geodesic_miles(point, unit.centroid)?;
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, &unit.id));
        }
    }
    Ok(match best {
        Some((miles, county)) if miles <= max_miles => CountyAssignment::Nearest {
            county: county.to_string(),
            miles,
        },
        _ => CountyAssignment::Unassigned,
    })
}

/// Fractional attribution of one tweet across geo units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CreditVector {
    weights: BTreeMap<String, f64>,
}

impl CreditVector {
    pub fn single(unit: impl Into<String>) -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(unit.into(), 1.0);
        Self { weights }
    }

    pub fn weight(&self, unit: &str) -> f64 {
        self.weights.get(unit).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.weights.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }
}

/// Ordinary units credit themselves; shared units split their credit across
/// members in proportion to population (or fixed weights when configured).
pub fn credit_share(unit: &str, registry: &Registry) -> Result<CreditVector, GeoError> {
    if let Some(shared) = registry.shared_unit(unit) {
        let raw: Vec<(String, f64)> = match &shared.fixed_weights {
            Some(w) => shared.members.iter().cloned().zip(w.iter().copied()).collect(),
            None => shared
                .members
                .iter()
                .map(|m| {
                    let pop = registry
                        .unit(m)
                        .map(|u| u.population)
                        .ok_or_else(|| GeoError::UnknownUnit(m.clone()))?;
                    if pop == 0 {
                        return Err(GeoError::MissingMemberPopulation {
                            unit: unit.to_string(),
                            member: m.clone(),
                        });
                    }
                    Ok((m.clone(), pop as f64))
                })
                .collect::<Result<_, _>>()?,
        };
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        let weights = raw.into_iter().map(|(m, w)| (m, w / total)).collect();
        return Ok(CreditVector { weights });
    }
    if registry.unit(unit).is_none() {
        return Err(GeoError::UnknownUnit(unit.to_string()));
    }
    Ok(CreditVector::single(unit))
}

/// `count / population * scale`, using metro-smoothed populations for
/// cities and ZCTAs.
pub fn per_capita(count: f64, unit: &str, registry: &Registry, scale: f64) -> Result<f64, GeoError> {
    let pop = registry.denominator_population(unit)?;
    if pop == 0 {
        return Err(GeoError::ZeroPopulation(unit.to_string()));
    }
    Ok(count / pop as f64 * scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceBin {
    Close,
    Medium,
    Far,
}

impl DistanceBin {
    pub const ALL: [DistanceBin; 3] = [DistanceBin::Close, DistanceBin::Medium, DistanceBin::Far];

    pub fn as_str(self) -> &'static str {
        match self {
            DistanceBin::Close => "close",
            DistanceBin::Medium => "medium",
            DistanceBin::Far => "far",
        }
    }
}

impl fmt::Display for DistanceBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Bin edges in miles: close is `[0, close_below)`, medium is
/// `[close_below, medium_through]`, far is everything beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBins {
    pub close_below: f64,
    pub medium_through: f64,
}

impl Default for DistanceBins {
    fn default() -> Self {
        Self {
            close_below: 25.0,
            medium_through: 50.0,
        }
    }
}

impl DistanceBins {
    pub fn bin(&self, miles: f64) -> Result<DistanceBin, GeoError> {
        if !(miles >= 0.0) {
            return Err(GeoError::NegativeDistance(miles));
        }
        Ok(if miles < self.close_below {
            DistanceBin::Close
        } else if miles <= self.medium_through {
            DistanceBin::Medium
        } else {
            DistanceBin::Far
        })
    }
}

pub fn bin_distance(miles: f64) -> Result<DistanceBin, GeoError> {
    DistanceBins::default().bin(miles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::registry::test_fixtures::five_county_registry;
    use proptest::prelude::*;

    const SARASOTA: LatLon = LatLon::new(27.3364, -82.5307);
    const TAMPA: LatLon = LatLon::new(27.9506, -82.4572);

    #[test]
    fn identity_distance_is_zero() {
        assert_eq!(geodesic_miles(SARASOTA, SARASOTA).unwrap(), 0.0);
    }

    #[test]
    fn sarasota_to_tampa() {
        // independent haversine evaluation (python, same radius)
        let d = geodesic_miles(SARASOTA, TAMPA).unwrap();
        assert!((d - 42.67495552132003).abs() < 1e-9, "{d}");
    }

    #[test]
    fn out_of_range_coordinates_rejected() {
        let bad = LatLon::new(91.0, 0.0);
        assert!(matches!(
            geodesic_miles(bad, SARASOTA),
            Err(GeoError::InvalidCoordinate { .. })
        ));
        assert!(geodesic_miles(SARASOTA, LatLon::new(0.0, -180.5)).is_err());
    }

    #[test]
    fn bins_follow_boundary_convention() {
        assert_eq!(bin_distance(10.0).unwrap(), DistanceBin::Close);
        assert_eq!(bin_distance(30.0).unwrap(), DistanceBin::Medium);
        assert_eq!(bin_distance(25.0).unwrap(), DistanceBin::Medium);
        assert_eq!(bin_distance(50.0).unwrap(), DistanceBin::Medium);
        assert_eq!(bin_distance(50.0001).unwrap(), DistanceBin::Far);
        assert_eq!(bin_distance(0.0).unwrap(), DistanceBin::Close);
        assert!(bin_distance(-1.0).is_err());
        assert!(bin_distance(f64::NAN).is_err());
    }

    #[test]
    fn polygon_containment_and_boundary() {
        let square = vec![
            LatLon::new(0.0, 0.0),
            LatLon::new(0.0, 1.0),
            LatLon::new(1.0, 1.0),
            LatLon::new(1.0, 0.0),
            LatLon::new(0.0, 0.0),
        ];
        assert!(point_in_polygon(LatLon::new(0.5, 0.5), &square));
        assert!(!point_in_polygon(LatLon::new(1.5, 0.5), &square));
        assert!(point_in_polygon(LatLon::new(0.0, 0.5), &square));
        assert!(point_in_polygon(LatLon::new(1.0, 1.0), &square));
    }

    #[test]
    fn sample_assignment_containment_tiebreak_and_fallback() {
        let reg = five_county_registry();
        let inside = LatLon::new(27.25, -82.45);
        assert_eq!(
            assign_sample_to_county(inside, &reg, 30.0).unwrap(),
            CountyAssignment::Contained {
                county: "sarasota".into()
            }
        );

        // shared edge between manatee (27.4..27.65) and sarasota (26.95..27.4)
        let edge = LatLon::new(27.4, -82.5);
        let containing: Vec<&str> = reg
            .units_at(GeoLevel::County)
            .filter(|u| point_in_polygon(edge, u.polygon.as_ref().unwrap()))
            .map(|u| u.id.as_str())
            .collect();
        assert_eq!(containing, vec!["manatee", "sarasota"]);
        assert_eq!(
            assign_sample_to_county(edge, &reg, 30.0).unwrap().county(),
            Some("manatee")
        );

        // offshore, west of every polygon; nearest centroid by brute force
        let offshore = LatLon::new(27.5, -82.95);
        let oracle = reg
            .units_at(GeoLevel::County)
            .map(|u| (geodesic_miles(offshore, u.centroid).unwrap(), u.id.clone()))
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .unwrap();
        assert_eq!(oracle.1, "manatee");
        match assign_sample_to_county(offshore, &reg, 30.0).unwrap() {
            CountyAssignment::Nearest { county, miles } => {
                assert_eq!(county, oracle.1);
                assert!((miles - oracle.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            assign_sample_to_county(LatLon::new(25.0, -80.0), &reg, 30.0).unwrap(),
            CountyAssignment::Unassigned
        );
    }

    #[test]
    fn tampa_bay_credit_is_population_proportional() {
        let reg = five_county_registry();
        let cv = credit_share("tampa_bay_shared", &reg).unwrap();
        assert!((cv.total() - 1.0).abs() < 1e-12);
        let h = cv.weight("hillsborough");
        let p = cv.weight("pinellas");
        assert!((h - 1_500_000.0 / 2_473_000.0).abs() < 1e-12);
        assert_eq!((h * 10.0).round() / 10.0, 0.6);
        assert_eq!((p * 10.0).round() / 10.0, 0.4);
        assert_eq!(credit_share("sarasota", &reg).unwrap(), CreditVector::single("sarasota"));
        assert!(credit_share("atlantis", &reg).is_err());
    }

    #[test]
    fn fixed_share_weights_give_exact_split() {
        let mut reg = five_county_registry();
        reg.set_shared_weights("tampa_bay_shared", vec![0.6, 0.4]).unwrap();
        let cv = credit_share("tampa_bay_shared", &reg).unwrap();
        assert!((100.0 * cv.weight("hillsborough") - 60.0).abs() < 1e-9);
        assert!((100.0 * cv.weight("pinellas") - 40.0).abs() < 1e-9);
    }

    #[test]
    fn hypothetical_populations_ratio() {
        let mut reg = five_county_registry();
        reg.set_population("hillsborough", 750_000).unwrap();
        reg.set_population("pinellas", 250_000).unwrap();
        let cv = credit_share("tampa_bay_shared", &reg).unwrap();
        assert!((cv.weight("hillsborough") - 0.75).abs() < 1e-15);
        assert!((cv.weight("pinellas") - 0.25).abs() < 1e-15);
    }

    #[test]
    fn per_capita_examples() {
        let reg = five_county_registry();
        assert!((per_capita(80.0, "manatee", &reg, PER_CAPITA_SCALE).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(per_capita(0.0, "pasco", &reg, PER_CAPITA_SCALE).unwrap(), 0.0);
        // Bradenton Beach is divided by the whole Bradenton metro population
        let metro = reg.denominator_population("bradenton_beach").unwrap();
        let bradenton_metro: u64 = ["bradenton", "bradenton_beach", "palma_sola"]
            .iter()
            .map(|c| reg.unit(c).unwrap().population)
            .sum();
        assert_eq!(metro, bradenton_metro);
        assert!(
            (per_capita(10.0, "bradenton_beach", &reg, PER_CAPITA_SCALE).unwrap()
                - 10.0 / bradenton_metro as f64 * 1e5)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn per_capita_zero_population_errors() {
        let mut reg = five_county_registry();
        reg.set_population("pasco", 0).unwrap();
        assert_eq!(
            per_capita(1.0, "pasco", &reg, PER_CAPITA_SCALE),
            Err(GeoError::ZeroPopulation("pasco".into()))
        );
    }

    fn coord() -> impl Strategy<Value = LatLon> {
        (-89.0f64..89.0, -179.0f64..179.0).prop_map(|(lat, lon)| LatLon::new(lat, lon))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn distance_is_symmetric(a in coord(), b in coord()) {
            let ab = geodesic_miles(a, b).unwrap();
            let ba = geodesic_miles(b, a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1.0));
        }

        #[test]
        fn triangle_inequality(a in coord(), b in coord(), c in coord()) {
            let ab = geodesic_miles(a, b).unwrap();
            let bc = geodesic_miles(b, c).unwrap();
            let ac = geodesic_miles(a, c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-6);
        }

        #[test]
        fn bins_are_monotone(d1 in 0.0f64..200.0, d2 in 0.0f64..200.0) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(bin_distance(lo).unwrap() <= bin_distance(hi).unwrap());
        }

        #[test]
        fn per_capita_is_linear(count in 0.0f64..1e6, k in 1u64..50) {
            let mut reg = five_county_registry();
            let base = per_capita(count, "sarasota", &reg, PER_CAPITA_SCALE).unwrap();
            let doubled = per_capita(2.0 * count, "sarasota", &reg, PER_CAPITA_SCALE).unwrap();
            prop_assert!((doubled - 2.0 * base).abs() <= 1e-9 * doubled.max(1.0));
            let pop = reg.unit("sarasota").unwrap().population;
            reg.set_population("sarasota", pop * k).unwrap();
            let scaled = per_capita(count, "sarasota", &reg, PER_CAPITA_SCALE).unwrap();
            prop_assert!((scaled - base / k as f64).abs() <= 1e-9 * base.max(1.0));
        }
    }
}
