//! Locality hierarchy: region → county → city → ZCTA, with populations,
//! metro smoothing groups, centroids and county polygons.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_header, open, CorpusError};
use crate::geospatial::{GeoError, LatLon};

pub const REGISTRY_HEADER: [&str; 8] = [
    "id",
    "level",
    "name",
    "parent",
    "metro_group",
    "population",
    "centroid_lat",
    "centroid_lon",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeoLevel {
    Region,
    County,
    City,
    Zcta,
}

impl GeoLevel {
    pub const ALL: [GeoLevel; 4] = [GeoLevel::Region, GeoLevel::County, GeoLevel::City, GeoLevel::Zcta];

    pub fn parent_level(self) -> Option<GeoLevel> {
        match self {
            GeoLevel::Region => None,
            GeoLevel::County => Some(GeoLevel::Region),
            GeoLevel::City => Some(GeoLevel::County),
            GeoLevel::Zcta => Some(GeoLevel::City),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GeoLevel::Region => "region",
            GeoLevel::County => "county",
            GeoLevel::City => "city",
            GeoLevel::Zcta => "zcta",
        }
    }
}

impl fmt::Display for GeoLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeoLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "region" | "total" => Ok(GeoLevel::Region),
            "county" => Ok(GeoLevel::County),
            "city" => Ok(GeoLevel::City),
            "zcta" => Ok(GeoLevel::Zcta),
            other => Err(format!("unknown level `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeoUnit {
    pub id: String,
    pub level: GeoLevel,
    pub name: String,
    pub parent: Option<String>,
    pub metro_group: Option<String>,
    /// 2018 population estimate. Zero means "not provided".
    pub population: u64,
    pub centroid: LatLon,
    pub polygon: Option<Vec<LatLon>>,
}

/// A synthetic unit whose credit is split across member counties.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharedUnit {
    pub id: String,
    pub name: String,
    pub members: Vec<String>,
    pub fixed_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LevelCounts {
    pub region: usize,
    pub county: usize,
    pub city: usize,
    pub zcta: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    units: BTreeMap<String, GeoUnit>,
    shared: BTreeMap<String, SharedUnit>,
    metro_population: HashMap<String, u64>,
}

#[derive(Debug, Deserialize)]
struct RegistryRow {
    id: String,
    level: String,
    name: String,
    parent: Option<String>,
    metro_group: Option<String>,
    population: Option<u64>,
    centroid_lat: f64,
    centroid_lon: f64,
}

fn non_empty(s: Option<String>) -> Option<String> {
    s.map(|v| v.trim().to_string()).filter(|v| !v.is_empty())
}

pub fn parse_geo_registry(path: &Path) -> Result<Registry, CorpusError> {
    read_geo_registry(open(path)?)
}

pub fn read_geo_registry<R: Read>(reader: R) -> Result<Registry, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &REGISTRY_HEADER)?;
    let mut units = Vec::new();
    for (i, row) in rdr.deserialize::<RegistryRow>().enumerate() {
        let line = i + 2;
        let row = row?;
        let level = row
            .level
            .parse::<GeoLevel>()
            .map_err(|e| CorpusError::Registry(format!("line {line}: {e}")))?;
        let centroid = LatLon::new(row.centroid_lat, row.centroid_lon)
            .validate()
            .map_err(|e| CorpusError::Registry(format!("line {line}: {e}")))?;
        units.push(GeoUnit {
            id: row.id,
            level,
            name: row.name,
            parent: non_empty(row.parent),
            metro_group: non_empty(row.metro_group),
            population: row.population.unwrap_or(0),
            centroid,
            polygon: None,
        });
    }
    Registry::new(units)
}

#[derive(Deserialize)]
struct FeatureCollection {
    features: Vec<Feature>,
}

#[derive(Deserialize)]
struct Feature {
    properties: serde_json::Map<String, serde_json::Value>,
    geometry: Geometry,
}

#[derive(Deserialize)]
struct Geometry {
    #[serde(rename = "type")]
    kind: String,
    coordinates: Vec<Vec<[f64; 2]>>,
}

/// Reads a GeoJSON-style `FeatureCollection` of `Polygon` features whose
/// `properties.id` names a county. Only the outer ring is used; vertices are
/// `[lon, lat]` as in GeoJSON.
pub fn read_polygons<R: Read>(reader: R) -> Result<BTreeMap<String, Vec<LatLon>>, CorpusError> {
    let fc: FeatureCollection = serde_json::from_reader(reader)?;
    let mut out = BTreeMap::new();
    for feature in fc.features {
        let id = feature
            .properties
            .get("id")
            .and_then(|v| v.as_str())
            .ok_or_else(|| CorpusError::Polygon {
                unit: "?".into(),
                message: "feature without string properties.id".into(),
            })?
            .to_string();
        if feature.geometry.kind != "Polygon" {
            return Err(CorpusError::Polygon {
                unit: id,
                message: format!("unsupported geometry type {}", feature.geometry.kind),
            });
        }
        let ring = feature
            .geometry
            .coordinates
            .into_iter()
            .next()
            .ok_or_else(|| CorpusError::Polygon {
                unit: id.clone(),
                message: "no rings".into(),
            })?;
        let ring: Vec<LatLon> = ring.into_iter().map(|[lon, lat]| LatLon::new(lat, lon)).collect();
        validate_ring(&id, &ring)?;
        out.insert(id, ring);
    }
    Ok(out)
}

pub fn parse_polygons(path: &Path) -> Result<BTreeMap<String, Vec<LatLon>>, CorpusError> {
    read_polygons(open(path)?)
}

fn segments_cross(a: LatLon, b: LatLon, c: LatLon, d: LatLon) -> bool {
    fn orient(p: LatLon, q: LatLon, r: LatLon) -> f64 {
        (q.lon - p.lon) * (r.lat - p.lat) - (q.lat - p.lat) * (r.lon - p.lon)
    }
    fn within(p: LatLon, q: LatLon, r: LatLon) -> bool {
        r.lon >= p.lon.min(q.lon) && r.lon <= p.lon.max(q.lon) && r.lat >= p.lat.min(q.lat) && r.lat <= p.lat.max(q.lat)
    }
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && within(a, b, c))
        || (o2 == 0.0 && within(a, b, d))
        || (o3 == 0.0 && within(c, d, a))
        || (o4 == 0.0 && within(c, d, b))
}

/// Closed (first vertex repeated last), at least a triangle, and no two
/// non-adjacent edges touch.
pub fn validate_ring(unit: &str, ring: &[LatLon]) -> Result<(), CorpusError> {
    let err = |message: &str| CorpusError::Polygon {
        unit: unit.to_string(),
        message: message.to_string(),
    };
    if ring.len() < 4 {
        return Err(err("ring needs at least 3 distinct vertices"));
    }
    if ring.first() != ring.last() {
        return Err(err("open ring: first and last vertex differ"));
    }
    for p in ring {
        p.validate().map_err(|e| err(&e.to_string()))?;
    }
    let n = ring.len() - 1;
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_cross(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                return Err(err("self-intersecting ring"));
            }
        }
    }
    Ok(())
}

impl Registry {
    pub fn new(units: Vec<GeoUnit>) -> Result<Self, CorpusError> {
        let mut map = BTreeMap::new();
        for u in units {
            if u.id.trim().is_empty() {
                return Err(CorpusError::Registry("unit with empty id".into()));
            }
            if let Some(prev) = map.insert(u.id.clone(), u) {
                return Err(CorpusError::Registry(format!("duplicate unit id `{}`", prev.id)));
            }
        }
        let mut reg = Registry {
            units: map,
            shared: BTreeMap::new(),
            metro_population: HashMap::new(),
        };
        reg.validate()?;
        Ok(reg)
    }

    fn validate(&mut self) -> Result<(), CorpusError> {
        let fail = |m: String| Err(CorpusError::Registry(m));
        // cycles first, so the level check below gets a clean forest
        for id in self.units.keys() {
            let mut seen = BTreeSet::new();
            let mut cur = id.as_str();
            while let Some(p) = self.units.get(cur).and_then(|u| u.parent.as_deref()) {
                if !seen.insert(cur.to_string()) {
                    return fail(format!("cycle in parentage through `{id}`"));
                }
                if !self.units.contains_key(p) {
                    return fail(format!("`{cur}` has unknown parent `{p}`"));
                }
                cur = p;
            }
        }
        for u in self.units.values() {
            match (u.level.parent_level(), &u.parent) {
                (None, None) => {}
                (None, Some(p)) => return fail(format!("region `{}` must not have a parent (got `{p}`)", u.id)),
                (Some(want), None) => {
                    return fail(format!("{} `{}` needs a {} parent", u.level, u.id, want))
                }
                (Some(want), Some(p)) => {
                    let got = self.units[p].level;
                    if got != want {
                        return fail(format!(
                            "{} `{}` has {} parent `{p}`, expected a {}",
                            u.level, u.id, got, want
                        ));
                    }
                }
            }
            if matches!(u.level, GeoLevel::County | GeoLevel::City) && u.population == 0 {
                return fail(format!("{} `{}` is a per-capita denominator but has no population", u.level, u.id));
            }
            if u.name.trim().is_empty() {
                return fail(format!("unit `{}` has an empty name", u.id));
            }
        }
        // metro groups never straddle counties
        let mut metro_county: BTreeMap<&str, (&str, &str)> = BTreeMap::new();
        let mut metro_pop: HashMap<String, u64> = HashMap::new();
        for u in self.units.values().filter(|u| u.level == GeoLevel::City) {
            let Some(g) = u.metro_group.as_deref() else { continue };
            let county = self.ancestor_at(&u.id, GeoLevel::County).unwrap_or_default();
            *metro_pop.entry(g.to_string()).or_default() += u.population;
            match metro_county.get(g) {
                Some((c, first)) if *c != county => {
                    return fail(format!(
                        "metro group `{g}` spans counties `{c}` (via `{first}`) and `{county}` (via `{}`)",
                        u.id
                    ))
                }
                Some(_) => {}
                None => {
                    metro_county.insert(g, (county, &u.id));
                }
            }
        }
        for u in self.units.values().filter(|u| u.level == GeoLevel::Zcta) {
            let Some(g) = u.metro_group.as_deref() else { continue };
            let county = self.ancestor_at(&u.id, GeoLevel::County).unwrap_or_default();
            match metro_county.get(g) {
                None => return fail(format!("zcta `{}` references unknown metro group `{g}`", u.id)),
                Some((c, _)) if *c != county => {
                    return fail(format!(
                        "zcta `{}` has its parent city in county `{county}` but metro group `{g}` lies in `{c}`",
                        u.id
                    ))
                }
                Some(_) => {}
            }
        }
        if let Some((g, _)) = metro_pop.iter().find(|(_, p)| **p == 0) {
            return fail(format!("metro group `{g}` has zero population"));
        }
        self.metro_population = metro_pop;
        // regions without an explicit population take the sum of their counties
        let region_sums: Vec<(String, u64)> = self
            .units
            .values()
            .filter(|u| u.level == GeoLevel::Region && u.population == 0)
            .map(|r| {
                let sum = self
                    .units
                    .values()
                    .filter(|c| c.level == GeoLevel::County && c.parent.as_deref() == Some(&r.id))
                    .map(|c| c.population)
                    .sum();
                (r.id.clone(), sum)
            })
            .collect();
        for (id, sum) in region_sums {
            self.units.get_mut(&id).unwrap().population = sum;
        }
        Ok(())
    }

    pub fn attach_polygons(&mut self, polygons: BTreeMap<String, Vec<LatLon>>) -> Result<(), CorpusError> {
        for (id, ring) in polygons {
            validate_ring(&id, &ring)?;
            let unit = self
                .units
                .get_mut(&id)
                .ok_or_else(|| CorpusError::Registry(format!("polygon for unknown unit `{id}`")))?;
            if unit.level != GeoLevel::County {
                return Err(CorpusError::Registry(format!("polygon for non-county unit `{id}`")));
            }
            unit.polygon = Some(ring);
        }
        Ok(())
    }

    /// Registers a synthetic unit whose credit is split across `members`.
    pub fn add_shared_unit(&mut self, id: &str, name: &str, members: &[String]) -> Result<(), CorpusError> {
        if self.units.contains_key(id) {
            return Err(CorpusError::Registry(format!("shared unit id `{id}` collides with a registry unit")));
        }
        if members.is_empty() {
            return Err(CorpusError::Registry(format!("shared unit `{id}` has no members")));
        }
        for m in members {
            match self.units.get(m) {
                Some(u) if u.level == GeoLevel::County => {}
                Some(_) => return Err(CorpusError::Registry(format!("shared member `{m}` is not a county"))),
                None => return Err(CorpusError::Registry(format!("shared member `{m}` is unknown"))),
            }
        }
        self.shared.insert(
            id.to_string(),
            SharedUnit {
                id: id.to_string(),
                name: name.to_string(),
                members: members.to_vec(),
                fixed_weights: None,
            },
        );
        Ok(())
    }

    pub fn set_shared_weights(&mut self, id: &str, weights: Vec<f64>) -> Result<(), CorpusError> {
        let shared = self
            .shared
            .get_mut(id)
            .ok_or_else(|| CorpusError::Registry(format!("unknown shared unit `{id}`")))?;
        let total: f64 = weights.iter().sum();
        if weights.len() != shared.members.len()
            || weights.iter().any(|w| !(0.0..=1.0).contains(w))
            || (total - 1.0).abs() > 1e-9
        {
            return Err(CorpusError::Registry(format!(
                "shared weights for `{id}` must be {} values in [0,1] summing to 1",
                shared.members.len()
            )));
        }
        shared.fixed_weights = Some(weights);
        Ok(())
    }

    pub fn set_population(&mut self, id: &str, population: u64) -> Result<(), CorpusError> {
        let unit = self
            .units
            .get_mut(id)
            .ok_or_else(|| CorpusError::Registry(format!("unknown unit `{id}`")))?;
        unit.population = population;
        let mut pops: HashMap<String, u64> = HashMap::new();
        for u in self.units.values().filter(|u| u.level == GeoLevel::City) {
            if let Some(g) = &u.metro_group {
                *pops.entry(g.clone()).or_default() += u.population;
            }
        }
        self.metro_population = pops;
        Ok(())
    }

    pub fn unit(&self, id: &str) -> Option<&GeoUnit> {
        self.units.get(id)
    }

    pub fn shared_unit(&self, id: &str) -> Option<&SharedUnit> {
        self.shared.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.units.contains_key(id) || self.shared.contains_key(id)
    }

    pub fn units(&self) -> impl Iterator<Item = &GeoUnit> {
        self.units.values()
    }

    /// Units at `level`, in id order.
    pub fn units_at(&self, level: GeoLevel) -> impl Iterator<Item = &GeoUnit> {
        self.units.values().filter(move |u| u.level == level)
    }

    pub fn summary(&self) -> LevelCounts {
        let mut c = LevelCounts::default();
        for u in self.units.values() {
            match u.level {
                GeoLevel::Region => c.region += 1,
                GeoLevel::County => c.county += 1,
                GeoLevel::City => c.city += 1,
                GeoLevel::Zcta => c.zcta += 1,
            }
        }
        c
    }

    /// The ancestor (or self) of `id` at `level`; `None` when `id` is coarser
    /// than `level` or unknown.
    pub fn ancestor_at(&self, id: &str, level: GeoLevel) -> Option<&str> {
        let mut cur = self.units.get(id)?;
        loop {
            if cur.level == level {
                return Some(&cur.id);
            }
            if cur.level < level {
                return None;
            }
            cur = self.units.get(cur.parent.as_deref()?)?;
        }
    }

    /// Resolves a free-text location label: exact id first, then a
    /// case-insensitive name match preferring city, county, ZCTA, region, and
    /// finally shared units.
    pub fn resolve_label(&self, label: &str) -> Option<&str> {
        let label = label.trim();
        if let Some(u) = self.units.get(label) {
            return Some(&u.id);
        }
        if let Some(s) = self.shared.get(label) {
            return Some(&s.id);
        }
        let norm = normalize_label(label);
        for level in [GeoLevel::City, GeoLevel::County, GeoLevel::Zcta, GeoLevel::Region] {
            if let Some(u) = self.units_at(level).find(|u| normalize_label(&u.name) == norm) {
                return Some(&u.id);
            }
        }
        self.shared
            .values()
            .find(|s| normalize_label(&s.name) == norm)
            .map(|s| s.id.as_str())
    }

    pub fn metro_population(&self, group: &str) -> Option<u64> {
        self.metro_population.get(group).copied()
    }

    /// Population used when normalizing counts of `id`: counties and regions
    /// use their own population, cities and ZCTAs the total of their metro
    /// group, shared units the sum of their members.
    pub fn denominator_population(&self, id: &str) -> Result<u64, GeoError> {
        if let Some(s) = self.shared.get(id) {
            return Ok(s.members.iter().filter_map(|m| self.units.get(m)).map(|u| u.population).sum());
        }
        let unit = self.units.get(id).ok_or_else(|| GeoError::UnknownUnit(id.to_string()))?;
        Ok(match unit.level {
            GeoLevel::Region | GeoLevel::County => unit.population,
            GeoLevel::City => unit
                .metro_group
                .as_deref()
                .and_then(|g| self.metro_population(g))
                .unwrap_or(unit.population),
            GeoLevel::Zcta => {
                let group = unit.metro_group.as_deref().or_else(|| {
                    unit.parent
                        .as_deref()
                        .and_then(|p| self.units.get(p))
                        .and_then(|c| c.metro_group.as_deref())
                });
                match group.and_then(|g| self.metro_population(g)) {
                    Some(p) => p,
                    None => unit
                        .parent
                        .as_deref()
                        .and_then(|p| self.units.get(p))
                        .map(|c| c.population)
                        .unwrap_or(unit.population),
                }
            }
        })
    }
}

/// Writes units in registry order. Region populations are written blank so
/// they are re-derived on load.
pub fn write_geo_registry<W: std::io::Write>(w: W, registry: &Registry) -> Result<(), CorpusError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(REGISTRY_HEADER)?;
    for u in registry.units() {
        let pop = if u.level == GeoLevel::Region || u.population == 0 {
            String::new()
        } else {
            u.population.to_string()
        };
        wtr.write_record([
            u.id.clone(),
            u.level.as_str().to_string(),
            u.name.clone(),
            u.parent.clone().unwrap_or_default(),
            u.metro_group.clone().unwrap_or_default(),
            pop,
            u.centroid.lat.to_string(),
            u.centroid.lon.to_string(),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// County polygons as a GeoJSON `FeatureCollection` (`[lon, lat]` vertices).
pub fn polygons_to_geojson(polygons: &BTreeMap<String, Vec<LatLon>>) -> String {
    let features: Vec<serde_json::Value> = polygons
        .iter()
        .map(|(id, ring)| {
            let coords: Vec<[f64; 2]> = ring.iter().map(|p| [p.lon, p.lat]).collect();
            serde_json::json!({
                "type": "Feature",
                "properties": {"id": id},
                "geometry": {"type": "Polygon", "coordinates": [coords]}
            })
        })
        .collect();
    serde_json::json!({"type": "FeatureCollection", "features": features}).to_string()
}

pub fn normalize_label(s: &str) -> String {
    s.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
        .replace(['.', ','], "")
}

#[doc(hidden)]
pub mod test_fixtures {
    //! A small five-county registry shaped like the Tampa Bay study area.
    use super::*;

    pub const REGISTRY_CSV: &str = "\
id,level,name,parent,metro_group,population,centroid_lat,centroid_lon
tb_region,region,Tampa Bay Region,,,,27.7,-82.5
pasco,county,Pasco,tb_region,,539000,28.31,-82.475
hillsborough,county,Hillsborough,tb_region,,1500000,27.91,-82.4
pinellas,county,Pinellas,tb_region,,973000,27.91,-82.675
manatee,county,Manatee,tb_region,,400000,27.525,-82.475
sarasota,county,Sarasota,tb_region,,426000,27.175,-82.475
new_port_richey,city,New Port Richey,pasco,npr_metro,16000,28.24,-82.71
tampa,city,Tampa,hillsborough,tampa_metro,390000,27.9506,-82.4572
brandon,city,Brandon,hillsborough,tampa_metro,114000,27.93,-82.29
st_petersburg,city,St. Petersburg,pinellas,stpete_metro,265000,27.7676,-82.6403
clearwater,city,Clearwater,pinellas,clearwater_metro,116000,27.9659,-82.73
bradenton,city,Bradenton,manatee,bradenton_metro,57000,27.4989,-82.5748
bradenton_beach,city,Bradenton Beach,manatee,bradenton_metro,1200,27.4670,-82.7000
palma_sola,city,Palma Sola,manatee,bradenton_metro,3000,27.5000,-82.6300
sarasota_city,city,Sarasota,sarasota,sarasota_metro,57000,27.3364,-82.5307
venice,city,Venice,sarasota,venice_metro,23000,27.0998,-82.4543
z34236,zcta,34236,sarasota_city,sarasota_metro,,27.33,-82.54
z34217,zcta,34217,bradenton_beach,bradenton_metro,,27.48,-82.70
";

    fn rect(lat0: f64, lat1: f64, lon0: f64, lon1: f64) -> Vec<LatLon> {
        vec![
            LatLon::new(lat0, lon0),
            LatLon::new(lat0, lon1),
            LatLon::new(lat1, lon1),
            LatLon::new(lat1, lon0),
            LatLon::new(lat0, lon0),
        ]
    }

    pub fn county_polygons() -> BTreeMap<String, Vec<LatLon>> {
        let mut m = BTreeMap::new();
        m.insert("pasco".into(), rect(28.17, 28.45, -82.9, -82.05));
        m.insert("pinellas".into(), rect(27.65, 28.17, -82.9, -82.6));
        m.insert("hillsborough".into(), rect(27.65, 28.17, -82.6, -82.2));
        m.insert("manatee".into(), rect(27.4, 27.65, -82.9, -82.05));
        m.insert("sarasota".into(), rect(26.95, 27.4, -82.9, -82.05));
        m
    }

    pub fn polygons_geojson() -> String {
        polygons_to_geojson(&county_polygons())
    }

    pub fn five_county_registry() -> Registry {
        let mut reg = read_geo_registry(REGISTRY_CSV.as_bytes()).expect("fixture registry");
        reg.attach_polygons(county_polygons()).expect("fixture polygons");
        reg.add_shared_unit(
            "tampa_bay_shared",
            "Tampa Bay",
            &["hillsborough".to_string(), "pinellas".to_string()],
        )
        .expect("shared unit");
        reg
    }
}
