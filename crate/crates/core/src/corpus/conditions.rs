//! Beach condition reports and K. brevis water samples.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{check_header, open, parse_date, CorpusError, Parsed, RecordError};
use crate::geospatial::LatLon;

pub const BEACH_HEADER: [&str; 5] = ["beach_id", "county_id", "date", "dead_fish", "respiratory"];
pub const KBREVIS_HEADER: [&str; 5] = ["sample_id", "date", "lat", "lon", "cells_per_liter"];
pub const BEACH_LOCATION_HEADER: [&str; 3] = ["beach_id", "lat", "lon"];

pub const MAX_DEAD_FISH: u8 = 2;
pub const MAX_RESPIRATORY: u8 = 3;

/// A daily beach report. Dead fish is 0 (none) to 2 (heavy); respiratory
/// irritation is 0 (none) to 3 (intense).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeachReport {
    pub beach_id: String,
    pub county: String,
    pub date: NaiveDate,
    pub dead_fish: u8,
    pub respiratory: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KBrevisSample {
    pub sample_id: String,
    pub date: NaiveDate,
    pub location: LatLon,
    pub cells_per_liter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeachLocation {
    pub beach_id: String,
    pub location: LatLon,
}

/// Inclusive latitude/longitude box used to sanity-check sample coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl Default for BoundingBox {
    /// Florida peninsula and the eastern Gulf.
    fn default() -> Self {
        Self {
            min_lat: 24.0,
            max_lat: 31.5,
            min_lon: -88.0,
            max_lon: -79.5,
        }
    }
}

impl BoundingBox {
    pub fn contains(&self, p: LatLon) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat) && (self.min_lon..=self.max_lon).contains(&p.lon)
    }
}

#[derive(Deserialize)]
struct BeachRow {
    beach_id: String,
    county_id: String,
    date: String,
    dead_fish: i64,
    respiratory: i64,
}

#[derive(Deserialize)]
struct KBrevisRow {
    sample_id: String,
    date: String,
    lat: f64,
    lon: f64,
    cells_per_liter: f64,
}

#[derive(Deserialize)]
struct BeachLocationRow {
    beach_id: String,
    lat: f64,
    lon: f64,
}

fn read_rows<R, Row, T>(
    reader: R,
    header: &[&str],
    mut convert: impl FnMut(Row) -> Result<T, String>,
) -> Result<Parsed<T>, CorpusError>
where
    R: Read,
    Row: serde::de::DeserializeOwned,
{
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, header)?;
    let mut out = Parsed::default();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let line = i + 2;
        match row.map_err(|e| e.to_string()).and_then(&mut convert) {
            Ok(rec) => out.records.push(rec),
            Err(message) => out.errors.push(RecordError { line, message }),
        }
    }
    Ok(out)
}

pub fn read_beach_reports<R: Read>(reader: R) -> Result<Parsed<BeachReport>, CorpusError> {
    read_rows(reader, &BEACH_HEADER, |r: BeachRow| {
        if !(0..=MAX_DEAD_FISH as i64).contains(&r.dead_fish) {
            return Err(format!("dead_fish {} outside 0..={MAX_DEAD_FISH}", r.dead_fish));
        }
        if !(0..=MAX_RESPIRATORY as i64).contains(&r.respiratory) {
            return Err(format!("respiratory {} outside 0..={MAX_RESPIRATORY}", r.respiratory));
        }
        if r.beach_id.is_empty() || r.county_id.is_empty() {
            return Err("beach_id and county_id are required".into());
        }
        Ok(BeachReport {
            beach_id: r.beach_id,
            county: r.county_id,
            date: parse_date(&r.date)?,
            dead_fish: r.dead_fish as u8,
            respiratory: r.respiratory as u8,
        })
    })
}

pub fn read_kbrevis_samples<R: Read>(reader: R, bbox: &BoundingBox) -> Result<Parsed<KBrevisSample>, CorpusError> {
    read_rows(reader, &KBREVIS_HEADER, |r: KBrevisRow| {
        if !(r.cells_per_liter >= 0.0) || !r.cells_per_liter.is_finite() {
            return Err(format!("cells_per_liter {} must be a nonnegative number", r.cells_per_liter));
        }
        let location = LatLon::new(r.lat, r.lon).validate().map_err(|e| e.to_string())?;
        if !bbox.contains(location) {
            return Err(format!("sample ({}, {}) outside bounding box", r.lat, r.lon));
        }
        Ok(KBrevisSample {
            sample_id: r.sample_id,
            date: parse_date(&r.date)?,
            location,
            cells_per_liter: r.cells_per_liter,
        })
    })
}

pub fn read_beach_locations<R: Read>(reader: R) -> Result<Parsed<BeachLocation>, CorpusError> {
    read_rows(reader, &BEACH_LOCATION_HEADER, |r: BeachLocationRow| {
        Ok(BeachLocation {
            beach_id: r.beach_id,
            location: LatLon::new(r.lat, r.lon).validate().map_err(|e| e.to_string())?,
        })
    })
}

/// Condition file kinds accepted by [`parse_conditions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionKind {
    Beach,
    KBrevis,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConditionRecords {
    Beach(Parsed<BeachReport>),
    KBrevis(Parsed<KBrevisSample>),
}

pub fn parse_conditions(path: &Path, kind: ConditionKind, bbox: &BoundingBox) -> Result<ConditionRecords, CorpusError> {
    let file = open(path)?;
    Ok(match kind {
        ConditionKind::Beach => ConditionRecords::Beach(read_beach_reports(file)?),
        ConditionKind::KBrevis => ConditionRecords::KBrevis(read_kbrevis_samples(file, bbox)?),
    })
}

pub fn parse_beach_locations(path: &Path) -> Result<Parsed<BeachLocation>, CorpusError> {
    read_beach_locations(open(path)?)
}

pub fn write_beach_reports<W: std::io::Write>(w: W, reports: &[BeachReport]) -> Result<(), CorpusError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(BEACH_HEADER)?;
    for r in reports {
        wtr.write_record([
            r.beach_id.as_str(),
            r.county.as_str(),
            &r.date.to_string(),
            &r.dead_fish.to_string(),
            &r.respiratory.to_string(),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_kbrevis_samples<W: std::io::Write>(w: W, samples: &[KBrevisSample]) -> Result<(), CorpusError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(KBREVIS_HEADER)?;
    for s in samples {
        wtr.write_record([
            s.sample_id.as_str(),
            &s.date.to_string(),
            &s.location.lat.to_string(),
            &s.location.lon.to_string(),
            &s.cells_per_liter.to_string(),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_beach_locations<W: std::io::Write>(w: W, beaches: &[BeachLocation]) -> Result<(), CorpusError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(BEACH_LOCATION_HEADER)?;
    for b in beaches {
        wtr.write_record([b.beach_id.as_str(), &b.location.lat.to_string(), &b.location.lon.to_string()])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn valid_beach_row() {
        let csv = "beach_id,county_id,date,dead_fish,respiratory\nsiesta_key,sarasota,2018-08-06,2,3\n";
        let parsed = read_beach_reports(csv.as_bytes()).unwrap();
        assert!(parsed.is_clean());
        assert_eq!(
            parsed.records[0],
            BeachReport {
                beach_id: "siesta_key".into(),
                county: "sarasota".into(),
                date: NaiveDate::from_ymd_opt(2018, 8, 6).unwrap(),
                dead_fish: 2,
                respiratory: 3,
            }
        );
    }

    #[test]
    fn out_of_range_indices_rejected_with_line() {
        let csv = "beach_id,county_id,date,dead_fish,respiratory\n\
                   a,sarasota,2018-08-06,5,1\n\
                   b,sarasota,2018-08-06,1,4\n\
                   c,sarasota,2018-08-06,-1,0\n\
                   d,sarasota,2018-08-06,1,1\n";
        let parsed = read_beach_reports(csv.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.errors.iter().map(|e| e.line).collect::<Vec<_>>(), vec![2, 3, 4]);
        assert!(parsed.errors[0].message.contains("dead_fish"));
        assert!(parsed.errors[1].message.contains("respiratory"));
    }

    #[test]
    fn kbrevis_sample_inside_box() {
        let bbox = BoundingBox::default();
        // containment oracle: plain interval checks on each axis
        let (lat, lon) = (27.27, -82.55);
        assert!(lat >= bbox.min_lat && lat <= bbox.max_lat && lon >= bbox.min_lon && lon <= bbox.max_lon);
        let csv = "sample_id,date,lat,lon,cells_per_liter\ns1,2018-08-06,27.27,-82.55,1.2e6\n";
        let parsed = read_kbrevis_samples(csv.as_bytes(), &bbox).unwrap();
        assert!(parsed.is_clean());
        assert_eq!(parsed.records[0].cells_per_liter, 1.2e6);
    }

    #[test]
    fn negative_cells_and_outside_box_rejected() {
        let csv = "sample_id,date,lat,lon,cells_per_liter\n\
                   s1,2018-08-06,27.27,-82.55,-3\n\
                   s2,2018-08-06,40.0,-82.55,10\n";
        let parsed = read_kbrevis_samples(csv.as_bytes(), &BoundingBox::default()).unwrap();
        assert!(parsed.records.is_empty());
        assert_eq!(parsed.errors.len(), 2);
    }

    #[test]
    fn wrong_header_is_fatal() {
        let csv = "beach,county,date,dead_fish,respiratory\n";
        assert!(matches!(read_beach_reports(csv.as_bytes()), Err(CorpusError::Header { .. })));
    }

    proptest! {
        #[test]
        fn beach_reports_round_trip(rows in proptest::collection::vec((0u8..=2, 0u8..=3, 0i64..700), 0..40)) {
            let start = NaiveDate::from_ymd_opt(2018, 5, 15).unwrap();
            let reports: Vec<BeachReport> = rows
                .iter()
                .enumerate()
                .map(|(i, &(d, r, off))| BeachReport {
                    beach_id: format!("b{i}"),
                    county: "sarasota".into(),
                    date: start + chrono::Duration::days(off),
                    dead_fish: d,
                    respiratory: r,
                })
                .collect();
            let mut buf = Vec::new();
            write_beach_reports(&mut buf, &reports).unwrap();
            let parsed = read_beach_reports(buf.as_slice()).unwrap();
            prop_assert!(parsed.is_clean());
            prop_assert_eq!(parsed.records, reports);
        }

        #[test]
        fn kbrevis_round_trip(rows in proptest::collection::vec((26.0f64..29.0, -83.5f64..-82.0, 0.0f64..1e7), 0..30)) {
            let date = NaiveDate::from_ymd_opt(2018, 8, 6).unwrap();
            let samples: Vec<KBrevisSample> = rows
                .iter()
                .enumerate()
                .map(|(i, &(lat, lon, c))| KBrevisSample {
                    sample_id: format!("s{i}"),
                    date,
                    location: LatLon::new(lat, lon),
                    cells_per_liter: c,
                })
                .collect();
            let mut buf = Vec::new();
            write_kbrevis_samples(&mut buf, &samples).unwrap();
            let parsed = read_kbrevis_samples(buf.as_slice(), &BoundingBox::default()).unwrap();
            prop_assert_eq!(parsed.records, samples);
        }
    }
}
