//! Distance-to-impact analysis: high-impact K. brevis sites, city-week
//! distance records, log-linear decay regression, Tukey-Kramer contrasts
//! between distance bins and retweet fractions by distance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::stats::{ols, studentized_range_quantile, RegressionFit, StatsError};
use crate::aggregation::{bucket_index, Frequency, Panel};
use crate::cleaning::StudyWindow;
use crate::corpus::{GeoLevel, KBrevisSample, Registry};
use crate::geospatial::{min_distance_miles, DistanceBin, DistanceBins, GeoError, LatLon};

pub const HIGH_IMPACT_CELLS: f64 = 1_000_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistanceError {
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("distance bin `{0}` has fewer than 2 records")]
    EmptyBin(DistanceBin),
    #[error("distance records need a weekly city panel, got {0}")]
    WrongPanel(String),
}

/// Locations of samples above `threshold` (strictly) in one weekly bucket.
pub fn high_impact_sites(samples: &[KBrevisSample], window: &StudyWindow, week: usize, threshold: f64) -> Vec<LatLon> {
    samples
        .iter()
        .filter(|s| s.cells_per_liter > threshold && bucket_index(window, Frequency::Weekly, s.date) == Some(week))
        .map(|s| s.location)
        .collect()
}

/// High-impact sites for every week that has at least one.
pub fn high_impact_by_week(samples: &[KBrevisSample], window: &StudyWindow, threshold: f64) -> BTreeMap<usize, Vec<LatLon>> {
    let mut out: BTreeMap<usize, Vec<LatLon>> = BTreeMap::new();
    for s in samples {
        if s.cells_per_liter > threshold {
            if let Some(w) = bucket_index(window, Frequency::Weekly, s.date) {
                out.entry(w).or_default().push(s.location);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRecord {
    pub unit: String,
    pub week: usize,
    pub distance_miles: f64,
    pub count: f64,
    pub per_capita_count: f64,
    pub bin: DistanceBin,
}

/// One record per city and week with high-impact sites; distance runs from
/// the city centroid to the nearest site.
pub fn city_week_records(
    panel: &Panel,
    registry: &Registry,
    sites_by_week: &BTreeMap<usize, Vec<LatLon>>,
    bins: &DistanceBins,
) -> Result<Vec<DistanceRecord>, DistanceError> {
    if panel.level != GeoLevel::City || panel.freq != Frequency::Weekly {
        return Err(DistanceError::WrongPanel(format!("{}/{}", panel.level.as_str(), panel.freq)));
    }
    let mut out = Vec::new();
    for ((unit, week), cell) in &panel.cells {
        let Some(sites) = sites_by_week.get(week) else { continue };
        let Some(u) = registry.unit(unit) else {
            return Err(GeoError::UnknownUnit(unit.clone()).into());
        };
        let Some(d) = min_distance_miles(u.centroid, sites)? else { continue };
        out.push(DistanceRecord {
            unit: unit.clone(),
            week: *week,
            distance_miles: d,
            count: cell.tweet_count,
            per_capita_count: cell.per_capita_count,
            bin: bins.bin(d)?,
        });
    }
    Ok(out)
}

/// Treatment of zero counts before taking logs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroPolicy {
    #[default]
    Exclude,
    /// Use ln(x + epsilon) for every record.
    Epsilon(f64),
}

fn logged(v: f64, policy: ZeroPolicy) -> Option<f64> {
    match policy {
        ZeroPolicy::Exclude if v > 0.0 => Some(v.ln()),
        ZeroPolicy::Exclude => None,
        ZeroPolicy::Epsilon(e) if v + e > 0.0 => Some((v + e).ln()),
        ZeroPolicy::Epsilon(_) => None,
    }
}

/// OLS of ln(per-capita count) on distance in miles.
pub fn distance_regression(records: &[DistanceRecord], policy: ZeroPolicy) -> Result<RegressionFit, DistanceError> {
    let (x, y): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter_map(|r| logged(r.per_capita_count, policy).map(|l| (r.distance_miles, l)))
        .unzip();
    Ok(ols(&x, &y)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairInterval {
    /// mean(a) - mean(b)
    pub diff: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_a: usize,
    pub n_b: usize,
}

impl PairInterval {
    pub fn covers(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Tukey-Kramer simultaneous intervals for every pair (i, j), i > j, of
/// groups, using the pooled within-group variance.
pub fn tukey_kramer(groups: &[&[f64]], confidence: f64) -> Result<BTreeMap<(usize, usize), PairInterval>, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::TooFew { needed: 2, got: k });
    }
    for g in groups {
        if g.len() < 2 {
            return Err(StatsError::TooFew { needed: 2, got: g.len() });
        }
    }
    let n_total: usize = groups.iter().map(|g| g.len()).sum();
    let means: Vec<f64> = groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    let sse: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|v| (v - m) * (v - m)).sum::<f64>())
        .sum();
    let df = (n_total - k) as f64;
    let mse = sse / df;
    let q = studentized_range_quantile(confidence, k, df)?;
    let mut out = BTreeMap::new();
    for i in 0..k {
        for j in 0..i {
            let (ni, nj) = (groups[i].len(), groups[j].len());
            let half = q * (mse / 2.0 * (1.0 / ni as f64 + 1.0 / nj as f64)).sqrt();
            let diff = means[i] - means[j];
            out.insert(
                (i, j),
                PairInterval {
                    diff,
                    lower: diff - half,
                    upper: diff + half,
                    n_a: ni,
                    n_b: nj,
                },
            );
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinContrast {
    pub a: DistanceBin,
    pub b: DistanceBin,
    #[serde(flatten)]
    pub interval: PairInterval,
}

/// Medium-Close, Far-Close and Far-Medium intervals on mean logged
/// per-capita counts.
pub fn bin_contrasts(records: &[DistanceRecord], policy: ZeroPolicy, confidence: f64) -> Result<Vec<BinContrast>, DistanceError> {
    let mut groups: BTreeMap<DistanceBin, Vec<f64>> = DistanceBin::ALL.iter().map(|b| (*b, Vec::new())).collect();
    for r in records {
        if let Some(l) = logged(r.per_capita_count, policy) {
            groups.get_mut(&r.bin).expect("all bins present").push(l);
        }
    }
    for (bin, g) in &groups {
        if g.len() < 2 {
            return Err(DistanceError::EmptyBin(*bin));
        }
    }
    let slices: Vec<&[f64]> = DistanceBin::ALL.iter().map(|b| groups[b].as_slice()).collect();
    let ci = tukey_kramer(&slices, confidence)?;
    Ok(ci
        .into_iter()
        .map(|((i, j), interval)| BinContrast {
            a: DistanceBin::ALL[i],
            b: DistanceBin::ALL[j],
            interval,
        })
        .collect())
}

/// A tweet with explicit coordinates, bucketed by week.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoordObservation {
    pub week: usize,
    pub coords: LatLon,
    pub retweet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetweetRecord {
    pub week: usize,
    pub coords: LatLon,
    pub distance_miles: f64,
    pub total: usize,
    pub retweets: usize,
    pub fraction: f64,
}

/// Retweet share per unique coordinate pair and week (weeks with
/// high-impact sites only), with an OLS fit of fraction on distance.
pub fn retweet_fraction_by_distance(
    observations: &[CoordObservation],
    sites_by_week: &BTreeMap<usize, Vec<LatLon>>,
) -> Result<(Vec<RetweetRecord>, Result<RegressionFit, StatsError>), GeoError> {
    let mut groups: BTreeMap<(usize, u64, u64), (LatLon, usize, usize)> = BTreeMap::new();
    for o in observations {
        if !sites_by_week.contains_key(&o.week) {
            continue;
        }
        let e = groups
            .entry((o.week, o.coords.lat.to_bits(), o.coords.lon.to_bits()))
            .or_insert((o.coords, 0, 0));
        e.1 += 1;
        if o.retweet {
            e.2 += 1;
        }
    }
    let mut records = Vec::new();
    for ((week, _, _), (coords, total, retweets)) in groups {
        if total == 0 {
            continue;
        }
        let Some(d) = min_distance_miles(coords, &sites_by_week[&week])? else { continue };
        records.push(RetweetRecord {
            week,
            coords,
            distance_miles: d,
            total,
            retweets,
            fraction: retweets as f64 / total as f64,
        });
    }
    let x: Vec<f64> = records.iter().map(|r| r.distance_miles).collect();
    let y: Vec<f64> = records.iter().map(|r| r.fraction).collect();
    let fit = ols(&x, &y);
    Ok((records, fit))
}
