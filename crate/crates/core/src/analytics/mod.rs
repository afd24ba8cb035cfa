//! Panel correlations (concurrent, lead, lag) across level × frequency
//! grids, distance-decay regression, distance-bin contrasts and retweet
//! fractions.

pub mod distance;
pub mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{Frequency, MatchFilter, Panel, PanelCell};
use crate::corpus::GeoLevel;
pub use distance::*;
pub use stats::{ols, pearson, studentized_range_cdf, studentized_range_quantile, RegressionFit, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Count,
    PerCapitaCount,
    Sentiment,
    PerCapitaSentiment,
}

impl Metric {
    pub fn value(self, c: &PanelCell) -> f64 {
        match self {
            Metric::Count => c.tweet_count,
            Metric::PerCapitaCount => c.per_capita_count,
            Metric::Sentiment => c.sentiment_total,
            Metric::PerCapitaSentiment => c.per_capita_sentiment,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Count => "count",
            Metric::PerCapitaCount => "per_capita_count",
            Metric::Sentiment => "sentiment",
            Metric::PerCapitaSentiment => "per_capita_sentiment",
        }
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "count" => Ok(Metric::Count),
            "per_capita" | "per_capita_count" => Ok(Metric::PerCapitaCount),
            "sentiment" => Ok(Metric::Sentiment),
            "per_capita_sentiment" => Ok(Metric::PerCapitaSentiment),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    DeadFish,
    Respiratory,
    KBrevis,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::DeadFish, Condition::Respiratory, Condition::KBrevis];

    pub fn value(self, c: &PanelCell) -> Option<f64> {
        match self {
            Condition::DeadFish => Some(c.dead_fish),
            Condition::Respiratory => Some(c.respiratory),
            Condition::KBrevis => c.kbrevis,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::DeadFish => "dead_fish",
            Condition::Respiratory => "respiratory",
            Condition::KBrevis => "kbrevis",
        }
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dead_fish" | "deadfish" => Ok(Condition::DeadFish),
            "respiratory" => Ok(Condition::Respiratory),
            "kbrevis" | "k_brevis" => Ok(Condition::KBrevis),
            other => Err(format!("unknown condition `{other}`")),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How correlations combine across units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// One r over all (unit, bucket) pairs.
    #[default]
    Pooled,
    /// Mean of each unit's own r; units whose r is undefined are skipped.
    PerUnitMean,
}

impl FromStr for Pooling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pooled" => Ok(Pooling::Pooled),
            "per_unit_mean" | "per_unit" => Ok(Pooling::PerUnitMean),
            other => Err(format!("unknown pooling `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub r: f64,
    pub n: usize,
}

/// Metric of bucket t paired with condition of bucket t + shift, per unit.
/// Shift -1 is the lag design (previous-bucket condition), +1 the lead.
pub fn shifted_pairs(panel: &Panel, metric: Metric, condition: Condition, shift: i64) -> BTreeMap<String, (Vec<f64>, Vec<f64>)> {
    let mut out: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for unit in panel.units() {
        let cells: BTreeMap<usize, &PanelCell> = panel.series(unit).collect();
        let entry = out.entry(unit.to_string()).or_default();
        for (&b, cell) in &cells {
            let partner = b as i64 + shift;
            if partner < 0 {
                continue;
            }
            let Some(other) = cells.get(&(partner as usize)) else { continue };
            let Some(cv) = condition.value(other) else { continue };
            entry.0.push(metric.value(cell));
            entry.1.push(cv);
        }
    }
    out
}

pub fn panel_correlation(panel: &Panel, metric: Metric, condition: Condition, shift: i64) -> Result<Correlation, StatsError> {
    panel_correlation_with(panel, metric, condition, shift, Pooling::Pooled)
}

pub fn panel_correlation_with(
    panel: &Panel,
    metric: Metric,
    condition: Condition,
    shift: i64,
    pooling: Pooling,
) -> Result<Correlation, StatsError> {
    let pairs = shifted_pairs(panel, metric, condition, shift);
    match pooling {
        Pooling::Pooled => {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_values().fold((Vec::new(), Vec::new()), |(mut x, mut y), (a, b)| {
                x.extend(a);
                y.extend(b);
                (x, y)
            });
            let r = pearson(&x, &y)?;
            Ok(Correlation { r, n: x.len() })
        }
        Pooling::PerUnitMean => {
            let mut rs = Vec::new();
            let mut n = 0;
            let mut last_err = None;
            for (x, y) in pairs.values() {
                match pearson(x, y) {
                    Ok(r) => {
                        rs.push(r);
                        n += x.len();
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            if rs.is_empty() {
                return Err(last_err.unwrap_or(StatsError::TooFew { needed: 3, got: 0 }));
            }
            Ok(Correlation {
                r: rs.iter().sum::<f64>() / rs.len() as f64,
                n,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum GridEntry {
    Value { r: f64, n: usize },
    Missing { reason: String },
}

impl GridEntry {
    pub fn r(&self) -> Option<f64> {
        match self {
            GridEntry::Value { r, .. } => Some(*r),
            GridEntry::Missing { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationGrid {
    pub metric: Metric,
    pub matched_by: MatchFilter,
    pub condition: Condition,
    pub shift: i64,
    pub entries: BTreeMap<(GeoLevel, Frequency), GridEntry>,
}

/// One correlation per supplied panel; cells are computed in parallel and
/// failures become missing entries with a reason.
pub fn correlation_grid(
    panels: &[&Panel],
    metric: Metric,
    condition: Condition,
    shift: i64,
    pooling: Pooling,
) -> CorrelationGrid {
    let entries: BTreeMap<(GeoLevel, Frequency), GridEntry> = panels
        .par_iter()
        .map(|p| {
            let entry = match panel_correlation_with(p, metric, condition, shift, pooling) {
                Ok(c) => GridEntry::Value { r: c.r, n: c.n },
                Err(e) => GridEntry::Missing { reason: e.to_string() },
            };
            ((p.level, p.freq), entry)
        })
        .collect();
    CorrelationGrid {
        metric,
        matched_by: panels.first().map_or(MatchFilter::All, |p| p.matched_by),
        condition,
        shift,
        entries,
    }
}

pub const GRID_HEADER: [&str; 9] = ["metric", "match", "condition", "shift", "level", "freq", "r", "n", "note"];

pub fn write_grid_csv<W: std::io::Write>(w: W, grids: &[CorrelationGrid]) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(GRID_HEADER)?;
    for g in grids {
        for ((level, freq), e) in &g.entries {
            let (r, n, note) = match e {
                GridEntry::Value { r, n } => (r.to_string(), n.to_string(), String::new()),
                GridEntry::Missing { reason } => (String::new(), String::new(), reason.clone()),
            };
            wtr.write_record([
                g.metric.as_str().to_string(),
                g.matched_by.as_str().to_string(),
                g.condition.as_str().to_string(),
                g.shift.to_string(),
                if *level == GeoLevel::Region { "total".into() } else { level.as_str().to_string() },
                freq.to_string(),
                r,
                n,
                note,
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::TimeBucket;
    use chrono::NaiveDate;

    fn panel(values: &[(&str, Vec<(f64, f64)>)]) -> Panel {
        let start = NaiveDate::from_ymd_opt(2018, 5, 15).unwrap();
        let len = values.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
        let buckets = (0..len)
            .map(|i| TimeBucket {
                index: i,
                start: start + chrono::Duration::days(7 * i as i64),
                length: 7,
                days: 7,
                partial: false,
            })
            .collect();
        let mut cells = BTreeMap::new();
        for (unit, series) in values {
            for (b, (m, c)) in series.iter().enumerate() {
                cells.insert(
                    (unit.to_string(), b),
                    PanelCell {
                        per_capita_count: *m,
                        tweet_count: *m,
                        dead_fish: *c,
                        kbrevis: None,
                        ..Default::default()
                    },
                );
            }
        }
        Panel {
            level: GeoLevel::County,
            freq: Frequency::Weekly,
            matched_by: MatchFilter::All,
            buckets,
            cells,
            unresolved: vec![],
        }
    }

    #[test]
    fn identity_coupling() {
        let s: Vec<(f64, f64)> = [0.0, 1.0, 2.0, 1.5, 0.5].iter().map(|&v| (v, v)).collect();
        let p = panel(&[("a", s.clone()), ("b", s)]);
        let c = panel_correlation(&p, Metric::PerCapitaCount, Condition::DeadFish, 0).unwrap();
        assert!((c.r - 1.0).abs() < 1e-12);
        assert_eq!(c.n, 10);
    }

    #[test]
    fn constructed_lead_and_lag() {
        let cond = [0.0, 2.0, 1.0, 0.5, 1.5, 2.0, 0.0];
        // metric at t equals condition at t+1
        let lead: Vec<(f64, f64)> = (0..cond.len()).map(|t| (*cond.get(t + 1).unwrap_or(&9.0), cond[t])).collect();
        let p = panel(&[("a", lead)]);
        let c = panel_correlation(&p, Metric::Count, Condition::DeadFish, 1).unwrap();
        assert!((c.r - 1.0).abs() < 1e-12);
        assert_eq!(c.n, cond.len() - 1);
        // metric at t equals condition at t-1
        let lag: Vec<(f64, f64)> = (0..cond.len()).map(|t| (if t == 0 { -9.0 } else { cond[t - 1] }, cond[t])).collect();
        let p = panel(&[("a", lag)]);
        let c = panel_correlation(&p, Metric::Count, Condition::DeadFish, -1).unwrap();
        assert!((c.r - 1.0).abs() < 1e-12);
        assert_eq!(c.n, cond.len() - 1);
    }

    #[test]
    fn kbrevis_undefined_and_small_panels_are_missing() {
        let p = panel(&[("a", vec![(1.0, 1.0), (2.0, 0.0)])]);
        assert!(panel_correlation(&p, Metric::Count, Condition::KBrevis, 0).is_err());
        let grid = correlation_grid(&[&p], Metric::Count, Condition::DeadFish, 0, Pooling::Pooled);
        assert!(matches!(grid.entries.values().next().unwrap(), GridEntry::Missing { .. }));
    }

    #[test]
    fn per_unit_mean_pooling() {
        let up: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, i as f64)).collect();
        let down: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, -(i as f64))).collect();
        let p = panel(&[("a", up), ("b", down)]);
        let c = panel_correlation_with(&p, Metric::Count, Condition::DeadFish, 0, Pooling::PerUnitMean).unwrap();
        assert!(c.r.abs() < 1e-12);
    }
}
