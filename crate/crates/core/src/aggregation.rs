//! Spatiotemporal panels: tweet counts, sentiment and condition indices per
//! (geo unit, time bucket) at a chosen locality level and frequency.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cleaning::{local_date, CleanTweet, StudyWindow};
use crate::corpus::{AccountClass, BeachLocation, BeachReport, GeoLevel, KBrevisSample, MatchSource, Registry};
use crate::geospatial::{assign_sample_to_county, credit_share, geodesic_miles, GeoError, PER_CAPITA_SCALE};

#[derive(Debug, Error, PartialEq)]
pub enum AggregationError {
    #[error("cannot join panels: {left} vs {right}")]
    Mismatch { left: String, right: String },
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Weekly,
    #[serde(rename = "3day")]
    ThreeDay,
    Daily,
}

impl Frequency {
    pub const ALL: [Frequency; 3] = [Frequency::Weekly, Frequency::ThreeDay, Frequency::Daily];

    pub fn days(self) -> u32 {
        match self {
            Frequency::Weekly => 7,
            Frequency::ThreeDay => 3,
            Frequency::Daily => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Frequency::Weekly => "weekly",
            Frequency::ThreeDay => "3day",
            Frequency::Daily => "daily",
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Frequency {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "weekly" | "week" | "7" => Ok(Frequency::Weekly),
            "3day" | "3-day" | "three_day" | "3" => Ok(Frequency::ThreeDay),
            "daily" | "day" | "1" => Ok(Frequency::Daily),
            other => Err(format!("unknown frequency `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchFilter {
    /// Place matches only.
    ExplicitOnly,
    All,
}

impl MatchFilter {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchFilter::ExplicitOnly => "explicit",
            MatchFilter::All => "all",
        }
    }

    pub fn admits(self, source: MatchSource) -> bool {
        self == MatchFilter::All || source == MatchSource::Place
    }
}

impl FromStr for MatchFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "explicit" | "explicit_only" | "place" => Ok(MatchFilter::ExplicitOnly),
            "all" => Ok(MatchFilter::All),
            other => Err(format!("unknown match filter `{other}`")),
        }
    }
}

/// Restricts aggregation to one account class; `None` admits everyone.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountFilter(pub Option<AccountClass>);

impl AccountFilter {
    pub const EVERYONE: AccountFilter = AccountFilter(None);

    pub fn admits(self, class: AccountClass) -> bool {
        self.0.is_none_or(|c| c == class)
    }
}

impl FromStr for AccountFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" | "everyone" | "any" => Ok(AccountFilter(None)),
            other => other.parse::<AccountClass>().map(|c| AccountFilter(Some(c))),
        }
    }
}

impl fmt::Display for AccountFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            None => f.write_str("all"),
            Some(c) => f.write_str(c.as_str()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TimeBucket {
    pub index: usize,
    pub start: NaiveDate,
    /// Nominal length in days (1, 3 or 7).
    pub length: u32,
    /// Days actually covered; shorter than `length` only for the final bucket.
    pub days: u32,
    pub partial: bool,
}

impl TimeBucket {
    pub fn end(&self) -> NaiveDate {
        self.start + Duration::days(self.days as i64 - 1)
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end()
    }
}

/// Consecutive buckets anchored at the window start. A final short bucket is
/// kept and flagged as partial.
pub fn bucketize(window: &StudyWindow, freq: Frequency) -> Vec<TimeBucket> {
    let total = window.days();
    let len = freq.days() as i64;
    (0..(total + len - 1) / len)
        .map(|i| {
            let days = len.min(total - i * len);
            TimeBucket {
                index: i as usize,
                start: window.start + Duration::days(i * len),
                length: len as u32,
                days: days as u32,
                partial: days < len,
            }
        })
        .collect()
}

pub fn bucket_index(window: &StudyWindow, freq: Frequency, date: NaiveDate) -> Option<usize> {
    if !window.contains(date) {
        return None;
    }
    Some(((date - window.start).num_days() / freq.days() as i64) as usize)
}

/// What aggregation needs to know about a cleaned tweet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TweetObservation {
    pub tweet_id: String,
    pub date: NaiveDate,
    pub unit_id: String,
    pub source: MatchSource,
    pub retweet: bool,
    pub account_class: AccountClass,
    pub sentiment: f64,
}

impl TweetObservation {
    pub fn from_clean(t: &CleanTweet, sentiment: f64, utc_offset_minutes: i32) -> Self {
        Self {
            tweet_id: t.tweet.id.clone(),
            date: local_date(t.tweet.timestamp, utc_offset_minutes),
            unit_id: t.location.unit_id.clone(),
            source: t.location.source,
            retweet: t.tweet.is_retweet(),
            account_class: t.tweet.account_class,
            sentiment,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PanelCell {
    pub tweet_count: f64,
    pub retweet_count: f64,
    pub sentiment_total: f64,
    pub per_capita_count: f64,
    pub per_capita_sentiment: f64,
    pub dead_fish: f64,
    pub respiratory: f64,
    /// Undefined below county level.
    pub kbrevis: Option<f64>,
    /// The tweet side of a join supplied this cell.
    pub has_tweets: bool,
    /// The condition side of a join supplied this cell.
    pub has_conditions: bool,
    pub beach_observed: bool,
    pub kbrevis_observed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Unresolved {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Panel {
    pub level: GeoLevel,
    pub freq: Frequency,
    pub matched_by: MatchFilter,
    pub buckets: Vec<TimeBucket>,
    /// Keyed by (unit id, bucket index).
    pub cells: BTreeMap<(String, usize), PanelCell>,
    /// Inputs that could not be placed at this level.
    pub unresolved: Vec<Unresolved>,
}

impl Panel {
    pub fn cell(&self, unit: &str, bucket: usize) -> Option<&PanelCell> {
        self.cells.get(&(unit.to_string(), bucket))
    }

    pub fn units(&self) -> Vec<&str> {
        let mut u: Vec<&str> = self.cells.keys().map(|(u, _)| u.as_str()).collect();
        u.dedup();
        u
    }

    pub fn total_count(&self) -> f64 {
        self.cells.values().map(|c| c.tweet_count).sum()
    }

    /// Bucket-ordered series of one unit.
    pub fn series(&self, unit: &str) -> impl Iterator<Item = (usize, &PanelCell)> {
        self.cells
            .range((unit.to_string(), 0)..=(unit.to_string(), usize::MAX))
            .map(|((_, b), c)| (*b, c))
    }

    fn describe(&self) -> String {
        format!("{}/{}", self.level.as_str(), self.freq)
    }
}

fn empty_cells(registry: &Registry, level: GeoLevel, buckets: usize) -> BTreeMap<(String, usize), PanelCell> {
    let mut cells = BTreeMap::new();
    for u in registry.units_at(level) {
        for b in 0..buckets {
            cells.insert((u.id.clone(), b), PanelCell::default());
        }
    }
    cells
}

/// Fills per-capita fields from the raw tweet fields.
pub fn recompute_per_capita(panel: &mut Panel, registry: &Registry) -> Result<(), GeoError> {
    let mut pops: HashMap<String, f64> = HashMap::new();
    for ((unit, _), cell) in panel.cells.iter_mut() {
        let pop = match pops.get(unit) {
            Some(p) => *p,
            None => {
                let p = registry.denominator_population(unit)?;
                if p == 0 {
                    return Err(GeoError::ZeroPopulation(unit.clone()));
                }
                pops.insert(unit.clone(), p as f64);
                p as f64
            }
        };
        cell.per_capita_count = cell.tweet_count / pop * PER_CAPITA_SCALE;
        cell.per_capita_sentiment = cell.sentiment_total / pop * PER_CAPITA_SCALE;
    }
    Ok(())
}

type Contribution = Result<Vec<(String, f64)>, Unresolved>;

/// Credit of one observation at `level`, rolling finer units up.
fn contributions(obs: &TweetObservation, level: GeoLevel, registry: &Registry) -> Contribution {
    let credit = credit_share(&obs.unit_id, registry).map_err(|e| Unresolved {
        id: obs.tweet_id.clone(),
        reason: e.to_string(),
    })?;
    credit
        .iter()
        .map(|(unit, w)| match registry.ancestor_at(unit, level) {
            Some(a) => Ok((a.to_string(), w)),
            None => Err(Unresolved {
                id: obs.tweet_id.clone(),
                reason: format!("unit `{unit}` does not resolve at {} level", level.as_str()),
            }),
        })
        .collect()
}

/// Tweet panel at one level and frequency. Every unit of the level gets a
/// cell for every bucket. Credit-shared weights are kept fractional.
pub fn aggregate_tweets(
    observations: &[TweetObservation],
    registry: &Registry,
    window: &StudyWindow,
    level: GeoLevel,
    freq: Frequency,
    match_filter: MatchFilter,
    account_filter: AccountFilter,
) -> Result<Panel, AggregationError> {
    let buckets = bucketize(window, freq);
    let mut cells = empty_cells(registry, level, buckets.len());
    for c in cells.values_mut() {
        c.has_tweets = true;
    }
    // Per-observation work runs in parallel; summation stays in input order
    // so results do not depend on the thread count.
    let parts: Vec<Option<(usize, Contribution)>> = observations
        .par_iter()
        .map(|o| {
            if !match_filter.admits(o.source) || !account_filter.admits(o.account_class) {
                return None;
            }
            match bucket_index(window, freq, o.date) {
                Some(b) => Some((b, contributions(o, level, registry))),
                None => Some((
                    usize::MAX,
                    Err(Unresolved {
                        id: o.tweet_id.clone(),
                        reason: format!("date {} outside study window", o.date),
                    }),
                )),
            }
        })
        .collect();
    let mut unresolved = Vec::new();
    for (obs, part) in observations.iter().zip(parts) {
        let Some((bucket, contrib)) = part else { continue };
        match contrib {
            Ok(weights) => {
                for (unit, w) in weights {
                    let cell = cells.entry((unit, bucket)).or_insert_with(|| PanelCell {
                        has_tweets: true,
                        ..Default::default()
                    });
                    cell.tweet_count += w;
                    cell.sentiment_total += w * obs.sentiment;
                    if obs.retweet {
                        cell.retweet_count += w;
                    }
                }
            }
            Err(u) => unresolved.push(u),
        }
    }
    let mut panel = Panel {
        level,
        freq,
        matched_by: match_filter,
        buckets,
        cells,
        unresolved,
    };
    recompute_per_capita(&mut panel, registry)?;
    Ok(panel)
}

/// Statistic applied to the largest K. brevis counts of a bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopKStat {
    Mean,
    Sum,
    Max,
}

impl FromStr for TopKStat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(TopKStat::Mean),
            "sum" => Ok(TopKStat::Sum),
            "max" => Ok(TopKStat::Max),
            other => Err(format!("unknown top-k statistic `{other}`")),
        }
    }
}

/// Mean (or sum, or max) of the `k` largest values; all values when fewer.
pub fn top_k_stat(values: &[f64], k: usize, stat: TopKStat) -> Option<f64> {
    if values.is_empty() || k == 0 {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.truncate(k);
    Some(match stat {
        TopKStat::Mean => v.iter().sum::<f64>() / v.len() as f64,
        TopKStat::Sum => v.iter().sum(),
        TopKStat::Max => v[0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionConfig {
    /// Beaches within this many miles of a city or ZCTA centroid count
    /// toward it.
    pub beach_radius_miles: f64,
    pub kbrevis_top_k: usize,
    pub kbrevis_stat: TopKStat,
    /// Samples outside every county polygon go to the nearest county
    /// centroid within this distance.
    pub sample_max_miles: f64,
}

impl Default for ConditionConfig {
    fn default() -> Self {
        Self {
            beach_radius_miles: 10.0,
            kbrevis_top_k: 5,
            kbrevis_stat: TopKStat::Mean,
            sample_max_miles: 30.0,
        }
    }
}

/// County of each sample, in input order.
pub fn assign_samples(
    samples: &[KBrevisSample],
    registry: &Registry,
    max_miles: f64,
) -> Result<Vec<Option<String>>, GeoError> {
    samples
        .par_iter()
        .map(|s| Ok(assign_sample_to_county(s.location, registry, max_miles)?.county().map(str::to_string)))
        .collect()
}

pub struct ConditionInputs<'a> {
    pub reports: &'a [BeachReport],
    pub samples: &'a [KBrevisSample],
    /// County of each sample as returned by [`assign_samples`].
    pub sample_counties: &'a [Option<String>],
    pub beaches: &'a [BeachLocation],
}

#[derive(Default, Clone)]
struct BeachAcc {
    dead_fish: f64,
    respiratory: f64,
    n: usize,
}

/// Condition panel at one level and frequency.
pub fn aggregate_conditions(
    inputs: &ConditionInputs<'_>,
    registry: &Registry,
    window: &StudyWindow,
    level: GeoLevel,
    freq: Frequency,
    cfg: &ConditionConfig,
) -> Result<Panel, AggregationError> {
    let buckets = bucketize(window, freq);
    let mut cells = empty_cells(registry, level, buckets.len());
    let mut unresolved = Vec::new();
    let mut beach_acc: HashMap<(String, usize), BeachAcc> = HashMap::new();

    match level {
        GeoLevel::Region | GeoLevel::County => {
            for r in inputs.reports {
                let Some(b) = bucket_index(window, freq, r.date) else { continue };
                match registry.ancestor_at(&r.county, level) {
                    Some(unit) => {
                        let acc = beach_acc.entry((unit.to_string(), b)).or_default();
                        acc.dead_fish += r.dead_fish as f64;
                        acc.respiratory += r.respiratory as f64;
                        acc.n += 1;
                    }
                    None => unresolved.push(Unresolved {
                        id: format!("{}@{}", r.beach_id, r.date),
                        reason: format!("county `{}` not in registry", r.county),
                    }),
                }
            }
        }
        GeoLevel::City | GeoLevel::Zcta => {
            let located: HashMap<&str, _> = inputs.beaches.iter().map(|b| (b.beach_id.as_str(), b.location)).collect();
            let mut nearby: HashMap<&str, Vec<String>> = HashMap::new();
            for unit in registry.units_at(level) {
                for (beach, loc) in &located {
                    if geodesic_miles(unit.centroid, *loc)? <= cfg.beach_radius_miles {
                        nearby.entry(*beach).or_default().push(unit.id.clone());
                    }
                }
            }
            for r in inputs.reports {
                let Some(b) = bucket_index(window, freq, r.date) else { continue };
                for unit in nearby.get(r.beach_id.as_str()).into_iter().flatten() {
                    let acc = beach_acc.entry((unit.clone(), b)).or_default();
                    acc.dead_fish += r.dead_fish as f64;
                    acc.respiratory += r.respiratory as f64;
                    acc.n += 1;
                }
            }
        }
    }

    let mut kb: HashMap<(String, usize), Vec<f64>> = HashMap::new();
    if level <= GeoLevel::County {
        for (s, county) in inputs.samples.iter().zip(inputs.sample_counties) {
            let Some(b) = bucket_index(window, freq, s.date) else { continue };
            match county.as_deref().and_then(|c| registry.ancestor_at(c, level)) {
                Some(unit) => kb.entry((unit.to_string(), b)).or_default().push(s.cells_per_liter),
                None => unresolved.push(Unresolved {
                    id: s.sample_id.clone(),
                    reason: "sample not assigned to any county".into(),
                }),
            }
        }
    }

    for (key, cell) in cells.iter_mut() {
        cell.has_conditions = true;
        if let Some(acc) = beach_acc.get(key) {
            if acc.n > 0 {
                cell.dead_fish = acc.dead_fish / acc.n as f64;
                cell.respiratory = acc.respiratory / acc.n as f64;
                cell.beach_observed = true;
            }
        }
        if level <= GeoLevel::County {
            let stat = kb.get(key).and_then(|v| top_k_stat(v, cfg.kbrevis_top_k, cfg.kbrevis_stat));
            cell.kbrevis_observed = stat.is_some();
            cell.kbrevis = Some(stat.unwrap_or(0.0));
        }
    }
    Ok(Panel {
        level,
        freq,
        matched_by: MatchFilter::All,
        buckets,
        cells,
        unresolved,
    })
}

/// Full outer join on (unit, bucket). Cells missing on one side keep zeros
/// there and carry `has_tweets` / `has_conditions` = false.
pub fn join_panels(tweets: &Panel, conditions: &Panel) -> Result<Panel, AggregationError> {
    if tweets.level != conditions.level || tweets.freq != conditions.freq {
        return Err(AggregationError::Mismatch {
            left: tweets.describe(),
            right: conditions.describe(),
        });
    }
    let mut cells = tweets.cells.clone();
    for c in cells.values_mut() {
        c.has_tweets = true;
    }
    for (key, cond) in &conditions.cells {
        let cell = cells.entry(key.clone()).or_default();
        cell.dead_fish = cond.dead_fish;
        cell.respiratory = cond.respiratory;
        cell.kbrevis = cond.kbrevis;
        cell.beach_observed = cond.beach_observed;
        cell.kbrevis_observed = cond.kbrevis_observed;
        cell.has_conditions = true;
    }
    let buckets = if tweets.buckets.len() >= conditions.buckets.len() {
        tweets.buckets.clone()
    } else {
        conditions.buckets.clone()
    };
    let mut unresolved = tweets.unresolved.clone();
    unresolved.extend(conditions.unresolved.iter().cloned());
    Ok(Panel {
        level: tweets.level,
        freq: tweets.freq,
        matched_by: tweets.matched_by,
        buckets,
        cells,
        unresolved,
    })
}

pub const PANEL_HEADER: [&str; 13] = [
    "unit",
    "level",
    "bucket_start",
    "freq",
    "match",
    "count",
    "per_capita",
    "sentiment",
    "per_capita_sentiment",
    "dead_fish",
    "respiratory",
    "kbrevis",
    "retweets",
];

pub fn write_panel_csv<W: Write>(w: W, panels: &[&Panel]) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(PANEL_HEADER)?;
    for p in panels {
        for ((unit, b), c) in &p.cells {
            let start = p.buckets.get(*b).map(|b| b.start.to_string()).unwrap_or_default();
            wtr.write_record([
                unit.clone(),
                if p.level == GeoLevel::Region { "total".into() } else { p.level.as_str().into() },
                start,
                p.freq.to_string(),
                p.matched_by.as_str().into(),
                c.tweet_count.to_string(),
                c.per_capita_count.to_string(),
                c.sentiment_total.to_string(),
                c.per_capita_sentiment.to_string(),
                c.dead_fish.to_string(),
                c.respiratory.to_string(),
                c.kbrevis.map(|k| k.to_string()).unwrap_or_default(),
                c.retweet_count.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
