//! Deterministic synthetic corpora with planted ground truth.
//!
//! The generator lays out a strip of coastal counties (latitude bands), each
//! with cities running inland from the coast, one ZCTA per city and a row of
//! beaches on the shoreline. A bloom drifts along the coast during the
//! middle part of the window and produces high-impact K. brevis samples.
//!
//! Tweets come first: a city's weekly per-capita rate is `peak_rate *
//! exp(-distance_decay * d)` in weeks with high-impact sites (d = miles from
//! the city centroid to the nearest site) and `base_rate` otherwise, times
//! log-normal noise. County weekly per-capita counts Y are then standardized
//! and the beach condition latent is `s = rho * Y~ + sqrt(1 - rho^2) * eta`
//! with independent standard normal `eta`; dead-fish and respiratory
//! reports are integer values whose county-week mean is an affine map of
//! `s`. Retweet probability is `clamp(retweet_base + slope * d)`.

pub mod rng;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, NaiveTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::stats::pearson;
use crate::corpus::conditions::{write_beach_locations, write_beach_reports, write_kbrevis_samples};
use crate::corpus::registry::{polygons_to_geojson, read_geo_registry, write_geo_registry};
use crate::corpus::tweets::write_tweets_jsonl;
use crate::corpus::{
    AccountClass, BeachLocation, BeachReport, CorpusError, GeoLevel, GeoRef, KBrevisSample, MatchSource, Registry, Tweet, TweetKind,
};
use crate::geospatial::{min_distance_miles, LatLon, PER_CAPITA_SCALE};
use rng::Rng;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    Spec(String),
    #[error("infeasible coupling: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2018, 5, 15).expect("valid date")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub window_start: NaiveDate,
    pub window_days: u32,
    pub counties: usize,
    pub cities_per_county: usize,
    pub beaches_per_county: usize,
    /// Target correlation between county weekly per-capita counts and the
    /// beach condition indices.
    pub coupling_rho: f64,
    /// Per-mile exponential decay of tweet rates away from high-impact sites.
    pub distance_decay: f64,
    pub retweet_base: f64,
    pub retweet_distance_slope: f64,
    /// Political-nickname tweets added, as a fraction of real tweets.
    pub political_noise_rate: f64,
    /// Weekly tweets per 100k population outside bloom weeks.
    pub base_rate: f64,
    /// Weekly tweets per 100k population at distance zero in bloom weeks.
    pub peak_rate: f64,
    /// Standard deviation of the log-normal count noise.
    pub count_noise: f64,
    /// Share of tweets that are explicit place matches with coordinates.
    pub explicit_fraction: f64,
    pub verified_fraction: f64,
    /// Bloom weeks run from this fraction of the window to `bloom_end`.
    pub bloom_start: f64,
    pub bloom_end: f64,
    pub utc_offset_minutes: i32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            window_start: default_start(),
            window_days: 364,
            counties: 5,
            cities_per_county: 3,
            beaches_per_county: 4,
            coupling_rho: 0.8,
            distance_decay: 0.0,
            retweet_base: 0.4,
            retweet_distance_slope: 0.0,
            political_noise_rate: 0.05,
            base_rate: 2.0,
            peak_rate: 30.0,
            count_noise: 0.3,
            explicit_fraction: 0.1,
            verified_fraction: 0.05,
            bloom_start: 0.15,
            bloom_end: 0.85,
            utc_offset_minutes: -300,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Spec(m.to_string()));
        if !(-1.0..=1.0).contains(&self.coupling_rho) {
            return Err(SynthError::Infeasible(format!("coupling_rho {} outside [-1, 1]", self.coupling_rho)));
        }
        if !(self.distance_decay >= 0.0) {
            return bad("distance_decay must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.political_noise_rate) {
            return bad("political_noise_rate must be in [0, 1]");
        }
        for (name, v) in [
            ("explicit_fraction", self.explicit_fraction),
            ("verified_fraction", self.verified_fraction),
            ("bloom_start", self.bloom_start),
            ("bloom_end", self.bloom_end),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must be in [0, 1]"));
            }
        }
        if self.bloom_start > self.bloom_end {
            return bad("bloom_start must not exceed bloom_end");
        }
        if !(self.base_rate >= 0.0 && self.peak_rate >= 0.0 && self.count_noise >= 0.0) {
            return bad("rates and count_noise must be >= 0");
        }
        if !self.retweet_base.is_finite() || !self.retweet_distance_slope.is_finite() {
            return bad("retweet parameters must be finite");
        }
        if self.counties == 0 || self.cities_per_county == 0 || self.beaches_per_county == 0 {
            return bad("counties, cities_per_county and beaches_per_county must be positive");
        }
        if self.counties > 8 {
            return bad("at most 8 counties fit the default coastline");
        }
        if self.window_days < 7 {
            return bad("window_days must be at least 7");
        }
        Ok(())
    }

    pub fn window_end(&self) -> NaiveDate {
        self.window_start + Duration::days(self.window_days as i64 - 1)
    }
}

/// Ground truth written next to the generated files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truth {
    pub spec: SynthSpec,
    pub weeks: usize,
    pub bloom_weeks: Vec<usize>,
    pub tweets: usize,
    pub political_tweets: usize,
    pub explicit_tweets: usize,
    pub retweets: usize,
    pub high_impact_samples: usize,
    /// Sample correlation of county weekly per-capita counts with the
    /// condition latent before quantization to integer reports.
    pub latent_coupling: Option<f64>,
    /// Same, against the realized county-week mean dead-fish index.
    pub realized_dead_fish_coupling: Option<f64>,
    pub realized_respiratory_coupling: Option<f64>,
    pub county_ids: Vec<String>,
    pub city_ids: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub registry: Registry,
    pub polygons: BTreeMap<String, Vec<LatLon>>,
    pub tweets: Vec<Tweet>,
    pub beach_reports: Vec<BeachReport>,
    pub kbrevis: Vec<KBrevisSample>,
    pub beaches: Vec<BeachLocation>,
    pub truth: Truth,
}

const LAT0: f64 = 26.4;
const BAND: f64 = 0.5;
const COAST_LON: f64 = -82.85;
const WEST_LON: f64 = -83.0;
const EAST_LON: f64 = -81.9;

const TEMPLATES: [&str; 14] = [
    "Red tide at {p} today, dead fish everywhere",
    "The smell of red tide in {p} is awful",
    "Beach in {p} looks gorgeous, no red tide",
    "Is the red tide bad in {p} this week?",
    "#redtide killing fish near {p}...",
    "Water at {p} is discolored, red tide again",
    "Coughing on the beach in {p}, red tide is terrible",
    "Great day at {p}, red tide is gone",
    "red tide update for {p}: high concentrations offshore",
    "So sad to see dead dolphins near {p} because of red tide",
    "Restaurants in {p} are hurting from this red tide",
    "County officials in {p} are testing the water for red tide",
    "Not too bad at {p} today, just a little red tide",
    "redtide in {p} is really disgusting",
];

const POLITICAL: [&str; 4] = [
    "Red Tide Rick has to go",
    "Vote out #RedTideRick in November",
    "Red Tide Rick strikes again",
    "The Red Tide party does not care about us",
];

struct City {
    id: String,
    name: String,
    county: usize,
    pop: u64,
    centroid: LatLon,
    zcta: String,
    zcta_name: String,
    zcta_centroid: LatLon,
}

type Geography = (Registry, BTreeMap<String, Vec<LatLon>>, Vec<City>, Vec<BeachLocation>);

fn build_geography(spec: &SynthSpec, rng: &mut Rng) -> Result<Geography, SynthError> {
    let mut csv = String::from("id,level,name,parent,metro_group,population,centroid_lat,centroid_lon\n");
    csv.push_str(&format!("synth_region,region,Synthetic Coast,,,,{},{}\n", LAT0 + BAND * spec.counties as f64 / 2.0, -82.45));
    let mut polygons = BTreeMap::new();
    let mut cities = Vec::new();
    let mut beaches = Vec::new();
    let nc = spec.cities_per_county;
    for k in 0..spec.counties {
        let lo = LAT0 + BAND * k as f64;
        let hi = lo + BAND;
        let cid = format!("county_{k:02}");
        let pop = 250_000 + 1000 * rng.below(250);
        csv.push_str(&format!("{cid},county,County {k},synth_region,,{pop},{},{}\n", lo + BAND / 2.0, -82.45));
        polygons.insert(
            cid.clone(),
            vec![
                LatLon::new(lo, WEST_LON),
                LatLon::new(lo, EAST_LON),
                LatLon::new(hi, EAST_LON),
                LatLon::new(hi, WEST_LON),
                LatLon::new(lo, WEST_LON),
            ],
        );
        for j in 0..nc {
            let lat = lo + BAND * (j as f64 + 0.5) / nc as f64 + rng.range(-0.03, 0.03);
            let lon = -82.78 + 0.75 * j as f64 / (nc.max(2) - 1) as f64;
            let city_pop = 20_000 + 1000 * rng.below(100);
            let id = format!("city_{k:02}_{j}");
            let name = format!("Town {k}-{j}");
            let centroid = LatLon::new(round6(lat), round6(lon));
            let zcta = format!("z_{k:02}_{j}");
            let zcta_name = format!("{}", 34000 + 10 * k + j);
            let zcta_centroid = LatLon::new(round6(lat + 0.01), round6(lon + 0.01));
            csv.push_str(&format!("{id},city,{name},{cid},,{city_pop},{},{}\n", centroid.lat, centroid.lon));
            csv.push_str(&format!("{zcta},zcta,{zcta_name},{id},,,{},{}\n", zcta_centroid.lat, zcta_centroid.lon));
            cities.push(City {
                id,
                name,
                county: k,
                pop: city_pop,
                centroid,
                zcta,
                zcta_name,
                zcta_centroid,
            });
        }
        for b in 0..spec.beaches_per_county {
            let lat = lo + BAND * (b as f64 + 0.5) / spec.beaches_per_county as f64;
            beaches.push(BeachLocation {
                beach_id: format!("beach_{k:02}_{b}"),
                location: LatLon::new(round6(lat), COAST_LON),
            });
        }
    }
    let mut registry = read_geo_registry(csv.as_bytes())?;
    registry.attach_polygons(polygons.clone())?;
    Ok((registry, polygons, cities, beaches))
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

fn standardize(v: &[f64]) -> Option<Vec<f64>> {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
    if !(sd > 0.0) {
        return None;
    }
    Some(v.iter().map(|x| (x - m) / sd).collect())
}

/// Integer reports in `0..=max` over `n` slots whose mean is `target`
/// rounded to the nearest `1/n`.
fn spread_reports(target: f64, n: usize, max: u8, rng: &mut Rng) -> Vec<u8> {
    let total = ((target * n as f64).round() as i64).clamp(0, max as i64 * n as i64) as usize;
    let base = total / n;
    let extra = total % n;
    let mut v: Vec<u8> = (0..n).map(|i| (base + usize::from(i < extra)) as u8).collect();
    rng.shuffle(&mut v);
    v
}

pub fn generate(spec: &SynthSpec) -> Result<SynthOutput, SynthError> {
    spec.validate()?;
    let mut geo_rng = Rng::fork(spec.seed, 1);
    let mut bloom_rng = Rng::fork(spec.seed, 2);
    let mut tweet_rng = Rng::fork(spec.seed, 3);
    let mut cond_rng = Rng::fork(spec.seed, 4);

    let (registry, polygons, cities, beaches) = build_geography(spec, &mut geo_rng)?;
    let days = spec.window_days as i64;
    let weeks = ((days + 6) / 7) as usize;
    let week_days = |w: usize| 7.min(days - 7 * w as i64);
    let week_start = |w: usize| spec.window_start + Duration::days(7 * w as i64);

    // bloom and K. brevis samples
    let lat_min = LAT0;
    let lat_max = LAT0 + BAND * spec.counties as f64;
    let first = (spec.bloom_start * weeks as f64).floor() as usize;
    let last = (spec.bloom_end * weeks as f64).ceil() as usize;
    let phase = bloom_rng.range(0.0, std::f64::consts::TAU);
    let mut kbrevis = Vec::new();
    let mut sites: Vec<Vec<LatLon>> = vec![Vec::new(); weeks];
    let mut bloom_weeks = Vec::new();
    for (w, week_sites) in sites.iter_mut().enumerate() {
        let active = w >= first && w < last;
        let center = lat_min + (lat_max - lat_min) * (0.5 + 0.45 * (std::f64::consts::TAU * w as f64 / 26.0 + phase).sin());
        let extent = 0.35 + 0.3 * bloom_rng.uniform();
        for k in 0..spec.counties {
            let lo = LAT0 + BAND * k as f64;
            let hi = lo + BAND;
            let mut push = |lat: f64, cells: f64, rng: &mut Rng| {
                let day = week_start(w) + Duration::days(rng.below(week_days(w) as u64) as i64);
                let location = LatLon::new(round6(lat), round6(COAST_LON + rng.range(-0.02, 0.02)));
                kbrevis.push(KBrevisSample {
                    sample_id: format!("k{:05}", kbrevis.len()),
                    date: day,
                    location,
                    cells_per_liter: cells.round(),
                });
                location
            };
            for _ in 0..2 {
                let lat = bloom_rng.range(lo + 0.01, hi - 0.01);
                let cells = 10f64.powf(bloom_rng.range(2.0, 5.9));
                push(lat, cells, &mut bloom_rng);
            }
            let (a, b) = (lo.max(center - extent), hi.min(center + extent));
            if active && a < b {
                for _ in 0..2 {
                    let lat = bloom_rng.range(a.max(lo + 0.01), b.min(hi - 0.01).max(a.max(lo + 0.01)));
                    let cells = bloom_rng.range(1.2e6, 6e6);
                    let loc = push(lat, cells, &mut bloom_rng);
                    week_sites.push(loc);
                }
            }
        }
        if !week_sites.is_empty() {
            bloom_weeks.push(w);
        }
    }
    let high_impact_samples = sites.iter().map(Vec::len).sum();

    // tweets
    let mut raw: Vec<Tweet> = Vec::new();
    let mut county_counts = vec![vec![0usize; weeks]; spec.counties];
    let (mut explicit, mut retweets) = (0usize, 0usize);
    let local_to_utc = |date: NaiveDate, secs: u32| {
        let t = date.and_time(NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).expect("valid time"));
        Utc.from_utc_datetime(&(t - Duration::minutes(spec.utc_offset_minutes as i64)))
    };
    for w in 0..weeks {
        for city in &cities {
            let d_city = min_distance_miles(city.centroid, &sites[w]).map_err(|e| SynthError::Spec(e.to_string()))?;
            let rate = match d_city {
                Some(d) => spec.peak_rate * (-spec.distance_decay * d).exp(),
                None => spec.base_rate,
            };
            let expected = rate * city.pop as f64 / PER_CAPITA_SCALE * (week_days(w) as f64 / 7.0);
            let noise = (spec.count_noise * tweet_rng.normal()).exp();
            let n = (expected * noise).round() as usize;
            county_counts[city.county][w] += n;
            for _ in 0..n {
                let is_explicit = tweet_rng.bernoulli(spec.explicit_fraction);
                let loc = if is_explicit { city.zcta_centroid } else { city.centroid };
                let d = min_distance_miles(loc, &sites[w]).map_err(|e| SynthError::Spec(e.to_string()))?;
                let p_rt = match d {
                    Some(d) => (spec.retweet_base + spec.retweet_distance_slope * d).clamp(0.0, 1.0),
                    None => spec.retweet_base.clamp(0.0, 1.0),
                };
                let is_rt = tweet_rng.bernoulli(p_rt);
                let place_name = if is_explicit { &city.zcta_name } else { &city.name };
                let body = tweet_rng.choose(&TEMPLATES).replace("{p}", &city.name);
                let handle = format!("user{}", tweet_rng.below(20_000));
                let (kind, text) = if is_rt {
                    (TweetKind::Retweet, format!("RT @{}: {body}", format_args!("user{}", tweet_rng.below(20_000))))
                } else if tweet_rng.bernoulli(0.1) {
                    (TweetKind::Reply, format!("@user{} {body}", tweet_rng.below(20_000)))
                } else {
                    (TweetKind::Original, body)
                };
                let verified = tweet_rng.bernoulli(spec.verified_fraction);
                let day = week_start(w) + Duration::days(tweet_rng.below(week_days(w) as u64) as i64);
                let secs = tweet_rng.below(86_400) as u32;
                let geo = GeoRef {
                    unit_id: if is_explicit { city.zcta.clone() } else { city.id.clone() },
                    source: if is_explicit { MatchSource::Place } else { MatchSource::Geoprofile },
                    raw_label: place_name.clone(),
                };
                explicit += usize::from(is_explicit);
                retweets += usize::from(is_rt);
                raw.push(Tweet {
                    id: String::new(),
                    timestamp: local_to_utc(day, secs),
                    text,
                    kind,
                    account_class: if verified { AccountClass::Media } else { AccountClass::Citizen },
                    place_match: is_explicit.then(|| geo.clone()),
                    profile_match: (!is_explicit).then_some(geo),
                    coords: is_explicit.then_some(loc),
                    user: Some(handle),
                    verified: Some(verified),
                });
            }
        }
    }
    let real = raw.len();
    let n_political = (spec.political_noise_rate * real as f64).round() as usize;
    for _ in 0..n_political {
        let city = &cities[tweet_rng.below(cities.len() as u64) as usize];
        let w = tweet_rng.below(weeks as u64) as usize;
        let day = week_start(w) + Duration::days(tweet_rng.below(week_days(w) as u64) as i64);
        let secs = tweet_rng.below(86_400) as u32;
        raw.push(Tweet {
            id: String::new(),
            timestamp: local_to_utc(day, secs),
            text: tweet_rng.choose(&POLITICAL).to_string(),
            kind: TweetKind::Original,
            account_class: AccountClass::Citizen,
            place_match: None,
            profile_match: Some(GeoRef {
                unit_id: city.id.clone(),
                source: MatchSource::Geoprofile,
                raw_label: city.name.clone(),
            }),
            coords: None,
            user: Some(format!("user{}", tweet_rng.below(20_000))),
            verified: Some(false),
        });
    }
    raw.sort_by_key(|t| t.timestamp);
    for (i, t) in raw.iter_mut().enumerate() {
        t.id = format!("s{}-{i:07}", spec.seed);
    }

    // conditions coupled to county weekly per-capita counts
    let county_pop: Vec<f64> = (0..spec.counties)
        .map(|k| registry.unit(&format!("county_{k:02}")).map_or(1.0, |u| u.population as f64))
        .collect();
    let y: Vec<f64> = (0..spec.counties)
        .flat_map(|k| {
            let pop = county_pop[k];
            county_counts[k].iter().map(move |&c| c as f64 / pop * PER_CAPITA_SCALE).collect::<Vec<_>>()
        })
        .collect();
    let rho = spec.coupling_rho;
    let y_std = match standardize(&y) {
        Some(v) => v,
        None if rho == 0.0 => vec![0.0; y.len()],
        None => {
            return Err(SynthError::Infeasible(
                "county weekly counts have no variance, so no correlation can be planted".into(),
            ))
        }
    };
    let noise_weight = (1.0 - rho * rho).max(0.0).sqrt();
    let latent = |rng: &mut Rng| -> Vec<f64> { y_std.iter().map(|v| rho * v + noise_weight * rng.normal()).collect() };
    let s_dead = latent(&mut cond_rng);
    let s_resp = latent(&mut cond_rng);
    let scale = |s: &[f64]| s.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let (dead_scale, resp_scale) = (scale(&s_dead), scale(&s_resp));
    let mut beach_reports = Vec::new();
    let mut dead_means = Vec::with_capacity(y.len());
    let mut resp_means = Vec::with_capacity(y.len());
    for k in 0..spec.counties {
        let county_id = format!("county_{k:02}");
        let county_beaches: Vec<&BeachLocation> = beaches.iter().filter(|b| b.beach_id.starts_with(&format!("beach_{k:02}_"))).collect();
        for w in 0..weeks {
            let idx = k * weeks + w;
            let dead_target = 1.0 + s_dead[idx] * 0.98 / dead_scale;
            let resp_target = 1.5 + s_resp[idx] * 1.47 / resp_scale;
            let slots = county_beaches.len() * week_days(w) as usize;
            let dead = spread_reports(dead_target, slots, 2, &mut cond_rng);
            let resp = spread_reports(resp_target, slots, 3, &mut cond_rng);
            dead_means.push(dead.iter().map(|&v| v as f64).sum::<f64>() / slots as f64);
            resp_means.push(resp.iter().map(|&v| v as f64).sum::<f64>() / slots as f64);
            let mut slot = 0;
            for d in 0..week_days(w) {
                for b in &county_beaches {
                    beach_reports.push(BeachReport {
                        beach_id: b.beach_id.clone(),
                        county: county_id.clone(),
                        date: week_start(w) + Duration::days(d),
                        dead_fish: dead[slot],
                        respiratory: resp[slot],
                    });
                    slot += 1;
                }
            }
        }
    }
    beach_reports.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.beach_id.cmp(&b.beach_id)));
    kbrevis.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.sample_id.cmp(&b.sample_id)));

    let truth = Truth {
        spec: spec.clone(),
        weeks,
        bloom_weeks,
        tweets: raw.len(),
        political_tweets: n_political,
        explicit_tweets: explicit,
        retweets,
        high_impact_samples,
        latent_coupling: pearson(&y, &s_dead).ok(),
        realized_dead_fish_coupling: pearson(&y, &dead_means).ok(),
        realized_respiratory_coupling: pearson(&y, &resp_means).ok(),
        county_ids: registry.units_at(GeoLevel::County).map(|u| u.id.clone()).collect(),
        city_ids: cities.iter().map(|c| c.id.clone()).collect(),
    };
    Ok(SynthOutput {
        registry,
        polygons,
        tweets: raw,
        beach_reports,
        kbrevis,
        beaches,
        truth,
    })
}

/// File names written by [`write_output`].
pub const FILES: [&str; 8] = [
    "tweets.jsonl",
    "beach.csv",
    "kbrevis.csv",
    "beaches.csv",
    "geo_registry.csv",
    "county_polygons.geojson",
    "truth.json",
    "run.conf",
];

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), SynthError> {
    let path = dir.join(name);
    crate::output::write_atomic(&path, bytes).map_err(|source| SynthError::Io { path, source })
}

fn encode(f: impl FnOnce(&mut Vec<u8>) -> Result<(), CorpusError>) -> Result<Vec<u8>, SynthError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Writes the generated corpus plus a `run.conf` pointing at it.
pub fn write_output(out: &SynthOutput, dir: &Path) -> Result<(), SynthError> {
    fs::create_dir_all(dir).map_err(|source| SynthError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_file(dir, "tweets.jsonl", &encode(|b| write_tweets_jsonl(b, &out.tweets))?)?;
    write_file(dir, "beach.csv", &encode(|b| write_beach_reports(b, &out.beach_reports))?)?;
    write_file(dir, "kbrevis.csv", &encode(|b| write_kbrevis_samples(b, &out.kbrevis))?)?;
    write_file(dir, "beaches.csv", &encode(|b| write_beach_locations(b, &out.beaches))?)?;
    write_file(dir, "geo_registry.csv", &encode(|b| write_geo_registry(b, &out.registry))?)?;
    write_file(dir, "county_polygons.geojson", polygons_to_geojson(&out.polygons).as_bytes())?;
    let mut truth = serde_json::to_string_pretty(&out.truth)?;
    truth.push('\n');
    write_file(dir, "truth.json", truth.as_bytes())?;
    let spec = &out.truth.spec;
    let conf = format!(
        "# generated corpus, seed {}\n\
         tweets = tweets.jsonl\n\
         beach = beach.csv\n\
         kbrevis = kbrevis.csv\n\
         beaches = beaches.csv\n\
         registry = geo_registry.csv\n\
         polygons = county_polygons.geojson\n\
         window_start = {}\n\
         window_end = {}\n\
         utc_offset_minutes = {}\n\
         shared_unit_members =\n",
        spec.seed,
        spec.window_start,
        spec.window_end(),
        spec.utc_offset_minutes
    );
    write_file(dir, "run.conf", conf.as_bytes())?;
    Ok(())
}

pub fn read_spec(path: &Path) -> Result<SynthSpec, SynthError> {
    let text = fs::read_to_string(path).map_err(|source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spec(&text)
}

/// Parses and validates a JSON spec; omitted fields take their defaults.
pub fn parse_spec(text: &str) -> Result<SynthSpec, SynthError> {
    let spec: SynthSpec = serde_json::from_str(text)?;
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cleaning::{clean, CleaningConfig, StudyWindow};

    fn small(seed: u64) -> SynthSpec {
        SynthSpec {
            seed,
            window_days: 70,
            counties: 2,
            cities_per_county: 2,
            beaches_per_county: 2,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_output() {
        let a = generate(&small(3)).unwrap();
        let b = generate(&small(3)).unwrap();
        assert_eq!(a.tweets, b.tweets);
        assert_eq!(a.beach_reports, b.beach_reports);
        assert_eq!(a.kbrevis, b.kbrevis);
        assert_eq!(a.truth, b.truth);
        let c = generate(&small(4)).unwrap();
        assert_ne!(a.tweets, c.tweets);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = small(1);
        s.coupling_rho = 1.2;
        assert!(matches!(generate(&s), Err(SynthError::Infeasible(_))));
        let mut s = small(1);
        s.political_noise_rate = 1.5;
        assert!(generate(&s).is_err());
        let mut s = small(1);
        s.distance_decay = -0.1;
        assert!(generate(&s).is_err());
        let mut s = small(1);
        s.count_noise = 0.0;
        s.base_rate = 5.0;
        s.peak_rate = 5.0;
        s.distance_decay = 0.0;
        s.window_days = 7;
        s.counties = 1;
        s.cities_per_county = 1;
        assert!(matches!(generate(&s), Err(SynthError::Infeasible(_))));
    }

    #[test]
    fn reports_within_ranges_and_political_removed() {
        let out = generate(&small(9)).unwrap();
        assert!(out.beach_reports.iter().all(|r| r.dead_fish <= 2 && r.respiratory <= 3));
        assert!(out.truth.political_tweets > 0);
        let window = StudyWindow::new(out.truth.spec.window_start, out.truth.spec.window_end()).unwrap();
        let cleaned = clean(out.tweets.clone(), &CleaningConfig::new(window));
        assert_eq!(cleaned.report.excluded_political, out.truth.political_tweets);
        assert_eq!(cleaned.report.admitted, out.truth.tweets - out.truth.political_tweets);
        assert_eq!(cleaned.report.out_of_window, 0);
    }

    #[test]
    fn spread_reports_hits_target_mean() {
        let mut r = Rng::new(5);
        let v = spread_reports(1.37, 28, 2, &mut r);
        assert_eq!(v.len(), 28);
        assert_eq!(v.iter().map(|&x| x as usize).sum::<usize>(), 38);
        assert!(v.iter().all(|&x| x <= 2));
    }
}
