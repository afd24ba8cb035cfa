//! Tweet records and their JSONL / CSV encodings.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::{open, CorpusError, Parsed, RecordError};
use crate::corpus::registry::Registry;
use crate::geospatial::LatLon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TweetKind {
    Original,
    Reply,
    Retweet,
}

impl FromStr for TweetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "original" | "tweet" => Ok(TweetKind::Original),
            "reply" => Ok(TweetKind::Reply),
            "retweet" | "rt" => Ok(TweetKind::Retweet),
            other => Err(format!("unknown tweet kind `{other}`")),
        }
    }
}

impl TweetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TweetKind::Original => "original",
            TweetKind::Reply => "reply",
            TweetKind::Retweet => "retweet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccountClass {
    Citizen,
    Media,
    Other,
    Unknown,
}

impl FromStr for AccountClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "citizen" => Ok(AccountClass::Citizen),
            "media" => Ok(AccountClass::Media),
            "other" => Ok(AccountClass::Other),
            "unknown" | "" => Ok(AccountClass::Unknown),
            other => Err(format!("unknown account class `{other}`")),
        }
    }
}

impl AccountClass {
    pub fn as_str(self) -> &'static str {
        match self {
            AccountClass::Citizen => "citizen",
            AccountClass::Media => "media",
            AccountClass::Other => "other",
            AccountClass::Unknown => "unknown",
        }
    }
}

/// How a tweet was tied to a location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchSource {
    /// Explicit geo-tag chosen by the user.
    Place,
    /// Location field of the author's profile.
    Geoprofile,
}

impl fmt::Display for MatchSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchSource::Place => "place",
            MatchSource::Geoprofile => "geoprofile",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct GeoRef {
    pub unit_id: String,
    pub source: MatchSource,
    pub raw_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tweet {
    pub id: String,
    pub timestamp: DateTime<Utc>,
    pub text: String,
    pub kind: TweetKind,
    pub account_class: AccountClass,
    pub place_match: Option<GeoRef>,
    pub profile_match: Option<GeoRef>,
    pub coords: Option<LatLon>,
    pub user: Option<String>,
    pub verified: Option<bool>,
}

impl Tweet {
    pub fn is_retweet(&self) -> bool {
        self.kind == TweetKind::Retweet
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TweetFormat {
    Jsonl,
    Csv,
}

impl FromStr for TweetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(TweetFormat::Jsonl),
            "csv" => Ok(TweetFormat::Csv),
            other => Err(format!("unknown tweet format `{other}`")),
        }
    }
}

impl TweetFormat {
    pub fn from_path(path: &Path) -> TweetFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => TweetFormat::Csv,
            _ => TweetFormat::Jsonl,
        }
    }
}

/// Flat on-disk form of a tweet, shared by the JSONL and CSV encodings.
/// `place_unit`/`profile_unit` are registry ids; `profile_label` is the raw
/// profile location text and is resolved against the registry when no
/// `profile_unit` is given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub created_at: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verified: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub place_unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub place_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub account_class: Option<String>,
}

pub const TWEET_CSV_HEADER: [&str; 13] = [
    "id",
    "created_at",
    "text",
    "kind",
    "verified",
    "user",
    "place_unit",
    "place_label",
    "profile_unit",
    "profile_label",
    "lat",
    "lon",
    "account_class",
];

fn blank_to_none(s: Option<String>) -> Option<String> {
    s.map(|v| v.trim().to_string()).filter(|v| !v.is_empty())
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, String> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(naive.and_utc());
        }
    }
    if let Ok(dt) = DateTime::parse_from_str(s, "%a %b %d %H:%M:%S %z %Y") {
        return Ok(dt.with_timezone(&Utc));
    }
    Err(format!("unparseable timestamp `{s}`"))
}

impl TweetRecord {
    /// Resolves this record against the registry.
    pub fn into_tweet(self, registry: &Registry) -> Result<Tweet, String> {
        if self.id.trim().is_empty() {
            return Err("missing id".into());
        }
        let timestamp = parse_timestamp(&self.created_at)?;
        let kind = match blank_to_none(self.kind) {
            Some(k) => k.parse()?,
            None if self.text.trim_start().starts_with("RT @") => TweetKind::Retweet,
            None => TweetKind::Original,
        };
        let account_class = match blank_to_none(self.account_class) {
            Some(c) => c.parse()?,
            None => AccountClass::Unknown,
        };
        let place_unit = blank_to_none(self.place_unit);
        let place_label = blank_to_none(self.place_label);
        let profile_unit = blank_to_none(self.profile_unit);
        let profile_label = blank_to_none(self.profile_label);
        if place_unit.is_none() && place_label.is_none() && profile_unit.is_none() && profile_label.is_none() {
            return Err("record has no place or profile location".into());
        }
        let place_match = resolve(registry, place_unit, place_label, MatchSource::Place)?;
        let profile_match = resolve(registry, profile_unit, profile_label, MatchSource::Geoprofile)?;
        let coords = match (self.lat, self.lon) {
            (Some(lat), Some(lon)) => Some(LatLon::new(lat, lon).validate().map_err(|e| e.to_string())?),
            (None, None) => None,
            _ => return Err("lat and lon must be given together".into()),
        };
        Ok(Tweet {
            id: self.id,
            timestamp,
            text: self.text,
            kind,
            account_class,
            place_match,
            profile_match,
            coords,
            user: blank_to_none(self.user),
            verified: self.verified,
        })
    }
}

fn resolve(
    registry: &Registry,
    unit: Option<String>,
    label: Option<String>,
    source: MatchSource,
) -> Result<Option<GeoRef>, String> {
    let unit_id = match (&unit, &label) {
        (Some(u), _) => {
            if !registry.contains(u) {
                return Err(format!("{source} unit `{u}` is not in the registry"));
            }
            u.clone()
        }
        (None, Some(l)) => registry
            .resolve_label(l)
            .ok_or_else(|| format!("{source} label `{l}` does not resolve to a registry unit"))?
            .to_string(),
        (None, None) => return Ok(None),
    };
    let raw_label = label.unwrap_or_else(|| {
        registry
            .unit(&unit_id)
            .map(|u| u.name.clone())
            .or_else(|| registry.shared_unit(&unit_id).map(|s| s.name.clone()))
            .unwrap_or_else(|| unit_id.clone())
    });
    Ok(Some(GeoRef {
        unit_id,
        source,
        raw_label,
    }))
}

impl From<&Tweet> for TweetRecord {
    fn from(t: &Tweet) -> Self {
        TweetRecord {
            id: t.id.clone(),
            created_at: t.timestamp.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            text: t.text.clone(),
            kind: Some(t.kind.as_str().to_string()),
            verified: t.verified,
            user: t.user.clone(),
            place_unit: t.place_match.as_ref().map(|g| g.unit_id.clone()),
            place_label: t.place_match.as_ref().map(|g| g.raw_label.clone()),
            profile_unit: t.profile_match.as_ref().map(|g| g.unit_id.clone()),
            profile_label: t.profile_match.as_ref().map(|g| g.raw_label.clone()),
            lat: t.coords.map(|c| c.lat),
            lon: t.coords.map(|c| c.lon),
            account_class: Some(t.account_class.as_str().to_string()),
        }
    }
}

fn finish(records: Vec<(usize, Result<TweetRecord, String>)>, registry: &Registry) -> Parsed<Tweet> {
    let mut out = Parsed::default();
    let mut seen = HashSet::new();
    for (line, rec) in records {
        let result = rec.and_then(|r| {
            if !seen.insert(r.id.clone()) {
                return Err(format!("duplicate tweet id `{}`", r.id));
            }
            r.into_tweet(registry)
        });
        match result {
            Ok(t) => out.records.push(t),
            Err(message) => out.errors.push(RecordError { line, message }),
        }
    }
    out
}

pub fn read_tweets_jsonl<R: Read>(reader: R, registry: &Registry) -> Result<Parsed<Tweet>, CorpusError> {
    let mut records = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: "<jsonl>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str::<TweetRecord>(&line).map_err(|e| e.to_string());
        records.push((i + 1, rec));
    }
    Ok(finish(records, registry))
}

pub fn read_tweets_csv<R: Read>(reader: R, registry: &Registry) -> Result<Parsed<Tweet>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let headers = rdr.headers()?.clone();
    for required in ["id", "created_at", "text"] {
        if !headers.iter().any(|h| h == required) {
            return Err(CorpusError::Header {
                expected: TWEET_CSV_HEADER.join(","),
                found: headers.iter().collect::<Vec<_>>().join(","),
            });
        }
    }
    let records = rdr
        .deserialize::<TweetRecord>()
        .enumerate()
        .map(|(i, r)| (i + 2, r.map_err(|e| e.to_string())))
        .collect();
    Ok(finish(records, registry))
}

/// Parses a tweet file. Malformed records are returned in `errors` with
/// their line numbers; only I/O and header problems fail the whole file.
pub fn parse_tweets(path: &Path, format: TweetFormat, registry: &Registry) -> Result<Parsed<Tweet>, CorpusError> {
    let file = open(path)?;
    match format {
        TweetFormat::Jsonl => read_tweets_jsonl(file, registry),
        TweetFormat::Csv => read_tweets_csv(file, registry),
    }
}

pub fn write_tweets_jsonl<W: Write>(mut w: W, tweets: &[Tweet]) -> Result<(), CorpusError> {
    for t in tweets {
        let line = serde_json::to_string(&TweetRecord::from(t))?;
        writeln!(w, "{line}").map_err(|source| CorpusError::Io {
            path: "<jsonl>".into(),
            source,
        })?;
    }
    Ok(())
}

pub fn write_tweets_csv<W: Write>(w: W, tweets: &[Tweet]) -> Result<(), CorpusError> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(TWEET_CSV_HEADER)?;
    for t in tweets {
        let r = TweetRecord::from(t);
        let opt = |v: &Option<String>| v.clone().unwrap_or_default();
        let optf = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        wtr.write_record([
            r.id.clone(),
            r.created_at.clone(),
            r.text.clone(),
            opt(&r.kind),
            r.verified.map(|v| v.to_string()).unwrap_or_default(),
            opt(&r.user),
            opt(&r.place_unit),
            opt(&r.place_label),
            opt(&r.profile_unit),
            opt(&r.profile_label),
            optf(r.lat),
            optf(r.lon),
            opt(&r.account_class),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}
