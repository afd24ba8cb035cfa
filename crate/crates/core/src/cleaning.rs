//! Corpus cleaning: political-nickname exclusion, location resolution with
//! place precedence, Tampa Bay reassignment, study-window filtering and
//! account classification.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::registry::normalize_label;
use crate::corpus::tweets::{AccountClass, GeoRef, MatchSource, Tweet};
use crate::corpus::{check_header, open, CorpusError};

pub const TAMPA_BAY_SHARED: &str = "tampa_bay_shared";

#[derive(Debug, Error, PartialEq)]
pub enum CleaningError {
    #[error("study window is inverted: {start} > {end}")]
    InvertedWindow { start: NaiveDate, end: NaiveDate },
}

/// Inclusive calendar window in local time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl StudyWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, CleaningError> {
        if start > end {
            return Err(CleaningError::InvertedWindow { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn days(&self) -> i64 {
        (self.end - self.start).num_days() + 1
    }
}

/// Converts a UTC timestamp to the local civil date given a fixed offset.
pub fn local_date(ts: DateTime<Utc>, utc_offset_minutes: i32) -> NaiveDate {
    (ts + Duration::minutes(utc_offset_minutes as i64)).date_naive()
}

fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for (i, w) in text.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        if w.is_ascii() {
            out.extend(w.bytes().filter(|&b| b != b'#').map(|b| b.to_ascii_lowercase() as char));
        } else {
            out.push_str(&w.to_lowercase().replace('#', ""));
        }
    }
    out
}

fn occurrences(haystack: &str, needle: &str) -> Vec<(usize, usize)> {
    if needle.is_empty() {
        return Vec::new();
    }
    haystack
        .match_indices(needle)
        .map(|(i, m)| (i, i + m.len()))
        .collect()
}

/// True when every "red tide"/"redtide" mention sits inside one of the
/// political phrases and at least one political phrase occurs.
pub fn is_political_only(text: &str, phrases: &[String]) -> bool {
    let normalized: Vec<String> = phrases.iter().map(|p| normalize_text(p)).collect();
    political_only_normalized(text, &normalized)
}

fn political_only_normalized(text: &str, phrases: &[String]) -> bool {
    let norm = normalize_text(text);
    let spans: Vec<(usize, usize)> = phrases.iter().flat_map(|p| occurrences(&norm, p)).collect();
    if spans.is_empty() {
        return false;
    }
    let mentions: Vec<(usize, usize)> = occurrences(&norm, "red tide")
        .into_iter()
        .chain(occurrences(&norm, "redtide"))
        .collect();
    mentions
        .iter()
        .all(|&(s, e)| spans.iter().any(|&(ps, pe)| ps <= s && e <= pe))
}

pub fn filter_political(tweets: Vec<Tweet>, phrases: &[String]) -> (Vec<Tweet>, Vec<Tweet>) {
    let normalized: Vec<String> = phrases.iter().map(|p| normalize_text(p)).collect();
    let flags: Vec<bool> = tweets
        .par_iter()
        .map(|t| political_only_normalized(&t.text, &normalized))
        .collect();
    let mut kept = Vec::with_capacity(tweets.len());
    let mut political = Vec::new();
    for (t, p) in tweets.into_iter().zip(flags) {
        if p {
            political.push(t);
        } else {
            kept.push(t);
        }
    }
    (kept, political)
}

pub fn load_political_phrases(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// The place match when present, otherwise the profile match.
pub fn resolve_location(tweet: &Tweet) -> Option<&GeoRef> {
    tweet.place_match.as_ref().or(tweet.profile_match.as_ref())
}

/// Re-points geoprofile matches labelled "Tampa Bay" to the shared unit.
/// Returns the (possibly unchanged) reference and whether it changed.
pub fn reassign_tampa_bay(geo: &GeoRef, shared_unit: &str) -> (GeoRef, bool) {
    if geo.source == MatchSource::Geoprofile
        && normalize_label(&geo.raw_label) == "tampa bay"
        && geo.unit_id != shared_unit
    {
        let mut out = geo.clone();
        out.unit_id = shared_unit.to_string();
        return (out, true);
    }
    (geo.clone(), false)
}

pub fn filter_window(
    tweets: Vec<Tweet>,
    window: &StudyWindow,
    utc_offset_minutes: i32,
) -> (Vec<Tweet>, Vec<Tweet>) {
    tweets
        .into_iter()
        .partition(|t| window.contains(local_date(t.timestamp, utc_offset_minutes)))
}

pub fn classify_account(
    verified: Option<bool>,
    handle: Option<&str>,
    overrides: &HashMap<String, AccountClass>,
) -> AccountClass {
    match verified {
        None => AccountClass::Unknown,
        Some(false) => AccountClass::Citizen,
        Some(true) => handle
            .and_then(|h| overrides.get(&h.trim_start_matches('@').to_lowercase()))
            .copied()
            .unwrap_or(AccountClass::Media),
    }
}

#[derive(Deserialize)]
struct OverrideRow {
    handle: String,
    class: String,
}

pub fn read_account_overrides<R: Read>(reader: R) -> Result<HashMap<String, AccountClass>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &["handle", "class"])?;
    let mut out = HashMap::new();
    for (i, row) in rdr.deserialize::<OverrideRow>().enumerate() {
        let row = row?;
        let class = match row.class.to_ascii_lowercase().as_str() {
            "media" => AccountClass::Media,
            "other" => AccountClass::Other,
            other => {
                return Err(CorpusError::Registry(format!(
                    "account_overrides line {}: class `{other}` must be media or other",
                    i + 2
                )))
            }
        };
        out.insert(row.handle.trim_start_matches('@').to_lowercase(), class);
    }
    Ok(out)
}

pub fn parse_account_overrides(path: &Path) -> Result<HashMap<String, AccountClass>, CorpusError> {
    read_account_overrides(open(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleaningConfig {
    pub political_phrases: Vec<String>,
    pub window: StudyWindow,
    pub utc_offset_minutes: i32,
    pub shared_unit: String,
    pub account_overrides: HashMap<String, AccountClass>,
}

impl CleaningConfig {
    pub fn new(window: StudyWindow) -> Self {
        Self {
            political_phrases: load_political_phrases(crate::defaults::POLITICAL_PHRASES),
            window,
            utc_offset_minutes: -300,
            shared_unit: TAMPA_BAY_SHARED.to_string(),
            account_overrides: HashMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input_count: usize,
    pub excluded_political: usize,
    pub out_of_window: usize,
    pub rejected_unlocated: usize,
    /// Tweets carrying both a place and a geoprofile match.
    pub deduped: usize,
    pub reassigned_tampa_bay: usize,
    pub admitted: usize,
}

impl CleaningReport {
    pub fn is_conserved(&self) -> bool {
        self.admitted + self.excluded_political + self.out_of_window + self.rejected_unlocated == self.input_count
    }

    /// Associative merge for sharded runs.
    pub fn merge(self, o: Self) -> Self {
        Self {
            input_count: self.input_count + o.input_count,
            excluded_political: self.excluded_political + o.excluded_political,
            out_of_window: self.out_of_window + o.out_of_window,
            rejected_unlocated: self.rejected_unlocated + o.rejected_unlocated,
            deduped: self.deduped + o.deduped,
            reassigned_tampa_bay: self.reassigned_tampa_bay + o.reassigned_tampa_bay,
            admitted: self.admitted + o.admitted,
        }
    }
}

/// A tweet that survived cleaning, with its single resolved location.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CleanTweet {
    pub tweet: Tweet,
    pub location: GeoRef,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub tweet_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleaningOutcome {
    pub admitted: Vec<CleanTweet>,
    pub rejections: Vec<Rejection>,
    pub report: CleaningReport,
}

/// Runs the full cleaning pipeline. Applying it to its own output is a no-op
/// on the admitted tweets.
pub fn clean(tweets: Vec<Tweet>, cfg: &CleaningConfig) -> CleaningOutcome {
    let mut report = CleaningReport {
        input_count: tweets.len(),
        ..Default::default()
    };
    let mut rejections = Vec::new();
    let (kept, political) = filter_political(tweets, &cfg.political_phrases);
    report.excluded_political = political.len();
    rejections.extend(political.into_iter().map(|t| Rejection {
        tweet_id: t.id,
        reason: "political nickname is the only red tide mention".into(),
    }));
    let (kept, late) = filter_window(kept, &cfg.window, cfg.utc_offset_minutes);
    report.out_of_window = late.len();
    rejections.extend(late.into_iter().map(|t| Rejection {
        tweet_id: t.id,
        reason: "outside study window".into(),
    }));

    let mut admitted = Vec::with_capacity(kept.len());
    for mut tweet in kept {
        if tweet.place_match.is_some() && tweet.profile_match.is_some() {
            report.deduped += 1;
        }
        if let Some(profile) = &tweet.profile_match {
            let (geo, changed) = reassign_tampa_bay(profile, &cfg.shared_unit);
            if changed {
                report.reassigned_tampa_bay += 1;
                tweet.profile_match = Some(geo);
            }
        }
        let Some(location) = resolve_location(&tweet).cloned() else {
            report.rejected_unlocated += 1;
            rejections.push(Rejection {
                tweet_id: tweet.id,
                reason: "no place or geoprofile match".into(),
            });
            continue;
        };
        tweet.account_class = classify_account(tweet.verified, tweet.user.as_deref(), &cfg.account_overrides);
        admitted.push(CleanTweet { tweet, location });
    }
    report.admitted = admitted.len();
    CleaningOutcome {
        admitted,
        rejections,
        report,
    }
}
