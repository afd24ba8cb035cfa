//! Flat `key = value` run configuration with command-line overrides.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the directory of the config file (or the working
//! directory for values given on the command line). Every numeric constant
//! used by the pipeline has a key.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::aggregation::{AccountFilter, ConditionConfig, Frequency, MatchFilter, TopKStat};
use crate::analytics::{Condition, Metric, Pooling, ZeroPolicy, HIGH_IMPACT_CELLS};
use crate::cleaning::{StudyWindow, TAMPA_BAY_SHARED};
use crate::corpus::{BoundingBox, GeoLevel, TweetFormat};
use crate::geospatial::DistanceBins;
use crate::sentiment::{SentenceAggregation, SentimentConfig};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{origin}: expected `key = value`, got `{line}`")]
    Syntax { origin: String, line: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: {message}")]
    Value { key: String, message: String },
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
    #[error("{key}: file `{path}` does not exist")]
    MissingFile { key: &'static str, path: PathBuf },
}

fn value_err(key: &str, message: impl ToString) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: message.to_string(),
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: ToString,
{
    v.trim().parse::<T>().map_err(|e| value_err(key, e.to_string()))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: ToString,
{
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(value_err(key, format!("expected a boolean, got `{other}`"))),
    }
}

fn level_str(l: GeoLevel) -> &'static str {
    if l == GeoLevel::Region {
        "total"
    } else {
        l.as_str()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tweets: Option<PathBuf>,
    pub tweets_format: Option<TweetFormat>,
    pub beach: Option<PathBuf>,
    pub kbrevis: Option<PathBuf>,
    pub beaches: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub polygons: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    /// `None` uses the bundled red-tide customization.
    pub lexicon_patch: Option<PathBuf>,
    pub use_lexicon_patch: bool,
    pub political_phrases: Option<PathBuf>,
    pub account_overrides: Option<PathBuf>,
    pub concern_environment: Option<PathBuf>,
    pub concern_health: Option<PathBuf>,
    pub concern_economy: Option<PathBuf>,
    pub concern_government: Option<PathBuf>,

    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub utc_offset_minutes: i32,
    pub bbox: BoundingBox,

    pub shared_unit_id: String,
    pub shared_unit_name: String,
    pub shared_unit_members: Vec<String>,
    pub shared_unit_weights: Option<Vec<f64>>,

    pub levels: Vec<GeoLevel>,
    pub freqs: Vec<Frequency>,
    pub matches: Vec<MatchFilter>,
    pub account_filter: AccountFilter,
    pub metric: Metric,
    pub conditions: Vec<Condition>,
    pub shifts: Vec<i64>,
    pub pooling: Pooling,

    pub sentiment: SentimentConfig,
    pub condition: ConditionConfig,

    pub high_impact_cells: f64,
    pub bins: DistanceBins,
    pub zero_policy: ZeroPolicy,
    pub confidence: f64,

    pub top_k: usize,
    pub stemming: bool,
    pub allow_invalid: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tweets: None,
            tweets_format: None,
            beach: None,
            kbrevis: None,
            beaches: None,
            registry: None,
            polygons: None,
            lexicon: None,
            lexicon_patch: None,
            use_lexicon_patch: true,
            political_phrases: None,
            account_overrides: None,
            concern_environment: None,
            concern_health: None,
            concern_economy: None,
            concern_government: None,
            window_start: NaiveDate::from_ymd_opt(2018, 5, 15).expect("valid"),
            window_end: NaiveDate::from_ymd_opt(2019, 5, 15).expect("valid"),
            utc_offset_minutes: -300,
            bbox: BoundingBox::default(),
            shared_unit_id: TAMPA_BAY_SHARED.to_string(),
            shared_unit_name: "Tampa Bay".to_string(),
            shared_unit_members: vec!["hillsborough".into(), "pinellas".into()],
            shared_unit_weights: None,
            levels: GeoLevel::ALL.to_vec(),
            freqs: Frequency::ALL.to_vec(),
            matches: vec![MatchFilter::ExplicitOnly, MatchFilter::All],
            account_filter: AccountFilter::EVERYONE,
            metric: Metric::PerCapitaCount,
            conditions: Condition::ALL.to_vec(),
            shifts: vec![-1, 0, 1],
            pooling: Pooling::Pooled,
            sentiment: SentimentConfig::default(),
            condition: ConditionConfig::default(),
            high_impact_cells: HIGH_IMPACT_CELLS,
            bins: DistanceBins::default(),
            zero_policy: ZeroPolicy::Exclude,
            confidence: 0.95,
            top_k: 10,
            stemming: true,
            allow_invalid: false,
        }
    }
}

/// Every recognized key, in canonical order.
pub const KEYS: &[&str] = &[
    "tweets",
    "tweets_format",
    "beach",
    "kbrevis",
    "beaches",
    "registry",
    "polygons",
    "lexicon",
    "lexicon_patch",
    "political_phrases",
    "account_overrides",
    "concern_environment",
    "concern_health",
    "concern_economy",
    "concern_government",
    "window_start",
    "window_end",
    "utc_offset_minutes",
    "bbox",
    "shared_unit_id",
    "shared_unit_name",
    "shared_unit_members",
    "shared_unit_weights",
    "levels",
    "freqs",
    "matches",
    "account_filter",
    "metric",
    "conditions",
    "shifts",
    "pooling",
    "question_weight",
    "ellipsis_penalty",
    "window_before",
    "window_after",
    "shift_floor",
    "adversative_before",
    "adversative_after",
    "sentence_aggregation",
    "beach_radius_miles",
    "kbrevis_top_k",
    "kbrevis_stat",
    "sample_max_miles",
    "high_impact_cells",
    "close_below_miles",
    "medium_through_miles",
    "zero_policy",
    "confidence",
    "top_k",
    "stemming",
    "allow_invalid",
];

fn path_opt(base: &Path, v: &str) -> Option<PathBuf> {
    let v = v.trim();
    if v.is_empty() {
        return None;
    }
    let p = PathBuf::from(v);
    Some(if p.is_absolute() { p } else { base.join(p) })
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, origin: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text, base, origin)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| value_err("config", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, &path.display().to_string())
    }

    pub fn apply_text(&mut self, text: &str, base: &Path, origin: &str) -> Result<(), ConfigError> {
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    origin: origin.to_string(),
                    line: line.to_string(),
                });
            };
            self.set(k.trim(), v.trim(), base)?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_override(&mut self, kv: &str, base: &Path) -> Result<(), ConfigError> {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(ConfigError::Syntax {
                origin: "--set".into(),
                line: kv.to_string(),
            });
        };
        self.set(k.trim(), v.trim(), base)
    }

    pub fn set(&mut self, key: &str, v: &str, base: &Path) -> Result<(), ConfigError> {
        match key {
            "tweets" => self.tweets = path_opt(base, v),
            "tweets_format" => self.tweets_format = if v.is_empty() { None } else { Some(parse(key, v)?) },
            "beach" => self.beach = path_opt(base, v),
            "kbrevis" => self.kbrevis = path_opt(base, v),
            "beaches" => self.beaches = path_opt(base, v),
            "registry" => self.registry = path_opt(base, v),
            "polygons" => self.polygons = path_opt(base, v),
            "lexicon" => self.lexicon = path_opt(base, v),
            "lexicon_patch" => {
                self.use_lexicon_patch = !v.eq_ignore_ascii_case("none");
                self.lexicon_patch = if self.use_lexicon_patch { path_opt(base, v) } else { None };
            }
            "political_phrases" => self.political_phrases = path_opt(base, v),
            "account_overrides" => self.account_overrides = path_opt(base, v),
            "concern_environment" => self.concern_environment = path_opt(base, v),
            "concern_health" => self.concern_health = path_opt(base, v),
            "concern_economy" => self.concern_economy = path_opt(base, v),
            "concern_government" => self.concern_government = path_opt(base, v),
            "window_start" => self.window_start = parse(key, v)?,
            "window_end" => self.window_end = parse(key, v)?,
            "utc_offset_minutes" => self.utc_offset_minutes = parse(key, v)?,
            "bbox" => {
                let b: Vec<f64> = parse_list(key, v)?;
                let [min_lat, max_lat, min_lon, max_lon] = b[..] else {
                    return Err(value_err(key, "expected min_lat,max_lat,min_lon,max_lon"));
                };
                self.bbox = BoundingBox {
                    min_lat,
                    max_lat,
                    min_lon,
                    max_lon,
                };
            }
            "shared_unit_id" => self.shared_unit_id = v.to_string(),
            "shared_unit_name" => self.shared_unit_name = v.to_string(),
            "shared_unit_members" => self.shared_unit_members = parse_list(key, v)?,
            "shared_unit_weights" => {
                self.shared_unit_weights = if v.is_empty() { None } else { Some(parse_list(key, v)?) }
            }
            "levels" => self.levels = parse_list(key, v)?,
            "freqs" => self.freqs = parse_list(key, v)?,
            "matches" => self.matches = parse_list(key, v)?,
            "account_filter" => self.account_filter = parse(key, v)?,
            "metric" => self.metric = parse(key, v)?,
            "conditions" => self.conditions = parse_list(key, v)?,
            "shifts" => self.shifts = parse_list(key, v)?,
            "pooling" => self.pooling = parse(key, v)?,
            "question_weight" => self.sentiment.question_weight = parse(key, v)?,
            "ellipsis_penalty" => self.sentiment.ellipsis_penalty = parse(key, v)?,
            "window_before" => self.sentiment.window_before = parse(key, v)?,
            "window_after" => self.sentiment.window_after = parse(key, v)?,
            "shift_floor" => self.sentiment.shift_floor = parse(key, v)?,
            "adversative_before" => self.sentiment.adversative_before = parse(key, v)?,
            "adversative_after" => self.sentiment.adversative_after = parse(key, v)?,
            "sentence_aggregation" => self.sentiment.aggregation = parse::<SentenceAggregation>(key, v)?,
            "beach_radius_miles" => self.condition.beach_radius_miles = parse(key, v)?,
            "kbrevis_top_k" => self.condition.kbrevis_top_k = parse(key, v)?,
            "kbrevis_stat" => self.condition.kbrevis_stat = parse::<TopKStat>(key, v)?,
            "sample_max_miles" => self.condition.sample_max_miles = parse(key, v)?,
            "high_impact_cells" => self.high_impact_cells = parse(key, v)?,
            "close_below_miles" => self.bins.close_below = parse(key, v)?,
            "medium_through_miles" => self.bins.medium_through = parse(key, v)?,
            "zero_policy" => {
                self.zero_policy = match v.to_ascii_lowercase().as_str() {
                    "exclude" => ZeroPolicy::Exclude,
                    other => match other.strip_prefix("epsilon:") {
                        Some(e) => ZeroPolicy::Epsilon(parse(key, e)?),
                        None => return Err(value_err(key, "expected `exclude` or `epsilon:<value>`")),
                    },
                }
            }
            "confidence" => self.confidence = parse(key, v)?,
            "top_k" => self.top_k = parse(key, v)?,
            "stemming" => self.stemming = parse_bool(key, v)?,
            "allow_invalid" => self.allow_invalid = parse_bool(key, v)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn window(&self) -> Result<StudyWindow, ConfigError> {
        StudyWindow::new(self.window_start, self.window_end).map_err(|e| value_err("window_end", e))
    }

    /// Range checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.window()?;
        if !(0.0 < self.confidence && self.confidence < 1.0) {
            return Err(value_err("confidence", "must be in (0, 1)"));
        }
        if self.bins.close_below > self.bins.medium_through || self.bins.close_below < 0.0 {
            return Err(value_err("close_below_miles", "bins must satisfy 0 <= close_below <= medium_through"));
        }
        if !(self.condition.beach_radius_miles >= 0.0) || !(self.condition.sample_max_miles >= 0.0) {
            return Err(value_err("beach_radius_miles", "radii must be >= 0"));
        }
        if self.condition.kbrevis_top_k == 0 {
            return Err(value_err("kbrevis_top_k", "must be positive"));
        }
        if self.shifts.iter().any(|s| s.abs() > 1) {
            return Err(value_err("shifts", "only -1, 0 and 1 are supported"));
        }
        if let Some(w) = &self.shared_unit_weights {
            if w.len() != self.shared_unit_members.len() {
                return Err(value_err("shared_unit_weights", "needs one weight per member"));
            }
        }
        if self.levels.is_empty() || self.freqs.is_empty() || self.matches.is_empty() {
            return Err(value_err("levels", "levels, freqs and matches must be non-empty"));
        }
        Ok(())
    }

    /// Checks that every configured file exists.
    pub fn check_files(&self) -> Result<(), ConfigError> {
        let files: [(&'static str, &Option<PathBuf>); 14] = [
            ("tweets", &self.tweets),
            ("beach", &self.beach),
            ("kbrevis", &self.kbrevis),
            ("beaches", &self.beaches),
            ("registry", &self.registry),
            ("polygons", &self.polygons),
            ("lexicon", &self.lexicon),
            ("lexicon_patch", &self.lexicon_patch),
            ("political_phrases", &self.political_phrases),
            ("account_overrides", &self.account_overrides),
            ("concern_environment", &self.concern_environment),
            ("concern_health", &self.concern_health),
            ("concern_economy", &self.concern_economy),
            ("concern_government", &self.concern_government),
        ];
        for (key, p) in files {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(ConfigError::MissingFile { key, path: p.clone() });
                }
            }
        }
        Ok(())
    }

    /// Resolved settings as `key = value` lines in canonical order.
    pub fn canonical(&self) -> String {
        let list = |v: Vec<String>| v.join(",");
        let s = &self.sentiment;
        let c = &self.condition;
        let mut out = String::new();
        for key in KEYS {
            let value = match *key {
                "tweets" => show_path(&self.tweets),
                "tweets_format" => self.tweets_format.map(|f| format!("{f:?}").to_lowercase()).unwrap_or_default(),
                "beach" => show_path(&self.beach),
                "kbrevis" => show_path(&self.kbrevis),
                "beaches" => show_path(&self.beaches),
                "registry" => show_path(&self.registry),
                "polygons" => show_path(&self.polygons),
                "lexicon" => show_path(&self.lexicon),
                "lexicon_patch" if !self.use_lexicon_patch => "none".into(),
                "lexicon_patch" => show_path(&self.lexicon_patch),
                "political_phrases" => show_path(&self.political_phrases),
                "account_overrides" => show_path(&self.account_overrides),
                "concern_environment" => show_path(&self.concern_environment),
                "concern_health" => show_path(&self.concern_health),
                "concern_economy" => show_path(&self.concern_economy),
                "concern_government" => show_path(&self.concern_government),
                "window_start" => self.window_start.to_string(),
                "window_end" => self.window_end.to_string(),
                "utc_offset_minutes" => self.utc_offset_minutes.to_string(),
                "bbox" => format!("{},{},{},{}", self.bbox.min_lat, self.bbox.max_lat, self.bbox.min_lon, self.bbox.max_lon),
                "shared_unit_id" => self.shared_unit_id.clone(),
                "shared_unit_name" => self.shared_unit_name.clone(),
                "shared_unit_members" => self.shared_unit_members.join(","),
                "shared_unit_weights" => self
                    .shared_unit_weights
                    .as_ref()
                    .map(|w| list(w.iter().map(f64::to_string).collect()))
                    .unwrap_or_default(),
                "levels" => list(self.levels.iter().map(|l| level_str(*l).to_string()).collect()),
                "freqs" => list(self.freqs.iter().map(|f| f.to_string()).collect()),
                "matches" => list(self.matches.iter().map(|m| m.as_str().to_string()).collect()),
                "account_filter" => self.account_filter.to_string(),
                "metric" => self.metric.to_string(),
                "conditions" => list(self.conditions.iter().map(|c| c.to_string()).collect()),
                "shifts" => list(self.shifts.iter().map(i64::to_string).collect()),
                "pooling" => match self.pooling {
                    Pooling::Pooled => "pooled".into(),
                    Pooling::PerUnitMean => "per_unit_mean".into(),
                },
                "question_weight" => s.question_weight.to_string(),
                "ellipsis_penalty" => s.ellipsis_penalty.to_string(),
                "window_before" => s.window_before.to_string(),
                "window_after" => s.window_after.to_string(),
                "shift_floor" => s.shift_floor.to_string(),
                "adversative_before" => s.adversative_before.to_string(),
                "adversative_after" => s.adversative_after.to_string(),
                "sentence_aggregation" => format!("{:?}", s.aggregation).to_lowercase(),
                "beach_radius_miles" => c.beach_radius_miles.to_string(),
                "kbrevis_top_k" => c.kbrevis_top_k.to_string(),
                "kbrevis_stat" => format!("{:?}", c.kbrevis_stat).to_lowercase(),
                "sample_max_miles" => c.sample_max_miles.to_string(),
                "high_impact_cells" => self.high_impact_cells.to_string(),
                "close_below_miles" => self.bins.close_below.to_string(),
                "medium_through_miles" => self.bins.medium_through.to_string(),
                "zero_policy" => match self.zero_policy {
                    ZeroPolicy::Exclude => "exclude".into(),
                    ZeroPolicy::Epsilon(e) => format!("epsilon:{e}"),
                },
                "confidence" => self.confidence.to_string(),
                "top_k" => self.top_k.to_string(),
                "stemming" => self.stemming.to_string(),
                "allow_invalid" => self.allow_invalid.to_string(),
                _ => unreachable!("every key is listed"),
            };
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical settings.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical().as_bytes()))
    }
}
