//! Domain types and file parsers for tweets, condition data, the locality
//! registry and sentiment lexicons.

pub mod conditions;
pub mod lexicon;
pub mod registry;
pub mod tweets;

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use conditions::{BeachLocation, BeachReport, BoundingBox, KBrevisSample};
pub use lexicon::{Lexicon, LexiconEntry, PatchOp, ShifterClass};
pub use registry::{GeoLevel, GeoUnit, Registry};
pub use tweets::{AccountClass, GeoRef, MatchSource, Tweet, TweetFormat, TweetKind, TweetRecord};

/// A single rejected input record. `line` is 1-based and counts the header
/// line for CSV inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

/// Result of a record-oriented parse: every input record ends up either in
/// `records` or in `errors`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub errors: Vec<RecordError>,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Self {
            records: Vec::new(),
            errors: Vec::new(),
        }
    }
}

impl<T> Parsed<T> {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn input_count(&self) -> usize {
        self.records.len() + self.errors.len()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("registry: {0}")]
    Registry(String),
    #[error("polygon `{unit}`: {message}")]
    Polygon { unit: String, message: String },
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
}

pub(crate) fn open(path: &Path) -> Result<std::fs::File, CorpusError> {
    std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Checks that a CSV header starts with the documented columns. Extra
/// trailing columns are tolerated.
pub(crate) fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), CorpusError> {
    let ok = found.len() >= expected.len()
        && expected.iter().zip(found.iter()).all(|(e, f)| e == &f.trim());
    if ok {
        Ok(())
    } else {
        Err(CorpusError::Header {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        })
    }
}

pub(crate) fn parse_date(s: &str) -> Result<chrono::NaiveDate, String> {
    chrono::NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| format!("bad date `{s}`: {e}"))
}
