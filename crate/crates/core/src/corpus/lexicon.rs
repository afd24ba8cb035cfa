//! Polarized phrases and valence shifters.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_header, open, CorpusError};
use crate::sentiment::tokenize::phrase_tokens;

pub const LEXICON_HEADER: [&str; 3] = ["phrase", "class", "weight"];
pub const PATCH_HEADER: [&str; 4] = ["op", "phrase", "class", "weight"];

pub const DEFAULT_AMPLIFIER_DELTA: f64 = 0.8;
pub const DEFAULT_DEAMPLIFIER_DELTA: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShifterClass {
    Polarized,
    Negator,
    Amplifier,
    Deamplifier,
    Adversative,
}

impl FromStr for ShifterClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "polarized" => Ok(ShifterClass::Polarized),
            "negator" => Ok(ShifterClass::Negator),
            "amplifier" => Ok(ShifterClass::Amplifier),
            "deamplifier" | "de-amplifier" => Ok(ShifterClass::Deamplifier),
            "adversative" => Ok(ShifterClass::Adversative),
            other => Err(format!("unknown lexicon class `{other}`")),
        }
    }
}

impl fmt::Display for ShifterClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShifterClass::Polarized => "polarized",
            ShifterClass::Negator => "negator",
            ShifterClass::Amplifier => "amplifier",
            ShifterClass::Deamplifier => "deamplifier",
            ShifterClass::Adversative => "adversative",
        })
    }
}

/// One lexicon row. For polarized entries `weight` is the signed polarity in
/// [-1, 1]; amplifier and deamplifier weights are positive deltas; negators
/// and adversatives carry 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LexiconEntry {
    pub phrase: Vec<String>,
    pub class: ShifterClass,
    pub weight: f64,
}

impl LexiconEntry {
    pub fn new(phrase: &str, class: ShifterClass, weight: Option<f64>) -> Result<Self, String> {
        let tokens = phrase_tokens(phrase);
        if tokens.is_empty() {
            return Err(format!("phrase `{phrase}` has no tokens"));
        }
        let weight = match (class, weight) {
            (ShifterClass::Polarized, None) => return Err(format!("polarized phrase `{phrase}` needs a weight")),
            (ShifterClass::Polarized, Some(w)) if !(-1.0..=1.0).contains(&w) => {
                return Err(format!("polarized weight {w} for `{phrase}` outside [-1, 1]"))
            }
            (ShifterClass::Amplifier, None) => DEFAULT_AMPLIFIER_DELTA,
            (ShifterClass::Deamplifier, None) => DEFAULT_DEAMPLIFIER_DELTA,
            (ShifterClass::Amplifier | ShifterClass::Deamplifier, Some(w)) if !(w > 0.0) => {
                return Err(format!("{class} delta for `{phrase}` must be positive"))
            }
            (ShifterClass::Negator | ShifterClass::Adversative, _) => 1.0,
            (_, Some(w)) => w,
        };
        Ok(Self {
            phrase: tokens,
            class,
            weight,
        })
    }

    pub fn phrase_text(&self) -> String {
        self.phrase.join(" ")
    }
}

/// Phrase-indexed lexicon supporting longest-match lookup.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: BTreeMap<Vec<String>, LexiconEntry>,
    max_len: usize,
}

impl Lexicon {
    pub fn from_entries(entries: impl IntoIterator<Item = LexiconEntry>) -> Self {
        let mut lex = Lexicon::default();
        for e in entries {
            lex.upsert(e);
        }
        lex
    }

    pub fn upsert(&mut self, entry: LexiconEntry) {
        self.max_len = self.max_len.max(entry.phrase.len());
        self.entries.insert(entry.phrase.clone(), entry);
    }

    pub fn remove(&mut self, phrase: &str) -> Option<LexiconEntry> {
        let removed = self.entries.remove(&phrase_tokens(phrase));
        self.max_len = self.entries.keys().map(Vec::len).max().unwrap_or(0);
        removed
    }

    pub fn lookup(&self, phrase: &str) -> Option<&LexiconEntry> {
        self.entries.get(&phrase_tokens(phrase))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.values()
    }

    /// Longest entry matching `tokens[start..]`.
    pub fn longest_match(&self, tokens: &[String], start: usize) -> Option<&LexiconEntry> {
        let remaining = tokens.len().saturating_sub(start);
        (1..=self.max_len.min(remaining))
            .rev()
            .find_map(|len| self.entries.get(&tokens[start..start + len]))
    }
}

#[derive(Deserialize)]
struct LexiconRow {
    phrase: String,
    class: String,
    weight: Option<f64>,
}

pub fn read_lexicon<R: Read>(reader: R) -> Result<Lexicon, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    check_header(rdr.headers()?, &LEXICON_HEADER)?;
    let mut lex = Lexicon::default();
    for (i, row) in rdr.deserialize::<LexiconRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| CorpusError::Lexicon {
            line,
            message: e.to_string(),
        })?;
        let entry = row
            .class
            .parse::<ShifterClass>()
            .and_then(|class| LexiconEntry::new(&row.phrase, class, row.weight))
            .map_err(|message| CorpusError::Lexicon { line, message })?;
        lex.upsert(entry);
    }
    Ok(lex)
}

pub fn parse_lexicon(path: &Path) -> Result<Lexicon, CorpusError> {
    read_lexicon(open(path)?)
}

/// A domain customization step.
#[derive(Debug, Clone, PartialEq)]
pub enum PatchOp {
    /// Insert or replace an entry (`add` and `override` rows).
    Upsert(LexiconEntry),
    Remove(String),
}

#[derive(Deserialize)]
struct PatchRow {
    op: String,
    phrase: String,
    class: Option<String>,
    weight: Option<f64>,
}

pub fn read_lexicon_patch<R: Read>(reader: R) -> Result<Vec<PatchOp>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    check_header(rdr.headers()?, &PATCH_HEADER)?;
    let mut ops = Vec::new();
    for (i, row) in rdr.deserialize::<PatchRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| CorpusError::Lexicon {
            line,
            message: e.to_string(),
        })?;
        let op = match row.op.to_ascii_lowercase().as_str() {
            "remove" => PatchOp::Remove(row.phrase),
            "add" | "override" => {
                let class = row.class.unwrap_or_default();
                let entry = class
                    .parse::<ShifterClass>()
                    .and_then(|c| LexiconEntry::new(&row.phrase, c, row.weight))
                    .map_err(|message| CorpusError::Lexicon { line, message })?;
                PatchOp::Upsert(entry)
            }
            other => {
                return Err(CorpusError::Lexicon {
                    line,
                    message: format!("unknown patch op `{other}`"),
                })
            }
        };
        ops.push(op);
    }
    Ok(ops)
}

pub fn parse_lexicon_patch(path: &Path) -> Result<Vec<PatchOp>, CorpusError> {
    read_lexicon_patch(open(path)?)
}

pub fn write_lexicon<W: std::io::Write>(w: W, lexicon: &Lexicon) -> Result<(), CorpusError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(LEXICON_HEADER)?;
    for e in lexicon.entries() {
        wtr.write_record([e.phrase_text(), e.class.to_string(), e.weight.to_string()])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}
