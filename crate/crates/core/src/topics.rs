//! Concern-category keyword counts and the most frequent polarized terms
//! per geo unit.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Lexicon, Registry, ShifterClass};
use crate::geospatial::{credit_share, GeoError, PER_CAPITA_SCALE};
use crate::sentiment::tokenize::phrase_tokens;

#[derive(Debug, Error, PartialEq)]
pub enum TopicsError {
    #[error("term `{term}` appears in both {first} and {second}")]
    Overlap { term: String, first: Category, second: Category },
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Environment,
    Health,
    Economy,
    Government,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Environment, Category::Health, Category::Economy, Category::Government];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Environment => "environment",
            Category::Health => "health",
            Category::Economy => "economy",
            Category::Government => "government",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown concern category `{s}`"))
    }
}

/// Suffix stripping that folds plural -s, -es, -ed and -ing forms together.
pub fn stem(word: &str) -> String {
    let w = word.to_lowercase();
    let n = w.chars().count();
    if n > 5 && w.ends_with("ing") {
        return w[..w.len() - 3].to_string();
    }
    if n > 4 && w.ends_with("ed") {
        return w[..w.len() - 2].to_string();
    }
    for suffix in ["ches", "shes", "xes", "sses"] {
        if w.ends_with(suffix) {
            return w[..w.len() - 2].to_string();
        }
    }
    if n > 3 && w.ends_with('s') && !w.ends_with("ss") {
        return w[..w.len() - 1].to_string();
    }
    w
}

fn normalize(tokens: Vec<String>, stemming: bool) -> Vec<String> {
    if stemming {
        tokens.iter().map(|t| stem(t)).collect()
    } else {
        tokens
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcernVocabulary {
    pub category: Category,
    /// Terms as loaded, lowercase.
    pub terms: Vec<String>,
}

impl ConcernVocabulary {
    pub fn parse(category: Category, text: &str) -> Self {
        let mut seen = BTreeSet::new();
        let terms = text
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter(|l| seen.insert(l.clone()))
            .collect();
        Self { category, terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

pub fn default_vocabularies() -> Vec<ConcernVocabulary> {
    use crate::defaults::*;
    vec![
        ConcernVocabulary::parse(Category::Environment, CONCERN_ENVIRONMENT),
        ConcernVocabulary::parse(Category::Health, CONCERN_HEALTH),
        ConcernVocabulary::parse(Category::Economy, CONCERN_ECONOMY),
        ConcernVocabulary::parse(Category::Government, CONCERN_GOVERNMENT),
    ]
}

/// Compiled vocabularies: normalized token sequences mapped to
/// (category, term). Longest match wins when terms nest.
#[derive(Debug, Clone)]
pub struct ConcernMatcher {
    terms: HashMap<Vec<String>, (Category, String)>,
    sizes: BTreeMap<Category, usize>,
    max_len: usize,
    stemming: bool,
}

impl ConcernMatcher {
    pub fn new(vocabularies: &[ConcernVocabulary], stemming: bool) -> Result<Self, TopicsError> {
        let mut terms: HashMap<Vec<String>, (Category, String)> = HashMap::new();
        let mut sizes = BTreeMap::new();
        let mut max_len = 0;
        for v in vocabularies {
            *sizes.entry(v.category).or_insert(0) += v.len();
            for t in &v.terms {
                let key = normalize(phrase_tokens(t), stemming);
                if key.is_empty() {
                    continue;
                }
                if let Some((other, _)) = terms.get(&key) {
                    if *other != v.category {
                        return Err(TopicsError::Overlap {
                            term: t.clone(),
                            first: *other,
                            second: v.category,
                        });
                    }
                    continue;
                }
                max_len = max_len.max(key.len());
                terms.insert(key, (v.category, t.clone()));
            }
        }
        Ok(Self {
            terms,
            sizes,
            max_len,
            stemming,
        })
    }

    /// Term hits in one text, in order of appearance.
    pub fn hits(&self, text: &str) -> Vec<(Category, &str)> {
        let tokens = normalize(phrase_tokens(text), self.stemming);
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let found = (1..=self.max_len.min(tokens.len() - i))
                .rev()
                .find_map(|len| self.terms.get(&tokens[i..i + len]).map(|hit| (len, hit)));
            match found {
                Some((len, (cat, term))) => {
                    out.push((*cat, term.as_str()));
                    i += len;
                }
                None => i += 1,
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategorySummary {
    pub category: Category,
    pub vocabulary_size: usize,
    pub unique_terms_hit: usize,
    pub mention_count: usize,
    /// Mentions per time bucket.
    pub series: Vec<usize>,
}

/// Counts term mentions across `(text, bucket)` pairs. Buckets at or past
/// `n_buckets` count toward totals but not the series.
pub fn categorize(texts: &[(&str, usize)], matcher: &ConcernMatcher, n_buckets: usize) -> Vec<CategorySummary> {
    let per_text: Vec<Vec<(Category, &str)>> = texts.par_iter().map(|(t, _)| matcher.hits(t)).collect();
    let mut terms: BTreeMap<Category, BTreeSet<&str>> = BTreeMap::new();
    let mut mentions: BTreeMap<Category, usize> = BTreeMap::new();
    let mut series: BTreeMap<Category, Vec<usize>> = BTreeMap::new();
    for ((_, bucket), hits) in texts.iter().zip(&per_text) {
        for (cat, term) in hits {
            terms.entry(*cat).or_default().insert(term);
            *mentions.entry(*cat).or_default() += 1;
            let s = series.entry(*cat).or_insert_with(|| vec![0; n_buckets]);
            if *bucket < n_buckets {
                s[*bucket] += 1;
            }
        }
    }
    Category::ALL
        .iter()
        .filter(|c| matcher.sizes.contains_key(c))
        .map(|&c| CategorySummary {
            category: c,
            vocabulary_size: matcher.sizes[&c],
            unique_terms_hit: terms.get(&c).map_or(0, BTreeSet::len),
            mention_count: mentions.get(&c).copied().unwrap_or(0),
            series: series.remove(&c).unwrap_or_else(|| vec![0; n_buckets]),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermFrequency {
    pub term: String,
    pub count: f64,
    pub per_capita: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarizedTerms {
    pub unit: String,
    pub positive: Vec<TermFrequency>,
    pub negative: Vec<TermFrequency>,
}

/// A located text for term counting.
#[derive(Debug, Clone, Copy)]
pub struct LocatedText<'a> {
    pub id: &'a str,
    pub unit_id: &'a str,
    pub text: &'a str,
}

fn polarized_hits(text: &str, lexicon: &Lexicon) -> Vec<(String, f64)> {
    let tokens = phrase_tokens(text);
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        match lexicon.longest_match(&tokens, i) {
            Some(e) => {
                if e.class == ShifterClass::Polarized {
                    out.push((e.phrase_text(), e.weight));
                }
                i += e.phrase.len();
            }
            None => i += 1,
        }
    }
    out
}

/// Top-`k` positive and negative lexicon terms among texts credited to
/// `unit` (directly, through a finer unit, or via a shared unit), weighted
/// by credit and normalized per 100k of the unit's population. With
/// stemming, inflections fold under the lexicographically smallest form.
pub fn top_polarized_terms(
    texts: &[LocatedText<'_>],
    lexicon: &Lexicon,
    registry: &Registry,
    unit: &str,
    k: usize,
    stemming: bool,
) -> Result<PolarizedTerms, TopicsError> {
    let target = registry.unit(unit).ok_or_else(|| GeoError::UnknownUnit(unit.to_string()))?;
    let pop = registry.denominator_population(unit)?;
    if pop == 0 {
        return Err(GeoError::ZeroPopulation(unit.to_string()).into());
    }
    let mut sorted: Vec<&LocatedText<'_>> = texts.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(b.id).then(a.text.cmp(b.text)));

    let mut counts: BTreeMap<String, (f64, f64, String)> = BTreeMap::new();
    for t in sorted {
        let credit = credit_share(t.unit_id, registry)?;
        let w: f64 = credit
            .iter()
            .filter(|(u, _)| registry.ancestor_at(u, target.level) == Some(unit))
            .map(|(_, w)| w)
            .sum();
        if w == 0.0 {
            continue;
        }
        for (phrase, weight) in polarized_hits(t.text, lexicon) {
            let key = if stemming {
                phrase.split(' ').map(stem).collect::<Vec<_>>().join(" ")
            } else {
                phrase.clone()
            };
            let e = counts.entry(key).or_insert((0.0, weight, phrase.clone()));
            e.0 += w;
            if phrase < e.2 {
                e.2 = phrase;
            }
        }
    }
    let rank = |positive: bool| {
        let mut v: Vec<TermFrequency> = counts
            .values()
            .filter(|(_, weight, _)| if positive { *weight > 0.0 } else { *weight < 0.0 })
            .map(|(count, _, label)| TermFrequency {
                term: label.clone(),
                count: *count,
                per_capita: count / pop as f64 * PER_CAPITA_SCALE,
            })
            .collect();
        v.sort_by(|a, b| b.count.total_cmp(&a.count).then_with(|| a.term.cmp(&b.term)));
        v.truncate(k);
        v
    };
    Ok(PolarizedTerms {
        unit: unit.to_string(),
        positive: rank(true),
        negative: rank(false),
    })
}

pub fn write_concerns_csv<W: std::io::Write>(w: W, summaries: &[CategorySummary]) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["category", "vocabulary_size", "unique_terms_hit", "mention_count"])?;
    for s in summaries {
        wtr.write_record([
            s.category.to_string(),
            s.vocabulary_size.to_string(),
            s.unique_terms_hit.to_string(),
            s.mention_count.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_top_terms_csv<W: std::io::Write>(w: W, terms: &[PolarizedTerms]) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["unit", "polarity", "rank", "term", "count", "per_capita"])?;
    for t in terms {
        for (polarity, list) in [("positive", &t.positive), ("negative", &t.negative)] {
            for (i, f) in list.iter().enumerate() {
                wtr.write_record([
                    t.unit.clone(),
                    polarity.to_string(),
                    (i + 1).to_string(),
                    f.term.clone(),
                    f.count.to_string(),
                    f.per_capita.to_string(),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}
