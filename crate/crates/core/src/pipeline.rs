//! Stage orchestration for the command-line tool.
//!
//! Every stage recomputes its upstream stages in memory from the raw inputs,
//! so running `report` writes exactly the files the individual stages would.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::aggregation::{
    aggregate_conditions, aggregate_tweets, assign_samples, bucket_index, bucketize, join_panels, write_panel_csv,
    AggregationError, ConditionInputs, Frequency, MatchFilter, Panel, TweetObservation,
};
use crate::analytics::{
    bin_contrasts, city_week_records, correlation_grid, distance_regression, high_impact_by_week,
    retweet_fraction_by_distance, write_grid_csv, CoordObservation, CorrelationGrid, DistanceError, GridEntry,
    RegressionFit,
};
use crate::cleaning::{clean, load_political_phrases, local_date, parse_account_overrides, CleanTweet, CleaningConfig, CleaningOutcome};
use crate::config::{ConfigError, RunConfig};
use crate::corpus::conditions::{parse_beach_locations, read_beach_reports, read_kbrevis_samples};
use crate::corpus::lexicon::{parse_lexicon, parse_lexicon_patch, read_lexicon, read_lexicon_patch};
use crate::corpus::registry::{parse_geo_registry, parse_polygons};
use crate::corpus::tweets::{parse_tweets, write_tweets_jsonl};
use crate::corpus::{
    BeachLocation, BeachReport, CorpusError, GeoLevel, GeoRef, KBrevisSample, Lexicon, MatchSource, Parsed, RecordError,
    Registry, Tweet, TweetFormat,
};
use crate::output::{heatmap_svg, scatter_svg, ArtifactWriter, Manifest};
use crate::sentiment::{apply_domain_customization, score_text, ScoredText};
use crate::topics::{
    categorize, top_polarized_terms, write_concerns_csv, write_top_terms_csv, Category, ConcernMatcher,
    ConcernVocabulary, LocatedText, TopicsError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Clean,
    Sentiment,
    Aggregate,
    Correlate,
    Distance,
    Topics,
    Report,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Clean => "clean",
            Stage::Sentiment => "sentiment",
            Stage::Aggregate => "aggregate",
            Stage::Correlate => "correlate",
            Stage::Distance => "distance",
            Stage::Topics => "topics",
            Stage::Report => "report",
        }
    }

    fn runs(self, s: Stage) -> bool {
        self == s || self == Stage::Report
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("input validation failed: {rejected} record(s) rejected, see {}", report.display())]
    Validation { rejected: usize, report: PathBuf },
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Topics(#[from] TopicsError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("missing required input `{0}`")]
    MissingInput(&'static str),
}

impl PipelineError {
    /// 1 for usage and configuration problems, 2 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::MissingInput(_) | PipelineError::Io(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FileValidation {
    pub path: String,
    pub accepted: usize,
    pub rejected: usize,
    pub errors: Vec<RecordError>,
}

/// Per-record parse failures for every input file.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub files: BTreeMap<String, FileValidation>,
}

impl ValidationReport {
    fn add<T>(&mut self, key: &str, path: &Path, parsed: &Parsed<T>) {
        self.files.insert(
            key.to_string(),
            FileValidation {
                path: path.display().to_string(),
                accepted: parsed.records.len(),
                rejected: parsed.errors.len(),
                errors: parsed.errors.clone(),
            },
        );
    }

    pub fn rejected(&self) -> usize {
        self.files.values().map(|f| f.rejected).sum()
    }
}

/// Parsed inputs plus everything derived from the configuration alone.
pub struct Inputs {
    pub registry: Registry,
    pub tweets: Vec<Tweet>,
    pub reports: Vec<BeachReport>,
    pub samples: Vec<KBrevisSample>,
    pub beaches: Vec<BeachLocation>,
    pub lexicon: Lexicon,
    pub cleaning: CleaningConfig,
    pub vocabularies: Vec<ConcernVocabulary>,
    pub validation: ValidationReport,
}

fn load_registry(cfg: &RunConfig) -> Result<Registry, PipelineError> {
    let path = cfg.registry.as_ref().ok_or(PipelineError::MissingInput("registry"))?;
    let mut registry = parse_geo_registry(path)?;
    if let Some(p) = &cfg.polygons {
        registry.attach_polygons(parse_polygons(p)?)?;
    }
    if !cfg.shared_unit_members.is_empty() {
        registry.add_shared_unit(&cfg.shared_unit_id, &cfg.shared_unit_name, &cfg.shared_unit_members)?;
        if let Some(w) = &cfg.shared_unit_weights {
            registry.set_shared_weights(&cfg.shared_unit_id, w.clone())?;
        }
    }
    Ok(registry)
}

fn load_lexicon(cfg: &RunConfig) -> Result<Lexicon, PipelineError> {
    let base = match &cfg.lexicon {
        Some(p) => parse_lexicon(p)?,
        None => read_lexicon(crate::defaults::LEXICON_CSV.as_bytes())?,
    };
    if !cfg.use_lexicon_patch {
        return Ok(base);
    }
    let patch = match &cfg.lexicon_patch {
        Some(p) => parse_lexicon_patch(p)?,
        None => read_lexicon_patch(crate::defaults::LEXICON_PATCH_CSV.as_bytes())?,
    };
    Ok(apply_domain_customization(base, &patch))
}

fn read_text(path: &Path) -> Result<String, PipelineError> {
    Ok(crate::corpus::read_to_string(path)?)
}

fn load_vocabularies(cfg: &RunConfig) -> Result<Vec<ConcernVocabulary>, PipelineError> {
    let sources = [
        (Category::Environment, &cfg.concern_environment, crate::defaults::CONCERN_ENVIRONMENT),
        (Category::Health, &cfg.concern_health, crate::defaults::CONCERN_HEALTH),
        (Category::Economy, &cfg.concern_economy, crate::defaults::CONCERN_ECONOMY),
        (Category::Government, &cfg.concern_government, crate::defaults::CONCERN_GOVERNMENT),
    ];
    sources
        .into_iter()
        .map(|(cat, path, bundled)| {
            Ok(match path {
                Some(p) => ConcernVocabulary::parse(cat, &read_text(p)?),
                None => ConcernVocabulary::parse(cat, bundled),
            })
        })
        .collect()
}

/// Reads and validates every configured input.
pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs, PipelineError> {
    cfg.validate()?;
    cfg.check_files()?;
    let registry = load_registry(cfg)?;
    let mut validation = ValidationReport::default();

    let tweets_path = cfg.tweets.as_ref().ok_or(PipelineError::MissingInput("tweets"))?;
    let format = cfg.tweets_format.unwrap_or_else(|| TweetFormat::from_path(tweets_path));
    let tweets = parse_tweets(tweets_path, format, &registry)?;
    validation.add("tweets", tweets_path, &tweets);

    let mut reports = Parsed::default();
    if let Some(p) = &cfg.beach {
        reports = read_beach_reports(std::fs::File::open(p).map_err(|source| CorpusError::Io {
            path: p.clone(),
            source,
        })?)?;
        validation.add("beach", p, &reports);
    }
    let mut samples = Parsed::default();
    if let Some(p) = &cfg.kbrevis {
        samples = read_kbrevis_samples(
            std::fs::File::open(p).map_err(|source| CorpusError::Io {
                path: p.clone(),
                source,
            })?,
            &cfg.bbox,
        )?;
        validation.add("kbrevis", p, &samples);
    }
    let mut beaches = Parsed::default();
    if let Some(p) = &cfg.beaches {
        beaches = parse_beach_locations(p)?;
        validation.add("beaches", p, &beaches);
    }

    let window = cfg.window()?;
    let mut cleaning = CleaningConfig::new(window);
    cleaning.utc_offset_minutes = cfg.utc_offset_minutes;
    cleaning.shared_unit = cfg.shared_unit_id.clone();
    if let Some(p) = &cfg.political_phrases {
        cleaning.political_phrases = load_political_phrases(&read_text(p)?);
    }
    if let Some(p) = &cfg.account_overrides {
        cleaning.account_overrides = parse_account_overrides(p)?;
    }

    Ok(Inputs {
        registry,
        tweets: tweets.records,
        reports: reports.records,
        samples: samples.records,
        beaches: beaches.records,
        lexicon: load_lexicon(cfg)?,
        cleaning,
        vocabularies: load_vocabularies(cfg)?,
        validation,
    })
}

/// Tweet as written to `cleaned.jsonl`: only the resolved location is kept.
fn resolved_tweet(c: &CleanTweet) -> Tweet {
    let mut t = c.tweet.clone();
    let loc: GeoRef = c.location.clone();
    match loc.source {
        MatchSource::Place => {
            t.place_match = Some(loc);
            t.profile_match = None;
        }
        MatchSource::Geoprofile => {
            t.place_match = None;
            t.profile_match = Some(loc);
        }
    }
    t
}

pub fn score_all(admitted: &[CleanTweet], lexicon: &Lexicon, cfg: &RunConfig) -> Vec<ScoredText> {
    admitted
        .par_iter()
        .map(|c| score_text(&c.tweet.id, &c.tweet.text, lexicon, &cfg.sentiment))
        .collect()
}

pub fn observations(admitted: &[CleanTweet], scores: &[ScoredText], cfg: &RunConfig) -> Vec<TweetObservation> {
    admitted
        .iter()
        .zip(scores)
        .map(|(c, s)| TweetObservation::from_clean(c, s.total, cfg.utc_offset_minutes))
        .collect()
}

/// Joined tweet and condition panels for every configured level, frequency
/// and match filter, in that nesting order.
pub fn build_panels(inputs: &Inputs, obs: &[TweetObservation], cfg: &RunConfig) -> Result<Vec<Panel>, PipelineError> {
    let window = cfg.window()?;
    let sample_counties = assign_samples(&inputs.samples, &inputs.registry, cfg.condition.sample_max_miles)
        .map_err(AggregationError::from)?;
    let cond_inputs = ConditionInputs {
        reports: &inputs.reports,
        samples: &inputs.samples,
        sample_counties: &sample_counties,
        beaches: &inputs.beaches,
    };
    let mut panels = Vec::new();
    for &level in &cfg.levels {
        for &freq in &cfg.freqs {
            let conditions = aggregate_conditions(&cond_inputs, &inputs.registry, &window, level, freq, &cfg.condition)?;
            for &m in &cfg.matches {
                let tweets = aggregate_tweets(obs, &inputs.registry, &window, level, freq, m, cfg.account_filter)?;
                panels.push(join_panels(&tweets, &conditions)?);
            }
        }
    }
    Ok(panels)
}

pub fn build_grids(panels: &[Panel], cfg: &RunConfig) -> Vec<CorrelationGrid> {
    let mut grids = Vec::new();
    for &m in &cfg.matches {
        let subset: Vec<&Panel> = panels.iter().filter(|p| p.matched_by == m).collect();
        for &cond in &cfg.conditions {
            for &shift in &cfg.shifts {
                grids.push(correlation_grid(&subset, cfg.metric, cond, shift, cfg.pooling));
            }
        }
    }
    grids
}

fn grid_heatmap(grid: &CorrelationGrid, cfg: &RunConfig) -> String {
    let rows: Vec<String> = cfg
        .levels
        .iter()
        .map(|l| if *l == GeoLevel::Region { "total".to_string() } else { l.to_string() })
        .collect();
    let cols: Vec<String> = cfg.freqs.iter().map(|f| f.to_string()).collect();
    let values: Vec<Vec<Option<f64>>> = cfg
        .levels
        .iter()
        .map(|l| cfg.freqs.iter().map(|f| grid.entries.get(&(*l, *f)).and_then(GridEntry::r)).collect())
        .collect();
    let title = format!(
        "r({}, {}) match={} shift={}",
        grid.metric, grid.condition, grid.matched_by.as_str(), grid.shift
    );
    heatmap_svg(&title, &rows, &cols, &values)
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
enum FitResult {
    Fit(RegressionFit),
    Error { error: String },
}

impl<E: std::fmt::Display> From<Result<RegressionFit, E>> for FitResult {
    fn from(r: Result<RegressionFit, E>) -> Self {
        match r {
            Ok(f) => FitResult::Fit(f),
            Err(e) => FitResult::Error { error: e.to_string() },
        }
    }
}

#[derive(Debug, Serialize)]
struct DistanceFits {
    high_impact_weeks: usize,
    city_weeks: usize,
    log_count_on_distance: FitResult,
    retweet_fraction_on_distance: FitResult,
}

fn csv_bytes(f: impl FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<(), csv::Error>) -> Result<Vec<u8>, csv::Error> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        f(&mut w)?;
        w.flush()?;
    }
    Ok(buf)
}

fn write_distance(
    out: &mut ArtifactWriter,
    inputs: &Inputs,
    outcome: &CleaningOutcome,
    obs: &[TweetObservation],
    cfg: &RunConfig,
) -> Result<(), PipelineError> {
    let window = cfg.window()?;
    let sites = high_impact_by_week(&inputs.samples, &window, cfg.high_impact_cells);
    let city = aggregate_tweets(
        obs,
        &inputs.registry,
        &window,
        GeoLevel::City,
        Frequency::Weekly,
        MatchFilter::All,
        cfg.account_filter,
    )?;
    let records = city_week_records(&city, &inputs.registry, &sites, &cfg.bins)?;
    let fit = distance_regression(&records, cfg.zero_policy);

    let scatter = csv_bytes(|w| {
        w.write_record(["unit", "week", "distance_miles", "count", "per_capita", "bin"])?;
        for r in &records {
            w.write_record([
                r.unit.clone(),
                r.week.to_string(),
                r.distance_miles.to_string(),
                r.count.to_string(),
                r.per_capita_count.to_string(),
                r.bin.as_str().to_string(),
            ])?;
        }
        Ok(())
    })?;
    out.write("scatter.csv", &scatter)?;

    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.per_capita_count > 0.0)
        .map(|r| (r.distance_miles, r.per_capita_count.ln()))
        .collect();
    let line = fit.as_ref().ok().map(|f| (f.intercept, f.slope));
    out.write(
        "scatter.svg",
        scatter_svg("city-weeks by distance to nearest high-impact site", "miles", "ln(per-capita count)", &points, line)
            .as_bytes(),
    )?;

    let bins = match bin_contrasts(&records, cfg.zero_policy, cfg.confidence) {
        Ok(c) => serde_json::json!({ "confidence": cfg.confidence, "contrasts": c }),
        Err(e) => serde_json::json!({ "confidence": cfg.confidence, "error": e.to_string() }),
    };
    out.write_json("bins.json", &bins)?;

    let coords: Vec<CoordObservation> = outcome
        .admitted
        .iter()
        .filter_map(|c| {
            let coords = c.tweet.coords?;
            let date = local_date(c.tweet.timestamp, cfg.utc_offset_minutes);
            let week = bucket_index(&window, Frequency::Weekly, date)?;
            Some(CoordObservation {
                week,
                coords,
                retweet: c.tweet.is_retweet(),
            })
        })
        .collect();
    let (rt_records, rt_fit) = retweet_fraction_by_distance(&coords, &sites).map_err(DistanceError::from)?;
    let rt = csv_bytes(|w| {
        w.write_record(["week", "lat", "lon", "distance_miles", "total", "retweets", "fraction"])?;
        for r in &rt_records {
            w.write_record([
                r.week.to_string(),
                r.coords.lat.to_string(),
                r.coords.lon.to_string(),
                r.distance_miles.to_string(),
                r.total.to_string(),
                r.retweets.to_string(),
                r.fraction.to_string(),
            ])?;
        }
        Ok(())
    })?;
    out.write("retweets.csv", &rt)?;

    out.write_json(
        "fit.json",
        &DistanceFits {
            high_impact_weeks: sites.len(),
            city_weeks: records.len(),
            log_count_on_distance: fit.into(),
            retweet_fraction_on_distance: rt_fit.into(),
        },
    )?;
    Ok(())
}

fn write_topics(out: &mut ArtifactWriter, inputs: &Inputs, outcome: &CleaningOutcome, cfg: &RunConfig) -> Result<(), PipelineError> {
    let window = cfg.window()?;
    let matcher = ConcernMatcher::new(&inputs.vocabularies, cfg.stemming)?;
    let n_buckets = bucketize(&window, Frequency::Weekly).len();
    let texts: Vec<(&str, usize)> = outcome
        .admitted
        .iter()
        .map(|c| {
            let date = local_date(c.tweet.timestamp, cfg.utc_offset_minutes);
            (c.tweet.text.as_str(), bucket_index(&window, Frequency::Weekly, date).unwrap_or(n_buckets))
        })
        .collect();
    let summaries = categorize(&texts, &matcher, n_buckets);
    let mut buf = Vec::new();
    write_concerns_csv(&mut buf, &summaries)?;
    out.write("concerns.csv", &buf)?;

    let located: Vec<LocatedText<'_>> = outcome
        .admitted
        .iter()
        .map(|c| LocatedText {
            id: &c.tweet.id,
            unit_id: &c.location.unit_id,
            text: &c.tweet.text,
        })
        .collect();
    let units: Vec<&str> = inputs
        .registry
        .units_at(GeoLevel::Region)
        .chain(inputs.registry.units_at(GeoLevel::County))
        .map(|u| u.id.as_str())
        .collect();
    let terms = units
        .par_iter()
        .map(|u| top_polarized_terms(&located, &inputs.lexicon, &inputs.registry, u, cfg.top_k, cfg.stemming))
        .collect::<Result<Vec<_>, _>>()?;
    let mut buf = Vec::new();
    write_top_terms_csv(&mut buf, &terms)?;
    out.write("top_terms.csv", &buf)?;
    Ok(())
}

fn manifest_for(stage: Stage, cfg: &RunConfig) -> Result<Manifest, PipelineError> {
    let mut m = Manifest::new(stage.as_str(), cfg.hash());
    let files = [
        ("tweets", &cfg.tweets),
        ("beach", &cfg.beach),
        ("kbrevis", &cfg.kbrevis),
        ("beaches", &cfg.beaches),
        ("registry", &cfg.registry),
        ("polygons", &cfg.polygons),
        ("lexicon", &cfg.lexicon),
        ("lexicon_patch", &cfg.lexicon_patch),
        ("political_phrases", &cfg.political_phrases),
        ("account_overrides", &cfg.account_overrides),
        ("concern_environment", &cfg.concern_environment),
        ("concern_health", &cfg.concern_health),
        ("concern_economy", &cfg.concern_economy),
        ("concern_government", &cfg.concern_government),
    ];
    for (key, path) in files {
        if let Some(p) = path {
            m.add_input(key, p)?;
        }
    }
    Ok(m)
}

/// Runs `stage` (and whatever it depends on) and writes its artifacts plus
/// `manifest.json` into `out_dir`.
pub fn run(stage: Stage, cfg: &RunConfig, out_dir: &Path) -> Result<Manifest, PipelineError> {
    let inputs = load_inputs(cfg)?;
    let mut out = ArtifactWriter::new(out_dir, manifest_for(stage, cfg)?)?;

    let rejected = inputs.validation.rejected();
    if stage.runs(Stage::Ingest) || (rejected > 0 && !cfg.allow_invalid) {
        out.write_json("validation_report.json", &inputs.validation)?;
    }
    if rejected > 0 && !cfg.allow_invalid {
        out.finish()?;
        return Err(PipelineError::Validation {
            rejected,
            report: out_dir.join("validation_report.json"),
        });
    }
    if stage.runs(Stage::Ingest) {
        out.write_json(
            "ingest_summary.json",
            &serde_json::json!({
                "tweets": inputs.tweets.len(),
                "beach_reports": inputs.reports.len(),
                "kbrevis_samples": inputs.samples.len(),
                "beaches": inputs.beaches.len(),
                "registry": inputs.registry.summary(),
                "lexicon_entries": inputs.lexicon.len(),
            }),
        )?;
    }
    if stage == Stage::Ingest {
        return Ok(out.finish()?);
    }

    let outcome = clean(inputs.tweets.clone(), &inputs.cleaning);
    if stage.runs(Stage::Clean) {
        let cleaned: Vec<Tweet> = outcome.admitted.iter().map(resolved_tweet).collect();
        let mut buf = Vec::new();
        write_tweets_jsonl(&mut buf, &cleaned)?;
        out.write("cleaned.jsonl", &buf)?;
        out.write_json("cleaning_report.json", &outcome.report)?;
        let rej = csv_bytes(|w| {
            w.write_record(["tweet_id", "reason"])?;
            for r in &outcome.rejections {
                w.write_record([r.tweet_id.as_str(), r.reason.as_str()])?;
            }
            Ok(())
        })?;
        out.write("rejections.csv", &rej)?;
    }
    if stage == Stage::Clean {
        return Ok(out.finish()?);
    }

    let scores = score_all(&outcome.admitted, &inputs.lexicon, cfg);
    if stage.runs(Stage::Sentiment) {
        let bytes = csv_bytes(|w| {
            w.write_record(["tweet_id", "unit", "date", "sentences", "questions", "ellipsis_runs", "score"])?;
            for (c, s) in outcome.admitted.iter().zip(&scores) {
                w.write_record([
                    s.tweet_id.clone(),
                    c.location.unit_id.clone(),
                    local_date(c.tweet.timestamp, cfg.utc_offset_minutes).to_string(),
                    s.sentence_scores.len().to_string(),
                    s.question_flags.iter().filter(|q| **q).count().to_string(),
                    s.ellipsis_runs.to_string(),
                    s.total.to_string(),
                ])?;
            }
            Ok(())
        })?;
        out.write("sentiment.csv", &bytes)?;
    }
    let obs = observations(&outcome.admitted, &scores, cfg);

    if stage.runs(Stage::Aggregate) || stage.runs(Stage::Correlate) {
        let panels = build_panels(&inputs, &obs, cfg)?;
        if stage.runs(Stage::Aggregate) {
            let refs: Vec<&Panel> = panels.iter().collect();
            let mut buf = Vec::new();
            write_panel_csv(&mut buf, &refs)?;
            out.write("panel.csv", &buf)?;
            let unresolved = csv_bytes(|w| {
                w.write_record(["level", "freq", "match", "reason", "tweets"])?;
                for p in &panels {
                    let mut by_reason: BTreeMap<&str, usize> = BTreeMap::new();
                    for u in &p.unresolved {
                        *by_reason.entry(u.reason.as_str()).or_default() += 1;
                    }
                    for (reason, n) in by_reason {
                        let n = n.to_string();
                        w.write_record([p.level.as_str(), p.freq.as_str(), p.matched_by.as_str(), reason, &n])?;
                    }
                }
                Ok(())
            })?;
            out.write("unresolved.csv", &unresolved)?;
        }
        if stage.runs(Stage::Correlate) {
            let grids = build_grids(&panels, cfg);
            let mut buf = Vec::new();
            write_grid_csv(&mut buf, &grids)?;
            out.write("grid.csv", &buf)?;
            let shown = grids.iter().find(|g| g.shift == 0).or(grids.first());
            if let Some(g) = shown {
                out.write("heatmap.svg", grid_heatmap(g, cfg).as_bytes())?;
            }
        }
    }
    if stage.runs(Stage::Distance) {
        write_distance(&mut out, &inputs, &outcome, &obs, cfg)?;
    }
    if stage.runs(Stage::Topics) {
        write_topics(&mut out, &inputs, &outcome, cfg)?;
    }
    Ok(out.finish()?)
}
