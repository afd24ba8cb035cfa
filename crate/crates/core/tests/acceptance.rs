//! Acceptance suite. Prints one line per criterion and exits non-zero when
//! any criterion fails. Criterion 6 needs the released corpus and is skipped
//! unless `TIDEWATCH_RELEASED_CORPUS` names its run config.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use rayon::prelude::*;

use tidewatch::aggregation::{
    aggregate_conditions, aggregate_tweets, assign_samples, bucketize, join_panels, top_k_stat, AccountFilter, ConditionConfig,
    ConditionInputs, Frequency, MatchFilter, Panel, PanelCell, TopKStat, TweetObservation,
};
use tidewatch::analytics::{
    city_week_records, distance_regression, high_impact_by_week, panel_correlation, tukey_kramer, Condition, Metric, ZeroPolicy,
};
use tidewatch::cleaning::{clean, CleaningConfig, StudyWindow};
use tidewatch::config::RunConfig;
use tidewatch::corpus::registry::test_fixtures::five_county_registry;
use tidewatch::corpus::{AccountClass, GeoLevel, GeoRef, KBrevisSample, MatchSource, Registry, Tweet, TweetKind};
use tidewatch::geospatial::{credit_share, DistanceBins};
use tidewatch::sentiment::{default_lexicon, polarity_sum, score_text, tokenize, SentimentConfig};
use tidewatch::synthkit::rng::Rng;
use tidewatch::synthkit::{generate, SynthOutput, SynthSpec};
use tidewatch::LatLon;

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: String) -> Self {
        Self {
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn window_of(spec: &SynthSpec) -> StudyWindow {
    StudyWindow::new(spec.window_start, spec.window_end()).expect("window")
}

fn observe(out: &SynthOutput, spec: &SynthSpec) -> (Vec<TweetObservation>, usize) {
    let mut cfg = CleaningConfig::new(window_of(spec));
    cfg.utc_offset_minutes = spec.utc_offset_minutes;
    let outcome = clean(out.tweets.clone(), &cfg);
    let obs = outcome
        .admitted
        .iter()
        .map(|c| TweetObservation::from_clean(c, 0.0, spec.utc_offset_minutes))
        .collect();
    (obs, outcome.admitted.len())
}

fn condition_panel(out: &SynthOutput, window: &StudyWindow, level: GeoLevel, freq: Frequency) -> Panel {
    let counties = assign_samples(&out.kbrevis, &out.registry, 30.0).expect("assign");
    let inputs = ConditionInputs {
        reports: &out.beach_reports,
        samples: &out.kbrevis,
        sample_counties: &counties,
        beaches: &out.beaches,
    };
    aggregate_conditions(&inputs, &out.registry, window, level, freq, &ConditionConfig::default()).expect("conditions")
}

fn tweet_panel(obs: &[TweetObservation], registry: &Registry, window: &StudyWindow, level: GeoLevel, freq: Frequency, m: MatchFilter) -> Panel {
    aggregate_tweets(obs, registry, window, level, freq, m, AccountFilter::default()).expect("tweets")
}

// 1. sentiment golden values

fn criterion_sentiment() -> Outcome {
    let started = Instant::now();
    let lex = default_lexicon();
    let cfg = SentimentConfig::default();
    let pre = |text: &str| {
        let t = tokenize(text);
        t.sentences.iter().map(|s| polarity_sum(&s.tokens, &lex, &cfg)).sum::<f64>()
    };
    let total = |text: &str| score_text("t", text, &lex, &cfg).total;
    let mut failures = Vec::new();
    let mut expect = |name: &str, got: f64, want: f64| {
        if !close(got, want, 1e-12) {
            failures.push(format!("{name}: got {got}, want {want}"));
        }
    };
    expect("good", pre("good"), 0.75);
    expect("bad", pre("bad"), -0.75);
    expect("disgusting", pre("disgusting"), -1.0);
    expect("no signs of red tide", pre("no signs of red tide"), 1.0);
    let plain = total("the water is good today");
    expect("question multiplier", total("the water is good today?"), 0.25 * plain);
    expect("one ellipsis run", total("the water is good today..."), plain - 0.15);
    expect("two ellipsis runs", total("the water... is good today..."), total("the water is good today") - 0.30);
    expect("single word sentence", total("good"), 0.75);
    let elapsed = started.elapsed().as_secs_f64();
    let ok = failures.is_empty() && elapsed < 1.0;
    let detail = if failures.is_empty() {
        format!("all golden values within 1e-12 in {elapsed:.3}s")
    } else {
        failures.join("; ")
    };
    Outcome::check(ok, detail)
}

// 2. credit conservation

fn random_fixture_tweets(rng: &mut Rng, registry: &Registry, n: usize, window: &StudyWindow) -> Vec<Tweet> {
    let located: Vec<(String, String)> = [GeoLevel::County, GeoLevel::City, GeoLevel::Zcta]
        .iter()
        .flat_map(|&l| registry.units_at(l).map(|u| (u.id.clone(), u.name.clone())).collect::<Vec<_>>())
        .collect();
    (0..n)
        .map(|i| {
            let day = window.start + Duration::days(rng.below(window.days() as u64) as i64);
            let ts = Utc.from_utc_datetime(&day.and_hms_opt(17, 0, 0).expect("time"));
            let (place, profile) = if rng.bernoulli(0.2) {
                let r = GeoRef {
                    unit_id: "hillsborough".into(),
                    source: MatchSource::Geoprofile,
                    raw_label: "Tampa Bay".into(),
                };
                (None, Some(r))
            } else {
                let (id, name) = rng.choose(&located).clone();
                if rng.bernoulli(0.3) {
                    (
                        Some(GeoRef {
                            unit_id: id,
                            source: MatchSource::Place,
                            raw_label: name,
                        }),
                        None,
                    )
                } else {
                    (
                        None,
                        Some(GeoRef {
                            unit_id: id,
                            source: MatchSource::Geoprofile,
                            raw_label: name,
                        }),
                    )
                }
            };
            Tweet {
                id: format!("r{i:06}"),
                timestamp: ts,
                text: "red tide again".into(),
                kind: if rng.bernoulli(0.4) { TweetKind::Retweet } else { TweetKind::Original },
                account_class: AccountClass::Citizen,
                place_match: place,
                profile_match: profile,
                coords: None,
                user: None,
                verified: None,
            }
        })
        .collect()
}

fn county_mass_gap(obs: &[TweetObservation], registry: &Registry, window: &StudyWindow, admitted: usize) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut unresolved = 0;
    for freq in [Frequency::Weekly, Frequency::Daily] {
        let p = tweet_panel(obs, registry, window, GeoLevel::County, freq, MatchFilter::All);
        worst = worst.max((p.total_count() - admitted as f64).abs());
        unresolved += p.unresolved.len();
    }
    (worst, unresolved)
}

fn criterion_credit() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let registry = five_county_registry();
    let window = StudyWindow::new(NaiveDate::from_ymd_opt(2018, 5, 15).unwrap(), NaiveDate::from_ymd_opt(2019, 5, 15).unwrap()).unwrap();
    let mut rng = Rng::new(2024);
    let mut worst = 0.0f64;
    let mut shared_total = 0;
    for _ in 0..20 {
        let tweets = random_fixture_tweets(&mut rng, &registry, 500, &window);
        let outcome = clean(tweets, &CleaningConfig::new(window));
        shared_total += outcome.report.reassigned_tampa_bay;
        let obs: Vec<_> = outcome.admitted.iter().map(|c| TweetObservation::from_clean(c, 0.0, -300)).collect();
        let (gap, unresolved) = county_mass_gap(&obs, &registry, &window, outcome.admitted.len());
        worst = worst.max(gap);
        ok &= unresolved == 0;
    }
    for seed in 1..=5 {
        let spec = SynthSpec { seed, ..Default::default() };
        let out = generate(&spec).expect("synth");
        let (obs, admitted) = observe(&out, &spec);
        let (gap, unresolved) = county_mass_gap(&obs, &out.registry, &window_of(&spec), admitted);
        worst = worst.max(gap);
        ok &= unresolved == 0;
    }
    ok &= worst <= 1e-9 && shared_total > 0;
    notes.push(format!("max |county mass - admitted| = {worst:.2e} over 25 corpora ({shared_total} shared tweets)"));

    let split = credit_share("tampa_bay_shared", &registry).expect("split");
    let (h, p) = (split.weight("hillsborough"), split.weight("pinellas"));
    let rounds = close((h * 10.0).round() / 10.0, 0.6, 1e-12) && close((p * 10.0).round() / 10.0, 0.4, 1e-12);
    ok &= rounds && close(h + p, 1.0, 1e-12);
    notes.push(format!("population split {h:.4}/{p:.4}"));

    let mut fixed = five_county_registry();
    fixed.set_shared_weights("tampa_bay_shared", vec![0.6, 0.4]).expect("weights");
    let f = credit_share("tampa_bay_shared", &fixed).expect("split");
    let exact = close(f.weight("hillsborough"), 0.6, 1e-9) && close(f.weight("pinellas"), 0.4, 1e-9);
    ok &= exact;
    notes.push(format!("fixed split {:.4}/{:.4}", f.weight("hillsborough"), f.weight("pinellas")));
    Outcome::check(ok, notes.join("; "))
}

// 3. correlation oracle

struct RawPanel {
    units: Vec<String>,
    buckets: usize,
    metric: HashMap<(usize, usize), f64>,
    dead: HashMap<(usize, usize), f64>,
    kb: HashMap<(usize, usize), Option<f64>>,
}

fn random_raw_panel(rng: &mut Rng) -> RawPanel {
    let n_units = 1 + rng.below(6) as usize;
    let buckets = 4 + rng.below(40) as usize;
    let mut raw = RawPanel {
        units: (0..n_units).map(|u| format!("u{u}")).collect(),
        buckets,
        metric: HashMap::new(),
        dead: HashMap::new(),
        kb: HashMap::new(),
    };
    let coupling = rng.range(-1.0, 1.0);
    for u in 0..n_units {
        let offset = rng.range(0.0, 50.0);
        for b in 0..buckets {
            let d = rng.range(0.0, 2.0);
            raw.dead.insert((u, b), d);
            raw.metric.insert((u, b), offset + coupling * 10.0 * d + rng.normal());
            raw.kb.insert((u, b), rng.bernoulli(0.8).then(|| rng.range(0.0, 5e6)));
        }
    }
    raw
}

fn to_panel(raw: &RawPanel) -> Panel {
    let start = NaiveDate::from_ymd_opt(2018, 5, 15).unwrap();
    let window = StudyWindow::new(start, start + Duration::days(7 * raw.buckets as i64 - 1)).unwrap();
    let mut cells = BTreeMap::new();
    for (u, name) in raw.units.iter().enumerate() {
        for b in 0..raw.buckets {
            let cell = PanelCell {
                per_capita_count: raw.metric[&(u, b)],
                dead_fish: raw.dead[&(u, b)],
                kbrevis: raw.kb[&(u, b)],
                has_tweets: true,
                has_conditions: true,
                ..Default::default()
            };
            cells.insert((name.clone(), b), cell);
        }
    }
    Panel {
        level: GeoLevel::County,
        freq: Frequency::Weekly,
        matched_by: MatchFilter::All,
        buckets: bucketize(&window, Frequency::Weekly),
        cells,
        unresolved: Vec::new(),
    }
}

/// Textbook Pearson on explicitly listed pairs.
fn brute_pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 3 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Hand-shifted pairs: metric of bucket t with condition of bucket t + shift.
fn hand_pairs(raw: &RawPanel, shift: i64, kbrevis: bool) -> Vec<(f64, f64)> {
    let mut pairs = Vec::new();
    for u in 0..raw.units.len() {
        for t in 0..raw.buckets as i64 {
            let s = t + shift;
            if s < 0 || s >= raw.buckets as i64 {
                continue;
            }
            let x = raw.metric[&(u, t as usize)];
            let y = if kbrevis {
                match raw.kb[&(u, s as usize)] {
                    Some(v) => v,
                    None => continue,
                }
            } else {
                raw.dead[&(u, s as usize)]
            };
            pairs.push((x, y));
        }
    }
    pairs
}

fn criterion_correlation() -> Outcome {
    let mut rng = Rng::new(77);
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for i in 0..100 {
        let raw = random_raw_panel(&mut rng);
        let panel = to_panel(&raw);
        for shift in [-1i64, 0, 1] {
            for (cond, kb) in [(Condition::DeadFish, false), (Condition::KBrevis, true)] {
                let want = brute_pearson(&hand_pairs(&raw, shift, kb));
                let got = panel_correlation(&panel, Metric::PerCapitaCount, cond, shift).ok();
                match (got, want) {
                    (Some(g), Some(w)) => {
                        let rel = (g.r - w).abs() / w.abs().max(1e-300);
                        worst = worst.max(rel);
                        if !rel_close(g.r, w, 1e-10) || g.n != hand_pairs(&raw, shift, kb).len() {
                            mismatches.push(format!("panel {i} shift {shift} {}: {} vs {w}", cond.as_str(), g.r));
                        }
                        checked += 1;
                    }
                    (None, None) => {}
                    (g, w) => mismatches.push(format!("panel {i} shift {shift}: defined mismatch {g:?} vs {w:?}")),
                }
            }
        }
    }
    // constructed lead: metric equals next bucket's condition
    let mut raw = random_raw_panel(&mut Rng::new(5));
    for u in 0..raw.units.len() {
        for b in 0..raw.buckets {
            let next = raw.dead.get(&(u, b + 1)).copied().unwrap_or(0.0);
            raw.metric.insert((u, b), 3.0 * next + 1.0);
        }
    }
    let lead = panel_correlation(&to_panel(&raw), Metric::PerCapitaCount, Condition::DeadFish, 1).map(|c| c.r).unwrap_or(f64::NAN);
    let ok = mismatches.is_empty() && checked > 500 && close(lead, 1.0, 1e-12);
    let detail = if mismatches.is_empty() {
        format!("{checked} correlations over 100 panels, shifts -1/0/+1, max rel err {worst:.1e}; constructed lead r = {lead:.12}")
    } else {
        mismatches.into_iter().take(3).collect::<Vec<_>>().join("; ")
    };
    Outcome::check(ok, detail)
}

// 4. planted recovery

fn recovered_coupling(seed: u64) -> (f64, usize) {
    let spec = SynthSpec {
        seed,
        window_days: 700,
        counties: 5,
        coupling_rho: 0.8,
        distance_decay: 0.0,
        ..Default::default()
    };
    let out = generate(&spec).expect("synth");
    let window = window_of(&spec);
    let (obs, _) = observe(&out, &spec);
    let tweets = tweet_panel(&obs, &out.registry, &window, GeoLevel::County, Frequency::Weekly, MatchFilter::All);
    let conditions = condition_panel(&out, &window, GeoLevel::County, Frequency::Weekly);
    let joined = join_panels(&tweets, &conditions).expect("join");
    let c = panel_correlation(&joined, Metric::PerCapitaCount, Condition::DeadFish, 0).expect("r");
    (c.r, c.n)
}

fn distance_slope(seed: u64) -> (f64, usize) {
    let spec = SynthSpec {
        seed,
        counties: 1,
        cities_per_county: 6,
        distance_decay: 0.05,
        peak_rate: 1000.0,
        political_noise_rate: 0.0,
        ..Default::default()
    };
    let out = generate(&spec).expect("synth");
    let window = window_of(&spec);
    let (obs, _) = observe(&out, &spec);
    let panel = tweet_panel(&obs, &out.registry, &window, GeoLevel::City, Frequency::Weekly, MatchFilter::All);
    let sites = high_impact_by_week(&out.kbrevis, &window, 1e6);
    let records = city_week_records(&panel, &out.registry, &sites, &DistanceBins::default()).expect("records");
    let fit = distance_regression(&records, ZeroPolicy::Exclude).expect("fit");
    (fit.slope, records.len())
}

fn tukey_coverage(sims: usize) -> f64 {
    let means = [0.0, -1.0, -2.0];
    let sizes = [40usize, 50, 60];
    let covered: usize = (0..sims as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = Rng::fork(9001, s);
            let groups: Vec<Vec<f64>> = means
                .iter()
                .zip(sizes)
                .map(|(&m, n)| (0..n).map(|_| m + 0.5 * rng.normal()).collect())
                .collect();
            let refs: Vec<&[f64]> = groups.iter().map(Vec::as_slice).collect();
            let intervals = tukey_kramer(&refs, 0.95).expect("tukey");
            usize::from(intervals.iter().all(|(&(i, j), iv)| iv.covers(means[i] - means[j])))
        })
        .sum();
    covered as f64 / sims as f64
}

fn criterion_recovery() -> Outcome {
    let started = Instant::now();
    let results: Vec<(f64, usize)> = (1..=100u64).into_par_iter().map(recovered_coupling).collect();
    let inside = results.iter().filter(|(r, _)| (0.75..=0.85).contains(r)).count();
    let n_ok = results.iter().all(|&(_, n)| n == 500);
    let (lo, hi) = results.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &(r, _)| (lo.min(r), hi.max(r)));

    let slopes: Vec<(f64, usize)> = (1..=10u64).into_par_iter().map(distance_slope).collect();
    let slope_ok = slopes.iter().all(|&(s, _)| close(s, -0.05, 0.01));
    let (slo, shi) = slopes.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &(s, _)| (lo.min(s), hi.max(s)));

    let coverage = tukey_coverage(500);
    let elapsed = started.elapsed().as_secs_f64();
    let ok = inside >= 95 && n_ok && slope_ok && coverage >= 0.93 && elapsed < 60.0;
    Outcome::check(
        ok,
        format!(
            "r in [0.75, 0.85] for {inside}/100 seeds (range {lo:.3}..{hi:.3}, n = 500: {n_ok}); \
             slope range {slo:.4}..{shi:.4} over 10 seeds; Tukey coverage {:.1}%; {elapsed:.1}s",
            coverage * 100.0
        ),
    )
}

// 5. aggregation consistency

fn criterion_aggregation() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();

    let spec = SynthSpec { seed: 11, ..Default::default() };
    let out = generate(&spec).expect("synth");
    let window = window_of(&spec);
    let (obs, _) = observe(&out, &spec);
    let mut worst = 0.0f64;
    for level in GeoLevel::ALL {
        for m in [MatchFilter::All, MatchFilter::ExplicitOnly] {
            let weekly = tweet_panel(&obs, &out.registry, &window, level, Frequency::Weekly, m);
            let daily = tweet_panel(&obs, &out.registry, &window, level, Frequency::Daily, m);
            for ((unit, w), cell) in &weekly.cells {
                let sum: f64 = (7 * w..7 * w + 7).filter_map(|d| daily.cell(unit, d)).map(|c| c.tweet_count).sum();
                worst = worst.max((sum - cell.tweet_count).abs());
            }
        }
    }
    ok &= worst <= 1e-9;
    notes.push(format!("weekly vs summed daily max gap {worst:.1e}"));

    let mut rollup_gap = 0.0f64;
    for freq in [Frequency::Weekly, Frequency::ThreeDay, Frequency::Daily] {
        let county = tweet_panel(&obs, &out.registry, &window, GeoLevel::County, freq, MatchFilter::All);
        let city = tweet_panel(&obs, &out.registry, &window, GeoLevel::City, freq, MatchFilter::All);
        let mut summed: HashMap<(String, usize), f64> = HashMap::new();
        for ((unit, b), cell) in &city.cells {
            let parent = out.registry.ancestor_at(unit, GeoLevel::County).expect("parent").to_string();
            *summed.entry((parent, *b)).or_default() += cell.tweet_count;
        }
        for (key, cell) in &county.cells {
            rollup_gap = rollup_gap.max((summed.get(key).copied().unwrap_or(0.0) - cell.tweet_count).abs());
        }
    }
    ok &= rollup_gap <= 1e-9;
    notes.push(format!("county vs city roll-up max gap {rollup_gap:.1e}"));

    let registry = five_county_registry();
    let counties: Vec<(String, [f64; 4])> = vec![
        ("pasco".into(), [28.17, 28.45, -82.9, -82.05]),
        ("pinellas".into(), [27.65, 28.17, -82.9, -82.6]),
        ("hillsborough".into(), [27.65, 28.17, -82.6, -82.2]),
        ("manatee".into(), [27.4, 27.65, -82.9, -82.05]),
        ("sarasota".into(), [26.95, 27.4, -82.9, -82.05]),
    ];
    let kwindow = StudyWindow::new(NaiveDate::from_ymd_opt(2018, 5, 15).unwrap(), NaiveDate::from_ymd_opt(2019, 5, 15).unwrap()).unwrap();
    let mut rng = Rng::new(31337);
    let mut top_mismatch = 0;
    for set in 0..1000 {
        let (county, [la0, la1, lo0, lo1]) = rng.choose(&counties).clone();
        let week = rng.below(52) as i64;
        let n = 1 + rng.below(15) as usize;
        let samples: Vec<KBrevisSample> = (0..n)
            .map(|i| KBrevisSample {
                sample_id: format!("s{set}_{i}"),
                date: kwindow.start + Duration::days(7 * week + rng.below(7) as i64),
                location: LatLon::new(rng.range(la0 + 0.01, la1 - 0.01), rng.range(lo0 + 0.01, lo1 - 0.01)),
                cells_per_liter: 10f64.powf(rng.range(0.0, 7.0)).round(),
            })
            .collect();
        let assigned = assign_samples(&samples, &registry, 30.0).expect("assign");
        let inputs = ConditionInputs {
            reports: &[],
            samples: &samples,
            sample_counties: &assigned,
            beaches: &[],
        };
        let panel = aggregate_conditions(&inputs, &registry, &kwindow, GeoLevel::County, Frequency::Weekly, &ConditionConfig::default())
            .expect("conditions");
        let mut values: Vec<f64> = samples.iter().map(|s| s.cells_per_liter).collect();
        values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let top = &values[..values.len().min(5)];
        let oracle = top.iter().sum::<f64>() / top.len() as f64;
        let got = panel.cell(&county, week as usize).and_then(|c| c.kbrevis);
        let direct = top_k_stat(&samples.iter().map(|s| s.cells_per_liter).collect::<Vec<_>>(), 5, TopKStat::Mean);
        let agree = |v: Option<f64>| v.is_some_and(|v| rel_close(v, oracle, 1e-12));
        if !agree(got) || !agree(direct) {
            top_mismatch += 1;
        }
    }
    ok &= top_mismatch == 0;
    notes.push(format!("top-5 mean vs sort-and-average oracle: {} of 1000 sets agree", 1000 - top_mismatch));
    Outcome::check(ok, notes.join("; "))
}

// 6. replication against the released corpus

fn criterion_replication() -> Outcome {
    let Some(path) = std::env::var_os("TIDEWATCH_RELEASED_CORPUS") else {
        return Outcome {
            status: Status::Skip,
            detail: "TIDEWATCH_RELEASED_CORPUS not set; released corpus not supplied".into(),
        };
    };
    match replicate(PathBuf::from(path)) {
        Ok(o) => o,
        Err(e) => Outcome::check(false, format!("could not run on supplied corpus: {e}")),
    }
}

fn replicate(path: PathBuf) -> Result<Outcome, String> {
    use tidewatch::pipeline::{build_panels, load_inputs, observations, score_all};
    let mut cfg = RunConfig::load(&path).map_err(|e| e.to_string())?;
    let dir = path.parent().unwrap_or(std::path::Path::new("."));
    cfg.set("levels", "total,county,city,zcta", dir).map_err(|e| e.to_string())?;
    cfg.set("freqs", "weekly,3day", dir).map_err(|e| e.to_string())?;
    cfg.set("matches", "explicit,all", dir).map_err(|e| e.to_string())?;
    let inputs = load_inputs(&cfg).map_err(|e| e.to_string())?;
    let outcome = clean(inputs.tweets.clone(), &inputs.cleaning);
    let scores = score_all(&outcome.admitted, &inputs.lexicon, &cfg);
    let obs = observations(&outcome.admitted, &scores, &cfg);
    let panels = build_panels(&inputs, &obs, &cfg).map_err(|e| e.to_string())?;
    let r = |level: GeoLevel, freq: Frequency| -> f64 {
        panels
            .iter()
            .find(|p| p.level == level && p.freq == freq && p.matched_by == MatchFilter::ExplicitOnly)
            .and_then(|p| panel_correlation(p, cfg.metric, Condition::DeadFish, 0).ok())
            .map_or(f64::NAN, |c| c.r)
    };
    let mut ok = true;
    let mut notes = Vec::new();
    let levels = [GeoLevel::Region, GeoLevel::County, GeoLevel::City, GeoLevel::Zcta];
    for (freq, targets) in [(Frequency::Weekly, [0.82, 0.79, 0.54, 0.35]), (Frequency::ThreeDay, [0.78, 0.74, 0.46, 0.28])] {
        let got: Vec<f64> = levels.iter().map(|&l| r(l, freq)).collect();
        ok &= got.iter().zip(targets).all(|(g, t)| close(*g, t, 0.05));
        notes.push(format!("{freq} {:?} vs {targets:?}", got.iter().map(|g| (g * 100.0).round() / 100.0).collect::<Vec<_>>()));
    }
    let county_weekly = r(GeoLevel::County, Frequency::Weekly);
    ok &= close(county_weekly, 0.79, 0.03);
    let admitted = outcome.admitted.len();
    let explicit = outcome.admitted.iter().filter(|c| c.location.source == MatchSource::Place).count();
    let retweets = outcome.admitted.iter().filter(|c| c.tweet.is_retweet()).count();
    let pct = (100.0 * retweets as f64 / admitted.max(1) as f64).round();
    ok &= admitted == 18082 && explicit == 1295 && pct == 41.0;
    notes.push(format!("totals {admitted}/{explicit}/{pct}% retweets"));
    Ok(Outcome::check(ok, notes.join("; ")))
}

// 7. cleaning determinism and political recall

fn criterion_cleaning() -> Outcome {
    let mut ok = true;
    let mut recalled = 0;
    let mut planted = 0;
    for seed in [3u64, 4, 5] {
        let spec = SynthSpec {
            seed,
            political_noise_rate: 0.2,
            ..Default::default()
        };
        let out = generate(&spec).expect("synth");
        let mut cfg = CleaningConfig::new(window_of(&spec));
        cfg.utc_offset_minutes = spec.utc_offset_minutes;
        let first = clean(out.tweets.clone(), &cfg);
        let second = clean(out.tweets.clone(), &cfg);
        ok &= first == second;
        let again = clean(first.admitted.iter().map(|c| c.tweet.clone()).collect(), &cfg);
        ok &= again.admitted == first.admitted;
        let political: Vec<&Tweet> = out.tweets.iter().filter(|t| t.text.contains("Rick") || t.text.contains("Red Tide party")).collect();
        planted += out.truth.political_tweets;
        let admitted_ids: std::collections::HashSet<&str> = first.admitted.iter().map(|c| c.tweet.id.as_str()).collect();
        recalled += political.iter().filter(|t| !admitted_ids.contains(t.id.as_str())).count();
        ok &= political.len() == out.truth.political_tweets && first.report.excluded_political == out.truth.political_tweets;
    }
    ok &= recalled == planted;
    Outcome::check(
        ok,
        format!("identical outcomes on repeat and re-clean; political recall {recalled}/{planted}"),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 7] = [
        ("sentiment golden values", criterion_sentiment),
        ("credit-share conservation", criterion_credit),
        ("correlation oracle equivalence", criterion_correlation),
        ("planted-parameter recovery", criterion_recovery),
        ("aggregation consistency", criterion_aggregation),
        ("released-corpus replication", criterion_replication),
        ("cleaning determinism and political recall", criterion_cleaning),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        let tag = match o.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Skip => "SKIP",
        };
        println!("{tag} criterion {}: {name}: {}", i + 1, o.detail);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
