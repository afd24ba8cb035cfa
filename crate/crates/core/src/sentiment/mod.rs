//! Lexicon sentiment with valence shifters.
//!
//! Each sentence is segmented by longest-match lexicon lookup. A polarized
//! match with weight `w` is adjusted by the shifters in its context window
//! (the nearest `window_before` preceding and `window_after` following
//! non-polarized units in the same sentence):
//!
//! ```text
//! adjusted = w * (-1)^negators * (1 + max(-0.9, amp - deamp)) * adversative
//! sentence = sum(adjusted) / sqrt(tokens)      (* question_weight for questions)
//! tweet    = sum(sentence) - ellipsis_penalty * ellipsis_runs
//! ```
//!
//! An adversative conjunction anywhere before the match scales it by
//! `adversative_before`; one anywhere after scales it by `adversative_after`.

pub mod tokenize;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::lexicon::{Lexicon, PatchOp, ShifterClass};
pub use tokenize::{tokenize, Sentence, Tokenized};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentenceAggregation {
    Sum,
    Mean,
}

impl FromStr for SentenceAggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "sum" => Ok(Self::Sum),
            "mean" => Ok(Self::Mean),
            other => Err(format!("unknown sentence aggregation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentConfig {
    pub question_weight: f64,
    pub ellipsis_penalty: f64,
    pub window_before: usize,
    pub window_after: usize,
    /// Lower bound on `amp - deamp`, keeping the multiplier at or above 0.1.
    pub shift_floor: f64,
    pub adversative_before: f64,
    pub adversative_after: f64,
    pub aggregation: SentenceAggregation,
}

impl Default for SentimentConfig {
    fn default() -> Self {
        Self {
            question_weight: 0.25,
            ellipsis_penalty: 0.15,
            window_before: 4,
            window_after: 2,
            shift_floor: -0.9,
            adversative_before: 1.25,
            adversative_after: 0.75,
            aggregation: SentenceAggregation::Sum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredText {
    pub tweet_id: String,
    pub sentence_scores: Vec<f64>,
    pub question_flags: Vec<bool>,
    pub ellipsis_runs: usize,
    pub total: f64,
}

#[derive(Debug, Clone, Copy)]
enum Unit {
    Plain,
    Shifter { class: ShifterClass, weight: f64 },
    Polarized { weight: f64 },
}

fn segment(tokens: &[String], lexicon: &Lexicon) -> Vec<Unit> {
    let mut units = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        match lexicon.longest_match(tokens, i) {
            Some(e) => {
                units.push(match e.class {
                    ShifterClass::Polarized => Unit::Polarized { weight: e.weight },
                    class => Unit::Shifter { class, weight: e.weight },
                });
                i += e.phrase.len();
            }
            None => {
                units.push(Unit::Plain);
                i += 1;
            }
        }
    }
    units
}

/// Sum of shifter-adjusted polarized weights in one sentence, before length
/// normalization and question damping.
pub fn polarity_sum(tokens: &[String], lexicon: &Lexicon, cfg: &SentimentConfig) -> f64 {
    let units = segment(tokens, lexicon);
    let is_context = |u: &Unit| !matches!(u, Unit::Polarized { .. });
    let adversative = |u: &Unit| matches!(u, Unit::Shifter { class: ShifterClass::Adversative, .. });
    let mut sum = 0.0;
    for (i, unit) in units.iter().enumerate() {
        let Unit::Polarized { weight } = *unit else { continue };
        let before = units[..i].iter().rev().filter(|u| is_context(u)).take(cfg.window_before);
        let after = units[i + 1..].iter().filter(|u| is_context(u)).take(cfg.window_after);
        let mut negators = 0u32;
        let mut shift = 0.0;
        for u in before.chain(after) {
            if let Unit::Shifter { class, weight } = *u {
                match class {
                    ShifterClass::Negator => negators += 1,
                    ShifterClass::Amplifier => shift += weight,
                    ShifterClass::Deamplifier => shift -= weight,
                    _ => {}
                }
            }
        }
        let sign = if negators % 2 == 1 { -1.0 } else { 1.0 };
        let mut adjusted = weight * sign * (1.0 + f64::max(cfg.shift_floor, shift));
        if units[..i].iter().any(adversative) {
            adjusted *= cfg.adversative_before;
        }
        if units[i + 1..].iter().any(adversative) {
            adjusted *= cfg.adversative_after;
        }
        sum += adjusted;
    }
    sum
}

pub fn score_sentence(sentence: &Sentence, lexicon: &Lexicon, cfg: &SentimentConfig) -> f64 {
    if sentence.tokens.is_empty() {
        return 0.0;
    }
    let mut score = polarity_sum(&sentence.tokens, lexicon, cfg) / (sentence.tokens.len() as f64).sqrt();
    if sentence.question {
        score *= cfg.question_weight;
    }
    score
}

pub fn score_text(tweet_id: &str, text: &str, lexicon: &Lexicon, cfg: &SentimentConfig) -> ScoredText {
    let tokenized = tokenize(text);
    let sentence_scores: Vec<f64> = tokenized
        .sentences
        .iter()
        .map(|s| score_sentence(s, lexicon, cfg))
        .collect();
    let combined = match cfg.aggregation {
        SentenceAggregation::Sum => sentence_scores.iter().sum(),
        SentenceAggregation::Mean if sentence_scores.is_empty() => 0.0,
        SentenceAggregation::Mean => sentence_scores.iter().sum::<f64>() / sentence_scores.len() as f64,
    };
    ScoredText {
        tweet_id: tweet_id.to_string(),
        question_flags: tokenized.sentences.iter().map(|s| s.question).collect(),
        total: combined - cfg.ellipsis_penalty * tokenized.ellipsis_runs as f64,
        ellipsis_runs: tokenized.ellipsis_runs,
        sentence_scores,
    }
}

pub fn score_tweet(tweet: &crate::corpus::Tweet, lexicon: &Lexicon, cfg: &SentimentConfig) -> ScoredText {
    score_text(&tweet.id, &tweet.text, lexicon, cfg)
}

/// Applies patch operations in order; later operations win.
pub fn apply_domain_customization(mut base: Lexicon, patch: &[PatchOp]) -> Lexicon {
    for op in patch {
        match op {
            PatchOp::Upsert(entry) => base.upsert(entry.clone()),
            PatchOp::Remove(phrase) => {
                base.remove(phrase);
            }
        }
    }
    base
}

/// The bundled base lexicon with the bundled red-tide customizations applied.
pub fn default_lexicon() -> Lexicon {
    let base = crate::corpus::lexicon::read_lexicon(crate::defaults::LEXICON_CSV.as_bytes())
        .expect("bundled lexicon is valid");
    let patch = crate::corpus::lexicon::read_lexicon_patch(crate::defaults::LEXICON_PATCH_CSV.as_bytes())
        .expect("bundled patch is valid");
    apply_domain_customization(base, &patch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::lexicon::{read_lexicon, read_lexicon_patch, LexiconEntry};
    use proptest::prelude::*;

    fn lex() -> Lexicon {
        default_lexicon()
    }

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn sentence(s: &str, question: bool) -> Sentence {
        Sentence {
            tokens: words(s),
            question,
        }
    }

    #[test]
    fn single_word_weights() {
        let cfg = SentimentConfig::default();
        let l = lex();
        assert_eq!(score_sentence(&sentence("good", false), &l, &cfg), 0.75);
        assert_eq!(polarity_sum(&words("bad"), &l, &cfg), -0.75);
        assert_eq!(polarity_sum(&words("disgusting"), &l, &cfg), -1.0);
    }

    #[test]
    fn negation_flips_sign() {
        let cfg = SentimentConfig::default();
        let s = score_sentence(&sentence("not good", false), &lex(), &cfg);
        // one negator, two tokens
        assert!((s - (-0.75 / 2f64.sqrt())).abs() < 1e-12);
        assert!((s - -0.5303300858899106).abs() < 1e-12);
        let double = polarity_sum(&words("not not bad"), &lex(), &cfg);
        assert_eq!(double, -0.75);
    }

    #[test]
    fn question_is_quarter_of_declarative() {
        let cfg = SentimentConfig::default();
        let l = lex();
        let q = score_text("q", "is red tide really bad there?", &l, &cfg).total;
        let d = score_text("d", "is red tide really bad there.", &l, &cfg).total;
        assert!(d != 0.0);
        assert!((q - 0.25 * d).abs() < 1e-15);
    }

    #[test]
    fn phrase_consumes_its_tokens() {
        let cfg = SentimentConfig::default();
        let s = score_sentence(&sentence("no signs of red tide", false), &lex(), &cfg);
        assert!((s - 1.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!((s - 0.4472135954999579).abs() < 1e-12);
    }

    #[test]
    fn ellipsis_penalty_applied_per_run() {
        let cfg = SentimentConfig::default();
        let l = Lexicon::from_entries([LexiconEntry::new("discolored", ShifterClass::Polarized, Some(-0.5)).unwrap()]);
        let s = score_text("x", "water is discolored...", &l, &cfg);
        assert_eq!(s.ellipsis_runs, 1);
        assert!((s.total - -0.4386751345948129).abs() < 1e-12);
    }

    #[test]
    fn no_matches_scores_zero() {
        let cfg = SentimentConfig::default();
        assert_eq!(score_text("x", "heading to the gulf today", &lex(), &cfg).total, 0.0);
    }

    #[test]
    fn customized_absence_phrase() {
        let cfg = SentimentConfig::default();
        let s = score_text("x", "Red tide is gone", &lex(), &cfg);
        assert!((s.total - 0.5).abs() < 1e-12);
    }

    #[test]
    fn amplifier_and_deamplifier() {
        let cfg = SentimentConfig::default();
        let l = lex();
        assert!((polarity_sum(&words("very bad"), &l, &cfg) - -0.75 * 1.8).abs() < 1e-12);
        assert!((polarity_sum(&words("barely good"), &l, &cfg) - 0.75 * 0.4).abs() < 1e-12);
        // three deamplifiers hit the floor: multiplier 0.1
        assert!((polarity_sum(&words("barely hardly slightly good"), &l, &cfg) - 0.075).abs() < 1e-12);
    }

    #[test]
    fn adversative_reweights_clauses() {
        let cfg = SentimentConfig::default();
        let l = lex();
        // "good" precedes "but": 0.75 * 0.75; "awful" follows: -1 * 1.25 ... weight from lexicon
        let awful = l.lookup("awful").unwrap().weight;
        let s = polarity_sum(&words("beach looks good but water smells awful"), &l, &cfg);
        assert!((s - (0.75 * 0.75 + awful * 1.25)).abs() < 1e-12);
    }

    #[test]
    fn window_limits() {
        let cfg = SentimentConfig::default();
        let l = lex();
        // negator five units back is outside the 4-unit window
        assert_eq!(polarity_sum(&words("not a b c d good"), &l, &cfg), 0.75);
        assert_eq!(polarity_sum(&words("not a b c good"), &l, &cfg), -0.75);
        // two units after is inside, three is not
        assert_eq!(polarity_sum(&words("good a not"), &l, &cfg), -0.75);
        assert_eq!(polarity_sum(&words("good a b not"), &l, &cfg), 0.75);
    }

    #[test]
    fn customization_edits() {
        let base = read_lexicon(crate::defaults::LEXICON_CSV.as_bytes()).unwrap();
        assert!(base.lookup("bloom").is_some());
        let patched = apply_domain_customization(
            base.clone(),
            &read_lexicon_patch(crate::defaults::LEXICON_PATCH_CSV.as_bytes()).unwrap(),
        );
        assert!(patched.lookup("bloom").is_none());
        assert!(patched.lookup("impact").unwrap().weight < 0.0);
        assert!(patched.lookup("affect").unwrap().weight < 0.0);
        for level in ["low", "medium", "high"] {
            for noun in ["levels", "concentrations"] {
                assert!(patched.lookup(&format!("{level} {noun}")).unwrap().weight < 0.0);
            }
        }
        for p in ["no more red tide", "red tide is gone", "no signs of red tide"] {
            assert_eq!(patched.lookup(p).unwrap().weight, 1.0);
        }
        let cfg = SentimentConfig::default();
        assert!(polarity_sum(&words("high levels today"), &patched, &cfg) < 0.0);

        let patch = read_lexicon_patch(
            "op,phrase,class,weight\noverride,murky,polarized,-0.2\noverride,murky,polarized,-0.6\n".as_bytes(),
        )
        .unwrap();
        let twice = apply_domain_customization(base, &patch);
        assert_eq!(twice.lookup("murky").unwrap().weight, -0.6);
    }

    fn filler() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec(prop::sample::select(vec!["the", "water", "at", "lido", "today", "we", "saw"]), 0..6)
            .prop_map(|v| v.into_iter().map(String::from).collect())
    }

    proptest! {
        #[test]
        fn negator_negates_polarity_sum(pre in filler(), post in filler(),
                                         word in prop::sample::select(vec!["good", "bad", "awful", "gorgeous"])) {
            let cfg = SentimentConfig::default();
            let l = lex();
            let mut plain = pre.clone();
            plain.push(word.to_string());
            plain.extend(post.iter().take(2).cloned());
            let mut negated = pre.clone();
            negated.push("not".into());
            negated.push(word.to_string());
            negated.extend(post.iter().take(2).cloned());
            let a = polarity_sum(&plain, &l, &cfg);
            let b = polarity_sum(&negated, &l, &cfg);
            prop_assert_eq!(b, -a);
            let n = plain.len() as f64;
            let sa = score_sentence(&Sentence { tokens: plain, question: false }, &l, &cfg);
            let sb = score_sentence(&Sentence { tokens: negated, question: false }, &l, &cfg);
            prop_assert!((sb + sa * (n / (n + 1.0)).sqrt()).abs() < 1e-12);
        }

        #[test]
        fn question_damping(text in "[a-z ]{1,40}") {
            let cfg = SentimentConfig::default();
            let l = lex();
            let tokens = phrase_tokens_for(&text);
            prop_assume!(!tokens.is_empty());
            let d = score_sentence(&Sentence { tokens: tokens.clone(), question: false }, &l, &cfg);
            let q = score_sentence(&Sentence { tokens, question: true }, &l, &cfg);
            prop_assert!((q - 0.25 * d).abs() < 1e-15);
        }

        #[test]
        fn amplifier_never_weakens(pre in filler(), word in prop::sample::select(vec!["good", "bad", "gorgeous", "disgusting"])) {
            let cfg = SentimentConfig::default();
            let l = lex();
            let mut base = pre.clone();
            base.push(word.to_string());
            let mut amped = pre;
            amped.push("very".into());
            amped.push(word.to_string());
            let s0 = score_sentence(&Sentence { tokens: base, question: false }, &l, &cfg);
            let s1 = score_sentence(&Sentence { tokens: amped, question: false }, &l, &cfg);
            if s0 > 0.0 { prop_assert!(s1 >= s0); } else { prop_assert!(s1 <= s0); }
        }

        #[test]
        fn trailing_ellipsis_costs_penalty(words in prop::collection::vec(prop::sample::select(
            vec!["red", "tide", "is", "bad", "good", "not", "very", "beach", "but", "fish", "dead"]), 1..12)) {
            let cfg = SentimentConfig::default();
            let l = lex();
            let text = words.join(" ");
            let a = score_text("x", &text, &l, &cfg).total;
            let b = score_text("x", &format!("{text}..."), &l, &cfg).total;
            prop_assert!((a - b - 0.15).abs() < 1e-12);
        }

        #[test]
        fn scoring_is_deterministic(text in ".{0,80}") {
            let cfg = SentimentConfig::default();
            let l = lex();
            prop_assert_eq!(score_text("x", &text, &l, &cfg), score_text("x", &text, &l, &cfg));
        }
    }

    fn phrase_tokens_for(s: &str) -> Vec<String> {
        tokenize::phrase_tokens(s)
    }
}
