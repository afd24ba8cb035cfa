//! Localized harmful-algal-bloom impact assessment from geo-annotated
//! social-media posts and in-situ red-tide condition data.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`corpus`] parses tweets, beach reports, K. brevis samples, the
//!   locality registry and sentiment lexicons.
//! * [`cleaning`] removes political-nickname tweets, resolves each tweet to a
//!   single location, reassigns ambiguous "Tampa Bay" profiles and applies
//!   the study window.
//! * [`geospatial`] holds the distance, containment, credit-sharing and
//!   per-capita arithmetic.
//! * [`sentiment`] is the lexicon and valence-shifter scoring engine.
//! * [`aggregation`] builds (unit, time bucket) panels.
//! * [`analytics`] computes panel correlations, distance-decay regressions
//!   and Tukey contrasts.
//! * [`topics`] counts concern-category keywords and top polarized terms.
//! * [`synthkit`] generates seeded synthetic corpora with planted parameters.
//! * [`pipeline`] and [`config`] wire the stages together for the CLI.

pub mod aggregation;
pub mod analytics;
pub mod cleaning;
pub mod config;
pub mod corpus;
pub mod geospatial;
pub mod output;
pub mod pipeline;
pub mod sentiment;
pub mod synthkit;
pub mod topics;

pub use geospatial::LatLon;

/// Default data files bundled with the crate.
pub mod defaults {
    pub const LEXICON_CSV: &str = include_str!("../data/lexicon.csv");
    pub const LEXICON_PATCH_CSV: &str = include_str!("../data/lexicon_patch.csv");
    pub const POLITICAL_PHRASES: &str = include_str!("../data/political_phrases.txt");
    pub const CONCERN_ENVIRONMENT: &str = include_str!("../data/concern_environment.txt");
    pub const CONCERN_HEALTH: &str = include_str!("../data/concern_health.txt");
    pub const CONCERN_ECONOMY: &str = include_str!("../data/concern_economy.txt");
    pub const CONCERN_GOVERNMENT: &str = include_str!("../data/concern_government.txt");
}
