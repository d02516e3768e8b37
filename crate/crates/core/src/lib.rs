//! Streaming tweet filtering for influenza-like-illness (ILI) tracking.
//!
//! The pipeline has two steps. A keyword stage keeps tweets that mention
//! respiratory-syndrome terms from a lexicon; semantic stages then drop
//! tweets that are negated, joking, off-topic by hashtag or emoticon, or
//! posted from outside the target country. Surviving tweets are bucketed
//! into epidemiological weeks and correlated against a gold-standard
//! weekly incidence series.
//!
//! Modules:
//!
//! * [`corpus`] reads JSON-lines tweet archives (plain or gzip).
//! * [`textproc`] tokenizes tweets and splits them into sentences.
//! * [`lexicon`] loads keyword lists and compiles a phrase matcher.
//! * [`negation`] decides whether a negation governs the word "flu".
//! * [`geo`] resolves profile locations to countries.
//! * [`filters`] composes the stages into a pipeline.
//! * [`stats`] buckets by epi-week and computes correlations.
//! * [`chart`] renders weekly series as an SVG line chart.

pub mod chart;
pub mod corpus;
pub mod filters;
pub mod geo;
pub mod lexicon;
pub mod negation;
pub mod stats;
pub mod textproc;

pub use corpus::{corpus_stats, parse_record, read_corpus, CorpusStats, Tweet};
pub use filters::{run_pipeline, PipelineConfig, PipelineOutcome, Resources, StageDecision};
pub use lexicon::{Lexicon, PhraseMatcher};
pub use stats::{pearson, pearson_pvalue, EpiWeek, GoldSeries, Season, WeeklySeries};
pub use textproc::{split_sentences, tokenize, Sentence, Span, Token, TokenKind};
