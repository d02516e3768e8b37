//! Synthetic corpora with a planted weekly signal.
//!
//! Week `w` gets `round(scale * gold[w] * tweets_per_week)` genuine
//! illness reports. The remaining slots are distractors drawn from the
//! noise mix; most distractor classes still mention a syndrome phrase and
//! "flu", so only the semantic stages can tell them apart.

use std::io::Write;
use std::path::PathBuf;

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use flutrack::corpus::{write_jsonl, Tweet};
use flutrack::lexicon::Lexicon;
use flutrack::stats::{GoldSeries, Season, StatsError, SHAPED_GOLD};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("noise fraction {name} = {value} must lie in [0, 1]")]
    BadFraction { name: &'static str, value: f64 },
    #[error("noise fractions sum to {0}, more than 1")]
    FractionSum(f64),
    #[error("signal_fraction_scale must be positive, got {0}")]
    BadScale(f64),
    #[error("tweets_per_week must be positive")]
    NoTweets,
    #[error("gold series has {gold} weeks, spec asks for {weeks}")]
    WeekMismatch { gold: usize, weeks: u32 },
    #[error("week {week}: {positives} positives exceed {tweets_per_week} tweets")]
    Infeasible {
        week: u32,
        positives: u64,
        tweets_per_week: u32,
    },
    #[error("invalid spec file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TweetClass {
    Positive,
    Joke,
    Negated,
    UrlNews,
    ForeignGeo,
    Irrelevant,
}

impl TweetClass {
    pub const ALL: [TweetClass; 6] = [
        TweetClass::Positive,
        TweetClass::Joke,
        TweetClass::Negated,
        TweetClass::UrlNews,
        TweetClass::ForeignGeo,
        TweetClass::Irrelevant,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TweetClass::Positive => "positive",
            TweetClass::Joke => "joke",
            TweetClass::Negated => "negated",
            TweetClass::UrlNews => "url_news",
            TweetClass::ForeignGeo => "foreign_geo",
            TweetClass::Irrelevant => "irrelevant",
        }
    }
}

/// Probability of each distractor class for a non-positive slot. Whatever
/// the fractions leave over also goes to irrelevant chatter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseMix {
    pub joke: f64,
    pub negated: f64,
    pub url_news: f64,
    pub foreign_geo: f64,
    pub irrelevant: f64,
}

impl NoiseMix {
    /// `total` split evenly over the four keyword-bearing classes.
    pub fn even(total: f64) -> Self {
        NoiseMix {
            joke: total / 4.0,
            negated: total / 4.0,
            url_news: total / 4.0,
            foreign_geo: total / 4.0,
            irrelevant: 0.0,
        }
    }

    pub fn none() -> Self {
        Self::even(0.0)
    }

    fn entries(&self) -> [(&'static str, TweetClass, f64); 5] {
        [
            ("joke", TweetClass::Joke, self.joke),
            ("negated", TweetClass::Negated, self.negated),
            ("url_news", TweetClass::UrlNews, self.url_news),
            ("foreign_geo", TweetClass::ForeignGeo, self.foreign_geo),
            ("irrelevant", TweetClass::Irrelevant, self.irrelevant),
        ]
    }

    fn validate(&self) -> Result<(), SpecError> {
        let mut sum = 0.0;
        for (name, _, value) in self.entries() {
            if !(0.0..=1.0).contains(&value) {
                return Err(SpecError::BadFraction { name, value });
            }
            sum += value;
        }
        if sum > 1.0 + 1e-9 {
            return Err(SpecError::FractionSum(sum));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut impl Rng) -> TweetClass {
        let mut u: f64 = rng.gen();
        for (_, class, p) in self.entries() {
            if u < p {
                return class;
            }
            u -= p;
        }
        TweetClass::Irrelevant
    }
}

impl Default for NoiseMix {
    fn default() -> Self {
        Self::even(0.3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub season: Season,
    pub gold: GoldSeries,
    pub tweets_per_week: u32,
    pub signal_fraction_scale: f64,
    pub noise: NoiseMix,
    pub seed: u64,
}

/// On-disk form of a spec; the gold curve defaults to the shipped
/// 36-week shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecFile {
    pub season_start: NaiveDate,
    pub weeks: u32,
    pub gold: Option<PathBuf>,
    pub tweets_per_week: u32,
    pub signal_fraction_scale: f64,
    pub noise: NoiseMix,
    pub seed: u64,
}

impl Default for SpecFile {
    fn default() -> Self {
        let season = Season::flu_2009();
        SpecFile {
            season_start: season.start(),
            weeks: season.weeks(),
            gold: None,
            tweets_per_week: 5000,
            signal_fraction_scale: 0.01,
            noise: NoiseMix::default(),
            seed: 1,
        }
    }
}

impl SpecFile {
    pub fn build(self) -> Result<SyntheticSpec, SpecError> {
        let season = Season::new(self.season_start, self.weeks)?;
        let gold = match &self.gold {
            Some(path) => flutrack::stats::load_gold(path, self.weeks)?,
            None => GoldSeries::from_csv(SHAPED_GOLD.as_bytes(), self.weeks)?,
        };
        let spec = SyntheticSpec {
            season,
            gold,
            tweets_per_week: self.tweets_per_week,
            signal_fraction_scale: self.signal_fraction_scale,
            noise: self.noise,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl SyntheticSpec {
    pub fn positives(&self, week: u32) -> u64 {
        let g = self.gold.values()[week as usize - 1];
        (self.signal_fraction_scale * g * self.tweets_per_week as f64).round() as u64
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.tweets_per_week == 0 {
            return Err(SpecError::NoTweets);
        }
        if !(self.signal_fraction_scale > 0.0 && self.signal_fraction_scale.is_finite()) {
            return Err(SpecError::BadScale(self.signal_fraction_scale));
        }
        if self.gold.len() != self.season.weeks() as usize {
            return Err(SpecError::WeekMismatch {
                gold: self.gold.len(),
                weeks: self.season.weeks(),
            });
        }
        self.noise.validate()?;
        for week in 1..=self.season.weeks() {
            let positives = self.positives(week);
            if positives > self.tweets_per_week as u64 {
                return Err(SpecError::Infeasible {
                    week,
                    positives,
                    tweets_per_week: self.tweets_per_week,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimSummary {
    /// Tweet counts per week, indexed like `TweetClass::ALL`.
    pub per_week: Vec<[u64; 6]>,
}

impl SimSummary {
    pub fn count(&self, week: u32, class: TweetClass) -> u64 {
        let k = TweetClass::ALL.iter().position(|c| *c == class).unwrap();
        self.per_week[week as usize - 1][k]
    }
}

const US_LOCATIONS: &[&str] = &[
    "NY, USA",
    "Boston, MA",
    "Chicago",
    "Texas",
    "Seattle, WA",
    "Los Angeles, CA",
    "Atlanta, Georgia",
    "Denver, CO",
    "Miami, FL",
    "ÜT: 40.7128,-74.0060",
];

const FOREIGN_LOCATIONS: &[&str] = &["London", "Jakarta", "Toronto", "Sydney", "Mumbai", "Paris", "Manila", "Mexico City"];

const POSITIVE: &[&str] = &[
    "ugh i think i have the flu. {s} all day",
    "home sick with the flu, {s} and chills",
    "day 3 of this flu and the {s} is getting worse",
    "caught the flu from my roommate, {s} since yesterday #flu",
    "{s} and a fever, pretty sure it's the flu",
    "stuck in bed with flu and {s}",
];

const JOKE: &[&str] = &[
    "haha my {s} sounds like a dying whale, flu season is here",
    "***cough*** i have the flu ***cough*** {s} lol",
    "hahaha {s} and flu, what a combo",
    "told my boss i have flu and {s} lol",
];

const NEGATED: &[&str] = &[
    "i do not have the flu, it is just {s}",
    "it's not the flu, only {s}",
    "{s} but i never got the flu this year",
    "doctor says it isn't flu, just {s}",
];

const URL_NEWS: &[&str] = &[
    "swine flu cases rise, symptoms include {s} http://bit.ly/{n}",
    "health update on flu: watch for {s} http://t.co/{n}",
    "flu season guide: when {s} means see a doctor http://example.com/{n}",
];

const IRRELEVANT: &[&str] = &[
    "going to the mall later",
    "this coffee is amazing",
    "cant wait for the weekend",
    "new phone who dis",
    "watching the game tonight with friends",
    "traffic on the bridge again",
    "finally finished my homework",
];

struct Vocabulary {
    syndrome: Vec<String>,
}

impl Vocabulary {
    fn new() -> Self {
        let syndrome = Lexicon::builtin("bco_respiratory")
            .expect("shipped lexicon")
            .phrases()
            .to_vec();
        Vocabulary { syndrome }
    }

    fn fill(&self, template: &str, rng: &mut impl Rng) -> String {
        let s = self.syndrome.choose(rng).unwrap();
        template
            .replace("{s}", s)
            .replace("{n}", &format!("{:06x}", rng.gen_range(0..0xFFFFFF)))
    }
}

fn text_for(class: TweetClass, vocab: &Vocabulary, rng: &mut impl Rng) -> String {
    let pool = match class {
        TweetClass::Positive | TweetClass::ForeignGeo => POSITIVE,
        TweetClass::Joke => JOKE,
        TweetClass::Negated => NEGATED,
        TweetClass::UrlNews => URL_NEWS,
        TweetClass::Irrelevant => IRRELEVANT,
    };
    vocab.fill(pool.choose(rng).unwrap(), rng)
}

/// Writes the synthetic corpus as JSON lines and a `id,week,class` labels
/// CSV. Output depends only on `spec`.
pub fn generate(spec: &SyntheticSpec, corpus: &mut dyn Write, labels: &mut dyn Write) -> Result<SimSummary, std::io::Error> {
    spec.validate().map_err(std::io::Error::other)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vocab = Vocabulary::new();
    let mut labels_csv = csv::Writer::from_writer(labels);
    labels_csv.write_record(["id", "week", "class"])?;
    let mut per_week = Vec::new();
    let mut next_id = 0u64;

    for ew in spec.season.epi_weeks() {
        let positives = spec.positives(ew.index);
        let mut classes: Vec<TweetClass> = (0..spec.tweets_per_week as u64)
            .map(|i| {
                if i < positives {
                    TweetClass::Positive
                } else {
                    spec.noise.draw(&mut rng)
                }
            })
            .collect();
        classes.shuffle(&mut rng);

        let week_start = Utc.from_utc_datetime(&ew.start.and_hms_opt(0, 0, 0).unwrap());
        let mut slots: Vec<(i64, TweetClass)> = classes
            .into_iter()
            .map(|c| (rng.gen_range(0..7 * 86_400), c))
            .collect();
        slots.sort_by_key(|(secs, _)| *secs);

        let mut counts = [0u64; 6];
        for (secs, class) in slots {
            counts[TweetClass::ALL.iter().position(|c| *c == class).unwrap()] += 1;
            let location = match class {
                TweetClass::ForeignGeo => Some(FOREIGN_LOCATIONS.choose(&mut rng).unwrap().to_string()),
                TweetClass::Irrelevant if rng.gen_bool(0.3) => None,
                _ => Some(US_LOCATIONS.choose(&mut rng).unwrap().to_string()),
            };
            let tweet = Tweet {
                id: format!("s{next_id}"),
                created_at: week_start + Duration::seconds(secs),
                text: text_for(class, &vocab, &mut rng),
                user_id: format!("u{}", rng.gen_range(0..20_000)),
                user_location: location,
            };
            next_id += 1;
            write_jsonl(&mut *corpus, [&tweet])?;
            labels_csv.write_record([tweet.id.as_str(), &ew.index.to_string(), class.as_str()])?;
        }
        per_week.push(counts);
    }
    labels_csv.flush()?;
    corpus.flush()?;
    Ok(SimSummary { per_week })
}

#[cfg(test)]
mod tests {
    use super::*;
    use flutrack::filters::{run_pipeline, PipelineConfig, Resources};

    fn small_spec(seed: u64) -> SyntheticSpec {
        SpecFile {
            tweets_per_week: 200,
            seed,
            ..SpecFile::default()
        }
        .build()
        .unwrap()
    }

    #[test]
    fn same_seed_same_bytes() {
        let run = |seed| {
            let (mut c, mut l) = (Vec::new(), Vec::new());
            generate(&small_spec(seed), &mut c, &mut l).unwrap();
            (c, l)
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5).0, run(6).0);
    }

    #[test]
    fn positives_follow_gold() {
        let spec = small_spec(1);
        let (mut c, mut l) = (Vec::new(), Vec::new());
        let summary = generate(&spec, &mut c, &mut l).unwrap();
        for w in 1..=36 {
            assert_eq!(summary.count(w, TweetClass::Positive), spec.positives(w));
            let total: u64 = TweetClass::ALL.iter().map(|&k| summary.count(w, k)).sum();
            assert_eq!(total, 200);
        }
    }

    #[test]
    fn classes_meet_their_stages() {
        let res = Resources::builtin();
        let best = PipelineConfig::best_combination();
        let keyword = PipelineConfig::new(best.keyword_method);
        let vocab = Vocabulary::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for class in TweetClass::ALL {
            for i in 0..300 {
                let text = text_for(class, &vocab, &mut rng);
                let location = match class {
                    TweetClass::ForeignGeo => FOREIGN_LOCATIONS[i % FOREIGN_LOCATIONS.len()],
                    _ => US_LOCATIONS[i % US_LOCATIONS.len()],
                };
                let t = Tweet {
                    id: "x".into(),
                    created_at: Utc.with_ymd_and_hms(2009, 9, 1, 0, 0, 0).unwrap(),
                    text: text.clone(),
                    user_id: "u".into(),
                    user_location: Some(location.into()),
                };
                let kw = run_pipeline(&t, &keyword, &res).kept;
                let full = run_pipeline(&t, &best, &res).kept;
                match class {
                    TweetClass::Positive => assert!(full, "{text} @ {location}"),
                    TweetClass::Irrelevant => assert!(!kw, "{text}"),
                    _ => assert!(kw && !full, "{class:?}: {text} @ {location}"),
                }
            }
        }
    }

    #[test]
    fn infeasible_and_bad_specs() {
        let err = SpecFile {
            signal_fraction_scale: 1.0,
            ..SpecFile::default()
        }
        .build()
        .unwrap_err();
        assert!(matches!(err, SpecError::Infeasible { .. }));
        let err = SpecFile {
            noise: NoiseMix::even(1.2),
            ..SpecFile::default()
        }
        .build()
        .unwrap_err();
        assert!(matches!(err, SpecError::FractionSum(_)));
        let err = SpecFile {
            weeks: 30,
            ..SpecFile::default()
        }
        .build()
        .unwrap_err();
        assert!(matches!(err, SpecError::Stats(_)), "{err}");
    }
}
