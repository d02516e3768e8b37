//! The filtering pipeline: one keyword stage, an optional URL stage, then
//! semantic stages in configured order.
//!
//! Every stage is a total predicate over a single tweet. The pipeline stops
//! at the first stage that drops the tweet and records a decision for each
//! stage it ran.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Tweet;
use crate::geo::{
    builtin_bboxes, geo_stage, load_bboxes, CachedGeocoder, Gazetteer, GeoError, GeoResolver, HttpGeocoder,
};
use crate::lexicon::{Lexicon, LexiconError, MatchMode, PhraseMatch, PhraseMatcher, BUILTIN_LEXICONS};
use crate::negation::{negation_stage, NegationConfig};
use crate::textproc::{split_sentences, tokenize, EmoticonSet, Sentence, Span, TextError, Token, TokenKind};

pub const DEFAULT_HUMOR_PATTERNS: &str = include_str!("../data/humor.txt");

/// Name of the single-phrase lexicon holding the word "flu".
pub const FLU_LEXICON: &str = "flu";
const SYNDROME_LEXICON: &str = "bco_respiratory";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid pipeline config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("semantic stage {0} listed more than once")]
    DuplicateStage(StageId),
    #[error("geo stage requires geo_target")]
    MissingGeoTarget,
    #[error("negation window must be at least 1")]
    ZeroWindow,
    #[error("unknown lexicon override {0:?}")]
    UnknownLexicon(String),
    #[error("humor pattern on line {line} is invalid: {source}")]
    HumorPattern {
        line: usize,
        #[source]
        source: regex::Error,
    },
    #[error("humor pattern file has no patterns")]
    NoHumorPatterns,
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageId {
    Keyword,
    Url,
    Negation,
    Hashtags,
    Emoticon,
    Humor,
    Geo,
}

impl StageId {
    pub fn as_str(&self) -> &'static str {
        match self {
            StageId::Keyword => "keyword",
            StageId::Url => "url",
            StageId::Negation => "negation",
            StageId::Hashtags => "hashtags",
            StageId::Emoticon => "emoticon",
            StageId::Humor => "humor",
            StageId::Geo => "geo",
        }
    }
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasonCode {
    KeywordMatch,
    NoKeyword,
    MissingSyndromeTerm,
    MissingFluTerm,
    Url,
    NegatedTarget,
    UnrelatedHashtag,
    Emoticon,
    Humor,
    ForeignLocation,
    UnresolvedLocation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub code: ReasonCode,
    /// Byte span in the tweet text; absent for profile-level evidence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Evidence {
    pub fn new(code: ReasonCode, span: Option<Span>) -> Self {
        Evidence { code, span, note: None }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageDecision {
    pub stage: StageId,
    pub kept: bool,
    pub evidence: Vec<Evidence>,
}

impl StageDecision {
    pub fn keep(stage: StageId) -> Self {
        StageDecision {
            stage,
            kept: true,
            evidence: Vec::new(),
        }
    }

    /// Drop when there is any evidence against the tweet, keep otherwise.
    pub fn from_evidence(stage: StageId, evidence: Vec<Evidence>) -> Self {
        StageDecision {
            stage,
            kept: evidence.is_empty(),
            evidence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordMethod {
    Culotta4,
    Signorini4,
    Chew3,
    Syndrome,
    SyndromeFlu,
    SyndromeExtra,
}

impl KeywordMethod {
    pub const ALL: [KeywordMethod; 6] = [
        KeywordMethod::Culotta4,
        KeywordMethod::Signorini4,
        KeywordMethod::Chew3,
        KeywordMethod::Syndrome,
        KeywordMethod::SyndromeFlu,
        KeywordMethod::SyndromeExtra,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            KeywordMethod::Culotta4 => "culotta4",
            KeywordMethod::Signorini4 => "signorini4",
            KeywordMethod::Chew3 => "chew3",
            KeywordMethod::Syndrome => "syndrome",
            KeywordMethod::SyndromeFlu => "syndrome_flu",
            KeywordMethod::SyndromeExtra => "syndrome_extra",
        }
    }

    /// Lexicons whose union the method matches against.
    pub fn lexicon_names(&self) -> &'static [&'static str] {
        match self {
            KeywordMethod::Culotta4 => &["culotta4"],
            KeywordMethod::Signorini4 => &["signorini4"],
            KeywordMethod::Chew3 => &["chew3"],
            KeywordMethod::Syndrome => &[SYNDROME_LEXICON],
            KeywordMethod::SyndromeFlu => &[SYNDROME_LEXICON, FLU_LEXICON],
            KeywordMethod::SyndromeExtra => &[SYNDROME_LEXICON, "bco_extra"],
        }
    }

    fn index(&self) -> usize {
        Self::ALL.iter().position(|m| m == self).unwrap()
    }
}

impl fmt::Display for KeywordMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KeywordMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown keyword method {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticStage {
    Negation,
    Hashtags,
    Emoticon,
    Humor,
    Geo,
}

impl SemanticStage {
    pub const ALL: [SemanticStage; 5] = [
        SemanticStage::Negation,
        SemanticStage::Hashtags,
        SemanticStage::Emoticon,
        SemanticStage::Humor,
        SemanticStage::Geo,
    ];

    pub fn stage_id(&self) -> StageId {
        match self {
            SemanticStage::Negation => StageId::Negation,
            SemanticStage::Hashtags => StageId::Hashtags,
            SemanticStage::Emoticon => StageId::Emoticon,
            SemanticStage::Humor => StageId::Humor,
            SemanticStage::Geo => StageId::Geo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeocoderConfig {
    pub endpoint: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub cache: Option<PathBuf>,
}

fn default_timeout_ms() -> u64 {
    5000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchModeConfig {
    Exact,
    #[default]
    Inflected,
}

impl From<MatchModeConfig> for MatchMode {
    fn from(m: MatchModeConfig) -> Self {
        match m {
            MatchModeConfig::Exact => MatchMode::Exact,
            MatchModeConfig::Inflected => MatchMode::Inflected,
        }
    }
}

/// Pipeline configuration, read from JSON.
///
/// ```json
/// {"keyword_method": "syndrome_flu", "remove_url": true,
///  "semantic_stages": ["negation", "emoticon", "hashtags", "humor", "geo"],
///  "geo_target": "US"}
/// ```
///
/// Resource paths (`lexicons`, `emoticons`, `humor_patterns`, `gazetteer`,
/// `bboxes`, `geocoder.cache`) are optional and resolved relative to the
/// config file; shipped defaults are used when absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub keyword_method: KeywordMethod,
    #[serde(default)]
    pub remove_url: bool,
    #[serde(default)]
    pub semantic_stages: Vec<SemanticStage>,
    #[serde(default)]
    pub geo_target: Option<String>,
    #[serde(default)]
    pub match_mode: MatchModeConfig,
    #[serde(default)]
    pub negation: NegationConfig,
    /// Overrides for shipped lexicons, by lexicon name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub lexicons: BTreeMap<String, PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emoticons: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub humor_patterns: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gazetteer: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bboxes: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geocoder: Option<GeocoderConfig>,
}

impl PipelineConfig {
    pub fn new(keyword_method: KeywordMethod) -> Self {
        PipelineConfig {
            keyword_method,
            remove_url: false,
            semantic_stages: Vec::new(),
            geo_target: None,
            match_mode: MatchModeConfig::default(),
            negation: NegationConfig::default(),
            lexicons: BTreeMap::new(),
            emoticons: None,
            humor_patterns: None,
            gazetteer: None,
            bboxes: None,
            geocoder: None,
        }
    }

    /// Syndrome + "flu" − URL with every semantic stage, targeting the US.
    pub fn best_combination() -> Self {
        PipelineConfig {
            remove_url: true,
            semantic_stages: vec![
                SemanticStage::Negation,
                SemanticStage::Emoticon,
                SemanticStage::Hashtags,
                SemanticStage::Humor,
                SemanticStage::Geo,
            ],
            geo_target: Some("US".into()),
            ..Self::new(KeywordMethod::SyndromeFlu)
        }
    }

    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file; relative resource paths are
    /// resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.lexicons.values_mut().for_each(fix);
        for p in [&mut self.emoticons, &mut self.humor_patterns, &mut self.gazetteer, &mut self.bboxes]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        if let Some(cache) = self.geocoder.as_mut().and_then(|g| g.cache.as_mut()) {
            fix(cache);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut seen = HashSet::new();
        for s in &self.semantic_stages {
            if !seen.insert(*s) {
                return Err(ConfigError::DuplicateStage(s.stage_id()));
            }
        }
        let has_target = self.geo_target.as_deref().is_some_and(|t| !t.trim().is_empty());
        if seen.contains(&SemanticStage::Geo) && !has_target {
            return Err(ConfigError::MissingGeoTarget);
        }
        if self.negation.window == 0 {
            return Err(ConfigError::ZeroWindow);
        }
        for name in self.lexicons.keys() {
            if !BUILTIN_LEXICONS.iter().any(|(n, _)| n == name) {
                return Err(ConfigError::UnknownLexicon(name.clone()));
            }
        }
        Ok(())
    }

    /// Stage identifiers in execution order.
    pub fn stage_order(&self) -> Vec<StageId> {
        let mut order = vec![StageId::Keyword];
        if self.remove_url {
            order.push(StageId::Url);
        }
        order.extend(self.semantic_stages.iter().map(SemanticStage::stage_id));
        order
    }

    /// A short human-readable name such as `syndrome_flu-url+negation+geo`.
    pub fn label(&self) -> String {
        let mut s = self.keyword_method.as_str().to_string();
        if self.remove_url {
            s.push_str("-url");
        }
        for st in &self.semantic_stages {
            s.push('+');
            s.push_str(st.stage_id().as_str());
        }
        s
    }
}

/// Case-insensitive regular expressions that mark a tweet as a joke.
#[derive(Debug, Clone)]
pub struct HumorPatterns {
    patterns: Vec<Regex>,
}

impl HumorPatterns {
    /// One pattern per line; `#` comments and blank lines ignored.
    pub fn parse(contents: &str) -> Result<Self, ConfigError> {
        let mut patterns = Vec::new();
        for (i, line) in contents.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let re = RegexBuilder::new(line)
                .case_insensitive(true)
                .build()
                .map_err(|source| ConfigError::HumorPattern { line: i + 1, source })?;
            patterns.push(re);
        }
        if patterns.is_empty() {
            return Err(ConfigError::NoHumorPatterns);
        }
        Ok(HumorPatterns { patterns })
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_HUMOR_PATTERNS).expect("shipped humor patterns")
    }

    pub fn find(&self, text: &str) -> Vec<Span> {
        let mut spans: Vec<Span> = self
            .patterns
            .iter()
            .flat_map(|re| re.find_iter(text).map(|m| Span::new(m.start(), m.end())))
            .collect();
        spans.sort();
        spans
    }
}

/// Where a loaded resource came from, with its raw contents for hashing.
#[derive(Debug, Clone)]
pub struct ResourceSource {
    pub name: String,
    pub origin: String,
    pub contents: Vec<u8>,
}

/// Compiled matchers and loaded data shared by every tweet.
///
/// Matchers for all keyword methods are compiled up front, so one
/// `Resources` serves any config built over the same data files.
#[derive(Debug)]
pub struct Resources {
    method_matchers: Vec<PhraseMatcher>,
    /// Respiratory-syndrome phrases plus "flu"; used to judge hashtags.
    pub syndrome: PhraseMatcher,
    pub emoticons: EmoticonSet,
    pub humor: HumorPatterns,
    pub geo: GeoResolver,
    pub sources: Vec<ResourceSource>,
}

impl Resources {
    /// Shipped lexicons, emoticons, humor patterns and gazetteer.
    pub fn builtin() -> Self {
        Self::from_config(&PipelineConfig::new(KeywordMethod::Culotta4)).expect("shipped resources")
    }

    pub fn from_config(cfg: &PipelineConfig) -> Result<Self, ConfigError> {
        let mut sources = Vec::new();
        let mut lexicons = Vec::new();
        for (name, builtin) in BUILTIN_LEXICONS {
            let (lex, origin, bytes) = match cfg.lexicons.get(*name) {
                Some(path) => {
                    let bytes = read(path)?;
                    let lex = Lexicon::parse(name, &String::from_utf8_lossy(&bytes))?;
                    (lex, path.display().to_string(), bytes)
                }
                None => (Lexicon::parse(name, builtin)?, "builtin".into(), builtin.as_bytes().to_vec()),
            };
            sources.push(ResourceSource {
                name: format!("lexicon:{name}"),
                origin,
                contents: bytes,
            });
            lexicons.push(lex);
        }
        lexicons.push(Lexicon::from_phrases(FLU_LEXICON, ["flu"])?);
        let by_name = |n: &str| lexicons.iter().find(|l| l.name() == n).cloned().unwrap();

        let method_matchers = KeywordMethod::ALL
            .iter()
            .map(|m| PhraseMatcher::compile(&m.lexicon_names().iter().map(|n| by_name(n)).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>, _>>()?;
        let syndrome = PhraseMatcher::compile(&[by_name(SYNDROME_LEXICON), by_name(FLU_LEXICON)])?;

        let (emoticons, origin, bytes) = match &cfg.emoticons {
            Some(p) => {
                let bytes = read(p)?;
                (EmoticonSet::parse(&String::from_utf8_lossy(&bytes))?, p.display().to_string(), bytes)
            }
            None => (EmoticonSet::builtin().clone(), "builtin".into(), crate::textproc::DEFAULT_EMOTICONS.into()),
        };
        sources.push(ResourceSource { name: "emoticons".into(), origin, contents: bytes });

        let (humor, origin, bytes) = match &cfg.humor_patterns {
            Some(p) => {
                let bytes = read(p)?;
                (HumorPatterns::parse(&String::from_utf8_lossy(&bytes))?, p.display().to_string(), bytes)
            }
            None => (HumorPatterns::builtin(), "builtin".into(), DEFAULT_HUMOR_PATTERNS.into()),
        };
        sources.push(ResourceSource { name: "humor".into(), origin, contents: bytes });

        let (gazetteer, origin, bytes) = match &cfg.gazetteer {
            Some(p) => {
                let bytes = read(p)?;
                let g = Gazetteer::from_csv(bytes.as_slice()).map_err(|source| GeoError::Csv {
                    what: p.display().to_string(),
                    source,
                })?;
                (g, p.display().to_string(), bytes)
            }
            None => (Gazetteer::builtin(), "builtin".into(), crate::geo::DEFAULT_GAZETTEER.into()),
        };
        sources.push(ResourceSource { name: "gazetteer".into(), origin, contents: bytes });

        let bboxes = match &cfg.bboxes {
            Some(p) => load_bboxes(p)?,
            None => builtin_bboxes(),
        };

        let external: Option<Box<dyn crate::geo::Geocoder>> = match &cfg.geocoder {
            None => None,
            Some(g) => {
                let http = HttpGeocoder::new(&g.endpoint, Duration::from_millis(g.timeout_ms));
                Some(match &g.cache {
                    Some(path) => Box::new(CachedGeocoder::with_cache_file(http, path)?),
                    None => Box::new(CachedGeocoder::new(http)),
                })
            }
        };

        Ok(Resources {
            method_matchers,
            syndrome,
            emoticons,
            humor,
            geo: GeoResolver {
                gazetteer,
                bboxes,
                external,
            },
            sources,
        })
    }

    pub fn matcher(&self, method: KeywordMethod) -> &PhraseMatcher {
        &self.method_matchers[method.index()]
    }
}

fn read(path: &Path) -> Result<Vec<u8>, ConfigError> {
    std::fs::read(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn match_evidence(m: &PhraseMatch<'_>) -> Evidence {
    Evidence::new(ReasonCode::KeywordMatch, Some(m.span)).with_note(format!("{}:{}", m.lexicon, m.phrase))
}

/// Keyword filtering. `syndrome_flu` needs both a respiratory-syndrome
/// phrase and the word "flu"; every other method needs any phrase.
pub fn keyword_stage(
    text: &str,
    tokens: &[Token<'_>],
    method: KeywordMethod,
    resources: &Resources,
    mode: MatchMode,
) -> StageDecision {
    let matches = resources.matcher(method).find(tokens, mode);
    let mut evidence: Vec<Evidence> = matches.iter().map(match_evidence).collect();
    let whole = Some(Span::new(0, text.len()));
    let missing = if method == KeywordMethod::SyndromeFlu {
        let syndrome = matches.iter().any(|m| m.lexicon == SYNDROME_LEXICON);
        let flu = matches.iter().any(|m| m.lexicon == FLU_LEXICON);
        match (syndrome, flu) {
            (true, true) => None,
            (false, true) => Some(ReasonCode::MissingSyndromeTerm),
            (true, false) => Some(ReasonCode::MissingFluTerm),
            (false, false) => Some(ReasonCode::NoKeyword),
        }
    } else if matches.is_empty() {
        Some(ReasonCode::NoKeyword)
    } else {
        None
    };
    if let Some(code) = missing {
        evidence.push(Evidence::new(code, whole));
    }
    StageDecision {
        stage: StageId::Keyword,
        kept: missing.is_none(),
        evidence,
    }
}

pub fn url_stage(tokens: &[Token<'_>]) -> StageDecision {
    let evidence = tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Url)
        .map(|t| Evidence::new(ReasonCode::Url, Some(t.span)))
        .collect();
    StageDecision::from_evidence(StageId::Url, evidence)
}

/// Drops tweets carrying a hashtag unrelated to ILI.
///
/// A hashtag is related when its sentence mentions a respiratory-syndrome
/// phrase or "flu" outside of hashtags, when its own norm contains "flu",
/// or when its norm is itself a single-word syndrome phrase.
pub fn hashtag_stage(
    tokens: &[Token<'_>],
    sentences: &[Sentence],
    syndrome: &PhraseMatcher,
    mode: MatchMode,
) -> StageDecision {
    let mut evidence = Vec::new();
    for sentence in sentences {
        let toks = &tokens[sentence.tokens.clone()];
        if !toks.iter().any(|t| t.kind == TokenKind::Hashtag) {
            continue;
        }
        let hits = syndrome.find(toks, mode);
        let sentence_related = hits.iter().any(|m| toks[m.tokens.start].kind != TokenKind::Hashtag);
        if sentence_related {
            continue;
        }
        for (i, t) in toks.iter().enumerate() {
            if t.kind != TokenKind::Hashtag {
                continue;
            }
            let own = t.norm.contains("flu") || hits.iter().any(|m| m.tokens.start == i);
            if !own {
                evidence.push(Evidence::new(ReasonCode::UnrelatedHashtag, Some(t.span)));
            }
        }
    }
    StageDecision::from_evidence(StageId::Hashtags, evidence)
}

pub fn emoticon_stage(text: &str, emoticons: &EmoticonSet) -> StageDecision {
    let evidence = emoticons
        .detect(text)
        .into_iter()
        .map(|m| Evidence::new(ReasonCode::Emoticon, Some(m.span)).with_note(m.emoticon))
        .collect();
    StageDecision::from_evidence(StageId::Emoticon, evidence)
}

pub fn humor_stage(text: &str, humor: &HumorPatterns) -> StageDecision {
    let evidence = humor
        .find(text)
        .into_iter()
        .map(|s| Evidence::new(ReasonCode::Humor, Some(s)))
        .collect();
    StageDecision::from_evidence(StageId::Humor, evidence)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PipelineOutcome {
    pub kept: bool,
    /// One decision per executed stage, in execution order.
    pub trace: Vec<StageDecision>,
}

/// Runs `tweet` through the configured stages, stopping at the first drop.
pub fn run_pipeline(tweet: &Tweet, cfg: &PipelineConfig, resources: &Resources) -> PipelineOutcome {
    let text = tweet.text.as_str();
    let tokens = tokenize(text);
    let mode: MatchMode = cfg.match_mode.into();
    let mut sentences: Option<Vec<Sentence>> = None;
    let mut trace = Vec::with_capacity(2 + cfg.semantic_stages.len());

    for stage in cfg.stage_order() {
        let decision = match stage {
            StageId::Keyword => keyword_stage(text, &tokens, cfg.keyword_method, resources, mode),
            StageId::Url => url_stage(&tokens),
            StageId::Negation => {
                let s = sentences.get_or_insert_with(|| split_sentences(text, &tokens));
                negation_stage(&tokens, s, &cfg.negation)
            }
            StageId::Hashtags => {
                let s = sentences.get_or_insert_with(|| split_sentences(text, &tokens));
                hashtag_stage(&tokens, s, &resources.syndrome, mode)
            }
            StageId::Emoticon => emoticon_stage(text, &resources.emoticons),
            StageId::Humor => humor_stage(text, &resources.humor),
            StageId::Geo => {
                let target = cfg.geo_target.as_deref().unwrap_or_default();
                geo_stage(tweet.user_location.as_deref(), target, &resources.geo)
            }
        };
        let kept = decision.kept;
        trace.push(decision);
        if !kept {
            return PipelineOutcome { kept: false, trace };
        }
    }
    PipelineOutcome { kept: true, trace }
}
