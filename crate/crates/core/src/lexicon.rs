//! Keyword lexicons and a compiled phrase matcher over token streams.
//!
//! Phrases match whole tokens, never substrings: "flu" does not fire inside
//! "influenza" or "fluent". A multi-word phrase must line up with a
//! contiguous run of word or number tokens; punctuation breaks the run.
//! Hashtags match single-word phrases through their norm, so `#swineflu`
//! matches the phrase "swineflu".

use std::collections::HashMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::textproc::{tokenize, Span, Token, TokenKind};

/// Longest phrase, in words, a lexicon may hold.
pub const MAX_PHRASE_WORDS: usize = 6;

/// Lexicon files shipped with the crate, by name.
pub const BUILTIN_LEXICONS: &[(&str, &str)] = &[
    ("culotta4", include_str!("../data/culotta4.txt")),
    ("signorini4", include_str!("../data/signorini4.txt")),
    ("chew3", include_str!("../data/chew3.txt")),
    ("bco_respiratory", include_str!("../data/bco_respiratory.txt")),
    ("bco_extra", include_str!("../data/bco_extra.txt")),
];

/// Inflectional endings tried when matching in [`MatchMode::Inflected`].
const SUFFIXES: &[&str] = &["ing", "ed", "es", "s", "d"];
const MIN_STEM_CHARS: usize = 3;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon {0:?} has no phrases")]
    Empty(String),
    #[error("lexicon {name:?} line {line}: phrase {phrase:?} is longer than {MAX_PHRASE_WORDS} words")]
    PhraseTooLong { name: String, line: usize, phrase: String },
    #[error("lexicon {name:?} line {line}: phrase {phrase:?} contains non-word tokens")]
    NonLexical { name: String, line: usize, phrase: String },
    #[error("no lexicons given to the matcher")]
    NoLexicons,
    #[error("unknown built-in lexicon {0:?}")]
    UnknownBuiltin(String),
}

/// A named set of normalized phrases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    name: String,
    /// Sorted, unique, words separated by single spaces.
    phrases: Vec<String>,
}

impl Lexicon {
    /// Parses the lexicon file format: one phrase per line, `#` comments and
    /// blank lines ignored. Phrases are tokenized and lowercased.
    pub fn parse(name: &str, contents: &str) -> Result<Self, LexiconError> {
        let mut phrases = Vec::new();
        for (idx, raw) in contents.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tokens = tokenize(line);
            if tokens.iter().any(|t| !t.is_lexical()) {
                return Err(LexiconError::NonLexical {
                    name: name.to_string(),
                    line: idx + 1,
                    phrase: line.to_string(),
                });
            }
            if tokens.len() > MAX_PHRASE_WORDS {
                return Err(LexiconError::PhraseTooLong {
                    name: name.to_string(),
                    line: idx + 1,
                    phrase: line.to_string(),
                });
            }
            phrases.push(tokens.iter().map(|t| t.norm.as_ref()).collect::<Vec<_>>().join(" "));
        }
        Self::from_normalized(name, phrases)
    }

    /// Builds a lexicon from phrases, normalizing each one.
    pub fn from_phrases<I, S>(name: &str, phrases: I) -> Result<Self, LexiconError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let text: Vec<String> = phrases.into_iter().map(|p| p.as_ref().to_string()).collect();
        Self::parse(name, &text.join("\n"))
    }

    fn from_normalized(name: &str, mut phrases: Vec<String>) -> Result<Self, LexiconError> {
        phrases.sort();
        phrases.dedup();
        if phrases.is_empty() {
            return Err(LexiconError::Empty(name.to_string()));
        }
        Ok(Lexicon {
            name: name.to_string(),
            phrases,
        })
    }

    /// Loads a lexicon file; the lexicon is named after the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::load_named(&name, path)
    }

    pub fn load_named(name: &str, path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let contents = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let lex = Self::parse(name, &contents)?;
        log::debug!("loaded lexicon {} with {} phrases from {}", name, lex.len(), path.display());
        Ok(lex)
    }

    pub fn builtin(name: &str) -> Result<Self, LexiconError> {
        let (_, contents) = BUILTIN_LEXICONS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| LexiconError::UnknownBuiltin(name.to_string()))?;
        Self::parse(name, contents)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn phrases(&self) -> &[String] {
        &self.phrases
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn contains(&self, phrase: &str) -> bool {
        self.phrases.binary_search_by(|p| p.as_str().cmp(phrase)).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// Token norms must equal the phrase words.
    #[default]
    Exact,
    /// A token also matches a phrase word equal to its norm minus one
    /// common inflectional ending ("coughing", "coughed" match "cough").
    Inflected,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PhraseMatch<'m> {
    pub lexicon: &'m str,
    pub phrase: &'m str,
    /// Index range into the token list.
    pub tokens: Range<usize>,
    pub span: Span,
}

impl PhraseMatch<'_> {
    fn sort_key(&self) -> (usize, usize, &str, &str) {
        (self.tokens.start, self.tokens.end, self.lexicon, self.phrase)
    }
}

/// Orders by token position, then lexicon and phrase.
impl Ord for PhraseMatch<'_> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for PhraseMatch<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
struct PhraseEntry {
    text: String,
    lexicons: Vec<u16>,
}

const ROOT: u32 = 0;

/// A word-level trie over every phrase of one or more lexicons.
///
/// Matching walks the trie from each token start and stops as soon as the
/// run leaves the trie or hits a non-word token, so a scan costs at most
/// `tokens × MAX_PHRASE_WORDS` lookups.
#[derive(Debug, Clone)]
pub struct PhraseMatcher {
    lexicon_names: Vec<String>,
    phrases: Vec<PhraseEntry>,
    vocab: HashMap<String, u32>,
    edges: HashMap<(u32, u32), u32>,
    terminal: Vec<Option<u32>>,
}

impl PhraseMatcher {
    pub fn compile(lexicons: &[Lexicon]) -> Result<Self, LexiconError> {
        if lexicons.is_empty() {
            return Err(LexiconError::NoLexicons);
        }
        let mut m = PhraseMatcher {
            lexicon_names: lexicons.iter().map(|l| l.name.clone()).collect(),
            phrases: Vec::new(),
            vocab: HashMap::new(),
            edges: HashMap::new(),
            terminal: vec![None],
        };
        for (lex_idx, lex) in lexicons.iter().enumerate() {
            for phrase in &lex.phrases {
                let mut node = ROOT;
                for word in phrase.split(' ') {
                    let next_id = m.vocab.len() as u32;
                    let word_id = *m.vocab.entry(word.to_string()).or_insert(next_id);
                    let next_node = m.terminal.len() as u32;
                    node = *m.edges.entry((node, word_id)).or_insert_with(|| next_node);
                    if node == next_node {
                        m.terminal.push(None);
                    }
                }
                let slot = &mut m.terminal[node as usize];
                let phrase_id = match *slot {
                    Some(id) => id,
                    None => {
                        let id = m.phrases.len() as u32;
                        m.phrases.push(PhraseEntry {
                            text: phrase.clone(),
                            lexicons: Vec::new(),
                        });
                        *slot = Some(id);
                        id
                    }
                };
                let entry = &mut m.phrases[phrase_id as usize];
                if !entry.lexicons.contains(&(lex_idx as u16)) {
                    entry.lexicons.push(lex_idx as u16);
                }
            }
        }
        Ok(m)
    }

    pub fn lexicon_names(&self) -> &[String] {
        &self.lexicon_names
    }

    /// Number of distinct phrases across all lexicons.
    pub fn phrase_count(&self) -> usize {
        self.phrases.len()
    }

    /// All exact matches, ordered by token range then lexicon.
    pub fn match_phrases(&self, tokens: &[Token<'_>]) -> Vec<PhraseMatch<'_>> {
        self.find(tokens, MatchMode::Exact)
    }

    pub fn find(&self, tokens: &[Token<'_>], mode: MatchMode) -> Vec<PhraseMatch<'_>> {
        let mut ids: Vec<u32> = Vec::with_capacity(tokens.len());
        let mut bounds: Vec<(usize, usize)> = Vec::with_capacity(tokens.len());
        for tok in tokens {
            let start = ids.len();
            if matches!(tok.kind, TokenKind::Word | TokenKind::Number | TokenKind::Hashtag) {
                self.word_ids(&tok.norm, tok.kind == TokenKind::Word || tok.kind == TokenKind::Hashtag, mode, &mut ids);
            }
            bounds.push((start, ids.len()));
        }

        let mut out = Vec::new();
        let mut frontier: Vec<u32> = Vec::new();
        let mut next: Vec<u32> = Vec::new();
        for start in 0..tokens.len() {
            let single_only = tokens[start].kind == TokenKind::Hashtag;
            frontier.clear();
            frontier.push(ROOT);
            let mut end = start;
            while end < tokens.len() && !frontier.is_empty() {
                let tok = &tokens[end];
                let lexical = tok.is_lexical() || (single_only && end == start);
                if !lexical {
                    break;
                }
                next.clear();
                let (lo, hi) = bounds[end];
                for &node in &frontier {
                    for &w in &ids[lo..hi] {
                        if let Some(&child) = self.edges.get(&(node, w)) {
                            next.push(child);
                        }
                    }
                }
                std::mem::swap(&mut frontier, &mut next);
                end += 1;
                for &node in &frontier {
                    if let Some(pid) = self.terminal[node as usize] {
                        self.emit(pid, start..end, tokens, &mut out);
                    }
                }
                if single_only {
                    break;
                }
            }
        }
        out.sort();
        out
    }

    fn emit<'m>(&'m self, pid: u32, range: Range<usize>, tokens: &[Token<'_>], out: &mut Vec<PhraseMatch<'m>>) {
        let entry = &self.phrases[pid as usize];
        let span = tokens[range.start].span.cover(&tokens[range.end - 1].span);
        for &lex in &entry.lexicons {
            out.push(PhraseMatch {
                lexicon: &self.lexicon_names[lex as usize],
                phrase: &entry.text,
                tokens: range.clone(),
                span,
            });
        }
    }

    fn word_ids(&self, norm: &str, alphabetic: bool, mode: MatchMode, ids: &mut Vec<u32>) {
        let first = ids.len();
        if let Some(&id) = self.vocab.get(norm) {
            ids.push(id);
        }
        if mode == MatchMode::Inflected && alphabetic {
            for suffix in SUFFIXES {
                if let Some(stem) = norm.strip_suffix(suffix) {
                    if stem.chars().count() >= MIN_STEM_CHARS {
                        if let Some(&id) = self.vocab.get(stem) {
                            if !ids[first..].contains(&id) {
                                ids.push(id);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Compiles a matcher over `lexicons`.
pub fn compile_matcher(lexicons: &[Lexicon]) -> Result<PhraseMatcher, LexiconError> {
    PhraseMatcher::compile(lexicons)
}

pub fn match_phrases<'m>(matcher: &'m PhraseMatcher, tokens: &[Token<'_>]) -> Vec<PhraseMatch<'m>> {
    matcher.match_phrases(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn phrases_in<'m>(m: &'m PhraseMatcher, text: &str) -> Vec<(&'m str, &'m str)> {
        m.match_phrases(&tokenize(text)).into_iter().map(|x| (x.lexicon, x.phrase)).collect()
    }

    #[test]
    fn shipped_lexicon_sizes() {
        let sizes: Vec<(&str, usize)> = BUILTIN_LEXICONS
            .iter()
            .map(|(n, _)| (*n, Lexicon::builtin(n).unwrap().len()))
            .collect();
        assert_eq!(
            sizes,
            vec![("culotta4", 4), ("signorini4", 4), ("chew3", 3), ("bco_respiratory", 37), ("bco_extra", 66)]
        );
        let c = Lexicon::builtin("culotta4").unwrap();
        assert_eq!(c.phrases(), &["cough", "flu", "headache", "sore throat"]);
        assert!(Lexicon::builtin("bco_respiratory").unwrap().contains("copd"));
        assert!(Lexicon::builtin("bco_extra").unwrap().contains("sore thrat"));
        assert!(matches!(Lexicon::builtin("nope"), Err(LexiconError::UnknownBuiltin(_))));
    }

    #[test]
    fn normalization_collapses_duplicates() {
        let lex = Lexicon::parse("t", "Sore Throat\nsore  throat\n\n# c\n").unwrap();
        assert_eq!(lex.phrases(), &["sore throat"]);
    }

    #[test]
    fn load_errors() {
        assert!(matches!(Lexicon::parse("t", "# nothing\n\n"), Err(LexiconError::Empty(_))));
        let err = Lexicon::parse("t", "flu\none two three four five six seven\n").unwrap_err();
        assert!(matches!(err, LexiconError::PhraseTooLong { line: 2, .. }), "{err}");
        assert!(Lexicon::parse("t", "one two three four five six\n").is_ok());
        assert!(matches!(Lexicon::parse("t", "flu-like\n"), Err(LexiconError::NonLexical { .. })));
        assert!(matches!(Lexicon::load("/nonexistent/x.txt"), Err(LexiconError::Io { .. })));
    }

    #[test]
    fn load_from_file_uses_stem() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mylex.txt");
        std::fs::write(&p, "Flu\nCOUGH\n").unwrap();
        let lex = Lexicon::load(&p).unwrap();
        assert_eq!(lex.name(), "mylex");
        assert_eq!(lex.len(), 2);
    }

    #[test]
    fn compile_and_match() {
        let culotta = Lexicon::builtin("culotta4").unwrap();
        let m = compile_matcher(&[culotta.clone()]).unwrap();
        assert_eq!(phrases_in(&m, "I have a headache"), vec![("culotta4", "headache")]);
        assert!(matches!(compile_matcher(&[]), Err(LexiconError::NoLexicons)));

        let other = Lexicon::from_phrases("other", ["flu", "fever"]).unwrap();
        let m = compile_matcher(&[culotta, other]).unwrap();
        assert_eq!(phrases_in(&m, "flu"), vec![("culotta4", "flu"), ("other", "flu")]);
    }

    #[test]
    fn golden_examples() {
        let m = compile_matcher(&[
            Lexicon::builtin("bco_respiratory").unwrap(),
            Lexicon::from_phrases("flu", ["flu"]).unwrap(),
        ])
        .unwrap();
        let got: Vec<&str> = phrases_in(&m, "Down with a flu. Sore throat.").into_iter().map(|x| x.1).collect();
        assert_eq!(got, vec!["flu", "sore throat"]);

        assert!(phrases_in(&m, "influenza fluent").is_empty());

        let chew = compile_matcher(&[Lexicon::builtin("chew3").unwrap()]).unwrap();
        assert_eq!(phrases_in(&chew, "#SwineFlu"), vec![("chew3", "swineflu")]);
        assert_eq!(phrases_in(&chew, "Swine flu"), vec![("chew3", "swine flu")]);
    }

    #[test]
    fn punctuation_breaks_phrases() {
        let m = compile_matcher(&[Lexicon::builtin("culotta4").unwrap()]).unwrap();
        assert!(phrases_in(&m, "sore, throat").is_empty());
        assert!(phrases_in(&m, "sore. throat").is_empty());
        // hashtags only match single-word phrases
        assert!(phrases_in(&m, "#sore throat").is_empty());
    }

    #[test]
    fn overlapping_matches_are_all_reported() {
        let lex = Lexicon::from_phrases("t", ["shortness of breath", "breath", "shortness"]).unwrap();
        let m = compile_matcher(&[lex]).unwrap();
        let got: Vec<_> = m.match_phrases(&tokenize("shortness of breath")).into_iter().map(|x| (x.phrase, x.tokens)).collect();
        assert_eq!(got, vec![("shortness", 0..1), ("shortness of breath", 0..3), ("breath", 2..3)]);
    }

    #[test]
    fn inflected_mode() {
        let m = compile_matcher(&[Lexicon::builtin("bco_respiratory").unwrap()]).unwrap();
        let toks = tokenize("coughing and coughed, chest aches");
        assert!(m.find(&toks, MatchMode::Exact).is_empty());
        let got: Vec<&str> = m.find(&toks, MatchMode::Inflected).into_iter().map(|x| x.phrase).collect();
        assert_eq!(got, vec!["cough", "cough", "chest ache"]);
        // stems shorter than three characters are not tried
        let lex = Lexicon::from_phrases("t", ["fl", "flu"]).unwrap();
        let m = compile_matcher(&[lex]).unwrap();
        let toks = tokenize("fled flus");
        let got: Vec<&str> = m.find(&toks, MatchMode::Inflected).into_iter().map(|x| x.phrase).collect();
        assert_eq!(got, vec!["flu"]);
    }

    const WORDS: &[&str] = &["flu", "sore", "throat", "cough", "swine", "x", "of", "breath", "shortness", "#flu", ",", "."];

    fn text_strategy() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(WORDS), 0..12).prop_map(|w| w.join(" "))
    }

    fn phrase_strategy() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(&WORDS[..9]), 1..4).prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn adding_a_phrase_never_removes_matches(
            base in prop::collection::vec(phrase_strategy(), 1..6),
            extra in phrase_strategy(),
            text in text_strategy(),
        ) {
            let small = compile_matcher(&[Lexicon::from_phrases("l", &base).unwrap()]).unwrap();
            let mut more = base.clone();
            more.push(extra);
            let big = compile_matcher(&[Lexicon::from_phrases("l", &more).unwrap()]).unwrap();
            let toks = tokenize(&text);
            let a: Vec<_> = small.match_phrases(&toks);
            let b: Vec<_> = big.match_phrases(&toks);
            for m in &a {
                prop_assert!(b.contains(m));
            }
        }

        #[test]
        fn matches_cover_exactly_the_phrase(
            base in prop::collection::vec(phrase_strategy(), 1..6),
            text in text_strategy(),
        ) {
            let m = compile_matcher(&[Lexicon::from_phrases("l", &base).unwrap()]).unwrap();
            let toks = tokenize(&text);
            for hit in m.match_phrases(&toks) {
                let words: Vec<&str> = toks[hit.tokens.clone()].iter().map(|t| t.norm.as_ref()).collect();
                prop_assert_eq!(words.join(" "), hit.phrase);
                prop_assert_eq!(&text[hit.span.start..hit.span.end].to_lowercase().replace('#', ""), &hit.phrase.to_string());
            }
        }

        #[test]
        fn inflected_is_a_superset(
            base in prop::collection::vec(phrase_strategy(), 1..6),
            text in "(flu|flus|coughing|cough|coughed|throats|sore|x| ){0,12}",
        ) {
            let m = compile_matcher(&[Lexicon::from_phrases("l", &base).unwrap()]).unwrap();
            let toks = tokenize(&text);
            let inflected = m.find(&toks, MatchMode::Inflected);
            for hit in m.find(&toks, MatchMode::Exact) {
                prop_assert!(inflected.contains(&hit));
            }
        }
    }
}
