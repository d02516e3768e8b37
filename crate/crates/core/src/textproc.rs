//! Tokenization, sentence splitting and surface features shared by every
//! filter stage.
//!
//! Offsets are UTF-8 byte offsets into the original text. They always fall
//! on character boundaries, so `&text[span.start..span.end]` is valid.

use std::borrow::Cow;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, Anchored, Input, MatchKind, StartKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Emoticon literals shipped with the crate.
pub const DEFAULT_EMOTICONS: &str = include_str!("../data/emoticons.txt");

/// Characters stripped from the end of a URL token so that sentence
/// punctuation following a link is not swallowed by it.
const URL_TRAILING_PUNCT: &[char] = &['.', ',', '!', '?', ';', ':', ')', ']', '"', '\'', '…'];

#[derive(Debug, Error)]
pub enum TextError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("emoticon lexicon has no entries")]
    EmptyEmoticonSet,
    #[error("cannot compile emoticon matcher: {0}")]
    Automaton(String),
}

/// Half-open byte range `[start, end)` into a tweet's text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// Smallest span covering both `self` and `other`.
    pub fn cover(&self, other: &Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Word,
    Hashtag,
    Mention,
    Url,
    Emoticon,
    Number,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub surface: &'a str,
    pub span: Span,
    pub kind: TokenKind,
    /// Lowercased surface; hashtags lose their leading `#`.
    pub norm: Cow<'a, str>,
}

impl Token<'_> {
    /// True for tokens that can take part in a keyword phrase.
    pub fn is_lexical(&self) -> bool {
        matches!(self.kind, TokenKind::Word | TokenKind::Number)
    }

    fn is_terminal_punct(&self) -> bool {
        self.kind == TokenKind::Punct && matches!(self.surface, "." | "!" | "?")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub span: Span,
    /// Indices into the token list this sentence was built from.
    pub tokens: Range<usize>,
}

/// Lowercases `s` and folds the typographic apostrophe to `'`.
///
/// Borrows when `s` is already normalized.
pub fn normalize(s: &str) -> Cow<'_, str> {
    let needs_work = s.chars().any(|c| {
        if c == '’' {
            return true;
        }
        let mut lower = c.to_lowercase();
        !(lower.next() == Some(c) && lower.next().is_none())
    });
    if needs_work {
        Cow::Owned(s.to_lowercase().replace('’', "'"))
    } else {
        Cow::Borrowed(s)
    }
}

fn is_tag_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn starts_with_http(s: &str) -> bool {
    s.len() >= 4 && s.as_bytes()[..4].eq_ignore_ascii_case(b"http")
}

fn char_at(text: &str, i: usize) -> Option<char> {
    text.get(i..).and_then(|s| s.chars().next())
}

/// Splits a tweet into tokens.
///
/// Every non-whitespace character ends up in exactly one token. Recognized
/// shapes, tried in order at each token start:
///
/// * `http...` up to the next whitespace, minus trailing punctuation (url)
/// * `#` + alphanumeric run (hashtag), `@` + alphanumeric run (mention)
/// * a literal from the built-in emoticon set when the first character is
///   not alphanumeric (emoticon)
/// * alphanumeric runs with internal apostrophes (word), digit runs with
///   internal `.`/`,` (number); a trailing `n't` becomes its own word
/// * any other single character (punct)
pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    let emoticons = EmoticonSet::builtin();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < text.len() {
        let c = char_at(text, i).expect("index on char boundary");
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let rest = &text[i..];

        if starts_with_http(rest) {
            let mut end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            while end > 4 {
                let last = rest[..end].chars().next_back().unwrap();
                if URL_TRAILING_PUNCT.contains(&last) {
                    end -= last.len_utf8();
                } else {
                    break;
                }
            }
            push(&mut tokens, text, i, i + end, TokenKind::Url);
            i += end;
            continue;
        }

        if c == '#' || c == '@' {
            let body = &rest[1..];
            let run = body.find(|ch: char| !is_tag_char(ch)).unwrap_or(body.len());
            if run > 0 {
                let kind = if c == '#' { TokenKind::Hashtag } else { TokenKind::Mention };
                push(&mut tokens, text, i, i + 1 + run, kind);
                i += 1 + run;
                continue;
            }
        }

        if !c.is_alphanumeric() {
            if let Some(len) = emoticons.anchored_match(text, i) {
                push(&mut tokens, text, i, i + len, TokenKind::Emoticon);
                i += len;
                continue;
            }
        }

        if c.is_alphanumeric() {
            let end = scan_word(text, i);
            let surface = &text[i..end];
            let kind = if surface.chars().any(char::is_alphabetic) {
                TokenKind::Word
            } else {
                TokenKind::Number
            };
            match contraction_split(surface) {
                Some(stem_len) if kind == TokenKind::Word => {
                    push(&mut tokens, text, i, i + stem_len, TokenKind::Word);
                    push(&mut tokens, text, i + stem_len, end, TokenKind::Word);
                }
                _ => push(&mut tokens, text, i, end, kind),
            }
            i = end;
            continue;
        }

        let end = i + c.len_utf8();
        push(&mut tokens, text, i, end, TokenKind::Punct);
        i = end;
    }
    tokens
}

fn push<'a>(tokens: &mut Vec<Token<'a>>, text: &'a str, start: usize, end: usize, kind: TokenKind) {
    let surface = &text[start..end];
    let norm = match kind {
        TokenKind::Hashtag => normalize(&surface[1..]),
        _ => normalize(surface),
    };
    tokens.push(Token {
        surface,
        span: Span::new(start, end),
        kind,
        norm,
    });
}

/// End offset of the word or number starting at `start`.
fn scan_word(text: &str, start: usize) -> usize {
    let mut chars = text[start..].char_indices().peekable();
    let mut end = start;
    let mut all_digits = true;
    while let Some((off, ch)) = chars.next() {
        if ch.is_alphanumeric() {
            all_digits &= ch.is_ascii_digit();
            end = start + off + ch.len_utf8();
            continue;
        }
        let next = chars.peek().map(|&(_, n)| n);
        let prev_alpha = text[start..start + off]
            .chars()
            .next_back()
            .is_some_and(char::is_alphabetic);
        match (ch, next) {
            ('\'' | '’', Some(n)) if prev_alpha && n.is_alphabetic() => {}
            ('.' | ',', Some(n)) if all_digits && n.is_ascii_digit() => {}
            _ => break,
        }
    }
    end
}

/// Byte length of the stem when `word` ends in a split-able "n't".
fn contraction_split(word: &str) -> Option<usize> {
    for suffix in ["n't", "n’t", "N'T", "N’T", "N't", "n'T"] {
        if let Some(stem) = word.strip_suffix(suffix) {
            if !stem.is_empty() {
                return Some(stem.len());
            }
        }
    }
    None
}

/// Groups tokens into sentences.
///
/// A sentence ends after a run of `.`, `!` or `?` punctuation tokens, or
/// where the whitespace between two tokens contains a newline. Periods
/// inside url, number or emoticon tokens never end a sentence.
pub fn split_sentences(text: &str, tokens: &[Token<'_>]) -> Vec<Sentence> {
    let mut sentences = Vec::new();
    let mut first = 0;
    for idx in 0..tokens.len() {
        if idx > first {
            let gap = &text[tokens[idx - 1].span.end..tokens[idx].span.start];
            if gap.contains('\n') {
                sentences.push(make_sentence(tokens, first..idx));
                first = idx;
            }
        }
        let closes = tokens[idx].is_terminal_punct()
            && !tokens.get(idx + 1).is_some_and(Token::is_terminal_punct);
        if closes {
            sentences.push(make_sentence(tokens, first..idx + 1));
            first = idx + 1;
        }
    }
    if first < tokens.len() {
        sentences.push(make_sentence(tokens, first..tokens.len()));
    }
    sentences
}

fn make_sentence(tokens: &[Token<'_>], range: Range<usize>) -> Sentence {
    let span = Span::new(tokens[range.start].span.start, tokens[range.end - 1].span.end);
    Sentence { span, tokens: range }
}

pub fn contains_url(tokens: &[Token<'_>]) -> bool {
    tokens.iter().any(|t| t.kind == TokenKind::Url)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmoticonMatch {
    pub emoticon: String,
    pub span: Span,
}

/// A set of emoticon literals compiled for leftmost-longest search.
#[derive(Debug, Clone)]
pub struct EmoticonSet {
    literals: Vec<String>,
    automaton: AhoCorasick,
}

impl EmoticonSet {
    pub fn new<I, S>(literals: I) -> Result<Self, TextError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut literals: Vec<String> = literals
            .into_iter()
            .map(Into::into)
            .filter(|s| !s.is_empty())
            .collect();
        literals.sort();
        literals.dedup();
        if literals.is_empty() {
            return Err(TextError::EmptyEmoticonSet);
        }
        let automaton = AhoCorasickBuilder::new()
            .match_kind(MatchKind::LeftmostLongest)
            .start_kind(StartKind::Both)
            .build(&literals)
            .map_err(|e| TextError::Automaton(e.to_string()))?;
        Ok(EmoticonSet { literals, automaton })
    }

    /// Parses the lexicon file format: one literal per line, `#` comments.
    ///
    /// Surrounding whitespace is trimmed. A line that is only `#` cannot be
    /// expressed; none of the common emoticons need it.
    pub fn parse(contents: &str) -> Result<Self, TextError> {
        Self::new(
            contents
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextError> {
        let path = path.as_ref();
        let contents = std::fs::read_to_string(path).map_err(|source| TextError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&contents)
    }

    pub fn builtin() -> &'static EmoticonSet {
        static SET: OnceLock<EmoticonSet> = OnceLock::new();
        SET.get_or_init(|| EmoticonSet::parse(DEFAULT_EMOTICONS).expect("shipped emoticon list"))
    }

    pub fn literals(&self) -> &[String] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    fn anchored_match(&self, text: &str, at: usize) -> Option<usize> {
        let input = Input::new(text).range(at..).anchored(Anchored::Yes);
        self.automaton.find(input).map(|m| m.len())
    }

    pub fn detect(&self, text: &str) -> Vec<EmoticonMatch> {
        self.automaton
            .find_iter(text)
            .map(|m| EmoticonMatch {
                emoticon: self.literals[m.pattern().as_usize()].clone(),
                span: Span::new(m.start(), m.end()),
            })
            .collect()
    }
}

/// Longest-first, left-to-right, non-overlapping emoticon matches.
pub fn detect_emoticons(text: &str, lexicon: &EmoticonSet) -> Vec<EmoticonMatch> {
    lexicon.detect(text)
}
