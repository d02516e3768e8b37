//! Tweet archive ingestion.
//!
//! Archives are JSON-lines, one tweet per line, optionally gzip-compressed:
//!
//! ```text
//! {"id":"1","created_at":"2009-09-01T12:00:00Z","text":"got flu","user_id":"u1","user_location":"NY, USA"}
//! ```
//!
//! Corrupt lines surface as per-line [`RecordError`]s; the reader keeps
//! going so one damaged record does not lose an archive.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, SubsecRound, Utc};
use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::textproc::{tokenize, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    #[serde(with = "utc_seconds")]
    pub created_at: DateTime<Utc>,
    pub text: String,
    pub user_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_location: Option<String>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot open corpus {path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// A problem with one line of the archive.
#[derive(Debug, Error)]
pub enum RecordError {
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("line {line}: read failed: {source}")]
    Io {
        line: u64,
        #[source]
        source: io::Error,
    },
}

impl RecordError {
    pub fn line(&self) -> u64 {
        match self {
            RecordError::Malformed { line, .. } | RecordError::Io { line, .. } => *line,
        }
    }
}

#[derive(Deserialize)]
struct RawRecord {
    #[serde(deserialize_with = "string_or_number")]
    id: String,
    created_at: String,
    text: String,
    #[serde(deserialize_with = "string_or_number")]
    user_id: String,
    #[serde(default)]
    user_location: Option<String>,
}

fn string_or_number<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        S(String),
        N(u64),
    }
    Ok(match Id::deserialize(d)? {
        Id::S(s) => s,
        Id::N(n) => n.to_string(),
    })
}

/// Parses an ISO-8601 instant (or the legacy Twitter API format) and
/// truncates it to whole seconds in UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    let parsed = DateTime::parse_from_rfc3339(s)
        .map(|dt| dt.with_timezone(&Utc))
        .or_else(|_| DateTime::parse_from_str(s, "%a %b %d %H:%M:%S %z %Y").map(|dt| dt.with_timezone(&Utc)))
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").map(|n| n.and_utc()))
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S").map(|n| n.and_utc()))
        .ok()?;
    Some(parsed.trunc_subsecs(0))
}

/// Parses one archive line. `line_no` is 1-based and only used for errors.
pub fn parse_record(line: &str, line_no: u64) -> Result<Tweet, RecordError> {
    let malformed = |reason: String| RecordError::Malformed { line: line_no, reason };
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() {
        return Err(malformed("empty line".into()));
    }
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    if raw.id.is_empty() {
        return Err(malformed("empty id".into()));
    }
    let created_at = parse_timestamp(&raw.created_at)
        .ok_or_else(|| malformed(format!("bad created_at {:?}", raw.created_at)))?;
    let user_location = raw.user_location.filter(|l| !l.trim().is_empty());
    Ok(Tweet {
        id: raw.id,
        created_at,
        text: raw.text,
        user_id: raw.user_id,
        user_location,
    })
}

/// Streaming reader over an archive. Holds one line in memory at a time.
pub struct CorpusReader {
    reader: Box<dyn BufRead + Send>,
    buf: Vec<u8>,
    line_no: u64,
    done: bool,
}

impl CorpusReader {
    pub fn new<R: Read + Send + 'static>(inner: R, decompress: bool) -> Self {
        let reader: Box<dyn BufRead + Send> = if decompress {
            Box::new(BufReader::with_capacity(1 << 16, MultiGzDecoder::new(inner)))
        } else {
            Box::new(BufReader::with_capacity(1 << 16, inner))
        };
        CorpusReader {
            reader,
            buf: Vec::with_capacity(1024),
            line_no: 0,
            done: false,
        }
    }

    /// Number of lines consumed so far.
    pub fn lines_read(&self) -> u64 {
        self.line_no
    }
}

impl Iterator for CorpusReader {
    type Item = Result<Tweet, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        self.buf.clear();
        match self.reader.read_until(b'\n', &mut self.buf) {
            Ok(0) => {
                self.done = true;
                None
            }
            Ok(_) => {
                self.line_no += 1;
                Some(match std::str::from_utf8(&self.buf) {
                    Ok(line) => parse_record(line, self.line_no),
                    Err(e) => Err(RecordError::Malformed {
                        line: self.line_no,
                        reason: format!("invalid UTF-8: {e}"),
                    }),
                })
            }
            Err(source) => {
                self.done = true;
                self.line_no += 1;
                Some(Err(RecordError::Io { line: self.line_no, source }))
            }
        }
    }
}

/// Opens an archive for streaming. Fails before yielding anything when the
/// file cannot be opened.
pub fn read_corpus(path: impl AsRef<Path>, decompress: bool) -> Result<CorpusReader, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(CorpusReader::new(file, decompress))
}

/// Writes tweets as JSON-lines.
pub fn write_jsonl<'a, W, I>(mut out: W, tweets: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Tweet>,
{
    for t in tweets {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub total_tweets: u64,
    pub unique_users: u64,
    /// Tweets containing at least one `http...` token.
    pub url_tweets: u64,
    pub hashtag_tokens_total: u64,
    /// Distinct hashtags, compared case-insensitively.
    pub hashtag_tokens_unique: u64,
}

impl CorpusStats {
    pub fn to_key_values(&self) -> String {
        format!(
            "total_tweets={}\nunique_users={}\nurl_tweets={}\nhashtag_tokens_total={}\nhashtag_tokens_unique={}\n",
            self.total_tweets,
            self.unique_users,
            self.url_tweets,
            self.hashtag_tokens_total,
            self.hashtag_tokens_unique
        )
    }

    pub fn to_csv(&self) -> String {
        format!(
            "total_tweets,unique_users,url_tweets,hashtag_tokens_total,hashtag_tokens_unique\n{},{},{},{},{}\n",
            self.total_tweets,
            self.unique_users,
            self.url_tweets,
            self.hashtag_tokens_total,
            self.hashtag_tokens_unique
        )
    }
}

/// Incremental statistics accumulator.
#[derive(Debug, Default)]
pub struct StatsAccumulator {
    stats: CorpusStats,
    users: HashSet<String>,
    hashtags: HashSet<String>,
}

impl StatsAccumulator {
    pub fn add(&mut self, tweet: &Tweet) {
        self.stats.total_tweets += 1;
        if !self.users.contains(&tweet.user_id) {
            self.users.insert(tweet.user_id.clone());
        }
        let mut has_url = false;
        for tok in tokenize(&tweet.text) {
            match tok.kind {
                TokenKind::Url => has_url = true,
                TokenKind::Hashtag => {
                    self.stats.hashtag_tokens_total += 1;
                    if !self.hashtags.contains(tok.norm.as_ref()) {
                        self.hashtags.insert(tok.norm.into_owned());
                    }
                }
                _ => {}
            }
        }
        if has_url {
            self.stats.url_tweets += 1;
        }
    }

    pub fn finish(self) -> CorpusStats {
        CorpusStats {
            unique_users: self.users.len() as u64,
            hashtag_tokens_unique: self.hashtags.len() as u64,
            ..self.stats
        }
    }
}

pub fn corpus_stats<'a, I>(tweets: I) -> CorpusStats
where
    I: IntoIterator<Item = &'a Tweet>,
{
    let mut acc = StatsAccumulator::default();
    for t in tweets {
        acc.add(t);
    }
    acc.finish()
}

mod utc_seconds {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(dt: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&dt.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_timestamp(&s).ok_or_else(|| serde::de::Error::custom(format!("bad timestamp {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn line(id: &str, text: &str, user: &str, loc: Option<&str>) -> String {
        let mut v = serde_json::json!({
            "id": id,
            "created_at": "2009-09-01T12:00:00Z",
            "text": text,
            "user_id": user,
        });
        if let Some(loc) = loc {
            v["user_location"] = loc.into();
        }
        v.to_string()
    }

    #[test]
    fn parses_location() {
        let t = parse_record(&line("1", "got flu n coughed a lot", "u", Some("NY, USA")), 1).unwrap();
        assert_eq!(t.user_location.as_deref(), Some("NY, USA"));
        assert_eq!(t.created_at, Utc.with_ymd_and_hms(2009, 9, 1, 12, 0, 0).unwrap());

        let t = parse_record(&line("1", "x", "u", Some("  ")), 1).unwrap();
        assert_eq!(t.user_location, None);
        let t = parse_record(&line("1", "x", "u", None), 1).unwrap();
        assert_eq!(t.user_location, None);
    }

    #[test]
    fn rejects_bad_records() {
        let err = parse_record(r#"{"id":"1","created_at":"2009-09-01T12:00:00Z","user_id":"u"}"#, 7).unwrap_err();
        assert!(matches!(err, RecordError::Malformed { line: 7, .. }));
        assert!(matches!(parse_record("", 3), Err(RecordError::Malformed { line: 3, .. })));
        assert!(parse_record(&line("", "x", "u", None), 1).is_err());
        assert!(parse_record(
            r#"{"id":"1","created_at":"yesterday","text":"x","user_id":"u"}"#,
            1
        )
        .is_err());
    }

    #[test]
    fn timestamps_normalize_to_utc_seconds() {
        let want = Utc.with_ymd_and_hms(2009, 9, 1, 12, 0, 0).unwrap();
        assert_eq!(parse_timestamp("2009-09-01T08:00:00.750-04:00"), Some(want));
        assert_eq!(parse_timestamp("Tue Sep 01 12:00:00 +0000 2009"), Some(want));
        assert_eq!(parse_timestamp("2009-09-01 12:00:00"), Some(want));
    }

    #[test]
    fn numeric_ids_accepted() {
        let t = parse_record(r#"{"id":42,"created_at":"2009-09-01T12:00:00Z","text":"x","user_id":7}"#, 1).unwrap();
        assert_eq!((t.id.as_str(), t.user_id.as_str()), ("42", "7"));
    }

    #[test]
    fn stats_fixture() {
        assert_eq!(corpus_stats(&[]), CorpusStats::default());
        let tweets: Vec<Tweet> = [
            line("1", "flu #H1N1", "a", None),
            line("2", "see http://x", "b", None),
            line("3", "#h1n1 again #swineflu", "a", None),
            line("4", "nothing", "b", None),
        ]
        .iter()
        .map(|l| parse_record(l, 1).unwrap())
        .collect();
        let s = corpus_stats(&tweets);
        assert_eq!(
            s,
            CorpusStats {
                total_tweets: 4,
                unique_users: 2,
                url_tweets: 1,
                hashtag_tokens_total: 3,
                hashtag_tokens_unique: 2,
            }
        );
        assert!(s.to_key_values().contains("unique_users=2\n"));
        assert!(s.to_csv().ends_with("4,2,1,3,2\n"));
    }

    #[test]
    fn reader_reports_line_numbers() {
        let mut data = String::new();
        for i in 1..=10 {
            if i == 4 {
                data.push_str("{not json\n");
            } else {
                data.push_str(&line(&i.to_string(), "x", "u", None));
                data.push('\n');
            }
        }
        let items: Vec<_> = CorpusReader::new(io::Cursor::new(data.into_bytes()), false).collect();
        assert_eq!(items.len(), 10);
        assert_eq!(items.iter().filter(|r| r.is_ok()).count(), 9);
        assert_eq!(items[3].as_ref().unwrap_err().line(), 4);
    }

    #[test]
    fn invalid_utf8_is_a_line_error() {
        let mut data = line("1", "x", "u", None).into_bytes();
        data.extend_from_slice(b"\n\xff\xfe\n");
        data.extend_from_slice(line("2", "y", "u", None).as_bytes());
        let items: Vec<_> = CorpusReader::new(io::Cursor::new(data), false).collect();
        assert_eq!(items.len(), 3);
        assert!(items[1].is_err());
        assert_eq!(items[2].as_ref().unwrap().id, "2");
    }
}
