use std::io::Write;

use chrono::{TimeZone, Utc};
use flate2::write::GzEncoder;
use flate2::Compression;
use flutrack::corpus::{corpus_stats, read_corpus, write_jsonl, CorpusReader, Tweet};
use proptest::prelude::*;

fn tweet_strategy() -> impl Strategy<Value = Tweet> {
    let text = prop::collection::vec(
        prop::sample::select(vec!["flu", "#flu", "#Flu", "#h1n1", "http://t.co/a", "cough", ":)", "héllo", "\"q\"", "a\\b"]),
        0..8,
    )
    .prop_map(|w| w.join(" "));
    (0u32..1000, 0i64..40_000_000, text, 0u8..6, prop::option::of("[A-Za-z ,]{0,12}")).prop_map(
        |(id, secs, text, user, loc)| Tweet {
            id: id.to_string(),
            created_at: Utc.timestamp_opt(1_250_000_000 + secs, 0).unwrap(),
            text,
            user_id: format!("u{user}"),
            user_location: loc.filter(|l| !l.trim().is_empty()),
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn stats_survive_write_and_read(tweets in prop::collection::vec(tweet_strategy(), 0..40)) {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &tweets).unwrap();
        let back: Vec<Tweet> = CorpusReader::new(std::io::Cursor::new(buf), false)
            .collect::<Result<_, _>>()
            .unwrap();
        prop_assert_eq!(&back, &tweets);
        prop_assert_eq!(corpus_stats(&back), corpus_stats(&tweets));
    }
}

#[test]
fn gzip_is_transparent() {
    let dir = tempfile::tempdir().unwrap();
    let tweets: Vec<Tweet> = (0..50)
        .map(|i| Tweet {
            id: i.to_string(),
            created_at: Utc.with_ymd_and_hms(2009, 9, 1, 0, 0, i).unwrap(),
            text: format!("tweet {i} #tag{} http://x/{i}", i % 3),
            user_id: format!("u{}", i % 7),
            user_location: None,
        })
        .collect();
    let mut plain = Vec::new();
    write_jsonl(&mut plain, &tweets).unwrap();
    let plain_path = dir.path().join("c.jsonl");
    std::fs::write(&plain_path, &plain).unwrap();
    let gz_path = dir.path().join("c.jsonl.gz");
    let mut enc = GzEncoder::new(std::fs::File::create(&gz_path).unwrap(), Compression::default());
    enc.write_all(&plain).unwrap();
    enc.finish().unwrap();

    let a: Vec<Tweet> = read_corpus(&plain_path, false).unwrap().map(Result::unwrap).collect();
    let b: Vec<Tweet> = read_corpus(&gz_path, true).unwrap().map(Result::unwrap).collect();
    assert_eq!(a, b);
    assert_eq!(corpus_stats(&a), corpus_stats(&b));
    assert_eq!(corpus_stats(&a).hashtag_tokens_unique, 3);
}

#[test]
fn unreadable_file_fails_before_first_record() {
    assert!(read_corpus("/nonexistent/corpus.jsonl", false).is_err());
}
