//! End-to-end runs of the `flutrack` binary.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flutrack::corpus::{corpus_stats, read_corpus};
use flutrack_cli::RunManifest;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn flutrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flutrack"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn survivor_ids(path: &Path) -> Vec<String> {
    read_corpus(path, false).unwrap().map(|t| t.unwrap().id).collect()
}

#[test]
fn stats_matches_library_and_hand_count() {
    let out = ok(&flutrack(&["stats", s(&fixture("sample.jsonl"))]));
    let tweets: Vec<_> = read_corpus(fixture("sample.jsonl"), false).unwrap().filter_map(Result::ok).collect();
    assert_eq!(out, corpus_stats(&tweets).to_key_values());
    assert_eq!(
        out,
        "total_tweets=18\nunique_users=16\nurl_tweets=1\nhashtag_tokens_total=4\nhashtag_tokens_unique=4\n"
    );
    let csv = ok(&flutrack(&["stats", "--format", "csv", s(&fixture("sample.jsonl"))]));
    assert!(csv.ends_with("18,16,1,4,4\n"));
}

#[test]
fn stats_missing_file_is_io_error() {
    let out = flutrack(&["stats", "/nonexistent/corpus.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn gz_input_gives_same_stats() {
    let dir = tempfile::tempdir().unwrap();
    let gz = dir.path().join("sample.jsonl.gz");
    let mut enc = flate2::write::GzEncoder::new(std::fs::File::create(&gz).unwrap(), flate2::Compression::fast());
    enc.write_all(&std::fs::read(fixture("sample.jsonl")).unwrap()).unwrap();
    enc.finish().unwrap();
    let plain = ok(&flutrack(&["stats", s(&fixture("sample.jsonl"))]));
    assert_eq!(ok(&flutrack(&["stats", "--gz", s(&gz)])), plain);
    let renamed = dir.path().join("sample.bin");
    std::fs::copy(&gz, &renamed).unwrap();
    assert_eq!(ok(&flutrack(&["stats", "--gz", s(&renamed)])), plain);
}

#[test]
fn culotta4_keeps_tweets_with_its_keywords() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c4.jsonl");
    ok(&flutrack(&["filter", s(&fixture("sample.jsonl")), "--config", s(&fixture("culotta4.json")), "-o", s(&out)]));
    let expect: Vec<String> = ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "12", "13", "16", "18", "20"]
        .map(String::from)
        .to_vec();
    assert_eq!(survivor_ids(&out), expect);
    let m = RunManifest::load(&dir.path().join("c4.jsonl.manifest.json")).unwrap();
    let c = m.counts.unwrap();
    assert_eq!((c.input_lines, c.parse_errors, c.out_of_season, c.survivors), (20, 2, 1, 15));
    assert!(c.is_conserved());
}

#[test]
fn best_combination_on_golden_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("best.jsonl");
    let trace = dir.path().join("trace.jsonl");
    ok(&flutrack(&[
        "filter",
        s(&fixture("sample.jsonl")),
        "--config",
        s(&fixture("best.json")),
        "-o",
        s(&out),
        "--trace",
        s(&trace),
    ]));
    assert_eq!(survivor_ids(&out), ["1", "3", "7", "13", "20"]);

    let m = RunManifest::load(&dir.path().join("best.jsonl.manifest.json")).unwrap();
    let c = m.counts.unwrap();
    assert!(c.is_conserved() && c.is_monotone());
    let stages: Vec<&str> = c.stages.iter().map(|s| s.stage.as_str()).collect();
    assert_eq!(stages, ["keyword", "url", "negation", "emoticon", "hashtags", "humor", "geo"]);
    assert_eq!(m.resources.len(), 8);
    assert!(m.config.unwrap().sha256.len() == 64);

    let traces = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(traces.lines().count() as u64, c.evaluated);
    let line10: serde_json::Value = serde_json::from_str(traces.lines().find(|l| l.contains("\"id\":\"10\"")).unwrap()).unwrap();
    assert_eq!(line10["trace"].as_array().unwrap().last().unwrap()["stage"], "negation");

    let series = std::fs::read_to_string(dir.path().join("best.jsonl.series.csv")).unwrap();
    assert!(series.starts_with("week,filtered,total,normalized\n1,2,3,"));
}

#[test]
fn config_errors_stop_before_the_corpus_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.jsonl");
    let r = flutrack(&[
        "filter",
        "/nonexistent/corpus.jsonl",
        "--config",
        s(&fixture("geo_without_target.json")),
        "-o",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("geo_target"));
    assert!(!out.exists());

    let r = flutrack(&["filter", s(&fixture("sample.jsonl")), "--config", "/nonexistent.json", "-o", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let r = flutrack(&["filter", s(&fixture("sample.jsonl"))]);
    assert_eq!(r.status.code(), Some(1));
    assert_eq!(flutrack(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(flutrack(&["--help"]).status.code(), Some(0));
}

#[test]
fn filter_runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        ok(&flutrack(&[
            "filter",
            s(&fixture("sample.jsonl")),
            "--config",
            s(&fixture("best.json")),
            "-o",
            s(&out),
            "--manifest",
            s(&dir.path().join("m.json")),
            "--series",
            s(&dir.path().join("series.csv")),
            "--workers",
            workers,
        ]));
        (
            std::fs::read(&out).unwrap(),
            std::fs::read(dir.path().join("series.csv")).unwrap(),
            RunManifest::load(&dir.path().join("m.json")).unwrap(),
        )
    };
    let a = run("a.jsonl", "1");
    let b = run("a.jsonl", "1");
    let c = run("a.jsonl", "3");
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2.without_timings().to_json(), b.2.without_timings().to_json());
    assert_eq!(a.0, c.0);
    assert_eq!(a.1, c.1);
    assert_eq!(a.2.counts, c.2.counts);
}

fn simulate(dir: &Path, name: &str, extra: &[&str]) -> (PathBuf, PathBuf) {
    let out = dir.join(name);
    let labels = dir.join(format!("{name}.labels.csv"));
    let mut args = vec!["simulate", "-o", s(&out), "--tweets-per-week", "300"];
    args.extend_from_slice(extra);
    ok(&flutrack(&args));
    (out, labels)
}

#[test]
fn simulate_is_deterministic_and_plants_the_curve() {
    let dir = tempfile::tempdir().unwrap();
    let (a, la) = simulate(dir.path(), "a.jsonl", &["--seed", "4"]);
    let (b, lb) = simulate(dir.path(), "b.jsonl", &["--seed", "4"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(std::fs::read(&la).unwrap(), std::fs::read(&lb).unwrap());

    let gold = flutrack::stats::GoldSeries::from_csv(flutrack::stats::SHAPED_GOLD.as_bytes(), 36).unwrap();
    let mut positives = [0u64; 36];
    let mut totals = [0u64; 36];
    let mut rd = csv::Reader::from_path(&la).unwrap();
    for rec in rd.records() {
        let rec = rec.unwrap();
        let w: usize = rec[1].parse().unwrap();
        totals[w - 1] += 1;
        if &rec[2] == "positive" {
            positives[w - 1] += 1;
        }
    }
    for w in 0..36 {
        assert_eq!(totals[w], 300);
        assert_eq!(positives[w], (0.01 * gold.values()[w] * 300.0).round() as u64, "week {}", w + 1);
    }
}

#[test]
fn constant_gold_without_noise_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("flat.csv");
    let rows: String = (1..=36).map(|w| format!("{w},3.0\n")).collect();
    std::fs::write(&gold, format!("week,value\n{rows}")).unwrap();
    let (corpus, _) = simulate(dir.path(), "flat.jsonl", &["--gold", s(&gold), "--noise", "0"]);
    let out = dir.path().join("kw.jsonl");
    ok(&flutrack(&["filter", s(&corpus), "--config", s(&fixture("syndrome_flu.json")), "-o", s(&out)]));
    let series = format!("kw={}", s(&dir.path().join("kw.jsonl.series.csv")));
    let r = flutrack(&["correlate", "--gold", s(&gold), "--series", &series]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn correlate_reports_and_compares() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = simulate(dir.path(), "sim.jsonl", &["--seed", "2"]);
    let out = dir.path().join("kw.jsonl");
    ok(&flutrack(&["filter", s(&corpus), "--config", s(&fixture("syndrome_flu.json")), "-o", s(&out)]));
    let gold = dir.path().join("gold.csv");
    std::fs::write(&gold, flutrack::stats::SHAPED_GOLD).unwrap();
    let series = format!("kw={}", s(&dir.path().join("kw.jsonl.series.csv")));
    let series2 = format!("again={}", s(&dir.path().join("kw.jsonl.series.csv")));
    let cmp = dir.path().join("cmp.csv");
    let svg = dir.path().join("chart.svg");
    let report = ok(&flutrack(&[
        "correlate", "--gold", s(&gold), "--series", &series, "--series", &series2, "--k", "1e4",
        "--comparisons", s(&cmp), "--svg", s(&svg),
    ]));
    assert!(report.starts_with("method,tweets,n,r,r_percent,p_value,p_display\nkw,"));
    assert_eq!(std::fs::read_to_string(&cmp).unwrap().lines().nth(1).unwrap(), "kw,again,0,1e0");
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches("<polyline").count(), 3);

    let short = dir.path().join("short.csv");
    let rows: String = (1..=35).map(|w| format!("{w},1.0\n")).collect();
    std::fs::write(&short, format!("week,value\n{rows}")).unwrap();
    let r = flutrack(&["correlate", "--gold", s(&short), "--series", &series]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("week 36"));
}

#[test]
fn report_runs_every_config() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = simulate(dir.path(), "sim.jsonl", &["--seed", "3"]);
    let gold = dir.path().join("gold.csv");
    std::fs::write(&gold, flutrack::stats::SHAPED_GOLD).unwrap();
    let out_dir = dir.path().join("out");
    let svg = dir.path().join("fig.svg");
    let text = ok(&flutrack(&[
        "report", s(&corpus), "--gold", s(&gold), "--config", s(&fixture("culotta4.json")),
        "--config", s(&fixture("best.json")), "--out-dir", s(&out_dir), "--k", "1e4", "--k", "1e6",
        "--svg", s(&svg),
    ]));
    assert!(text.contains("culotta4") && text.contains("best"));
    let csv = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    for f in ["comparisons.csv", "report.manifest.json", "best.survivors.jsonl", "culotta4.survivors.jsonl.manifest.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    assert!(svg.exists());
}
