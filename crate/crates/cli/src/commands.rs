//! Argument definitions and command implementations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use flutrack::chart::LineChart;
use flutrack::corpus::{read_corpus, StatsAccumulator};
use flutrack::filters::{PipelineConfig, Resources};
use flutrack::stats::{load_gold, CorrelationReport, GoldSeries, Season, WeeklySeries};
use log::{info, warn};

use crate::manifest::{sha256_hex, FileRecord, ResourceRecord, RunManifest, SeasonRecord};
use crate::run::{run_filter, FilterOptions, FilterRun};
use crate::simulate::{generate, NoiseMix, SpecFile};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "flutrack", version, about = "Filter tweet archives for influenza-like-illness reports and correlate weekly counts with surveillance data")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus statistics: tweets, users, URL tweets, hashtags.
    Stats(StatsArgs),
    /// Run a pipeline over a corpus; write survivors, weekly series and a manifest.
    Filter(FilterArgs),
    /// Correlate weekly series with a gold series.
    Correlate(CorrelateArgs),
    /// Generate a synthetic corpus with a planted weekly signal.
    Simulate(SimulateArgs),
    /// Filter a corpus with several configs and correlate them all.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum StatsFormat {
    Kv,
    Csv,
}

#[derive(Debug, Args)]
pub struct SeasonArgs {
    /// First day (a Sunday) of week 1.
    #[arg(long, default_value = "2009-08-30")]
    pub season_start: NaiveDate,
    /// Number of weeks in the season.
    #[arg(long, default_value_t = 36)]
    pub weeks: u32,
}

impl SeasonArgs {
    pub fn season(&self) -> Result<Season, CliError> {
        Ok(Season::new(self.season_start, self.weeks)?)
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub corpus: PathBuf,
    /// Input is gzip-compressed (implied by a .gz extension).
    #[arg(long)]
    pub gz: bool,
    #[arg(long, value_enum, default_value = "kv")]
    pub format: StatsFormat,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    pub corpus: PathBuf,
    /// Pipeline config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Survivor file (JSON lines).
    #[arg(long, short)]
    pub out: PathBuf,
    /// Weekly series CSV; defaults to <out>.series.csv.
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// Manifest JSON; defaults to <out>.manifest.json.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Per-tweet stage decisions (JSON lines).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub gz: bool,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[command(flatten)]
    pub season: SeasonArgs,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Gold series CSV with header week,value.
    #[arg(long)]
    pub gold: PathBuf,
    /// Method series as NAME=PATH, repeatable.
    #[arg(long = "series", required = true, value_parser = parse_named_path)]
    pub series: Vec<(String, PathBuf)>,
    /// Normalization constant; give one for all methods or one per method.
    #[arg(long)]
    pub k: Vec<f64>,
    /// Report CSV; printed to standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Pairwise comparison CSV.
    #[arg(long)]
    pub comparisons: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 36)]
    pub weeks: u32,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Corpus output (JSON lines).
    #[arg(long, short)]
    pub out: PathBuf,
    /// Labels CSV (id,week,class); defaults to <out>.labels.csv.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Spec JSON; flags below override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Gold series to plant; the shipped 36-week curve when absent.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub tweets_per_week: Option<u32>,
    #[arg(long)]
    pub scale: Option<f64>,
    /// Total distractor fraction, split evenly over joke, negated,
    /// url-news and foreign-geo.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub corpus: PathBuf,
    /// Pipeline configs, repeatable; each becomes one report row.
    #[arg(long = "config", required = true)]
    pub configs: Vec<PathBuf>,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub k: Vec<f64>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long)]
    pub gz: bool,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[command(flatten)]
    pub season: SeasonArgs,
}

fn parse_named_path(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

fn is_gz(path: &Path, flag: bool) -> bool {
    flag || path.extension().is_some_and(|e| e == "gz")
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Stats(a) => cmd_stats(&a, stdout),
        Command::Filter(a) => cmd_filter(&a, stdout).map(|_| ()),
        Command::Correlate(a) => cmd_correlate(&a, stdout).map(|_| ()),
        Command::Simulate(a) => cmd_simulate(&a, stdout),
        Command::Report(a) => cmd_report(&a, stdout).map(|_| ()),
    }
}

pub fn cmd_stats(a: &StatsArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let started = Instant::now();
    let reader = read_corpus(&a.corpus, is_gz(&a.corpus, a.gz))?;
    let mut acc = StatsAccumulator::default();
    let mut errors = 0u64;
    for rec in reader {
        match rec {
            Ok(t) => acc.add(&t),
            Err(e) => {
                errors += 1;
                warn!("skipping {e}");
            }
        }
    }
    if errors > 0 {
        warn!("{errors} malformed line(s) skipped");
    }
    let stats = acc.finish();
    let text = match a.format {
        StatsFormat::Kv => stats.to_key_values(),
        StatsFormat::Csv => stats.to_csv(),
    };
    stdout.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))?;
    if let Some(path) = &a.manifest {
        let mut m = RunManifest::new("stats");
        m.inputs.push(a.corpus.display().to_string());
        m.param("stats", &stats);
        m.param("parse_errors", errors);
        m.time("total", started);
        m.write(path)?;
    }
    Ok(())
}

fn resource_records(res: &Resources) -> Vec<ResourceRecord> {
    res.sources
        .iter()
        .map(|s| ResourceRecord {
            name: s.name.clone(),
            origin: s.origin.clone(),
            sha256: sha256_hex(&s.contents),
        })
        .collect()
}

pub struct FilterOutputs {
    pub run: FilterRun,
    pub series_path: PathBuf,
    pub manifest: RunManifest,
}

/// Validates the config before touching the corpus.
pub fn cmd_filter(a: &FilterArgs, stdout: &mut dyn Write) -> Result<FilterOutputs, CliError> {
    let started = Instant::now();
    let config_bytes = std::fs::read(&a.config).map_err(|e| CliError::io(&a.config, e))?;
    let cfg = PipelineConfig::load(&a.config)?;
    let season = a.season.season()?;
    if a.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let resources = Resources::from_config(&cfg)?;
    let reader = read_corpus(&a.corpus, is_gz(&a.corpus, a.gz))?;
    let load_ms = Instant::now();

    let mut out = create(&a.out)?;
    let mut trace = a.trace.as_deref().map(create).transpose()?;
    let opts = FilterOptions {
        season,
        workers: a.workers,
        ..FilterOptions::default()
    };
    let run = run_filter(
        reader,
        &cfg,
        &resources,
        &opts,
        Some(&mut out),
        trace.as_mut().map(|w| w as &mut dyn Write),
    )?;
    out.flush().map_err(|e| CliError::io(&a.out, e))?;
    if let (Some(w), Some(p)) = (trace.as_mut(), a.trace.as_deref()) {
        w.flush().map_err(|e| CliError::io(p, e))?;
    }
    let filter_ms = Instant::now();

    let series_path = a.series.clone().unwrap_or_else(|| with_suffix(&a.out, ".series.csv"));
    let mut buf = Vec::new();
    run.series.write_csv(&mut buf)?;
    write_file(&series_path, &buf)?;

    let manifest_path = a.manifest.clone().unwrap_or_else(|| with_suffix(&a.out, ".manifest.json"));
    let mut m = RunManifest::new("filter");
    m.config = Some(FileRecord {
        path: a.config.display().to_string(),
        sha256: sha256_hex(&config_bytes),
    });
    m.pipeline = Some(cfg.label());
    m.inputs.push(a.corpus.display().to_string());
    m.resources = resource_records(&resources);
    m.season = Some(SeasonRecord {
        start: season.start().to_string(),
        weeks: season.weeks(),
    });
    m.counts = Some(run.counts.clone());
    m.param("workers", a.workers);
    m.output("survivors", &a.out);
    m.output("series", &series_path);
    m.output("manifest", &manifest_path);
    if let Some(t) = &a.trace {
        m.output("trace", t);
    }
    m.timings_ms.insert("load".into(), (load_ms - started).as_millis() as u64);
    m.timings_ms.insert("filter".into(), (filter_ms - load_ms).as_millis() as u64);
    m.time("total", started);
    m.write(&manifest_path)?;

    let c = &run.counts;
    writeln!(
        stdout,
        "{}: {} lines, {} evaluated, {} survivors ({} malformed, {} out of season)",
        cfg.label(),
        c.input_lines,
        c.evaluated,
        c.survivors,
        c.parse_errors,
        c.out_of_season
    )
    .map_err(|e| CliError::io("<stdout>", e))?;
    for s in &c.stages {
        info!("{:>9}: {} in, {} dropped, {} kept", s.stage.as_str(), s.evaluated, s.dropped, s.survivors);
    }
    Ok(FilterOutputs {
        run,
        series_path,
        manifest: m,
    })
}

fn k_for(ks: &[f64], i: usize, n: usize) -> Result<f64, CliError> {
    match ks.len() {
        0 => Ok(1.0),
        1 => Ok(ks[0]),
        len if len == n => Ok(ks[i]),
        len => Err(CliError::Usage(format!("got {len} --k values for {n} series; give one or one per series"))),
    }
}

/// Correlates named series with `gold` and writes the report artifacts.
pub fn correlate_all(
    named: Vec<(String, WeeklySeries)>,
    gold: &GoldSeries,
    ks: &[f64],
    svg: Option<&Path>,
) -> Result<CorrelationReport, CliError> {
    let n = named.len();
    let mut scaled = Vec::with_capacity(n);
    for (i, (name, mut s)) in named.into_iter().enumerate() {
        s.normalize(k_for(ks, i, n)?)?;
        scaled.push((name, s));
    }
    let report = CorrelationReport::build(&scaled, gold)?;
    if let Some(path) = svg {
        let mut chart = LineChart::new("Weekly normalized tweet rate vs gold");
        chart.y_label = "normalized value".into();
        chart.add("gold", gold.values().to_vec());
        for (name, s) in &scaled {
            chart.add(name.clone(), s.normalized());
        }
        write_file(path, chart.to_svg().as_bytes())?;
    }
    Ok(report)
}

fn write_report(report: &CorrelationReport, out: Option<&Path>, comparisons: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    match out {
        Some(p) => {
            write_file(p, &csv)?;
            write!(stdout, "{report}").map_err(|e| CliError::io("<stdout>", e))?;
        }
        None => stdout.write_all(&csv).map_err(|e| CliError::io("<stdout>", e))?,
    }
    if let Some(p) = comparisons {
        let mut buf = Vec::new();
        report.write_comparisons_csv(&mut buf)?;
        write_file(p, &buf)?;
    }
    Ok(())
}

pub fn cmd_correlate(a: &CorrelateArgs, stdout: &mut dyn Write) -> Result<CorrelationReport, CliError> {
    let started = Instant::now();
    let gold = load_gold(&a.gold, a.weeks)?;
    let mut named = Vec::new();
    for (name, path) in &a.series {
        named.push((name.clone(), WeeklySeries::load(path)?));
    }
    let report = correlate_all(named, &gold, &a.k, a.svg.as_deref())?;
    write_report(&report, a.out.as_deref(), a.comparisons.as_deref(), stdout)?;

    if let Some(path) = &a.manifest {
        let mut m = RunManifest::new("correlate");
        m.inputs.push(a.gold.display().to_string());
        m.inputs.extend(a.series.iter().map(|(n, p)| format!("{n}={}", p.display())));
        m.param("k", &a.k);
        m.param("report", &report);
        for (name, p) in [("report", &a.out), ("comparisons", &a.comparisons), ("svg", &a.svg)] {
            if let Some(p) = p {
                m.output(name, p);
            }
        }
        m.output("manifest", path);
        m.time("total", started);
        m.write(path)?;
    }
    Ok(report)
}

pub fn cmd_simulate(a: &SimulateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let started = Instant::now();
    let mut file = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let mut f: SpecFile = serde_json::from_str(&text).map_err(crate::simulate::SpecError::from)?;
            if let (Some(g), Some(base)) = (f.gold.as_mut(), path.parent()) {
                if g.is_relative() {
                    *g = base.join(&*g);
                }
            }
            f
        }
        None => SpecFile::default(),
    };
    if a.gold.is_some() {
        file.gold = a.gold.clone();
    }
    if let Some(v) = a.tweets_per_week {
        file.tweets_per_week = v;
    }
    if let Some(v) = a.scale {
        file.signal_fraction_scale = v;
    }
    if let Some(v) = a.noise {
        file.noise = NoiseMix::even(v);
    }
    if let Some(v) = a.seed {
        file.seed = v;
    }
    let recorded = file.clone();
    let spec = file.build()?;

    let labels_path = a.labels.clone().unwrap_or_else(|| with_suffix(&a.out, ".labels.csv"));
    let mut corpus = create(&a.out)?;
    let mut labels = create(&labels_path)?;
    let summary = generate(&spec, &mut corpus, &mut labels).map_err(|e| CliError::io(&a.out, e))?;
    let total: u64 = summary.per_week.iter().flatten().sum();
    writeln!(stdout, "wrote {total} tweets over {} weeks to {}", spec.season.weeks(), a.out.display())
        .map_err(|e| CliError::io("<stdout>", e))?;

    let manifest_path = a.manifest.clone().unwrap_or_else(|| with_suffix(&a.out, ".manifest.json"));
    let mut m = RunManifest::new("simulate");
    if let Some(p) = &recorded.gold {
        m.inputs.push(p.display().to_string());
    }
    m.param("spec", &recorded);
    m.param("class_counts", &summary);
    m.output("corpus", &a.out);
    m.output("labels", &labels_path);
    m.output("manifest", &manifest_path);
    m.time("total", started);
    m.write(&manifest_path)?;
    Ok(())
}

pub fn cmd_report(a: &ReportArgs, stdout: &mut dyn Write) -> Result<CorrelationReport, CliError> {
    let started = Instant::now();
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let season = a.season.season()?;
    let gold = load_gold(&a.gold, season.weeks())?;
    // Validate every config before filtering anything.
    let mut labels = Vec::new();
    for path in &a.configs {
        labels.push(PipelineConfig::load(path)?.label());
    }
    let mut named = Vec::new();
    let mut sink = std::io::sink();
    for (path, label) in a.configs.iter().zip(&labels) {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| label.clone());
        let fa = FilterArgs {
            corpus: a.corpus.clone(),
            config: path.clone(),
            out: a.out_dir.join(format!("{stem}.survivors.jsonl")),
            series: None,
            manifest: None,
            trace: None,
            gz: a.gz,
            workers: a.workers,
            season: SeasonArgs {
                season_start: a.season.season_start,
                weeks: a.season.weeks,
            },
        };
        let out = cmd_filter(&fa, &mut sink)?;
        named.push((stem, out.run.series));
    }
    let report_path = a.out_dir.join("report.csv");
    let comparisons_path = a.out_dir.join("comparisons.csv");
    let report = correlate_all(named, &gold, &a.k, a.svg.as_deref())?;
    write_report(&report, Some(&report_path), Some(&comparisons_path), stdout)?;

    let manifest_path = a.out_dir.join("report.manifest.json");
    let mut m = RunManifest::new("report");
    m.inputs.push(a.corpus.display().to_string());
    m.inputs.push(a.gold.display().to_string());
    for p in &a.configs {
        m.inputs.push(p.display().to_string());
    }
    m.param("k", &a.k);
    m.output("report", &report_path);
    m.output("comparisons", &comparisons_path);
    if let Some(p) = &a.svg {
        m.output("svg", p);
    }
    m.output("manifest", &manifest_path);
    m.time("total", started);
    m.write(&manifest_path)?;
    Ok(report)
}
