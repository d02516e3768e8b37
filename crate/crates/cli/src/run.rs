//! Streaming execution of a pipeline over an archive.

use std::io::Write;

use flutrack::corpus::{write_jsonl, CorpusReader, Tweet};
use flutrack::filters::{run_pipeline, PipelineConfig, PipelineOutcome, Resources, StageId};
use flutrack::stats::{Aggregator, Season, WeeklySeries};
use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::CliError;

const MAX_LOGGED_ERRORS: u64 = 20;

#[derive(Debug, Clone)]
pub struct FilterOptions {
    pub season: Season,
    /// Worker threads; 1 runs on the calling thread.
    pub workers: usize,
    /// Records handed to the workers at a time.
    pub chunk_size: usize,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions {
            season: Season::flu_2009(),
            workers: 1,
            chunk_size: 8192,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: StageId,
    pub evaluated: u64,
    pub dropped: u64,
    pub survivors: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterCounts {
    pub input_lines: u64,
    pub parse_errors: u64,
    pub out_of_season: u64,
    /// In-season tweets given to the pipeline.
    pub evaluated: u64,
    pub survivors: u64,
    pub stages: Vec<StageCount>,
}

impl FilterCounts {
    fn new(stages: &[StageId]) -> Self {
        FilterCounts {
            input_lines: 0,
            parse_errors: 0,
            out_of_season: 0,
            evaluated: 0,
            survivors: 0,
            stages: stages
                .iter()
                .map(|&stage| StageCount {
                    stage,
                    evaluated: 0,
                    dropped: 0,
                    survivors: 0,
                })
                .collect(),
        }
    }

    pub fn dropped(&self) -> u64 {
        self.stages.iter().map(|s| s.dropped).sum()
    }

    /// Every input line is a survivor, a stage drop, a parse error or out
    /// of season.
    pub fn is_conserved(&self) -> bool {
        self.input_lines == self.survivors + self.dropped() + self.parse_errors + self.out_of_season
            && self.evaluated == self.survivors + self.dropped()
    }

    /// Survivors after each stage never increase along the pipeline.
    pub fn is_monotone(&self) -> bool {
        let mut prev = self.evaluated;
        for s in &self.stages {
            if s.survivors > prev {
                return false;
            }
            prev = s.survivors;
        }
        prev == self.survivors
    }

    fn record(&mut self, outcome: &PipelineOutcome) {
        self.evaluated += 1;
        for (decision, count) in outcome.trace.iter().zip(&mut self.stages) {
            debug_assert_eq!(decision.stage, count.stage);
            count.evaluated += 1;
            if decision.kept {
                count.survivors += 1;
            } else {
                count.dropped += 1;
            }
        }
        if outcome.kept {
            self.survivors += 1;
        }
    }
}

#[derive(Debug, Clone)]
pub struct FilterRun {
    pub counts: FilterCounts,
    pub series: WeeklySeries,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    id: &'a str,
    kept: bool,
    trace: &'a [flutrack::filters::StageDecision],
}

/// Runs `cfg` over every record of `reader`.
///
/// Survivors are written to `survivors` in input order, whatever the
/// worker count. With `trace`, one JSON line per evaluated tweet records
/// each stage decision.
pub fn run_filter(
    reader: CorpusReader,
    cfg: &PipelineConfig,
    resources: &Resources,
    opts: &FilterOptions,
    mut survivors: Option<&mut dyn Write>,
    mut trace: Option<&mut dyn Write>,
) -> Result<FilterRun, CliError> {
    let pool = if opts.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.workers)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", opts.workers)))?,
        )
    } else {
        None
    };
    let mut counts = FilterCounts::new(&cfg.stage_order());
    let mut agg = Aggregator::new(opts.season);
    let mut reader = reader;
    let chunk_size = opts.chunk_size.max(1);
    let mut chunk: Vec<Tweet> = Vec::with_capacity(chunk_size);
    let mut outcomes: Vec<PipelineOutcome> = Vec::with_capacity(chunk_size);

    loop {
        chunk.clear();
        let mut exhausted = true;
        for rec in reader.by_ref() {
            match rec {
                Ok(t) if opts.season.week_of(&t.created_at).is_some() => chunk.push(t),
                Ok(t) => {
                    agg.record(&t.created_at, false);
                    counts.out_of_season += 1;
                }
                Err(e) => {
                    counts.parse_errors += 1;
                    if counts.parse_errors <= MAX_LOGGED_ERRORS {
                        warn!("skipping {e}");
                    } else {
                        debug!("skipping {e}");
                    }
                }
            }
            if chunk.len() == chunk_size {
                exhausted = false;
                break;
            }
        }

        outcomes.clear();
        match &pool {
            Some(pool) => pool.install(|| {
                chunk
                    .par_iter()
                    .map(|t| run_pipeline(t, cfg, resources))
                    .collect_into_vec(&mut outcomes)
            }),
            None => outcomes.extend(chunk.iter().map(|t| run_pipeline(t, cfg, resources))),
        }

        for (tweet, outcome) in chunk.iter().zip(&outcomes) {
            counts.record(outcome);
            agg.record(&tweet.created_at, outcome.kept);
            if let Some(w) = trace.as_deref_mut() {
                let line = TraceLine {
                    id: &tweet.id,
                    kept: outcome.kept,
                    trace: &outcome.trace,
                };
                serde_json::to_writer(&mut *w, &line).map_err(std::io::Error::from).map_err(io_err)?;
                w.write_all(b"\n").map_err(io_err)?;
            }
            if outcome.kept {
                if let Some(w) = survivors.as_deref_mut() {
                    write_jsonl(&mut *w, [tweet]).map_err(io_err)?;
                }
            }
        }
        if exhausted {
            break;
        }
    }

    counts.input_lines = reader.lines_read();
    if counts.parse_errors > 0 {
        warn!("{} malformed line(s) skipped", counts.parse_errors);
    }
    if counts.out_of_season > 0 {
        warn!("{} tweet(s) outside the season ignored", counts.out_of_season);
    }
    debug_assert_eq!(agg.out_of_season(), counts.out_of_season);
    Ok(FilterRun {
        counts,
        series: agg.series(),
    })
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::io("<output>", e)
}
