//! Rendering of run artifacts: metrics CSV, summary JSON, digest file and
//! comparison table.

use serde_json::{json, Value};
use stigsim_core::canon::Digest;
use stigsim_core::engine::{
    fold_metrics, to_jsonl, trace_digest, MetricsReport, ScenarioRun, TraceEntry, TraceHeader,
    CSV_COLUMNS,
};

use crate::error::{Error, Result};

/// Columns of `compare.csv`.
pub const COMPARE_COLUMNS: [&str; 8] = [
    "rank",
    "style",
    "duplicateClaimAttempts",
    "wastedGas",
    "completionRate",
    "medianCompletionLatency",
    "gasPerCompletedTask",
    "frontrunnerWinRate",
];

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner()
        .map_err(|e| Error::Csv(e.into_error().into()))
}

/// `metrics.csv` for a finished run, one row per style.
pub fn metrics_csv(run: &ScenarioRun) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = run
        .runs
        .iter()
        .map(|r| {
            fold_metrics(&r.trace).csv_row(
                &run.config.name,
                r.style.as_str(),
                run.config.seed,
                &r.digest,
            )
        })
        .collect();
    csv_bytes(&CSV_COLUMNS, &rows)
}

/// Parse a JSON Lines trace back into entries.
pub fn parse_trace(jsonl: &str) -> Result<Vec<TraceEntry>> {
    jsonl
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Trace {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Rebuild `metrics.csv` from a stored multi-style trace alone. Each header
/// entry starts a new style section.
pub fn metrics_csv_from_trace(jsonl: &str) -> Result<Vec<u8>> {
    let entries = parse_trace(jsonl)?;
    let mut sections: Vec<(&TraceHeader, Vec<TraceEntry>)> = Vec::new();
    for e in &entries {
        match e {
            TraceEntry::Header(h) => sections.push((h, vec![e.clone()])),
            other => match sections.last_mut() {
                Some((_, s)) => s.push(other.clone()),
                None => {
                    return Err(Error::Trace {
                        line: 1,
                        reason: "trace does not start with a header".into(),
                    })
                }
            },
        }
    }
    let rows: Vec<Vec<String>> = sections
        .iter()
        .map(|(h, s)| {
            fold_metrics(s).csv_row(&h.scenario, h.style.as_str(), h.seed, &trace_digest(s))
        })
        .collect();
    csv_bytes(&CSV_COLUMNS, &rows)
}

/// Concatenated traces of every style.
pub fn trace_jsonl(run: &ScenarioRun) -> String {
    run.runs.iter().map(|r| to_jsonl(&r.trace)).collect()
}

pub fn summary_json(run: &ScenarioRun, seed_override: Option<u64>) -> Vec<u8> {
    let styles: serde_json::Map<String, Value> = run
        .runs
        .iter()
        .map(|r| {
            let tip = r.chain.tip();
            let metrics: MetricsReport = fold_metrics(&r.trace);
            (
                r.style.as_str().to_string(),
                json!({
                    "traceDigest": r.digest.to_hex(),
                    "finalHeight": r.chain.tip_height(),
                    "finalStateDigest": tip.digest().to_hex(),
                    "metrics": metrics,
                }),
            )
        })
        .collect();
    let v = json!({
        "scenario": run.config.name,
        "configDigest": run.config_digest.to_hex(),
        "seed": run.config.seed,
        "seedOverride": seed_override,
        "combinedDigest": run.digest().to_hex(),
        "styles": styles,
    });
    let mut s = serde_json::to_string_pretty(&v).expect("summary serializes");
    s.push('\n');
    s.into_bytes()
}

/// One line of `digest.txt` after the first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigestLine {
    pub style: String,
    /// 0 for the style's header, else the block height.
    pub height: u64,
    pub entry: Digest,
}

/// Parsed `digest.txt`. The first line is the combined trace digest. Then,
/// per style, one line for the header and one per sealed block (orphaned
/// ones included), each hashing the full canonical trace line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigestFile {
    pub combined: Digest,
    pub blocks: Vec<DigestLine>,
}

impl DigestFile {
    pub fn of(run: &ScenarioRun) -> Self {
        let mut blocks = Vec::new();
        for r in &run.runs {
            for e in &r.trace {
                let height = match e {
                    TraceEntry::Header(_) => 0,
                    TraceEntry::Block(b) => b.block.height,
                    TraceEntry::Reorg(_) => continue,
                };
                let entry = Digest::of(e.to_line().as_bytes());
                blocks.push(DigestLine {
                    style: r.style.as_str().to_string(),
                    height,
                    entry,
                });
            }
        }
        DigestFile {
            combined: run.digest(),
            blocks,
        }
    }

    pub fn render(&self) -> String {
        let mut s = format!("{}\n", self.combined.to_hex());
        for l in &self.blocks {
            s.push_str(&format!("{} {} {}\n", l.style, l.height, l.entry.to_hex()));
        }
        s
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let first = lines.next().ok_or("empty file")?;
        let combined =
            Digest::from_hex(first.trim()).ok_or("first line is not a 64-digit hex digest")?;
        let mut blocks = Vec::new();
        for (i, l) in lines.enumerate() {
            let bad = || format!("line {} is not `STYLE HEIGHT DIGEST`", i + 2);
            let mut parts = l.split_whitespace();
            let (Some(style), Some(h), Some(d), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad());
            };
            let height = h.parse().map_err(|_| bad())?;
            let entry = Digest::from_hex(d).ok_or_else(bad)?;
            blocks.push(DigestLine {
                style: style.to_string(),
                height,
                entry,
            });
        }
        Ok(DigestFile { combined, blocks })
    }
}

/// Where a stored digest file and a fresh run part ways.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Divergence {
    /// An entry differs or one side has an entry the other lacks. Height 0
    /// is the style header.
    Block { style: String, height: u64 },
    /// Every header and block matches but the combined digest does not, so
    /// the difference is in a reorg entry.
    Trace,
}

pub fn first_divergence(expected: &DigestFile, actual: &DigestFile) -> Option<Divergence> {
    let n = expected.blocks.len().max(actual.blocks.len());
    for i in 0..n {
        match (expected.blocks.get(i), actual.blocks.get(i)) {
            (Some(e), Some(a)) if e == a => continue,
            (Some(e), _) => {
                return Some(Divergence::Block {
                    style: e.style.clone(),
                    height: e.height,
                })
            }
            (None, Some(a)) => {
                return Some(Divergence::Block {
                    style: a.style.clone(),
                    height: a.height,
                })
            }
            (None, None) => unreachable!(),
        }
    }
    (expected.combined != actual.combined).then_some(Divergence::Trace)
}

/// Per-style comparison rows, best first: least wasted gas, then fewest
/// duplicate claims, then highest completion rate.
pub fn compare_csv(run: &ScenarioRun) -> Result<Vec<u8>> {
    let mut rows: Vec<(&str, MetricsReport)> = run
        .runs
        .iter()
        .map(|r| (r.style.as_str(), fold_metrics(&r.trace)))
        .collect();
    rows.sort_by(|(sa, a), (sb, b)| {
        a.wasted_gas
            .cmp(&b.wasted_gas)
            .then(a.duplicate_claim_attempts.cmp(&b.duplicate_claim_attempts))
            .then(b.completion_rate.cmp(&a.completion_rate))
            .then(sa.cmp(sb))
    });
    let out: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, (s, m))| {
            vec![
                (i + 1).to_string(),
                s.to_string(),
                m.duplicate_claim_attempts.to_string(),
                m.wasted_gas.to_string(),
                m.completion_rate.to_string(),
                m.median_completion_latency.to_string(),
                m.gas_per_completed_task.to_string(),
                m.frontrunner_win_rate.to_string(),
            ]
        })
        .collect();
    csv_bytes(&COMPARE_COLUMNS, &out)
}
