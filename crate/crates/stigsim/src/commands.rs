use std::fs;
use std::path::{Path, PathBuf};

use stigsim_core::engine::{run_scenario, template, ScenarioRun, TEMPLATE_NAMES};

use crate::error::{ConfigErrorDisplay, Error, Result};
use crate::io::{load_config, write_file, write_outputs};
use crate::report::{
    compare_csv, first_divergence, metrics_csv, summary_json, trace_jsonl, DigestFile, Divergence,
};

fn execute(config: &Path, seed_override: Option<u64>) -> Result<ScenarioRun> {
    let cfg = load_config(config, seed_override)?;
    run_scenario(&cfg).map_err(|e| Error::Invalid {
        file: config.to_path_buf(),
        error: ConfigErrorDisplay(e),
    })
}

fn artifacts(
    run: &ScenarioRun,
    seed_override: Option<u64>,
    trace: bool,
) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let mut files = vec![
        ("metrics.csv", metrics_csv(run)?),
        ("summary.json", summary_json(run, seed_override)),
        ("digest.txt", DigestFile::of(run).render().into_bytes()),
    ];
    if trace {
        files.push(("trace.jsonl", trace_jsonl(run).into_bytes()));
    }
    Ok(files)
}

/// Run every configured style and write `metrics.csv`, `summary.json`,
/// `digest.txt` and, with `trace`, `trace.jsonl`.
pub fn cmd_run(
    config: &Path,
    out: &Path,
    trace: bool,
    seed_override: Option<u64>,
) -> Result<Vec<PathBuf>> {
    let run = execute(config, seed_override)?;
    write_outputs(out, &artifacts(&run, seed_override, trace)?)
}

/// Like [`cmd_run`], plus a ranked `compare.csv`. Needs two or more styles.
pub fn cmd_compare(config: &Path, out: &Path, seed_override: Option<u64>) -> Result<Vec<PathBuf>> {
    let cfg = load_config(config, seed_override)?;
    if cfg.styles.len() < 2 {
        return Err(Error::CompareNeedsStyles(cfg.styles.len()));
    }
    let run = execute(config, seed_override)?;
    let mut files = artifacts(&run, seed_override, false)?;
    files.push(("compare.csv", compare_csv(&run)?));
    write_outputs(out, &files)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Match,
    Mismatch(Divergence),
}

/// Re-run a config and compare against a stored `digest.txt`.
pub fn cmd_verify(config: &Path, digest: &Path, seed_override: Option<u64>) -> Result<Verdict> {
    let text = fs::read_to_string(digest).map_err(Error::io(digest))?;
    let expected = DigestFile::parse(&text).map_err(|reason| Error::DigestFile {
        path: digest.to_path_buf(),
        reason,
    })?;
    let run = execute(config, seed_override)?;
    Ok(match first_divergence(&expected, &DigestFile::of(&run)) {
        None => Verdict::Match,
        Some(d) => Verdict::Mismatch(d),
    })
}

/// Pretty JSON of a template with every field spelled out.
pub fn template_json(name: &str) -> Result<String> {
    let cfg = template(name).ok_or_else(|| Error::UnknownTemplate {
        name: name.to_string(),
        known: TEMPLATE_NAMES.to_vec(),
    })?;
    let mut s = serde_json::to_string_pretty(&cfg).expect("configs serialize");
    s.push('\n');
    Ok(s)
}

pub fn cmd_gen_config(name: &str, out: &Path) -> Result<()> {
    write_file(out, template_json(name)?.as_bytes())
}
