//! One module per experiment. Each computes its artifacts in memory; only
//! [`run`] touches the output directory.

pub mod eval;
pub mod fit;
pub mod generate;
pub mod replay;
pub mod simulate;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::warn;

use ierank::replay::{parse_session_log, SessionRecord};
use ierank::simulator::{parse_qrels, Qrels};

use crate::manifest::{Command, Settings};
use crate::output::{Artifact, OutputDir};

/// What a command produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub artifacts: Vec<Artifact>,
    /// Human-readable summary for the terminal.
    pub summary: String,
}

impl Report {
    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }
}

/// Computes a command's artifacts on a pool of `settings.common.workers`
/// threads (all cores when unset).
pub fn execute(settings: &Settings) -> Result<Report> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = settings.common.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker pool")?;
    let seed = settings.common.seed;
    pool.install(|| match &settings.command {
        Command::Simulate(s) => simulate::run(s, seed),
        Command::Replay(s) => replay::run(s),
        Command::EstimateParams(s) => fit::run(s),
        Command::GenQrels(s) => generate::qrels(s, seed),
        Command::GenLog(s) => generate::log(s, seed),
        Command::Eval(s) => eval::run(s),
    })
}

/// Executes the command and writes its artifacts. Nothing is left behind
/// if any step fails.
pub fn run(settings: &Settings) -> Result<(Report, Vec<PathBuf>)> {
    let report = execute(settings)?;
    let mut out = OutputDir::create(&settings.common.out_dir)?;
    for a in &report.artifacts {
        out.write(a)?;
    }
    Ok((report, out.commit()))
}

pub(crate) fn load_qrels(path: &Path) -> Result<Qrels> {
    let file = File::open(path).with_context(|| format!("opening qrels {}", path.display()))?;
    let parsed = parse_qrels(BufReader::new(file))
        .with_context(|| format!("in qrels {}", path.display()))?;
    for w in &parsed.warnings {
        warn!("{}: {w}", path.display());
    }
    Ok(parsed.qrels)
}

pub(crate) fn load_log(path: &Path) -> Result<Vec<SessionRecord>> {
    let file =
        File::open(path).with_context(|| format!("opening session log {}", path.display()))?;
    parse_session_log(BufReader::new(file))
        .with_context(|| format!("in session log {}", path.display()))
}

/// Shortest representation that reads back to the same value.
pub(crate) fn num(v: f64) -> String {
    v.to_string()
}
