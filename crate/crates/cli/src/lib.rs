//! Command-line front end for `ierank`: the simulated-user and log-replay
//! experiments, synthetic data generators, parameter fitting and run
//! evaluation.
//!
//! Every command takes its settings from an optional TOML manifest (see
//! [`manifest`]) overridden by flags, computes its outputs in memory and
//! writes them to `--out-dir`.

pub mod commands;
pub mod manifest;
pub mod output;
pub mod plot;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use manifest::{Experiment, Manifest, Overrides, Preset, Settings};

#[derive(Debug, Parser)]
#[command(name = "ierank", version, about = "Click-driven ranking experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,

    /// TOML manifest with the experiment's settings.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    /// Master seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; all cores when unset.
    #[arg(long, global = true, env = "IERANK_WORKERS")]
    pub workers: Option<usize>,

    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Corpus and run sizes for synthetic experiments.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,

    /// Also write SVG charts of the metrics against t.
    #[arg(long, global = true)]
    pub plot: bool,

    /// Replay: only evaluate the logged rankings.
    #[arg(long, global = true)]
    pub upper_bound_only: bool,

    #[arg(long, global = true)]
    pub qrels: Option<PathBuf>,

    /// Session log.
    #[arg(long, global = true)]
    pub log: Option<PathBuf>,

    /// TREC run file to evaluate.
    #[arg(long, global = true)]
    pub run: Option<PathBuf>,

    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum CliCommand {
    /// Simulated users over a model x lambda grid.
    Simulate,
    /// Restricted replay of a session log.
    Replay,
    /// Fit click-model parameters per query from a judged log.
    EstimateParams,
    /// Synthetic TREC-format judgments.
    GenQrels,
    /// Synthetic session log from judgments.
    GenLog,
    /// MAP and nDCG of a TREC run file.
    Eval,
}

impl CliCommand {
    pub fn experiment(self) -> Experiment {
        match self {
            CliCommand::Simulate => Experiment::Simulate,
            CliCommand::Replay => Experiment::Replay,
            CliCommand::EstimateParams => Experiment::EstimateParams,
            CliCommand::GenQrels => Experiment::GenQrels,
            CliCommand::GenLog => Experiment::GenLog,
            CliCommand::Eval => Experiment::Eval,
        }
    }
}

impl Cli {
    /// Manifest (if any) merged with the flags.
    pub fn settings(&self) -> Result<Settings> {
        let manifest = match &self.manifest {
            Some(path) => Manifest::load(path)?,
            None => Manifest::default(),
        };
        manifest.resolve(
            self.command.experiment(),
            Overrides {
                seed: self.seed,
                workers: self.workers,
                out_dir: self.out_dir.clone(),
                preset: self.preset,
                plot: self.plot,
                upper_bound_only: self.upper_bound_only,
                qrels: self.qrels.clone(),
                log: self.log.clone(),
                run: self.run.clone(),
            },
        )
    }
}
