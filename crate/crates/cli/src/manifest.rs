//! Experiment manifests.
//!
//! A manifest is a flat TOML table. Every key is optional; which keys an
//! experiment accepts is fixed, and a key that does not apply is an error
//! rather than silently ignored. Relative paths are resolved against the
//! manifest's directory. Command-line flags override manifest values.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use clap::ValueEnum;
use serde::Deserialize;

use ierank::click_model::{ClickModelSpec, ClickModelVariant};
use ierank::replay::{Arrival, LoggerPolicy, QueryFilter, MAX_SESSION_LEN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    Replay,
    EstimateParams,
    GenQrels,
    GenLog,
    Eval,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Replay => "replay",
            Experiment::EstimateParams => "estimate-params",
            Experiment::GenQrels => "gen-qrels",
            Experiment::GenLog => "gen-log",
            Experiment::Eval => "eval",
        }
    }

    /// Manifest keys this experiment reads, besides `experiment`.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Experiment::Simulate => &[
                "seed",
                "out_dir",
                "workers",
                "preset",
                "plot",
                "qrels",
                "topics",
                "docs",
                "relevant",
                "grade2_fraction",
                "horizon",
                "repeats",
                "models",
                "lambdas",
                "user_model",
                "page_size",
                "per_repeat",
            ],
            Experiment::Replay => &[
                "seed",
                "out_dir",
                "workers",
                "qrels",
                "log",
                "models",
                "lambdas",
                "training",
                "arrivals",
                "click_model",
                "min_sessions",
                "min_judged",
                "page_size",
                "upper_bound_only",
            ],
            Experiment::EstimateParams => &[
                "seed",
                "out_dir",
                "workers",
                "qrels",
                "log",
                "models",
                "page_size",
                "min_sessions",
                "min_judged",
                "em",
            ],
            Experiment::GenQrels => &[
                "seed",
                "out_dir",
                "workers",
                "preset",
                "topics",
                "docs",
                "relevant",
                "grade2_fraction",
            ],
            Experiment::GenLog => &[
                "seed",
                "out_dir",
                "workers",
                "qrels",
                "sessions",
                "logger",
                "user_model",
                "page_size",
            ],
            Experiment::Eval => &["seed", "out_dir", "workers", "qrels", "run", "cutoff"],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 10 topics of 200 documents, 20 relevant; T=500, 20 repeats.
    Desk,
    /// 50 topics of 1408 documents, 42 relevant; T=500, 100 repeats.
    #[serde(alias = "paper")]
    #[value(alias = "paper")]
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scale {
    pub topics: usize,
    pub docs: usize,
    pub relevant: usize,
    pub grade2_fraction: f64,
    pub horizon: usize,
    pub repeats: usize,
}

impl Preset {
    pub fn scale(self) -> Scale {
        match self {
            Preset::Desk => Scale {
                topics: 10,
                docs: 200,
                relevant: 20,
                grade2_fraction: 0.5,
                horizon: 500,
                repeats: 20,
            },
            Preset::Full => Scale {
                topics: 50,
                docs: 1408,
                relevant: 42,
                grade2_fraction: 0.5,
                horizon: 500,
                repeats: 100,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ArrivalKey {
    Dynamic,
    Prior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum LoggerKey {
    RandomK,
    Static,
}

/// The raw manifest, as written.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub preset: Option<Preset>,
    pub plot: Option<bool>,
    pub qrels: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub run: Option<PathBuf>,
    pub topics: Option<usize>,
    pub docs: Option<usize>,
    pub relevant: Option<usize>,
    pub grade2_fraction: Option<f64>,
    pub horizon: Option<usize>,
    pub repeats: Option<usize>,
    pub models: Option<Vec<String>>,
    pub lambdas: Option<Vec<f64>>,
    pub user_model: Option<String>,
    pub page_size: Option<usize>,
    pub per_repeat: Option<bool>,
    pub training: Option<Vec<f64>>,
    arrivals: Option<Vec<ArrivalKey>>,
    pub click_model: Option<String>,
    pub min_sessions: Option<usize>,
    pub min_judged: Option<usize>,
    pub upper_bound_only: Option<bool>,
    pub em: Option<bool>,
    pub sessions: Option<usize>,
    logger: Option<LoggerKey>,
    pub cutoff: Option<usize>,
}

/// Values given on the command line; they win over the manifest.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub plot: bool,
    pub upper_bound_only: bool,
    pub qrels: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub run: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_LAMBDAS: [f64; 8] = [0.0, 0.001, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0];

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a manifest and makes its paths absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let mut m =
            Manifest::parse(&text).with_context(|| format!("in manifest {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut m.out_dir, &mut m.qrels, &mut m.log, &mut m.run]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(u) = &mut m.user_model {
            let is_name = u == "matched" || ClickModelVariant::from_str(u).is_ok();
            if !is_name && Path::new(u.as_str()).is_relative() {
                *u = base.join(u.as_str()).to_string_lossy().into_owned();
            }
        }
        Ok(m)
    }

    fn set_keys(&self) -> Vec<&'static str> {
        let set = [
            ("seed", self.seed.is_some()),
            ("out_dir", self.out_dir.is_some()),
            ("workers", self.workers.is_some()),
            ("preset", self.preset.is_some()),
            ("plot", self.plot.is_some()),
            ("qrels", self.qrels.is_some()),
            ("log", self.log.is_some()),
            ("run", self.run.is_some()),
            ("topics", self.topics.is_some()),
            ("docs", self.docs.is_some()),
            ("relevant", self.relevant.is_some()),
            ("grade2_fraction", self.grade2_fraction.is_some()),
            ("horizon", self.horizon.is_some()),
            ("repeats", self.repeats.is_some()),
            ("models", self.models.is_some()),
            ("lambdas", self.lambdas.is_some()),
            ("user_model", self.user_model.is_some()),
            ("page_size", self.page_size.is_some()),
            ("per_repeat", self.per_repeat.is_some()),
            ("training", self.training.is_some()),
            ("arrivals", self.arrivals.is_some()),
            ("click_model", self.click_model.is_some()),
            ("min_sessions", self.min_sessions.is_some()),
            ("min_judged", self.min_judged.is_some()),
            ("upper_bound_only", self.upper_bound_only.is_some()),
            ("em", self.em.is_some()),
            ("sessions", self.sessions.is_some()),
            ("logger", self.logger.is_some()),
            ("cutoff", self.cutoff.is_some()),
        ];
        set.into_iter()
            .filter(|(_, on)| *on)
            .map(|(k, _)| k)
            .collect()
    }

    /// Applies command-line overrides and checks the manifest against the
    /// experiment being run.
    pub fn resolve(mut self, experiment: Experiment, o: Overrides) -> Result<Settings> {
        if let Some(declared) = self.experiment {
            ensure!(
                declared == experiment,
                "manifest is for `{declared}` but `{experiment}` was requested"
            );
        }
        macro_rules! take {
            ($field:ident) => {
                if o.$field.is_some() {
                    self.$field = o.$field;
                }
            };
        }
        take!(seed);
        take!(workers);
        take!(out_dir);
        take!(qrels);
        take!(log);
        take!(run);
        let allowed = experiment.keys();
        if let Some(preset) = o.preset {
            ensure!(
                allowed.contains(&"preset"),
                "--preset does not apply to `{experiment}`"
            );
            self.preset = Some(preset);
        }
        if o.plot {
            ensure!(
                allowed.contains(&"plot"),
                "--plot does not apply to `{experiment}`"
            );
            self.plot = Some(true);
        }
        if o.upper_bound_only {
            ensure!(
                allowed.contains(&"upper_bound_only"),
                "--upper-bound-only does not apply to `{experiment}`"
            );
            self.upper_bound_only = Some(true);
        }
        let stray: Vec<_> = self
            .set_keys()
            .into_iter()
            .filter(|k| !allowed.contains(k))
            .collect();
        ensure!(
            stray.is_empty(),
            "key(s) {} do not apply to `{experiment}`",
            stray.join(", ")
        );

        let common = Common {
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            out_dir: self
                .out_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("out").join(experiment.name())),
            workers: self.workers,
        };
        if let Some(w) = common.workers {
            ensure!(w >= 1, "workers must be at least 1");
        }
        let page_size = self.page_size.unwrap_or(MAX_SESSION_LEN);
        ensure!(
            (1..=MAX_SESSION_LEN).contains(&page_size),
            "page_size must be in 1..={MAX_SESSION_LEN}, got {page_size}"
        );
        let command = match experiment {
            Experiment::Simulate => Command::Simulate(self.simulate(page_size)?),
            Experiment::Replay => Command::Replay(self.replay(page_size)?),
            Experiment::EstimateParams => Command::EstimateParams(EstimateSettings {
                log: existing(self.log, "log")?,
                qrels: existing(self.qrels, "qrels")?,
                models: models(self.models.as_deref())?,
                page_size,
                filter: QueryFilter {
                    min_sessions: self.min_sessions.unwrap_or(1),
                    min_judged: self.min_judged.unwrap_or(1),
                },
                em: self.em.unwrap_or(true),
            }),
            Experiment::GenQrels => {
                Command::GenQrels(self.synthesis(self.preset.unwrap_or(Preset::Desk).scale())?)
            }
            Experiment::GenLog => Command::GenLog(GenLogSettings {
                qrels: existing(self.qrels, "qrels")?,
                sessions: positive(self.sessions.unwrap_or(2000), "sessions")?,
                logger: match self.logger.unwrap_or(LoggerKey::RandomK) {
                    LoggerKey::RandomK => LoggerPolicy::RandomK,
                    LoggerKey::Static => LoggerPolicy::StaticByRelevance,
                },
                user_model: click_model_spec(
                    self.user_model.as_deref().unwrap_or("dcm"),
                    page_size,
                )?,
                page_size,
            }),
            Experiment::Eval => Command::Eval(EvalSettings {
                qrels: existing(self.qrels, "qrels")?,
                run: existing(self.run, "run")?,
                cutoff: positive(self.cutoff.unwrap_or(10), "cutoff")?,
            }),
        };
        Ok(Settings { common, command })
    }

    fn synthesis(&self, scale: Scale) -> Result<Synthesis> {
        let s = Synthesis {
            topics: positive(self.topics.unwrap_or(scale.topics), "topics")?,
            docs: positive(self.docs.unwrap_or(scale.docs), "docs")?,
            relevant: self.relevant.unwrap_or(scale.relevant),
            grade2_fraction: self.grade2_fraction.unwrap_or(scale.grade2_fraction),
        };
        ensure!(
            s.relevant <= s.docs,
            "relevant ({}) exceeds docs ({})",
            s.relevant,
            s.docs
        );
        ensure!(
            (0.0..=1.0).contains(&s.grade2_fraction),
            "grade2_fraction must lie in [0, 1]"
        );
        Ok(s)
    }

    fn simulate(&self, page_size: usize) -> Result<SimulateSettings> {
        let scale = self.preset.unwrap_or(Preset::Desk).scale();
        let qrels = match &self.qrels {
            Some(path) => {
                ensure!(
                    self.topics.is_none() && self.docs.is_none() && self.relevant.is_none(),
                    "give either a qrels file or synthesis sizes, not both"
                );
                QrelsSource::File(existing(Some(path.clone()), "qrels")?)
            }
            None => QrelsSource::Synthetic(self.synthesis(scale)?),
        };
        let user_model = match self.user_model.as_deref().unwrap_or("matched") {
            "matched" => None,
            other => Some(click_model_spec(other, page_size)?),
        };
        Ok(SimulateSettings {
            qrels,
            horizon: positive(self.horizon.unwrap_or(scale.horizon), "horizon")?,
            repeats: positive(self.repeats.unwrap_or(scale.repeats), "repeats")?,
            models: models(self.models.as_deref())?,
            lambdas: lambdas(
                self.lambdas
                    .clone()
                    .unwrap_or_else(|| DEFAULT_LAMBDAS.to_vec()),
            )?,
            user_model,
            page_size,
            per_repeat: self.per_repeat.unwrap_or(false),
            plot: self.plot.unwrap_or(false),
        })
    }

    fn replay(&self, page_size: usize) -> Result<ReplaySettings> {
        let training = self.training.clone().unwrap_or_else(|| vec![0.0, 0.5]);
        ensure!(!training.is_empty(), "training grid is empty");
        for &f in &training {
            ensure!(
                (0.0..1.0).contains(&f),
                "training fraction {f} outside [0, 1)"
            );
        }
        let arrivals = match &self.arrivals {
            None => vec![Arrival::Dynamic, Arrival::Prior],
            Some(a) => {
                ensure!(!a.is_empty(), "arrivals grid is empty");
                a.iter()
                    .map(|k| match k {
                        ArrivalKey::Dynamic => Arrival::Dynamic,
                        ArrivalKey::Prior => Arrival::Prior,
                    })
                    .collect()
            }
        };
        let click_model = match self.click_model.as_deref().unwrap_or("estimated") {
            "estimated" => ReplayModel::Estimated,
            "default" => ReplayModel::Default,
            other => bail!("click_model must be `estimated` or `default`, got `{other}`"),
        };
        let defaults = QueryFilter::default();
        Ok(ReplaySettings {
            log: existing(self.log.clone(), "log")?,
            qrels: existing(self.qrels.clone(), "qrels")?,
            models: models(self.models.as_deref())?,
            lambdas: lambdas(self.lambdas.clone().unwrap_or_else(|| vec![0.0, 0.1]))?,
            training,
            arrivals,
            click_model,
            filter: QueryFilter {
                min_sessions: self.min_sessions.unwrap_or(defaults.min_sessions),
                min_judged: self.min_judged.unwrap_or(defaults.min_judged),
            },
            page_size,
            upper_bound_only: self.upper_bound_only.unwrap_or(false),
        })
    }
}

fn existing(path: Option<PathBuf>, key: &str) -> Result<PathBuf> {
    let Some(path) = path else {
        bail!("`{key}` is required (manifest key or --{key})");
    };
    ensure!(
        path.is_file(),
        "{key} file {} does not exist",
        path.display()
    );
    Ok(path)
}

fn positive(v: usize, key: &str) -> Result<usize> {
    ensure!(v >= 1, "{key} must be at least 1");
    Ok(v)
}

fn models(names: Option<&[String]>) -> Result<Vec<ClickModelVariant>> {
    let Some(names) = names else {
        return Ok(ClickModelVariant::ALL.to_vec());
    };
    ensure!(!names.is_empty(), "models grid is empty");
    let mut out = Vec::with_capacity(names.len());
    for n in names {
        let v = ClickModelVariant::from_str(n)?;
        ensure!(!out.contains(&v), "model `{n}` listed twice");
        out.push(v);
    }
    Ok(out)
}

fn lambdas(values: Vec<f64>) -> Result<Vec<f64>> {
    ensure!(!values.is_empty(), "lambdas grid is empty");
    for &l in &values {
        ensure!(
            l >= 0.0 && l.is_finite(),
            "lambda must be finite and >= 0, got {l}"
        );
    }
    Ok(values)
}

/// A variant name (default parameters) or the path of a click-model file.
fn click_model_spec(value: &str, page_size: usize) -> Result<ClickModelSpec> {
    if let Ok(v) = ClickModelVariant::from_str(value) {
        return Ok(ClickModelSpec::default_for(v, page_size));
    }
    let text =
        fs::read_to_string(value).with_context(|| format!("reading click model file `{value}`"))?;
    let spec =
        ClickModelSpec::parse(&text).with_context(|| format!("in click model file `{value}`"))?;
    spec.check_covers(page_size)?;
    Ok(spec)
}

#[derive(Clone, Debug)]
pub struct Settings {
    pub common: Common,
    pub command: Command,
}

#[derive(Clone, Debug)]
pub struct Common {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub workers: Option<usize>,
}

#[derive(Clone, Debug)]
pub enum Command {
    Simulate(SimulateSettings),
    Replay(ReplaySettings),
    EstimateParams(EstimateSettings),
    GenQrels(Synthesis),
    GenLog(GenLogSettings),
    Eval(EvalSettings),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Synthesis {
    pub topics: usize,
    pub docs: usize,
    pub relevant: usize,
    pub grade2_fraction: f64,
}

#[derive(Clone, Debug)]
pub enum QrelsSource {
    File(PathBuf),
    Synthetic(Synthesis),
}

#[derive(Clone, Debug)]
pub struct SimulateSettings {
    pub qrels: QrelsSource,
    pub horizon: usize,
    pub repeats: usize,
    pub models: Vec<ClickModelVariant>,
    pub lambdas: Vec<f64>,
    /// `None`: users follow the policy's own model.
    pub user_model: Option<ClickModelSpec>,
    pub page_size: usize,
    pub per_repeat: bool,
    pub plot: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReplayModel {
    /// Fitted per query from the judged sessions.
    Estimated,
    /// The variant's default parameters.
    Default,
}

#[derive(Clone, Debug)]
pub struct ReplaySettings {
    pub log: PathBuf,
    pub qrels: PathBuf,
    pub models: Vec<ClickModelVariant>,
    pub lambdas: Vec<f64>,
    pub training: Vec<f64>,
    pub arrivals: Vec<Arrival>,
    pub click_model: ReplayModel,
    pub filter: QueryFilter,
    pub page_size: usize,
    pub upper_bound_only: bool,
}

#[derive(Clone, Debug)]
pub struct EstimateSettings {
    pub log: PathBuf,
    pub qrels: PathBuf,
    pub models: Vec<ClickModelVariant>,
    pub page_size: usize,
    pub filter: QueryFilter,
    pub em: bool,
}

#[derive(Clone, Debug)]
pub struct GenLogSettings {
    pub qrels: PathBuf,
    pub sessions: usize,
    pub logger: LoggerPolicy,
    pub user_model: ClickModelSpec,
    pub page_size: usize,
}

#[derive(Clone, Debug)]
pub struct EvalSettings {
    pub qrels: PathBuf,
    pub run: PathBuf,
    pub cutoff: usize,
}
