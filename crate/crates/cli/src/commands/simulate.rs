//! The simulated-user experiment over a model x lambda grid.
//!
//! Artifacts:
//!
//! - `simulate_steps.csv` (`simulate-steps`): per `(model, lambda, topic, t)`
//!   the AP, nDCG@k and cumulative clicks averaged over repeats;
//! - `simulate_runs.csv` (`simulate-runs`, with `per_repeat`): the same per
//!   repeat, unaveraged;
//! - `simulate_summary.csv` (`simulate-summary`): per `(model, lambda)` the
//!   mean and variance of the final-step values over all runs;
//! - `simulate_grid.txt`: the summary as a model x lambda grid;
//! - `plot_{map,ndcg}_<model>.svg` (with `plot`): mean metric against t,
//!   one line per lambda.

use std::fmt::Write as _;

use anyhow::{Context, Result};

use ierank::click_model::{ClickModelSpec, ClickModelVariant};
use ierank::simulator::{gen_topics, run_simulation, SimulationConfig, SimulationResult};
use ierank::PolicyConfig;

use super::{load_qrels, num, Report};
use crate::manifest::{QrelsSource, SimulateSettings};
use crate::output::{Artifact, Table};
use crate::plot::metric_chart;

pub const STEPS_SCHEMA: &str = "simulate-steps";
pub const RUNS_SCHEMA: &str = "simulate-runs";
pub const SUMMARY_SCHEMA: &str = "simulate-summary";

pub const STEPS_FILE: &str = "simulate_steps.csv";
pub const RUNS_FILE: &str = "simulate_runs.csv";
pub const SUMMARY_FILE: &str = "simulate_summary.csv";
pub const GRID_FILE: &str = "simulate_grid.txt";

struct GridCell {
    model: ClickModelVariant,
    lambda: f64,
    result: SimulationResult,
}

pub fn run(s: &SimulateSettings, seed: u64) -> Result<Report> {
    let qrels = match &s.qrels {
        QrelsSource::File(path) => load_qrels(path)?,
        QrelsSource::Synthetic(syn) => gen_topics(
            syn.topics,
            syn.docs,
            syn.relevant,
            syn.grade2_fraction,
            seed,
        )?,
    };
    let mut cells = Vec::with_capacity(s.models.len() * s.lambdas.len());
    for &model in &s.models {
        for &lambda in &s.lambdas {
            let policy = PolicyConfig::new(
                ClickModelSpec::default_for(model, s.page_size),
                s.page_size,
                lambda,
            );
            let mut config =
                SimulationConfig::matched(qrels.clone(), policy, s.horizon, s.repeats, seed);
            if let Some(user) = &s.user_model {
                config.user_model = user.clone();
            }
            let result = run_simulation(&config)
                .with_context(|| format!("simulating {model} at lambda {lambda}"))?;
            log::info!(
                "{model} lambda={lambda}: final MAP {:.4}",
                result.final_map.mean
            );
            cells.push(GridCell {
                model,
                lambda,
                result,
            });
        }
    }

    let mut artifacts = vec![steps_table(&cells, s.repeats), summary_table(&cells)];
    if s.per_repeat {
        artifacts.push(runs_table(&cells));
    }
    let grid = grid_text(&cells, s);
    artifacts.push(Artifact::text(GRID_FILE, grid.clone()));
    if s.plot {
        artifacts.extend(plots(&cells, &s.models)?);
    }
    Ok(Report {
        artifacts,
        summary: grid,
    })
}

fn steps_table(cells: &[GridCell], repeats: usize) -> Artifact {
    let mut t = Table::new(
        STEPS_SCHEMA,
        &["model", "lambda", "topic", "t", "map", "ndcg", "clicks"],
    );
    for c in cells {
        for runs in c.result.cells.chunks(repeats) {
            let n = runs.len() as f64;
            for step in 0..runs[0].map.len() {
                let mean = |f: &dyn Fn(usize) -> f64| (0..runs.len()).map(f).sum::<f64>() / n;
                t.row([
                    c.model.tag().to_owned(),
                    num(c.lambda),
                    runs[0].topic.clone(),
                    (step + 1).to_string(),
                    num(mean(&|r| runs[r].map[step])),
                    num(mean(&|r| runs[r].ndcg[step])),
                    num(mean(&|r| runs[r].cumulative_clicks[step] as f64)),
                ]);
            }
        }
    }
    t.into_artifact(STEPS_FILE)
}

fn runs_table(cells: &[GridCell]) -> Artifact {
    let mut t = Table::new(
        RUNS_SCHEMA,
        &[
            "model",
            "lambda",
            "topic",
            "repeat",
            "t",
            "map",
            "ndcg",
            "cumulative_clicks",
        ],
    );
    for c in cells {
        for run in &c.result.cells {
            for step in 0..run.map.len() {
                t.row([
                    c.model.tag().to_owned(),
                    num(c.lambda),
                    run.topic.clone(),
                    run.repeat.to_string(),
                    (step + 1).to_string(),
                    num(run.map[step]),
                    num(run.ndcg[step]),
                    run.cumulative_clicks[step].to_string(),
                ]);
            }
        }
    }
    t.into_artifact(RUNS_FILE)
}

fn summary_table(cells: &[GridCell]) -> Artifact {
    let mut t = Table::new(
        SUMMARY_SCHEMA,
        &[
            "model",
            "lambda",
            "runs",
            "map_mean",
            "map_variance",
            "ndcg_mean",
            "ndcg_variance",
        ],
    );
    for c in cells {
        let r = &c.result;
        t.row([
            c.model.tag().to_owned(),
            num(c.lambda),
            r.cells.len().to_string(),
            num(r.final_map.mean),
            num(r.final_map.variance),
            num(r.final_ndcg.mean),
            num(r.final_ndcg.variance),
        ]);
    }
    t.into_artifact(SUMMARY_FILE)
}

type MetricRow = (String, fn(&SimulationResult) -> f64);

/// Model x lambda grid of final means; the best value in each row is
/// starred.
fn grid_text(cells: &[GridCell], s: &SimulateSettings) -> String {
    let runs = cells.first().map_or(0, |c| c.result.cells.len());
    let mut out = String::new();
    let metrics: [MetricRow; 2] = [
        ("MAP".to_owned(), |r| r.final_map.mean),
        (format!("nDCG@{}", s.page_size), |r| r.final_ndcg.mean),
    ];
    for (name, value) in metrics {
        let _ = writeln!(
            out,
            "{name}, final step T={}, mean over {runs} runs",
            s.horizon
        );
        let _ = write!(out, "{:<24}", "model \\ lambda");
        for l in &s.lambdas {
            let _ = write!(out, "{:>10}", num(*l));
        }
        out.push('\n');
        for &model in &s.models {
            let row: Vec<f64> = cells
                .iter()
                .filter(|c| c.model == model)
                .map(|c| value(&c.result))
                .collect();
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let _ = write!(out, "{:<24}", model.to_string());
            for v in row {
                let mark = if v == best { "*" } else { " " };
                let _ = write!(out, "{:>9.4}{mark}", v);
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

fn plots(cells: &[GridCell], models: &[ClickModelVariant]) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    for &model in models {
        let series = |f: fn(&SimulationResult) -> &Vec<f64>| -> Vec<(String, Vec<f64>)> {
            cells
                .iter()
                .filter(|c| c.model == model)
                .map(|c| (format!("λ={}", num(c.lambda)), f(&c.result).clone()))
                .collect()
        };
        let map = metric_chart(&format!("MAP, {model}"), "MAP", &series(|r| &r.mean_map))?;
        let ndcg = metric_chart(
            &format!("nDCG@10, {model}"),
            "nDCG@10",
            &series(|r| &r.mean_ndcg),
        )?;
        out.push(Artifact::text(format!("plot_map_{}.svg", model.tag()), map));
        out.push(Artifact::text(
            format!("plot_ndcg_{}.svg", model.tag()),
            ndcg,
        ));
    }
    Ok(out)
}
