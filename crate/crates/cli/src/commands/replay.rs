//! Restricted replay of a session log over a model x lambda x training x
//! arrival grid.
//!
//! Artifacts:
//!
//! - `replay_queries.csv` (`replay-queries`): one row per grid cell and query;
//! - `replay_summary.csv` (`replay-summary`): per grid cell, mean and
//!   variance across queries of the per-query means;
//! - `replay_upper_bound.csv` (`replay-upper-bound`): the logged ranking's
//!   own metrics per training regime;
//! - `replay_excluded.csv` (`replay-excluded`): queries left out and why;
//! - `replay_table.txt`: per metric and training regime, lambdas as rows and
//!   the upper bound plus every model/arrival pair as columns.
//!
//! With `upper_bound_only` the policy is not run and only the upper-bound,
//! exclusion and table files are written.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use anyhow::{bail, Context, Result};

use ierank::click_model::{ClickModelSpec, ClickModelVariant};
use ierank::estimator::FLAT_PRIOR;
use ierank::metrics::Summary;
use ierank::replay::{
    run_replay, run_upper_bound, Arrival, ClickModelSource, ReplayConfig, ReplayResult,
    SessionRecord, UpperBound,
};
use ierank::simulator::Qrels;

use super::{load_log, load_qrels, num, Report};
use crate::manifest::{ReplayModel, ReplaySettings};
use crate::output::{pm, Artifact, Table};

pub const QUERIES_SCHEMA: &str = "replay-queries";
pub const SUMMARY_SCHEMA: &str = "replay-summary";
pub const UPPER_SCHEMA: &str = "replay-upper-bound";
pub const EXCLUDED_SCHEMA: &str = "replay-excluded";

pub const QUERIES_FILE: &str = "replay_queries.csv";
pub const SUMMARY_FILE: &str = "replay_summary.csv";
pub const UPPER_FILE: &str = "replay_upper_bound.csv";
pub const EXCLUDED_FILE: &str = "replay_excluded.csv";
pub const TABLE_FILE: &str = "replay_table.txt";

const MAX_LISTED: usize = 20;

struct Cell {
    model: ClickModelVariant,
    lambda: f64,
    training: f64,
    arrival: Arrival,
    result: ReplayResult,
}

pub fn run(s: &ReplaySettings) -> Result<Report> {
    let log = load_log(&s.log)?;
    let qrels = load_qrels(&s.qrels)?;
    check_id_spaces(&log, &qrels)?;

    let upper: Vec<(f64, UpperBound)> = s
        .training
        .iter()
        .map(|&f| {
            Ok((
                f,
                run_upper_bound(
                    &log,
                    &qrels,
                    &config(s, ClickModelVariant::MixedClick, 0.0, f, Arrival::Dynamic),
                )?,
            ))
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    if !s.upper_bound_only {
        for &training in &s.training {
            for &model in &s.models {
                for &arrival in &s.arrivals {
                    for &lambda in &s.lambdas {
                        let result =
                            run_replay(&log, &qrels, &config(s, model, lambda, training, arrival))
                                .with_context(|| {
                                    format!(
                                    "replaying {model}, lambda {lambda}, {}% training, {} arrival",
                                    training * 100.0,
                                    arrival.tag()
                                )
                                })?;
                        cells.push(Cell {
                            model,
                            lambda,
                            training,
                            arrival,
                            result,
                        });
                    }
                }
            }
        }
    }

    let mut artifacts = Vec::new();
    if !s.upper_bound_only {
        artifacts.push(queries_table(&cells));
        artifacts.push(summary_table(&cells));
    }
    artifacts.push(upper_table(&upper));
    artifacts.push(excluded_table(&upper[0].1.excluded));
    let table = table_text(s, &cells, &upper);
    artifacts.push(Artifact::text(TABLE_FILE, table.clone()));
    Ok(Report {
        artifacts,
        summary: table,
    })
}

fn config(
    s: &ReplaySettings,
    model: ClickModelVariant,
    lambda: f64,
    training: f64,
    arrival: Arrival,
) -> ReplayConfig {
    ReplayConfig {
        training_fraction: training,
        arrival,
        lambda,
        page_size: s.page_size,
        prior: FLAT_PRIOR,
        click_model: match s.click_model {
            ReplayModel::Estimated => ClickModelSource::Estimated(model),
            ReplayModel::Default => {
                ClickModelSource::Fixed(ClickModelSpec::default_for(model, s.page_size))
            }
        },
        filter: s.filter,
    }
}

/// Fails when the log and the judgments cannot refer to the same queries
/// and documents: no query in common, or a common query none of whose
/// judged documents was ever shown.
fn check_id_spaces(log: &[SessionRecord], qrels: &Qrels) -> Result<()> {
    let mut shown: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for s in log {
        shown
            .entry(s.query_id.as_str())
            .or_default()
            .extend(s.docs.iter().map(|d| d.as_str()));
    }
    let listed = |ids: Vec<&str>| {
        let n = ids.len();
        let mut text = ids
            .into_iter()
            .take(MAX_LISTED)
            .collect::<Vec<_>>()
            .join(", ");
        if n > MAX_LISTED {
            let _ = write!(text, ", ... ({n} in total)");
        }
        text
    };
    let shared: Vec<&str> = shown
        .keys()
        .copied()
        .filter(|q| qrels.topic(q).is_some())
        .collect();
    if shared.is_empty() {
        bail!(
            "session log and qrels share no query ids; log queries: {}; qrels topics: {}",
            listed(shown.keys().copied().collect()),
            listed(qrels.topics().map(|(t, _)| t).collect())
        );
    }
    let disjoint: Vec<&str> = shared
        .into_iter()
        .filter(|q| {
            let judged = qrels.topic(q).expect("shared");
            !shown[q].iter().any(|d| judged.is_judged(d))
        })
        .collect();
    if !disjoint.is_empty() {
        bail!(
            "no judged document of these queries appears in their sessions: {}",
            listed(disjoint)
        );
    }
    Ok(())
}

fn queries_table(cells: &[Cell]) -> Artifact {
    let mut t = Table::new(
        QUERIES_SCHEMA,
        &[
            "model",
            "lambda",
            "training",
            "arrival",
            "query",
            "sessions",
            "training_sessions",
            "training_updates",
            "evaluated",
            "skipped_empty",
            "policy_map",
            "policy_ndcg",
            "upper_map",
            "upper_ndcg",
            "fallback_ranks",
            "degenerate_weights",
        ],
    );
    for c in cells {
        for q in &c.result.queries {
            t.row([
                c.model.tag().to_owned(),
                num(c.lambda),
                num(c.training),
                c.arrival.tag().to_owned(),
                q.query.clone(),
                q.sessions.to_string(),
                q.training_sessions.to_string(),
                q.training_updates.to_string(),
                q.evals.len().to_string(),
                q.skipped_empty.to_string(),
                num(q.policy_map()),
                num(q.policy_ndcg()),
                num(q.upper_map()),
                num(q.upper_ndcg()),
                q.fallbacks
                    .iter()
                    .filter(|f| f.is_some())
                    .count()
                    .to_string(),
                q.degenerate_weights.to_string(),
            ]);
        }
    }
    t.into_artifact(QUERIES_FILE)
}

fn summary_table(cells: &[Cell]) -> Artifact {
    let mut t = Table::new(
        SUMMARY_SCHEMA,
        &[
            "model",
            "lambda",
            "training",
            "arrival",
            "queries",
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
            num(c.training),
            c.arrival.tag().to_owned(),
            r.queries.len().to_string(),
            num(r.policy_map.mean),
            num(r.policy_map.variance),
            num(r.policy_ndcg.mean),
            num(r.policy_ndcg.variance),
        ]);
    }
    t.into_artifact(SUMMARY_FILE)
}

fn upper_table(upper: &[(f64, UpperBound)]) -> Artifact {
    let mut t = Table::new(
        UPPER_SCHEMA,
        &[
            "training",
            "queries",
            "map_mean",
            "map_variance",
            "ndcg_mean",
            "ndcg_variance",
        ],
    );
    for (f, u) in upper {
        t.row([
            num(*f),
            u.queries.len().to_string(),
            num(u.map.mean),
            num(u.map.variance),
            num(u.ndcg.mean),
            num(u.ndcg.variance),
        ]);
    }
    t.into_artifact(UPPER_FILE)
}

fn excluded_table(excluded: &[(String, String)]) -> Artifact {
    let mut t = Table::new(EXCLUDED_SCHEMA, &["query", "reason"]);
    for (q, why) in excluded {
        t.row([q, why]);
    }
    t.into_artifact(EXCLUDED_FILE)
}

/// Label, policy metric and upper-bound metric.
type MetricColumns = (
    String,
    fn(&ReplayResult) -> Summary,
    fn(&UpperBound) -> Summary,
);

fn table_text(s: &ReplaySettings, cells: &[Cell], upper: &[(f64, UpperBound)]) -> String {
    const W: usize = 20;
    let mut out = String::new();
    let n_queries = upper[0].1.queries.len();
    let metrics: [MetricColumns; 2] = [
        ("MAP".to_owned(), |r| r.policy_map, |u| u.map),
        (
            format!("nDCG@{}", s.page_size),
            |r| r.policy_ndcg,
            |u| u.ndcg,
        ),
    ];
    for (name, policy_metric, upper_metric) in metrics {
        for (training, ub) in upper {
            let _ = writeln!(
                out,
                "{name}, {}% training phase, mean ± variance over {n_queries} queries",
                training * 100.0
            );
            let _ = write!(out, "{:<8}{:<W$}", "lambda", "upper bound");
            if !s.upper_bound_only {
                for m in &s.models {
                    for a in &s.arrivals {
                        let _ = write!(out, "{:<W$}", format!("{} {}", m.tag(), a.tag()));
                    }
                }
            }
            out.push('\n');
            let lambdas: &[f64] = if s.upper_bound_only { &[] } else { &s.lambdas };
            if lambdas.is_empty() {
                let u = upper_metric(ub);
                let _ = writeln!(out, "{:<8}{:<W$}", "-", pm(u.mean, u.variance));
            }
            for (row, &lambda) in lambdas.iter().enumerate() {
                let u = upper_metric(ub);
                let ub_cell = if row == 0 {
                    pm(u.mean, u.variance)
                } else {
                    String::new()
                };
                let _ = write!(out, "{:<8}{:<W$}", num(lambda), ub_cell);
                for &m in &s.models {
                    for &a in &s.arrivals {
                        let c = cells
                            .iter()
                            .find(|c| {
                                c.model == m
                                    && c.arrival == a
                                    && c.lambda == lambda
                                    && c.training == *training
                            })
                            .expect("every grid cell was run");
                        let v = policy_metric(&c.result);
                        let _ = write!(out, "{:<W$}", pm(v.mean, v.variance));
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
    }
    if !s.upper_bound_only && s.arrivals.len() == 2 {
        let _ = writeln!(out, "prior minus dynamic, mean MAP");
        for &training in &s.training {
            for &m in &s.models {
                for &lambda in &s.lambdas {
                    let get = |a: Arrival| {
                        cells
                            .iter()
                            .find(|c| {
                                c.model == m
                                    && c.arrival == a
                                    && c.lambda == lambda
                                    && c.training == training
                            })
                            .map(|c| c.result.policy_map.mean)
                    };
                    if let (Some(p), Some(d)) = (get(Arrival::Prior), get(Arrival::Dynamic)) {
                        let _ = writeln!(
                            out,
                            "  {}% training, {}, lambda {}: {:+.4}",
                            training * 100.0,
                            m.tag(),
                            num(lambda),
                            p - d
                        );
                    }
                }
            }
        }
    }
    out
}
