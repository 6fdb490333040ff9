//! Per-query click-model parameters from a judged session log.
//!
//! Writes `fit_report.tsv`: one row per (query, model, rank) with the
//! count-based parameters, the fallback used if any, and (unless disabled)
//! the per-rank EM mixture fit of the same sessions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Result};
use log::warn;
use rayon::prelude::*;

use ierank::em::{
    em_fit_ranks, estimate_params_from_judged_log, histories_from_sessions, write_fit_report,
    EmEstimate, EmOptions, FitReportEntry, ParamFit,
};
use ierank::replay::SessionRecord;

use super::{load_log, load_qrels, Report};
use crate::manifest::EstimateSettings;
use crate::output::Artifact;

pub const REPORT_FILE: &str = "fit_report.tsv";

struct QueryFit {
    query: String,
    fits: Vec<ParamFit>,
    em: Option<EmEstimate>,
}

pub fn run(s: &EstimateSettings) -> Result<Report> {
    let log = load_log(&s.log)?;
    let qrels = load_qrels(&s.qrels)?;
    let mut by_query: BTreeMap<&str, Vec<&SessionRecord>> = BTreeMap::new();
    for r in &log {
        by_query.entry(r.query_id.as_str()).or_default().push(r);
    }
    let selected: Vec<(&str, Vec<&SessionRecord>)> = by_query
        .into_iter()
        .filter(|(q, sessions)| {
            let judged = qrels.topic(q).map_or(0, |j| j.len());
            judged > 0 && judged >= s.filter.min_judged && sessions.len() >= s.filter.min_sessions
        })
        .collect();
    if selected.is_empty() {
        bail!("no query of the log has enough sessions and judgments to fit");
    }

    let fitted: Vec<QueryFit> = selected
        .par_iter()
        .map(|(query, sessions)| {
            let judgments = qrels.topic(query).expect("filtered on judgments");
            let fits = s
                .models
                .iter()
                .map(|&m| {
                    estimate_params_from_judged_log(
                        sessions.iter().copied(),
                        judgments,
                        m,
                        s.page_size,
                    )
                })
                .collect::<ierank::Result<Vec<_>>>()?;
            let em = if s.em {
                let histories = histories_from_sessions(sessions.iter().copied(), s.page_size);
                match em_fit_ranks(&histories, &EmOptions::default()) {
                    Ok(est) => Some(est),
                    Err(e) => {
                        warn!("query {query}: EM fit skipped: {e}");
                        None
                    }
                }
            } else {
                None
            };
            Ok(QueryFit {
                query: (*query).to_owned(),
                fits,
                em,
            })
        })
        .collect::<Result<_>>()?;

    let mut report = Vec::new();
    write_fit_report(
        &mut report,
        fitted.iter().flat_map(|q| {
            q.fits.iter().map(|fit| FitReportEntry {
                query: &q.query,
                fit,
                em: q.em.as_ref(),
            })
        }),
    )?;

    let mut summary = format!("fitted {} queries\n", fitted.len());
    for (i, m) in s.models.iter().enumerate() {
        let with_fallback = fitted.iter().filter(|q| q.fits[i].any_fallback()).count();
        let _ = writeln!(
            summary,
            "  {m}: {with_fallback} queries with at least one fallback rank"
        );
    }
    if s.em {
        let converged = fitted
            .iter()
            .filter(|q| q.em.as_ref().is_some_and(|e| e.converged))
            .count();
        let _ = writeln!(
            summary,
            "  EM converged for {converged} of {} queries",
            fitted.len()
        );
    }
    Ok(Report {
        artifacts: vec![Artifact {
            name: REPORT_FILE.to_owned(),
            bytes: report,
        }],
        summary,
    })
}
