//! Scores a TREC run file against judgments.
//!
//! Run lines are `topic Q0 docid rank score tag`. Within a topic documents
//! are ordered by score, descending, ties broken by document id descending
//! (the `trec_eval` convention); the rank column is ignored.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use log::warn;

use ierank::metrics::{aggregate, JudgedRanking};
use ierank::DocId;

use super::{load_qrels, num, Report};
use crate::manifest::EvalSettings;
use crate::output::{pm, Table};

pub const EVAL_SCHEMA: &str = "eval";
pub const EVAL_FILE: &str = "eval.csv";

pub type Run = BTreeMap<String, Vec<(f64, DocId)>>;

pub fn parse_run(text: &str) -> Result<Run> {
    let mut run: Run = BTreeMap::new();
    let mut seen = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let [topic, _q0, doc, _rank, score, _tag] = fields[..] else {
            bail!("line {}: expected 6 fields, got {}", n + 1, fields.len());
        };
        let score: f64 = score
            .parse()
            .with_context(|| format!("line {}: score `{score}` is not a number", n + 1))?;
        ensure!(
            seen.insert((topic.to_owned(), doc.to_owned())),
            "line {}: document {doc} retrieved twice for topic {topic}",
            n + 1
        );
        run.entry(topic.to_owned())
            .or_default()
            .push((score, DocId::from(doc)));
    }
    for docs in run.values_mut() {
        docs.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| b.1.cmp(&a.1)));
    }
    Ok(run)
}

fn load_run(path: &Path) -> Result<Run> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading run {}", path.display()))?;
    parse_run(&text).with_context(|| format!("in run {}", path.display()))
}

pub fn run(s: &EvalSettings) -> Result<Report> {
    let qrels = load_qrels(&s.qrels)?;
    let run = load_run(&s.run)?;
    let mut table = Table::new(EVAL_SCHEMA, &["topic", "retrieved", "ap", "ndcg"]);
    let (mut aps, mut ndcgs) = (Vec::new(), Vec::new());
    for (topic, docs) in &run {
        let Some(judgments) = qrels.topic(topic) else {
            warn!("topic {topic} has no judgments, skipped");
            continue;
        };
        let ranked: Vec<DocId> = docs.iter().take(s.cutoff).map(|(_, d)| d.clone()).collect();
        let j = JudgedRanking::new(&ranked, judgments, s.cutoff);
        let (ap, ndcg) = (j.average_precision(s.cutoff), j.ndcg(s.cutoff));
        table.row([topic.clone(), docs.len().to_string(), num(ap), num(ndcg)]);
        aps.push(ap);
        ndcgs.push(ndcg);
    }
    ensure!(!aps.is_empty(), "no topic of the run has judgments");
    let (map, ndcg) = (aggregate(&aps)?, aggregate(&ndcgs)?);
    table.row([
        "all".to_owned(),
        String::new(),
        num(map.mean),
        num(ndcg.mean),
    ]);
    Ok(Report {
        artifacts: vec![table.into_artifact(EVAL_FILE)],
        summary: format!(
            "{} topics\nMAP       {}\nnDCG@{:<4}{}\n",
            aps.len(),
            pm(map.mean, map.variance),
            s.cutoff,
            pm(ndcg.mean, ndcg.variance)
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_by_score_then_id_descending() {
        let run = parse_run("1 Q0 a 1 0.5 x\n1 Q0 b 2 0.9 x\n1 Q0 c 3 0.5 x\n").unwrap();
        let ids: Vec<&str> = run["1"].iter().map(|(_, d)| d.as_str()).collect();
        assert_eq!(ids, vec!["b", "c", "a"]);
    }

    #[test]
    fn rejects_duplicates_and_short_lines() {
        assert!(parse_run("1 Q0 a 1 0.5 x\n1 Q0 a 2 0.4 x\n").is_err());
        assert!(parse_run("1 Q0 a 1 0.5\n").is_err());
    }
}
