//! Synthetic judgments and session logs.

use anyhow::Result;

use ierank::replay::{generate_log, write_session_log, LogGenConfig};
use ierank::simulator::gen_topics;

use super::{load_qrels, num, Report};
use crate::manifest::{GenLogSettings, Synthesis};
use crate::output::{Artifact, Table};

pub const QRELS_FILE: &str = "qrels.txt";
pub const LOG_FILE: &str = "sessions.tsv";
pub const CLICK_RATES_FILE: &str = "click_rates.csv";
pub const CLICK_RATES_SCHEMA: &str = "gen-log-click-rates";

/// TREC-format judgments for synthetic topics `t01`, `t02`, ...
pub fn qrels(s: &Synthesis, seed: u64) -> Result<Report> {
    let q = gen_topics(s.topics, s.docs, s.relevant, s.grade2_fraction, seed)?;
    let mut bytes = Vec::new();
    q.write(&mut bytes)?;
    Ok(Report {
        artifacts: vec![Artifact {
            name: QRELS_FILE.to_owned(),
            bytes,
        }],
        summary: format!(
            "{} topics, {} documents each, {} relevant\n",
            s.topics, s.docs, s.relevant
        ),
    })
}

/// A session log over the judged topics, plus its per-rank click rates.
pub fn log(s: &GenLogSettings, seed: u64) -> Result<Report> {
    let qrels = load_qrels(&s.qrels)?;
    let sessions = generate_log(
        &qrels,
        &LogGenConfig {
            sessions: s.sessions,
            page_size: s.page_size,
            logger: s.logger,
            user_model: s.user_model.clone(),
            seed,
        },
    )?;
    let mut bytes = Vec::new();
    write_session_log(&mut bytes, &sessions)?;

    let mut shown = vec![0u64; s.page_size];
    let mut clicked = vec![0u64; s.page_size];
    for r in &sessions {
        for (i, &c) in r.clicks.iter().enumerate() {
            shown[i] += 1;
            clicked[i] += u64::from(c);
        }
    }
    let mut rates = Table::new(
        CLICK_RATES_SCHEMA,
        &["rank", "impressions", "clicks", "rate"],
    );
    for i in 0..s.page_size {
        let rate = if shown[i] > 0 {
            clicked[i] as f64 / shown[i] as f64
        } else {
            0.0
        };
        rates.row([
            (i + 1).to_string(),
            shown[i].to_string(),
            clicked[i].to_string(),
            num(rate),
        ]);
    }
    Ok(Report {
        artifacts: vec![
            Artifact {
                name: LOG_FILE.to_owned(),
                bytes,
            },
            rates.into_artifact(CLICK_RATES_FILE),
        ],
        summary: format!("{} sessions over {} topics\n", sessions.len(), qrels.len()),
    })
}
