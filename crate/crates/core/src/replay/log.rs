use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::click_model::ClickModelSpec;
use crate::simulator::{simulate_clicks, Qrels};
use crate::{DocId, Error, Result};

/// Longest ranking a logged session may show.
pub const MAX_SESSION_LEN: usize = 10;

/// One logged impression: the ranking shown for a query and which positions
/// were clicked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionRecord {
    pub session_id: String,
    pub query_id: String,
    pub docs: Vec<DocId>,
    pub clicks: Vec<bool>,
}

impl SessionRecord {
    pub fn new(
        session_id: impl Into<String>,
        query_id: impl Into<String>,
        docs: Vec<DocId>,
        clicks: Vec<bool>,
    ) -> Result<Self> {
        let record = SessionRecord {
            session_id: session_id.into(),
            query_id: query_id.into(),
            docs,
            clicks,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if self.docs.len() != self.clicks.len() {
            return Err(Error::Domain(format!(
                "session {}: {} documents but {} click flags",
                self.session_id,
                self.docs.len(),
                self.clicks.len()
            )));
        }
        if self.docs.len() > MAX_SESSION_LEN {
            return Err(Error::Domain(format!(
                "session {}: {} documents, at most {MAX_SESSION_LEN} allowed",
                self.session_id,
                self.docs.len()
            )));
        }
        let mut seen = HashSet::with_capacity(self.docs.len());
        if let Some(dup) = self.docs.iter().find(|d| !seen.insert(*d)) {
            return Err(Error::Domain(format!(
                "session {}: document `{dup}` shown twice",
                self.session_id
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// Reads the tab-separated session log.
///
/// Each line is `session_id  query_id  doc_1 .. doc_n  click_1 .. click_n`
/// with `n <= 10` and click flags `0`/`1`. File order is time order.
pub fn parse_session_log<R: BufRead>(input: R) -> Result<Vec<SessionRecord>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = n + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 {
            return Err(Error::parse(line_no, "need at least session and query ids"));
        }
        let rest = &fields[2..];
        if !rest.len().is_multiple_of(2) {
            return Err(Error::parse(
                line_no,
                format!(
                    "ragged row: {} fields after the ids, expected docs and flags in pairs",
                    rest.len()
                ),
            ));
        }
        let (docs, flags) = rest.split_at(rest.len() / 2);
        let clicks = flags
            .iter()
            .map(|f| match *f {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::parse(
                    line_no,
                    format!("click flag `{other}` is not 0 or 1"),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(empty) = docs.iter().position(|d| d.is_empty()) {
            return Err(Error::parse(
                line_no,
                format!("empty document id at position {}", empty + 1),
            ));
        }
        let record = SessionRecord::new(
            fields[0],
            fields[1],
            docs.iter().map(|&d| DocId::from(d)).collect(),
            clicks,
        )
        .map_err(|e| Error::parse(line_no, e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_session_log<'a, W, I>(mut out: W, sessions: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a SessionRecord>,
{
    for s in sessions {
        write!(out, "{}\t{}", s.session_id, s.query_id)?;
        for d in &s.docs {
            write!(out, "\t{d}")?;
        }
        for &c in &s.clicks {
            write!(out, "\t{}", u8::from(c))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// How a synthetic log chooses what to show.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoggerPolicy {
    /// A uniformly random `k` of the query's documents, in random order.
    RandomK,
    /// Always the same ranking: grade descending, then id.
    StaticByRelevance,
}

#[derive(Clone, Debug)]
pub struct LogGenConfig {
    pub sessions: usize,
    pub page_size: usize,
    pub logger: LoggerPolicy,
    pub user_model: ClickModelSpec,
    pub seed: u64,
}

/// Synthetic session log over the topics of `qrels`. Sessions cycle
/// through the topics in id order; clicks follow `user_model` driven by the
/// judged relevance.
pub fn generate_log(qrels: &Qrels, config: &LogGenConfig) -> Result<Vec<SessionRecord>> {
    if config.page_size == 0 || config.page_size > MAX_SESSION_LEN {
        return Err(Error::Config(format!(
            "page size must be in 1..={MAX_SESSION_LEN}, got {}",
            config.page_size
        )));
    }
    config.user_model.check_covers(config.page_size)?;
    let topics: Vec<_> = qrels.topics().filter(|(_, j)| !j.is_empty()).collect();
    if topics.is_empty() {
        return Err(Error::Config(
            "no judged topics to generate sessions for".into(),
        ));
    }
    let statics: Vec<Vec<DocId>> = topics
        .iter()
        .map(|(_, j)| {
            let mut docs: Vec<(&DocId, _)> = j.iter().collect();
            docs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            docs.into_iter()
                .take(config.page_size)
                .map(|(d, _)| d.clone())
                .collect()
        })
        .collect();
    let mut pools: Vec<Vec<DocId>> = topics
        .iter()
        .map(|(_, j)| j.docs().cloned().collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let width = config.sessions.saturating_sub(1).to_string().len();
    let mut out = Vec::with_capacity(config.sessions);
    for s in 0..config.sessions {
        let k = s % topics.len();
        let (query, judgments) = topics[k];
        let docs = match config.logger {
            LoggerPolicy::RandomK => {
                let take = config.page_size.min(pools[k].len());
                pools[k].partial_shuffle(&mut rng, take).0.to_vec()
            }
            LoggerPolicy::StaticByRelevance => statics[k].clone(),
        };
        let relevances: Vec<f64> = docs
            .iter()
            .map(|d| judgments.relevance(d.as_str()))
            .collect();
        let clicks = simulate_clicks(&relevances, &config.user_model, &mut rng)?;
        out.push(SessionRecord {
            session_id: format!("s{s:0width$}"),
            query_id: query.to_owned(),
            docs,
            clicks,
        });
    }
    Ok(out)
}
