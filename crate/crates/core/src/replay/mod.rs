//! Replaying a session log through the policy.
//!
//! The policy may only re-rank the documents a logged session actually
//! showed, so every document it displays has logged feedback. Updates
//! interpret the *logged* positions and clicks, not the policy's order. The
//! logged ranking itself is the upper bound the policy is compared against.
//!
//! Each query is replayed independently, in log order. The first
//! `training_fraction` of a query's sessions only update estimates; the rest
//! are evaluated. The policy's clock advances once per session, training
//! sessions included.

mod log;

pub use log::{
    generate_log, parse_session_log, write_session_log, LogGenConfig, LoggerPolicy, SessionRecord,
    MAX_SESSION_LEN,
};

use std::collections::BTreeMap;

use crate::click_model::{ClickModelSpec, ClickModelVariant};
use crate::em::{estimate_params_from_judged_log, Fallback};
use crate::estimator::FLAT_PRIOR;
use crate::metrics::{aggregate, JudgedRanking, Summary};
use crate::policy::{Policy, PolicyConfig, RankAction};
use crate::simulator::{Grade, Qrels, TopicJudgments};
use crate::{par_map, DocId, Error, Result};

/// When documents become known to the policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arrival {
    /// A document is added the first time a session shows it.
    Dynamic,
    /// Every document of the query is known before the first session.
    Prior,
}

impl Arrival {
    pub fn tag(self) -> &'static str {
        match self {
            Arrival::Dynamic => "dynamic",
            Arrival::Prior => "prior",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClickModelSource {
    /// The same spec for every query.
    Fixed(ClickModelSpec),
    /// Fitted per query from its sessions and judgments by simple counts.
    Estimated(ClickModelVariant),
}

impl ClickModelSource {
    pub fn variant(&self) -> ClickModelVariant {
        match self {
            ClickModelSource::Fixed(s) => s.variant(),
            ClickModelSource::Estimated(v) => *v,
        }
    }
}

/// Which queries take part.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryFilter {
    pub min_sessions: usize,
    pub min_judged: usize,
}

impl Default for QueryFilter {
    /// Queries with at least 1000 sessions and 10 judged documents.
    fn default() -> Self {
        QueryFilter {
            min_sessions: 1000,
            min_judged: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayConfig {
    /// Share of each query's sessions used only for updates, in `[0, 1)`.
    pub training_fraction: f64,
    pub arrival: Arrival,
    pub lambda: f64,
    pub page_size: usize,
    pub prior: f64,
    pub click_model: ClickModelSource,
    pub filter: QueryFilter,
}

impl ReplayConfig {
    pub fn new(click_model: ClickModelSource, lambda: f64) -> Self {
        ReplayConfig {
            training_fraction: 0.0,
            arrival: Arrival::Dynamic,
            lambda,
            page_size: MAX_SESSION_LEN,
            prior: FLAT_PRIOR,
            click_model,
            filter: QueryFilter::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.training_fraction) {
            return Err(Error::Config(format!(
                "training fraction must lie in [0, 1), got {}",
                self.training_fraction
            )));
        }
        if let ClickModelSource::Fixed(spec) = &self.click_model {
            spec.check_covers(self.page_size)?;
        }
        PolicyConfig::new(
            ClickModelSpec::default_for(self.click_model.variant(), self.page_size),
            self.page_size,
            self.lambda,
        )
        .validate()
    }

    fn training_sessions(&self, n: usize) -> usize {
        (self.training_fraction * n as f64).floor() as usize
    }
}

/// Updates `policy` from one logged session without evaluating anything.
/// Returns the number of document updates applied.
pub fn train_step(policy: &mut Policy, session: &SessionRecord, arrival: Arrival) -> Result<usize> {
    admit(policy, session, arrival)?;
    policy.observe(&session.docs, &session.clicks)?;
    policy.advance();
    Ok(session.len())
}

/// Re-ranks the session's documents with the policy, then learns from the
/// logged positions and clicks. Returns the policy's ranking, or `None` for
/// an empty session, which is skipped without advancing the clock.
pub fn replay_step(
    policy: &mut Policy,
    session: &SessionRecord,
    arrival: Arrival,
) -> Result<Option<RankAction>> {
    if session.is_empty() {
        return Ok(None);
    }
    if session.len() > policy.config().page_size {
        return Err(Error::Config(format!(
            "session {} shows {} documents but the page size is {}",
            session.session_id,
            session.len(),
            policy.config().page_size
        )));
    }
    admit(policy, session, arrival)?;
    let action = policy.rank_candidates(&session.docs)?;
    policy.observe(&session.docs, &session.clicks)?;
    policy.advance();
    Ok(Some(action))
}

fn admit(policy: &mut Policy, session: &SessionRecord, arrival: Arrival) -> Result<()> {
    match arrival {
        Arrival::Dynamic => {
            for d in &session.docs {
                policy.ensure_document(d)?;
            }
            Ok(())
        }
        Arrival::Prior => match session
            .docs
            .iter()
            .find(|d| !policy.state().contains(d.as_str()))
        {
            Some(d) => Err(Error::Protocol(format!(
                "document `{d}` was not loaded in advance"
            ))),
            None => Ok(()),
        },
    }
}

/// Metrics for one evaluated session.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SessionEval {
    pub policy_map: f64,
    pub policy_ndcg: f64,
    /// The logged ranking.
    pub data_map: f64,
    pub data_ndcg: f64,
    /// The best possible re-ranking of the logged documents.
    pub best_map: f64,
    pub best_ndcg: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryReplay {
    pub query: String,
    pub sessions: usize,
    pub training_sessions: usize,
    /// Document updates applied during training.
    pub training_updates: usize,
    pub skipped_empty: usize,
    pub click_model: ClickModelSpec,
    pub fallbacks: Vec<Option<Fallback>>,
    pub evals: Vec<SessionEval>,
    pub degenerate_weights: u64,
}

impl QueryReplay {
    fn mean(&self, f: impl Fn(&SessionEval) -> f64) -> f64 {
        self.evals.iter().map(f).sum::<f64>() / self.evals.len() as f64
    }

    /// Mean policy AP over the evaluation sessions.
    pub fn policy_map(&self) -> f64 {
        self.mean(|e| e.policy_map)
    }

    pub fn policy_ndcg(&self) -> f64 {
        self.mean(|e| e.policy_ndcg)
    }

    pub fn upper_map(&self) -> f64 {
        self.mean(|e| e.data_map)
    }

    pub fn upper_ndcg(&self) -> f64 {
        self.mean(|e| e.data_ndcg)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayResult {
    pub queries: Vec<QueryReplay>,
    /// Queries left out, with the reason.
    pub excluded: Vec<(String, String)>,
    /// Across-query mean and variance of the per-query means.
    pub policy_map: Summary,
    pub policy_ndcg: Summary,
    pub upper_map: Summary,
    pub upper_ndcg: Summary,
}

type Excluded = Vec<(String, String)>;

struct QueryInput<'a> {
    query: &'a str,
    sessions: Vec<&'a SessionRecord>,
    judgments: &'a TopicJudgments,
}

/// Groups the log by query (queries in id order, sessions in log order)
/// and applies the filter.
fn select_queries<'a>(
    log: &'a [SessionRecord],
    qrels: &'a Qrels,
    config: &ReplayConfig,
) -> Result<(Vec<QueryInput<'a>>, Excluded)> {
    let mut by_query: BTreeMap<&str, Vec<&SessionRecord>> = BTreeMap::new();
    for s in log {
        by_query.entry(s.query_id.as_str()).or_default().push(s);
    }
    let mut selected = Vec::new();
    let mut excluded = Vec::new();
    for (query, sessions) in by_query {
        let judged = qrels.topic(query).map_or(0, TopicJudgments::len);
        let reason = if judged == 0 {
            Some("no judged documents".to_owned())
        } else if judged < config.filter.min_judged {
            Some(format!(
                "{judged} judged documents, need {}",
                config.filter.min_judged
            ))
        } else if sessions.len() < config.filter.min_sessions {
            Some(format!(
                "{} sessions, need {}",
                sessions.len(),
                config.filter.min_sessions
            ))
        } else {
            None
        };
        match reason {
            Some(r) => excluded.push((query.to_owned(), r)),
            None => {
                let n_train = config.training_sessions(sessions.len());
                if sessions[n_train..].iter().all(|s| s.is_empty()) {
                    return Err(Error::Config(format!(
                        "query {query}: no sessions left to evaluate after {n_train} training sessions"
                    )));
                }
                selected.push(QueryInput {
                    query,
                    sessions,
                    judgments: qrels.topic(query).expect("judged"),
                })
            }
        }
    }
    if selected.is_empty() {
        return Err(Error::Config("no query passes the replay filter".into()));
    }
    Ok((selected, excluded))
}

fn best_order(docs: &[DocId], judgments: &TopicJudgments) -> Vec<DocId> {
    let mut ranked: Vec<(Grade, &DocId)> = docs
        .iter()
        .map(|d| (judgments.grade(d.as_str()), d))
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    ranked.into_iter().map(|(_, d)| d.clone()).collect()
}

pub fn run_replay(
    log: &[SessionRecord],
    qrels: &Qrels,
    config: &ReplayConfig,
) -> Result<ReplayResult> {
    config.validate()?;
    let (queries, excluded) = select_queries(log, qrels, config)?;
    let queries = par_map(queries.len(), |k| replay_query(&queries[k], config))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let summarize =
        |f: fn(&QueryReplay) -> f64| aggregate(&queries.iter().map(f).collect::<Vec<_>>());
    Ok(ReplayResult {
        policy_map: summarize(QueryReplay::policy_map)?,
        policy_ndcg: summarize(QueryReplay::policy_ndcg)?,
        upper_map: summarize(QueryReplay::upper_map)?,
        upper_ndcg: summarize(QueryReplay::upper_ndcg)?,
        queries,
        excluded,
    })
}

fn replay_query(input: &QueryInput<'_>, config: &ReplayConfig) -> Result<QueryReplay> {
    let (click_model, fallbacks) = match &config.click_model {
        ClickModelSource::Fixed(spec) => (spec.clone(), vec![None; config.page_size]),
        ClickModelSource::Estimated(variant) => {
            let fit = estimate_params_from_judged_log(
                input.sessions.iter().copied(),
                input.judgments,
                *variant,
                config.page_size,
            )?;
            (fit.spec, fit.fallbacks)
        }
    };
    let policy_config = PolicyConfig {
        lambda: config.lambda,
        page_size: config.page_size,
        prior: config.prior,
        click_model: click_model.clone(),
    };
    let mut policy = Policy::new(policy_config)?;
    if config.arrival == Arrival::Prior {
        for s in &input.sessions {
            for d in &s.docs {
                policy.ensure_document(d)?;
            }
        }
    }

    let n_train = config.training_sessions(input.sessions.len());
    let mut out = QueryReplay {
        query: input.query.to_owned(),
        sessions: input.sessions.len(),
        training_sessions: n_train,
        training_updates: 0,
        skipped_empty: 0,
        click_model,
        fallbacks,
        evals: Vec::with_capacity(input.sessions.len() - n_train),
        degenerate_weights: 0,
    };
    for s in &input.sessions[..n_train] {
        if s.is_empty() {
            out.skipped_empty += 1;
            continue;
        }
        out.training_updates += train_step(&mut policy, s, config.arrival)?;
    }
    let cutoff = config.page_size;
    for s in &input.sessions[n_train..] {
        let Some(action) = replay_step(&mut policy, s, config.arrival)? else {
            out.skipped_empty += 1;
            continue;
        };
        let judge = |docs: &[DocId]| JudgedRanking::new(docs, input.judgments, cutoff);
        let shown = judge(&action.docs);
        let data = judge(&s.docs);
        let best = judge(&best_order(&s.docs, input.judgments));
        out.evals.push(SessionEval {
            policy_map: shown.average_precision(cutoff),
            policy_ndcg: shown.ndcg(cutoff),
            data_map: data.average_precision(cutoff),
            data_ndcg: data.ndcg(cutoff),
            best_map: best.average_precision(cutoff),
            best_ndcg: best.ndcg(cutoff),
        });
    }
    out.degenerate_weights = policy.state().degenerate_weights();
    Ok(out)
}

/// Metrics of the logged rankings alone over each query's evaluation
/// sessions.
#[derive(Clone, Debug, PartialEq)]
pub struct UpperBound {
    /// `(query, mean AP, mean nDCG)` per query.
    pub queries: Vec<(String, f64, f64)>,
    pub excluded: Vec<(String, String)>,
    pub map: Summary,
    pub ndcg: Summary,
}

pub fn run_upper_bound(
    log: &[SessionRecord],
    qrels: &Qrels,
    config: &ReplayConfig,
) -> Result<UpperBound> {
    config.validate()?;
    let (queries, excluded) = select_queries(log, qrels, config)?;
    let cutoff = config.page_size;
    let per_query: Vec<(String, f64, f64)> = queries
        .iter()
        .map(|q| {
            let n_train = config.training_sessions(q.sessions.len());
            let evals: Vec<JudgedRanking> = q.sessions[n_train..]
                .iter()
                .filter(|s| !s.is_empty())
                .map(|s| JudgedRanking::new(&s.docs, q.judgments, cutoff))
                .collect();
            let n = evals.len() as f64;
            let map = evals
                .iter()
                .map(|j| j.average_precision(cutoff))
                .sum::<f64>()
                / n;
            let ndcg = evals.iter().map(|j| j.ndcg(cutoff)).sum::<f64>() / n;
            (q.query.to_owned(), map, ndcg)
        })
        .collect();
    let map = aggregate(&per_query.iter().map(|q| q.1).collect::<Vec<_>>())?;
    let ndcg = aggregate(&per_query.iter().map(|q| q.2).collect::<Vec<_>>())?;
    Ok(UpperBound {
        queries: per_query,
        excluded,
        map,
        ndcg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::click_model::{effective_counts, RankParams};
    use crate::estimator::DocumentState;
    use approx::assert_abs_diff_eq;

    fn session(id: &str, docs: &[&str], clicks: &[u8]) -> SessionRecord {
        SessionRecord::new(
            id,
            "q",
            docs.iter().map(|&d| DocId::from(d)).collect(),
            clicks.iter().map(|&c| c == 1).collect(),
        )
        .unwrap()
    }

    fn unit_policy(page: usize) -> Policy {
        let spec = ClickModelSpec::examination_hypothesis(vec![1.0; page]).unwrap();
        Policy::new(PolicyConfig::new(spec, page, 0.0)).unwrap()
    }

    #[test]
    fn restricted_rerank_uses_logged_positions() {
        let mut p = unit_policy(3);
        // Prefer A > B > C > D > E before the session.
        for (d, r) in [("A", 0.9), ("B", 0.8), ("C", 0.7), ("D", 0.6), ("E", 0.5)] {
            p.insert(d.into(), DocumentState::from_parts(r, 1.0).unwrap())
                .unwrap();
        }
        let s = session("s", &["B", "E", "D"], &[1, 0, 1]);
        let shown = replay_step(&mut p, &s, Arrival::Prior).unwrap().unwrap();
        let mut sorted = shown.docs.clone();
        sorted.sort();
        assert_eq!(
            sorted,
            vec![DocId::from("B"), DocId::from("D"), DocId::from("E")]
        );
        assert_eq!(
            shown.docs,
            vec![DocId::from("B"), DocId::from("D"), DocId::from("E")]
        );
        // B and D clicked, E not; A and C untouched.
        assert_abs_diff_eq!(p.state().get("B").unwrap().r_hat(), 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(p.state().get("D").unwrap().r_hat(), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(p.state().get("E").unwrap().r_hat(), 0.25, epsilon = 1e-15);
        assert_eq!(p.state().get("A").unwrap().gamma(), 1.0);
        assert_eq!(p.state().get("C").unwrap().gamma(), 1.0);
    }

    #[test]
    fn unclicked_session_lowers_every_estimate() {
        let mut p = unit_policy(3);
        let s = session("s", &["a", "b", "c"], &[0, 0, 0]);
        replay_step(&mut p, &s, Arrival::Dynamic).unwrap();
        for d in ["a", "b", "c"] {
            assert!(p.state().get(d).unwrap().r_hat() < 0.5);
        }
    }

    #[test]
    fn never_clicked_top_document_decays_like_the_oracle() {
        let spec = ClickModelSpec::default_for(ClickModelVariant::MixedClick, 10);
        let mut p = Policy::new(PolicyConfig::new(spec, 10, 0.0)).unwrap();
        let s = session("s", &["top", "x"], &[0, 1]);
        // Independent iteration: beta_1 = 1 at pi = 0.8, b = 1.
        let mut oracle = DocumentState::new(0.5).unwrap();
        let mut last = 0.5;
        for _ in 0..100 {
            replay_step(&mut p, &s, Arrival::Dynamic).unwrap();
            let c = effective_counts(
                oracle.r_hat(),
                RankParams {
                    trust: 0.8,
                    bias: 1.0,
                },
            );
            assert_eq!(c.beta, 1.0);
            oracle = oracle.update(false, &c);
            let r = p.state().get("top").unwrap().r_hat();
            assert!(r < last);
            last = r;
        }
        assert_abs_diff_eq!(last, oracle.r_hat(), epsilon = 1e-15);
        assert_abs_diff_eq!(last, 0.5 / 101.0, epsilon = 1e-12);
    }

    #[test]
    fn prior_arrival_needs_known_documents() {
        let mut p = unit_policy(2);
        let s = session("s", &["a"], &[1]);
        assert!(matches!(
            replay_step(&mut p, &s, Arrival::Prior),
            Err(Error::Protocol(_))
        ));
        let empty = session("e", &[], &[]);
        assert_eq!(replay_step(&mut p, &empty, Arrival::Prior).unwrap(), None);
        assert_eq!(p.state().time(), 1);
    }

    fn tiny_qrels() -> Qrels {
        let mut q = Qrels::default();
        q.insert_topic(
            "q",
            TopicJudgments::new(
                [("a", 2), ("b", 0), ("c", 1)]
                    .iter()
                    .map(|&(d, g)| (DocId::from(d), Grade::new(g).unwrap()))
                    .collect(),
            ),
        );
        q
    }

    fn tiny_config(training: f64) -> ReplayConfig {
        let mut c = ReplayConfig::new(
            ClickModelSource::Fixed(ClickModelSpec::default_for(
                ClickModelVariant::DependentClick,
                10,
            )),
            0.0,
        );
        c.training_fraction = training;
        c.filter = QueryFilter {
            min_sessions: 1,
            min_judged: 1,
        };
        c
    }

    #[test]
    fn matching_rankings_equal_the_upper_bound() {
        // The logged order is already the policy's preferred order, both
        // before and after every update: a and b rise together, c sinks.
        let log: Vec<SessionRecord> = (0..20)
            .map(|i| session(&format!("s{i}"), &["a", "b", "c"], &[1, 1, 0]))
            .collect();
        let res = run_replay(&log, &tiny_qrels(), &tiny_config(0.0)).unwrap();
        let q = &res.queries[0];
        for e in &q.evals {
            assert_eq!(e.policy_map, e.data_map);
            assert_eq!(e.policy_ndcg, e.data_ndcg);
        }
        assert_eq!(res.policy_map, res.upper_map);
    }

    #[test]
    fn training_sessions_only_update() {
        let log: Vec<SessionRecord> = (0..10)
            .map(|i| session(&format!("s{i}"), &["b", "a", "c"], &[0, 1, 0]))
            .collect();
        let res = run_replay(&log, &tiny_qrels(), &tiny_config(0.5)).unwrap();
        let q = &res.queries[0];
        assert_eq!(q.training_sessions, 5);
        assert_eq!(q.training_updates, 15);
        assert_eq!(q.evals.len(), 5);
    }

    #[test]
    fn queries_without_judgments_are_excluded() {
        let mut log: Vec<SessionRecord> = (0..4)
            .map(|i| session(&format!("s{i}"), &["a"], &[1]))
            .collect();
        log.push(SessionRecord::new("x", "other", vec!["z".into()], vec![false]).unwrap());
        let res = run_replay(&log, &tiny_qrels(), &tiny_config(0.0)).unwrap();
        assert_eq!(res.queries.len(), 1);
        assert_eq!(
            res.excluded,
            vec![("other".to_owned(), "no judged documents".to_owned())]
        );
    }

    #[test]
    fn empty_evaluation_phase_is_an_error() {
        let log = vec![session("s0", &["a"], &[1])];
        let err = run_replay(&log, &tiny_qrels(), &tiny_config(0.5));
        // floor(0.5 * 1) = 0 training sessions, so this one still evaluates.
        assert!(err.is_ok());
        let mut log = log;
        log.push(session("s1", &[], &[]));
        let err = run_replay(&log, &tiny_qrels(), &tiny_config(0.5)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(run_replay(&log, &tiny_qrels(), &tiny_config(1.0)).is_err());
    }

    #[test]
    fn upper_bound_alone_matches_full_replay() {
        let log: Vec<SessionRecord> = (0..12)
            .map(|i| {
                session(
                    &format!("s{i}"),
                    &["b", "c", "a"],
                    &[0, u8::from(i % 2 == 0), 1],
                )
            })
            .collect();
        let cfg = tiny_config(0.25);
        let full = run_replay(&log, &tiny_qrels(), &cfg).unwrap();
        let ub = run_upper_bound(&log, &tiny_qrels(), &cfg).unwrap();
        assert_eq!(ub.map, full.upper_map);
        assert_eq!(ub.ndcg, full.upper_ndcg);
    }
}
