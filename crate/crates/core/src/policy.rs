//! The UCB ranking policy over iterative-expectation estimates.
//!
//! Each step scores every candidate with
//! `r_hat + lambda * sqrt(2 ln t / gamma)`, shows the top `M` in descending
//! order (ties broken by ascending document id), then feeds the observed
//! clicks back through the click model's effective counts.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use crate::click_model::{effective_counts, ClickModelSpec};
use crate::estimator::{DocumentState, FLAT_PRIOR};
use crate::{check_probability, DocId, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyConfig {
    /// Exploration weight; 0 ranks greedily by estimate.
    pub lambda: f64,
    /// Number of documents shown per step (`M`).
    pub page_size: usize,
    /// Initial estimate for every document.
    pub prior: f64,
    pub click_model: ClickModelSpec,
}

impl PolicyConfig {
    pub fn new(click_model: ClickModelSpec, page_size: usize, lambda: f64) -> Self {
        PolicyConfig {
            lambda,
            page_size,
            prior: FLAT_PRIOR,
            click_model,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.page_size == 0 {
            return Err(Error::Config("page size must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        check_probability("prior", self.prior).map_err(|e| Error::Config(e.to_string()))?;
        self.click_model.check_covers(self.page_size)
    }
}

/// The ordered documents shown at step `time`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankAction {
    pub docs: Vec<DocId>,
    pub time: u64,
}

impl RankAction {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// Document estimates plus the step counter and running click total.
#[derive(Clone, Debug)]
pub struct PolicyState {
    ids: Vec<DocId>,
    states: Vec<DocumentState>,
    index: HashMap<DocId, usize>,
    t: u64,
    cumulative_clicks: u64,
    degenerate_weights: u64,
}

impl Default for PolicyState {
    fn default() -> Self {
        PolicyState {
            ids: Vec::new(),
            states: Vec::new(),
            index: HashMap::new(),
            t: 1,
            cumulative_clicks: 0,
            degenerate_weights: 0,
        }
    }
}

impl PolicyState {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Current step, starting at 1.
    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn cumulative_clicks(&self) -> u64 {
        self.cumulative_clicks
    }

    /// How many effective-count weights fell back to the neutral value.
    pub fn degenerate_weights(&self) -> u64 {
        self.degenerate_weights
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&DocumentState> {
        self.index.get(id).map(|&i| &self.states[i])
    }

    /// Documents in the order they were added.
    pub fn iter(&self) -> impl Iterator<Item = (&DocId, &DocumentState)> {
        self.ids.iter().zip(&self.states)
    }

    /// Documents sorted by id, for export.
    pub fn snapshot(&self) -> BTreeMap<DocId, DocumentState> {
        self.iter().map(|(d, s)| (d.clone(), *s)).collect()
    }

    fn lookup(&self, id: &DocId) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::Protocol(format!("unknown document `{id}`")))
    }
}

pub fn ucb_score(state: &DocumentState, t: u64, lambda: f64) -> f64 {
    state.r_hat() + lambda * exploration_term(t, state.gamma())
}

fn exploration_term(t: u64, gamma: f64) -> f64 {
    (2.0 * (t as f64).ln() / gamma).sqrt()
}

fn by_score_then_id(a: &(f64, &DocId), b: &(f64, &DocId)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

fn top_by_score(mut scored: Vec<(f64, &DocId)>, m: usize) -> Vec<&DocId> {
    if scored.len() > m {
        scored.select_nth_unstable_by(m - 1, by_score_then_id);
        scored.truncate(m);
    }
    scored.sort_unstable_by(by_score_then_id);
    scored.into_iter().map(|(_, d)| d).collect()
}

/// Picks the `min(m, |scores|)` highest-scoring documents in descending
/// order, breaking ties by ascending id.
pub fn select_ranking(scores: &BTreeMap<DocId, f64>, m: usize, time: u64) -> Result<RankAction> {
    if scores.is_empty() {
        return Err(Error::Domain("cannot rank an empty pool".into()));
    }
    if m == 0 {
        return Err(Error::Domain("page size must be at least 1".into()));
    }
    let scored = scores.iter().map(|(d, &s)| (s, d)).collect();
    Ok(RankAction {
        docs: top_by_score(scored, m).into_iter().cloned().collect(),
        time,
    })
}

#[derive(Clone, Debug)]
pub struct Policy {
    config: PolicyConfig,
    state: PolicyState,
}

impl Policy {
    pub fn new(config: PolicyConfig) -> Result<Self> {
        config.validate()?;
        Ok(Policy {
            config,
            state: PolicyState::default(),
        })
    }

    /// A policy that knows all of `docs` from the start, each at the
    /// configured prior.
    pub fn with_documents<I>(config: PolicyConfig, docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = DocId>,
    {
        let mut policy = Policy::new(config)?;
        let prior = policy.config.prior;
        for d in docs {
            policy.add_document(d, prior)?;
        }
        Ok(policy)
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn state(&self) -> &PolicyState {
        &self.state
    }

    pub fn add_document(&mut self, id: DocId, prior: f64) -> Result<()> {
        self.insert(id, DocumentState::new(prior)?)
    }

    /// Adds a document with an existing state, e.g. from a snapshot.
    pub fn insert(&mut self, id: DocId, state: DocumentState) -> Result<()> {
        if self.state.index.contains_key(&id) {
            return Err(Error::Domain(format!(
                "document `{id}` is already in the pool"
            )));
        }
        self.state.index.insert(id.clone(), self.state.ids.len());
        self.state.ids.push(id);
        self.state.states.push(state);
        Ok(())
    }

    /// Adds `id` at the configured prior unless it is already known.
    pub fn ensure_document(&mut self, id: &DocId) -> Result<bool> {
        if self.state.contains(id.as_str()) {
            return Ok(false);
        }
        let prior = self.config.prior;
        self.add_document(id.clone(), prior)?;
        Ok(true)
    }

    pub fn score(&self, id: &str) -> Option<f64> {
        self.state
            .get(id)
            .map(|s| ucb_score(s, self.state.t, self.config.lambda))
    }

    /// Current score of every document.
    pub fn scores(&self) -> BTreeMap<DocId, f64> {
        let (t, lambda) = (self.state.t, self.config.lambda);
        self.state
            .iter()
            .map(|(d, s)| (d.clone(), ucb_score(s, t, lambda)))
            .collect()
    }

    /// Ranks the whole pool for the current step.
    pub fn rank(&self) -> Result<RankAction> {
        if self.state.is_empty() {
            return Err(Error::Domain("cannot rank an empty pool".into()));
        }
        let (t, lambda) = (self.state.t, self.config.lambda);
        let bonus = 2.0 * (t as f64).ln();
        let scored = self
            .state
            .ids
            .iter()
            .zip(&self.state.states)
            .map(|(d, s)| (s.r_hat() + lambda * (bonus / s.gamma()).sqrt(), d))
            .collect();
        Ok(self.action(top_by_score(scored, self.config.page_size)))
    }

    /// Ranks only `candidates`, all of which must already be known.
    pub fn rank_candidates(&self, candidates: &[DocId]) -> Result<RankAction> {
        if candidates.is_empty() {
            return Err(Error::Domain("cannot rank an empty candidate set".into()));
        }
        let (t, lambda) = (self.state.t, self.config.lambda);
        let mut scored = Vec::with_capacity(candidates.len());
        for d in candidates {
            let i = self.state.lookup(d)?;
            scored.push((
                ucb_score(&self.state.states[i], t, lambda),
                &self.state.ids[i],
            ));
        }
        let before = scored.len();
        scored.sort_unstable_by(|a, b| a.1.cmp(b.1));
        scored.dedup_by(|a, b| a.1 == b.1);
        if scored.len() != before {
            return Err(Error::Domain("candidate set contains duplicates".into()));
        }
        Ok(self.action(top_by_score(scored, self.config.page_size)))
    }

    fn action(&self, docs: Vec<&DocId>) -> RankAction {
        RankAction {
            docs: docs.into_iter().cloned().collect(),
            time: self.state.t,
        }
    }

    /// Applies clicks observed on `docs` (top to bottom) to the estimates.
    ///
    /// Rank parameters and effective counts are computed from the estimates
    /// held before this call; updates are then applied in rank order.
    pub fn observe(&mut self, docs: &[DocId], clicks: &[bool]) -> Result<()> {
        if docs.len() != clicks.len() {
            return Err(Error::Protocol(format!(
                "{} click flags for {} displayed documents",
                clicks.len(),
                docs.len()
            )));
        }
        let idx = docs
            .iter()
            .map(|d| self.state.lookup(d))
            .collect::<Result<Vec<_>>>()?;
        let estimates: Vec<f64> = idx.iter().map(|&i| self.state.states[i].r_hat()).collect();
        let params = self.config.click_model.resolve(&estimates)?;
        for ((&i, &clicked), rank) in idx.iter().zip(clicks).zip(params.iter()) {
            let counts = effective_counts(self.state.states[i].r_hat(), rank);
            if counts.degenerate {
                self.state.degenerate_weights += 1;
            }
            self.state.states[i] = self.state.states[i].update(clicked, &counts);
        }
        self.state.cumulative_clicks += clicks.iter().filter(|&&c| c).count() as u64;
        Ok(())
    }

    /// Moves to the next step.
    pub fn advance(&mut self) {
        self.state.t += 1;
    }

    /// One full cycle: rank the pool, show it to `feedback`, learn from the
    /// returned click flags and advance the clock.
    pub fn step<F>(&mut self, feedback: F) -> Result<RankAction>
    where
        F: FnOnce(&RankAction) -> Vec<bool>,
    {
        let action = self.rank()?;
        let clicks = feedback(&action);
        self.observe(&action.docs, &clicks)?;
        self.advance();
        Ok(action)
    }
}
