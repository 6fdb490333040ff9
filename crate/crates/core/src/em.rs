//! Fitting the click mixture from logged clicks.
//!
//! [`em_fit`] and [`em_fit_ranks`] run expectation maximization on the
//! Bernoulli mixture `p(C) = r^C (1-r)^(1-C) pi + b^C (1-b)^(1-C) (1-pi)`:
//! the E-step computes the posterior `p(S=1 | C)` that each observation came
//! from the document, the M-step sets `r` and `b` to responsibility-weighted
//! click rates and `pi` to the mean responsibility. `b` and `pi` are shared
//! by all documents at a rank; a document seen at several ranks pools all of
//! its observations into one `r`.
//!
//! [`estimate_params_from_judged_log`] is the cheap alternative used before
//! replay: per-rank click-through rates of judged documents.

use std::collections::BTreeMap;
use std::io::Write;

use crate::click_model::{ClickModelSpec, ClickModelVariant, DEFAULT_DECAY};
use crate::replay::SessionRecord;
use crate::simulator::TopicJudgments;
use crate::{DocId, Error, Result};

/// Everything observed at one rank, in time order.
#[derive(Clone, Debug, PartialEq)]
pub struct RankClickHistory {
    /// 1-based position.
    pub rank: usize,
    pub observations: Vec<(DocId, bool)>,
}

/// Bias and trust at one rank.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankMixture {
    pub b: f64,
    pub pi: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct MixtureParams {
    pub r: BTreeMap<DocId, f64>,
    pub ranks: BTreeMap<usize, RankMixture>,
}

impl MixtureParams {
    /// Parameters for a single document at a single rank.
    pub fn single(doc: impl Into<DocId>, rank: usize, r: f64, b: f64, pi: f64) -> Self {
        MixtureParams {
            r: BTreeMap::from([(doc.into(), r)]),
            ranks: BTreeMap::from([(rank, RankMixture { b, pi })]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmInit {
    pub r: f64,
    pub b: f64,
    pub pi: f64,
}

impl Default for EmInit {
    fn default() -> Self {
        EmInit {
            r: 0.5,
            b: 0.2,
            pi: 0.8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmOptions {
    pub init: EmInit,
    pub max_iter: usize,
    /// Stop once the log-likelihood changes by less than this.
    pub tol: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            init: EmInit::default(),
            max_iter: 500,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmEstimate {
    pub params: MixtureParams,
    pub log_likelihood: f64,
    /// Log-likelihood at the initial parameters, then after every iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `p(S=1 | C)` for every observation at the final parameters, one
    /// vector per input history.
    pub responsibilities: Vec<Vec<f64>>,
}

impl EmEstimate {
    pub fn r(&self, doc: &str) -> Option<f64> {
        self.params.r.get(doc).copied()
    }

    pub fn rank(&self, rank: usize) -> Option<RankMixture> {
        self.params.ranks.get(&rank).copied()
    }
}

fn bernoulli(p: f64, c: bool) -> f64 {
    if c {
        p
    } else {
        1.0 - p
    }
}

/// Posterior membership `(p(S=1 | C), p(S=0 | C))`; `None` when the
/// observation has zero probability under the mixture.
pub fn responsibility(clicked: bool, r: f64, b: f64, pi: f64) -> Option<(f64, f64)> {
    let from_doc = bernoulli(r, clicked) * pi;
    let from_rank = bernoulli(b, clicked) * (1.0 - pi);
    let total = from_doc + from_rank;
    (total > 0.0).then(|| (from_doc / total, from_rank / total))
}

fn observation_log_density(clicked: bool, r: f64, m: RankMixture) -> f64 {
    (bernoulli(r, clicked) * m.pi + bernoulli(m.b, clicked) * (1.0 - m.pi)).ln()
}

/// Mixture log-likelihood of one rank's history. Returns `-inf` when some
/// observation has zero probability.
pub fn log_likelihood(params: &MixtureParams, history: &RankClickHistory) -> Result<f64> {
    if history.observations.is_empty() {
        return Err(Error::Domain(format!(
            "rank {} has no observations",
            history.rank
        )));
    }
    let m = *params
        .ranks
        .get(&history.rank)
        .ok_or_else(|| Error::Domain(format!("no parameters for rank {}", history.rank)))?;
    history.observations.iter().try_fold(0.0, |acc, (doc, c)| {
        let r = *params
            .r
            .get(doc)
            .ok_or_else(|| Error::Domain(format!("no estimate for document `{doc}`")))?;
        Ok(acc + observation_log_density(*c, r, m))
    })
}

pub fn total_log_likelihood(params: &MixtureParams, histories: &[RankClickHistory]) -> Result<f64> {
    histories
        .iter()
        .try_fold(0.0, |acc, h| Ok(acc + log_likelihood(params, h)?))
}

pub fn em_fit(history: &RankClickHistory, options: &EmOptions) -> Result<EmEstimate> {
    em_fit_ranks(std::slice::from_ref(history), options)
}

/// Joint fit over several ranks: per-rank `(b, pi)`, per-document `r`.
pub fn em_fit_ranks(histories: &[RankClickHistory], options: &EmOptions) -> Result<EmEstimate> {
    let EmInit { r, b, pi } = options.init;
    for (name, v) in [("r", r), ("b", b), ("pi", pi)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain(format!(
                "initial {name} must lie in (0, 1), got {v}"
            )));
        }
    }
    if histories.is_empty() || histories.iter().any(|h| h.observations.is_empty()) {
        return Err(Error::Domain(
            "EM needs at least one observation per rank".into(),
        ));
    }
    let mut params = MixtureParams::default();
    for h in histories {
        if params.ranks.insert(h.rank, RankMixture { b, pi }).is_some() {
            return Err(Error::Domain(format!(
                "rank {} appears in two histories",
                h.rank
            )));
        }
        for (doc, _) in &h.observations {
            params.r.entry(doc.clone()).or_insert(r);
        }
    }

    let check_finite = |ll: f64, iteration: usize, params: &MixtureParams| {
        if ll.is_finite() {
            Ok(ll)
        } else {
            Err(Error::Numerical(format!(
                "log-likelihood {ll} at iteration {iteration}; rank params {:?}",
                params.ranks
            )))
        }
    };

    let mut ll = check_finite(total_log_likelihood(&params, histories)?, 0, &params)?;
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iter {
        iterations += 1;
        let resp = e_step(&params, histories)?;
        m_step(&mut params, histories, &resp);
        let next = check_finite(
            total_log_likelihood(&params, histories)?,
            iterations,
            &params,
        )?;
        trace.push(next);
        let delta = (next - ll).abs();
        ll = next;
        if delta < options.tol {
            converged = true;
            break;
        }
    }
    let responsibilities = e_step(&params, histories)?;
    Ok(EmEstimate {
        params,
        log_likelihood: ll,
        trace,
        iterations,
        converged,
        responsibilities,
    })
}

fn e_step(params: &MixtureParams, histories: &[RankClickHistory]) -> Result<Vec<Vec<f64>>> {
    histories
        .iter()
        .map(|h| {
            let m = params.ranks[&h.rank];
            h.observations
                .iter()
                .map(|(doc, c)| {
                    responsibility(*c, params.r[doc], m.b, m.pi)
                        .map(|(q, _)| q)
                        .ok_or_else(|| {
                            Error::Numerical(format!(
                                "observation of `{doc}` at rank {} has zero probability",
                                h.rank
                            ))
                        })
                })
                .collect()
        })
        .collect()
}

fn m_step(params: &mut MixtureParams, histories: &[RankClickHistory], resp: &[Vec<f64>]) {
    let mut doc_sums: BTreeMap<&DocId, (f64, f64)> = BTreeMap::new();
    for (h, qs) in histories.iter().zip(resp) {
        let (mut click_bias, mut bias_mass, mut trust_mass) = (0.0, 0.0, 0.0);
        for ((doc, c), &q) in h.observations.iter().zip(qs) {
            let c = if *c { 1.0 } else { 0.0 };
            let e = doc_sums.entry(doc).or_default();
            e.0 += c * q;
            e.1 += q;
            click_bias += c * (1.0 - q);
            bias_mass += 1.0 - q;
            trust_mass += q;
        }
        let m = params.ranks.get_mut(&h.rank).expect("rank initialized");
        if bias_mass > 0.0 {
            m.b = click_bias / bias_mass;
        }
        m.pi = trust_mass / h.observations.len() as f64;
    }
    for (doc, (num, den)) in doc_sums {
        if den > 0.0 {
            params.r.insert(doc.clone(), num / den);
        }
    }
}

/// Splits a query's sessions into one click history per rank, `1..=ranks`.
/// Ranks nobody was shown at are omitted.
pub fn histories_from_sessions<'a, I>(sessions: I, ranks: usize) -> Vec<RankClickHistory>
where
    I: IntoIterator<Item = &'a SessionRecord>,
{
    let mut out: Vec<RankClickHistory> = (1..=ranks)
        .map(|rank| RankClickHistory {
            rank,
            observations: Vec::new(),
        })
        .collect();
    for s in sessions {
        for (i, (doc, &c)) in s.docs.iter().zip(&s.clicks).take(ranks).enumerate() {
            out[i].observations.push((doc.clone(), c));
        }
    }
    out.retain(|h| !h.observations.is_empty());
    out
}

/// Why a rank's parameter did not come from its own counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fallback {
    /// The rank had no data; the across-rank pooled estimate was used.
    Pooled,
    /// No rank had data; the default parameter was used.
    Default,
}

impl Fallback {
    pub fn tag(self) -> &'static str {
        match self {
            Fallback::Pooled => "pooled",
            Fallback::Default => "default",
        }
    }
}

/// Click model fitted from counts, with the ranks that needed a fallback.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamFit {
    pub spec: ClickModelSpec,
    /// One entry per rank, `None` where the rank's own counts were used.
    pub fallbacks: Vec<Option<Fallback>>,
}

impl ParamFit {
    pub fn any_fallback(&self) -> bool {
        self.fallbacks.iter().any(Option::is_some)
    }
}

/// Ratio of per-rank counts, falling back to the pooled ratio and then to
/// `default(rank)`.
struct RankRatio {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl RankRatio {
    fn new(ranks: usize) -> Self {
        RankRatio {
            num: vec![0.0; ranks],
            den: vec![0.0; ranks],
        }
    }

    fn add(&mut self, i: usize, hit: bool) {
        self.den[i] += 1.0;
        if hit {
            self.num[i] += 1.0;
        }
    }

    fn resolve(&self, default: impl Fn(usize) -> f64) -> (Vec<f64>, Vec<Option<Fallback>>) {
        let pooled_den: f64 = self.den.iter().sum();
        let pooled = (pooled_den > 0.0).then(|| self.num.iter().sum::<f64>() / pooled_den);
        (0..self.num.len())
            .map(|i| {
                if self.den[i] > 0.0 {
                    ((self.num[i] / self.den[i]).clamp(0.0, 1.0), None)
                } else if let Some(p) = pooled {
                    (p.clamp(0.0, 1.0), Some(Fallback::Pooled))
                } else {
                    (default(i), Some(Fallback::Default))
                }
            })
            .unzip()
    }
}

fn worse(a: Option<Fallback>, b: Option<Fallback>) -> Option<Fallback> {
    match (a, b) {
        (Some(Fallback::Default), _) | (_, Some(Fallback::Default)) => Some(Fallback::Default),
        (Some(Fallback::Pooled), _) | (_, Some(Fallback::Pooled)) => Some(Fallback::Pooled),
        _ => None,
    }
}

/// Fits `variant` to a query's sessions from simple counts.
///
/// A document counts as relevant at grade `>= 1`; unjudged documents are
/// ignored by the mixed-click and examination estimators.
///
/// - examination: `eta_i` = clicks on relevant documents at rank `i` over
///   their impressions there;
/// - mixed click: `b_i` = click-through rate of non-relevant documents at
///   rank `i`, `pi_i = clamp((ctr_rel_i - b_i) / (1 - b_i), 0, 1)`;
/// - dependent click: `eta_j` = share of sessions with a click at `j` (and
///   at least one rank below it) that also have a later click.
pub fn estimate_params_from_judged_log<'a, I>(
    sessions: I,
    judgments: &TopicJudgments,
    variant: ClickModelVariant,
    ranks: usize,
) -> Result<ParamFit>
where
    I: IntoIterator<Item = &'a SessionRecord>,
{
    if ranks == 0 {
        return Err(Error::Config("need at least one rank to estimate".into()));
    }
    let decay = |i: usize| DEFAULT_DECAY.powi(i as i32);
    let mut relevant = RankRatio::new(ranks);
    let mut non_relevant = RankRatio::new(ranks);
    let mut continued = RankRatio::new(ranks);
    for s in sessions {
        let shown = s.docs.len().min(ranks);
        for i in 0..shown {
            let doc = s.docs[i].as_str();
            if judgments.is_judged(doc) {
                if judgments.grade(doc).is_relevant() {
                    relevant.add(i, s.clicks[i]);
                } else {
                    non_relevant.add(i, s.clicks[i]);
                }
            }
            if s.clicks[i] && i + 1 < s.docs.len() {
                continued.add(i, s.clicks[i + 1..].iter().any(|&c| c));
            }
        }
    }
    match variant {
        ClickModelVariant::ExaminationHypothesis => {
            let (eta, fallbacks) = relevant.resolve(decay);
            Ok(ParamFit {
                spec: ClickModelSpec::examination_hypothesis(eta)?,
                fallbacks,
            })
        }
        ClickModelVariant::DependentClick => {
            let (eta, fallbacks) = continued.resolve(|_| DEFAULT_DECAY);
            Ok(ParamFit {
                spec: ClickModelSpec::dependent_click(eta)?,
                fallbacks,
            })
        }
        ClickModelVariant::MixedClick => {
            let (b, fb_b) = non_relevant.resolve(decay);
            let (ctr, fb_rel) = relevant.resolve(|_| 1.0);
            let pi = b
                .iter()
                .zip(&ctr)
                .zip(fb_b.iter().zip(&fb_rel))
                .map(|((&b, &ctr), sources)| match sources {
                    // Neither rate is known anywhere: default trust.
                    (Some(Fallback::Default), Some(Fallback::Default)) => DEFAULT_DECAY,
                    _ if b < 1.0 => ((ctr - b) / (1.0 - b)).clamp(0.0, 1.0),
                    _ => 0.0,
                })
                .collect();
            Ok(ParamFit {
                spec: ClickModelSpec::mixed_click(pi, b)?,
                fallbacks: fb_b
                    .into_iter()
                    .zip(fb_rel)
                    .map(|(a, b)| worse(a, b))
                    .collect(),
            })
        }
    }
}

/// One query's entry in a fit report.
pub struct FitReportEntry<'a> {
    pub query: &'a str,
    pub fit: &'a ParamFit,
    pub em: Option<&'a EmEstimate>,
}

pub const FIT_REPORT_HEADER: &str =
    "query\tvariant\trank\tpi\tb\teta\tfallback\tem_pi\tem_b\tem_log_likelihood\tem_trace_len";

/// Tab-separated report, one row per `(query, rank)`. Parameters a variant
/// does not have are written as `-`.
pub fn write_fit_report<'a, W, I>(mut out: W, entries: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = FitReportEntry<'a>>,
{
    writeln!(out, "{FIT_REPORT_HEADER}")?;
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |v| v.to_string());
    for e in entries {
        let spec = &e.fit.spec;
        for rank in 1..=spec.ranks() {
            let i = rank - 1;
            let (pi, b, eta) = match spec.variant() {
                ClickModelVariant::MixedClick => (Some(spec.pi()[i]), Some(spec.b()[i]), None),
                _ => (None, None, Some(spec.eta()[i])),
            };
            let fallback = e.fit.fallbacks[i].map_or("-", Fallback::tag);
            let em_rank = e.em.and_then(|em| em.rank(rank));
            writeln!(
                out,
                "{}\t{}\t{rank}\t{}\t{}\t{}\t{fallback}\t{}\t{}\t{}\t{}",
                e.query,
                spec.variant().tag(),
                cell(pi),
                cell(b),
                cell(eta),
                cell(em_rank.map(|m| m.pi)),
                cell(em_rank.map(|m| m.b)),
                cell(e.em.map(|em| em.log_likelihood)),
                e.em.map_or_else(|| "-".to_owned(), |em| em.trace.len().to_string()),
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::Grade;
    use approx::assert_abs_diff_eq;

    fn history(rank: usize, doc: &str, clicks: &[bool]) -> RankClickHistory {
        RankClickHistory {
            rank,
            observations: clicks.iter().map(|&c| (DocId::from(doc), c)).collect(),
        }
    }

    fn session(docs: &[&str], clicks: &[u8]) -> SessionRecord {
        SessionRecord {
            session_id: "s".into(),
            query_id: "q".into(),
            docs: docs.iter().map(|&d| DocId::from(d)).collect(),
            clicks: clicks.iter().map(|&c| c == 1).collect(),
        }
    }

    #[test]
    fn no_clicks_drive_r_to_zero() {
        let est = em_fit(&history(1, "d", &[false; 30]), &EmOptions::default()).unwrap();
        assert_eq!(est.r("d"), Some(0.0));
    }

    #[test]
    fn all_clicks_drive_r_to_one() {
        let est = em_fit(&history(1, "d", &[true; 30]), &EmOptions::default()).unwrap();
        assert_eq!(est.r("d"), Some(1.0));
    }

    #[test]
    fn log_likelihood_examples() {
        let h = history(1, "d", &[true, false, true, true]);
        let ll = log_likelihood(&MixtureParams::single("d", 1, 0.5, 0.9, 1.0), &h).unwrap();
        assert_abs_diff_eq!(ll, 4.0 * 0.5f64.ln(), epsilon = 1e-12);

        let one = history(1, "d", &[true]);
        let ll = log_likelihood(&MixtureParams::single("d", 1, 0.7, 0.3, 0.8), &one).unwrap();
        assert_abs_diff_eq!(ll, 0.62f64.ln(), epsilon = 1e-12);

        let clicks = history(1, "d", &[true; 5]);
        let ll = log_likelihood(&MixtureParams::single("d", 1, 0.2, 1.0, 0.0), &clicks).unwrap();
        assert_eq!(ll, 0.0);
    }

    #[test]
    fn impossible_observation_is_negative_infinity() {
        let h = history(1, "d", &[false]);
        let ll = log_likelihood(&MixtureParams::single("d", 1, 1.0, 1.0, 0.5), &h).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    #[test]
    fn bad_inputs() {
        assert!(em_fit(&history(1, "d", &[]), &EmOptions::default()).is_err());
        let opts = EmOptions {
            init: EmInit {
                r: 0.0,
                ..EmInit::default()
            },
            ..EmOptions::default()
        };
        assert!(em_fit(&history(1, "d", &[true]), &opts).is_err());
        let dup = [history(1, "a", &[true]), history(1, "b", &[false])];
        assert!(em_fit_ranks(&dup, &EmOptions::default()).is_err());
        let h = history(2, "d", &[true]);
        assert!(log_likelihood(&MixtureParams::single("d", 1, 0.5, 0.5, 0.5), &h).is_err());
    }

    #[test]
    fn responsibilities_are_a_distribution() {
        for c in [true, false] {
            let (q1, q0) = responsibility(c, 0.3, 0.6, 0.7).unwrap();
            assert_abs_diff_eq!(q1 + q0, 1.0, epsilon = 1e-15);
        }
        assert_eq!(responsibility(true, 0.0, 0.0, 0.4), None);
    }

    #[test]
    fn one_em_step_matches_empirical_click_rate() {
        let clicks: Vec<bool> = (0..40).map(|i| i % 5 < 2).collect();
        let est = em_fit(&history(1, "d", &clicks), &EmOptions::default()).unwrap();
        let m = est.rank(1).unwrap();
        let fitted = est.r("d").unwrap() * m.pi + m.b * (1.0 - m.pi);
        assert_abs_diff_eq!(fitted, 0.4, epsilon = 1e-12);
        assert!(est.converged);
        assert_eq!(est.responsibilities[0].len(), 40);
    }

    #[test]
    fn session_histories_per_rank() {
        let log = [
            session(&["a", "b"], &[1, 0]),
            session(&["b", "c", "d"], &[0, 0, 1]),
        ];
        let h = histories_from_sessions(&log, 10);
        assert_eq!(h.len(), 3);
        assert_eq!(h[0].observations.len(), 2);
        assert_eq!(h[2].rank, 3);
        assert_eq!(h[2].observations, vec![(DocId::from("d"), true)]);
    }

    fn judged(pairs: &[(&str, u8)]) -> TopicJudgments {
        TopicJudgments::new(
            pairs
                .iter()
                .map(|&(d, g)| (DocId::from(d), Grade::new(g).unwrap()))
                .collect(),
        )
    }

    #[test]
    fn examination_rate_from_relevant_impressions() {
        let j = judged(&[("rel", 1), ("non", 0)]);
        let log: Vec<SessionRecord> = (0..10)
            .map(|k| session(&["non", "rel"], &[0, u8::from(k < 8)]))
            .collect();
        let fit =
            estimate_params_from_judged_log(&log, &j, ClickModelVariant::ExaminationHypothesis, 2)
                .unwrap();
        assert_abs_diff_eq!(fit.spec.eta()[1], 0.8, epsilon = 1e-15);
        // Rank 1 never showed a relevant document: pooled from rank 2.
        assert_eq!(fit.fallbacks, vec![Some(Fallback::Pooled), None]);
        assert_abs_diff_eq!(fit.spec.eta()[0], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn mixed_click_trust_from_rate_difference() {
        let j = judged(&[("r", 2), ("n", 0), ("x", 0), ("y", 0)]);
        let mut log = Vec::new();
        // Rank 3: relevant clicked 6/10, non-relevant 2/10.
        for k in 0..10 {
            log.push(session(&["x", "y", "r"], &[0, 0, u8::from(k < 6)]));
            log.push(session(&["x", "y", "n"], &[0, 0, u8::from(k < 2)]));
        }
        let fit =
            estimate_params_from_judged_log(&log, &j, ClickModelVariant::MixedClick, 3).unwrap();
        assert_abs_diff_eq!(fit.spec.b()[2], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(fit.spec.pi()[2], 0.5, epsilon = 1e-12);
        for v in fit.spec.pi().iter().chain(fit.spec.b()) {
            assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn dependent_click_without_clicks_at_a_rank_falls_back() {
        let j = judged(&[]);
        let docs = ["a", "b", "c", "d", "e", "f"];
        let log = vec![
            session(&docs, &[1, 0, 1, 0, 0, 0]),
            session(&docs, &[1, 0, 0, 0, 0, 0]),
            session(&docs, &[0, 1, 0, 1, 0, 0]),
        ];
        let fit = estimate_params_from_judged_log(&log, &j, ClickModelVariant::DependentClick, 6)
            .unwrap();
        let eta = fit.spec.eta();
        assert_abs_diff_eq!(eta[0], 0.5, epsilon = 1e-15);
        assert_eq!(eta[1], 1.0);
        // Rank 5 saw no clicks: pooled = 2 continued out of 5 clicks.
        assert_eq!(fit.fallbacks[4], Some(Fallback::Pooled));
        assert_abs_diff_eq!(eta[4], 2.0 / 5.0, epsilon = 1e-15);
        assert!(fit.any_fallback());
    }

    #[test]
    fn no_data_at_all_uses_defaults() {
        let fit = estimate_params_from_judged_log(
            std::iter::empty(),
            &judged(&[]),
            ClickModelVariant::MixedClick,
            2,
        )
        .unwrap();
        assert_eq!(fit.fallbacks, vec![Some(Fallback::Default); 2]);
        assert_eq!(fit.spec.pi(), &[0.8, 0.8]);
        assert_eq!(fit.spec.b(), &[1.0, 0.8]);
    }

    #[test]
    fn fit_report_rows() {
        let fit = ParamFit {
            spec: ClickModelSpec::default_for(ClickModelVariant::DependentClick, 2),
            fallbacks: vec![None, Some(Fallback::Pooled)],
        };
        let mut buf = Vec::new();
        write_fit_report(
            &mut buf,
            [FitReportEntry {
                query: "q1",
                fit: &fit,
                em: None,
            }],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], FIT_REPORT_HEADER);
        assert_eq!(lines[2], "q1\tdcm\t2\t-\t-\t0.8\tpooled\t-\t-\t-\t-");
    }
}
