//! Simulated-user experiments over graded judgments.
//!
//! For every `(topic, repeat)` cell a fresh policy ranks the topic's judged
//! documents for `horizon` steps. A simulated user clicks on each displayed
//! ranking according to the user click model, driven by the true relevance
//! `grade / 2`. The displayed ranking is scored with AP and nDCG at every
//! step.
//!
//! Randomness comes from ChaCha8 seeded with the master seed; cell `k`
//! (topics in id order, repeats inner) draws from stream `k`. Results do not
//! depend on how cells are scheduled across threads.

mod qrels;

pub use qrels::{gen_qrels, gen_topics, parse_qrels, Grade, ParsedQrels, Qrels, TopicJudgments};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::click_model::{click_probability, ClickModelSpec, ClickModelVariant};
use crate::metrics::{aggregate, average_precision, ndcg_at_k, Summary};
use crate::policy::{Policy, PolicyConfig};
use crate::{par_map, Error, Result};

/// Draws click flags for a ranking whose documents have the given true
/// relevances (top to bottom).
///
/// Mixed click and examination hypothesis click each rank independently with
/// probability `r * pi_i + b_i * (1 - pi_i)`. Dependent click scans top
/// down: an examined document is clicked with probability `r`; after a click
/// the user continues with probability `eta_i`, after a non-click always.
pub fn simulate_clicks<R: Rng + ?Sized>(
    relevances: &[f64],
    user: &ClickModelSpec,
    rng: &mut R,
) -> Result<Vec<bool>> {
    user.check_covers(relevances.len())?;
    Ok(draw_clicks(relevances, user, rng))
}

fn draw_clicks<R: Rng + ?Sized>(
    relevances: &[f64],
    user: &ClickModelSpec,
    rng: &mut R,
) -> Vec<bool> {
    match user.variant() {
        ClickModelVariant::DependentClick => {
            let mut examining = true;
            relevances
                .iter()
                .zip(user.eta())
                .map(|(&r, &eta)| {
                    if !examining {
                        return false;
                    }
                    let clicked = rng.gen::<f64>() < r;
                    if clicked {
                        examining = rng.gen::<f64>() < eta;
                    }
                    clicked
                })
                .collect()
        }
        _ => user
            .resolve_unchecked(relevances)
            .iter()
            .zip(relevances)
            .map(|(params, &r)| rng.gen::<f64>() < click_probability(r, params))
            .collect(),
    }
}

#[derive(Clone, Debug)]
pub struct SimulationConfig {
    pub qrels: Qrels,
    pub horizon: usize,
    pub repeats: usize,
    /// Policy settings; its click model is what the policy *believes*.
    pub policy: PolicyConfig,
    /// Click model the simulated users actually follow.
    pub user_model: ClickModelSpec,
    pub seed: u64,
    /// Cutoff for AP normalization and nDCG.
    pub metric_cutoff: usize,
}

impl SimulationConfig {
    /// Policy and users share `click_model`; metrics are cut at the page size.
    pub fn matched(
        qrels: Qrels,
        policy: PolicyConfig,
        horizon: usize,
        repeats: usize,
        seed: u64,
    ) -> Self {
        SimulationConfig {
            user_model: policy.click_model.clone(),
            metric_cutoff: policy.page_size,
            qrels,
            horizon,
            repeats,
            policy,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.repeats == 0 {
            return Err(Error::Config(
                "horizon and repeats must both be at least 1".into(),
            ));
        }
        if self.metric_cutoff == 0 {
            return Err(Error::Config("metric cutoff must be at least 1".into()));
        }
        if self.qrels.is_empty() {
            return Err(Error::Config("no topics to simulate".into()));
        }
        if let Some((id, _)) = self.qrels.topics().find(|(_, j)| j.is_empty()) {
            return Err(Error::Config(format!(
                "topic `{id}` has no judged documents"
            )));
        }
        self.policy.validate()?;
        self.user_model.check_covers(self.policy.page_size)
    }
}

/// Per-step series for one `(topic, repeat)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellTrace {
    pub topic: String,
    pub repeat: usize,
    pub map: Vec<f64>,
    pub ndcg: Vec<f64>,
    pub cumulative_clicks: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationResult {
    pub cells: Vec<CellTrace>,
    /// Mean and variance of the last-step AP over all cells.
    pub final_map: Summary,
    pub final_ndcg: Summary,
    /// Per-step mean over all cells.
    pub mean_map: Vec<f64>,
    pub mean_ndcg: Vec<f64>,
}

pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationResult> {
    config.validate()?;
    let topics: Vec<(&str, &TopicJudgments)> = config.qrels.topics().collect();
    let n_cells = topics.len() * config.repeats;
    let cells = par_map(n_cells, |k| {
        let (topic, judgments) = topics[k / config.repeats];
        run_cell(config, topic, judgments, k % config.repeats, k as u64)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let finals = |f: fn(&CellTrace) -> &Vec<f64>| -> Vec<f64> {
        cells
            .iter()
            .map(|c| *f(c).last().expect("horizon >= 1"))
            .collect()
    };
    let final_map = aggregate(&finals(|c| &c.map))?;
    let final_ndcg = aggregate(&finals(|c| &c.ndcg))?;
    let mean_series = |f: fn(&CellTrace) -> &Vec<f64>| -> Vec<f64> {
        (0..config.horizon)
            .map(|t| cells.iter().map(|c| f(c)[t]).sum::<f64>() / n_cells as f64)
            .collect()
    };
    let mean_map = mean_series(|c| &c.map);
    let mean_ndcg = mean_series(|c| &c.ndcg);
    Ok(SimulationResult {
        cells,
        final_map,
        final_ndcg,
        mean_map,
        mean_ndcg,
    })
}

fn run_cell(
    config: &SimulationConfig,
    topic: &str,
    judgments: &TopicJudgments,
    repeat: usize,
    stream: u64,
) -> Result<CellTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let mut policy = Policy::with_documents(config.policy.clone(), judgments.docs().cloned())?;
    let cutoff = config.metric_cutoff;
    let total_relevant = judgments.total_relevant();
    let ideal = judgments.ideal_grades(cutoff);

    let mut trace = CellTrace {
        topic: topic.to_owned(),
        repeat,
        map: Vec::with_capacity(config.horizon),
        ndcg: Vec::with_capacity(config.horizon),
        cumulative_clicks: Vec::with_capacity(config.horizon),
    };
    let mut grades = Vec::with_capacity(config.policy.page_size);
    let mut relevances = Vec::with_capacity(config.policy.page_size);
    for _ in 0..config.horizon {
        let action = policy.step(|action| {
            grades.clear();
            grades.extend(action.docs.iter().map(|d| judgments.grade(d.as_str())));
            relevances.clear();
            relevances.extend(grades.iter().map(|g| g.relevance()));
            draw_clicks(&relevances, &config.user_model, &mut rng)
        })?;
        debug_assert_eq!(action.len(), grades.len());
        trace
            .map
            .push(average_precision(&grades, total_relevant, cutoff));
        trace.ndcg.push(ndcg_at_k(&grades, cutoff, &ideal));
        trace
            .cumulative_clicks
            .push(policy.state().cumulative_clicks());
    }
    Ok(trace)
}
