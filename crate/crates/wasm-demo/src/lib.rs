//! Browser bindings for three interactive views of the library.
//!
//! Each exported function returns a JSON string; `www/index.html` draws it.
//! The plain Rust functions underneath are what the tests exercise.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use ierank::click_model::{click_probability, effective_counts};
use ierank::simulator::{gen_topics, run_simulation, SimulationConfig};
use ierank::{ClickModelSpec, ClickModelVariant, DocumentState, PolicyConfig};

const PAGE: usize = 10;

#[derive(Debug, Serialize)]
pub struct CountCurves {
    pub trust: Vec<f64>,
    pub bias: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Weights a click and a non-click receive at each of the ten ranks when
/// every displayed document is currently estimated at `r_hat`.
pub fn count_curves(variant: &str, r_hat: f64) -> Result<CountCurves, String> {
    let variant = ClickModelVariant::from_str(variant).map_err(|e| e.to_string())?;
    let params = ClickModelSpec::default_for(variant, PAGE)
        .resolve(&[r_hat; PAGE])
        .map_err(|e| e.to_string())?;
    let counts: Vec<_> = params.iter().map(|p| effective_counts(r_hat, p)).collect();
    Ok(CountCurves {
        trust: params.trust(),
        bias: params.bias(),
        alpha: counts.iter().map(|c| c.alpha).collect(),
        beta: counts.iter().map(|c| c.beta).collect(),
    })
}

#[derive(Debug, Serialize)]
pub struct LearningCurves {
    pub map: Vec<f64>,
    pub ndcg: Vec<f64>,
    pub final_map: f64,
    pub final_ndcg: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct SimulationParams {
    pub lambda: f64,
    pub docs: usize,
    pub relevant: usize,
    pub grade2_fraction: f64,
    pub horizon: usize,
    pub repeats: usize,
    pub seed: u64,
}

/// Mean AP and nDCG@10 per step on one synthetic topic, users following the
/// same click model as the policy.
pub fn learning_curves(variant: &str, p: SimulationParams) -> Result<LearningCurves, String> {
    let variant = ClickModelVariant::from_str(variant).map_err(|e| e.to_string())?;
    if p.docs < PAGE {
        return Err(format!("need at least {PAGE} documents"));
    }
    let qrels =
        gen_topics(1, p.docs, p.relevant, p.grade2_fraction, p.seed).map_err(|e| e.to_string())?;
    let policy = PolicyConfig::new(ClickModelSpec::default_for(variant, PAGE), PAGE, p.lambda);
    let config = SimulationConfig::matched(qrels, policy, p.horizon, p.repeats, p.seed);
    let res = run_simulation(&config).map_err(|e| e.to_string())?;
    Ok(LearningCurves {
        map: res.mean_map,
        ndcg: res.mean_ndcg,
        final_map: res.final_map.mean,
        final_ndcg: res.final_ndcg.mean,
    })
}

#[derive(Debug, Serialize)]
pub struct Trajectory {
    /// Bias-corrected estimate after each impression.
    pub estimate: Vec<f64>,
    /// Raw click-through rate after each impression.
    pub ctr: Vec<f64>,
    /// Long-run click rate at this rank.
    pub click_probability: f64,
}

/// One document shown at `rank` on every step, with `above_r` the relevance
/// of every document above it. Returns its estimate next to its raw CTR.
pub fn trajectory(
    variant: &str,
    rank: usize,
    true_r: f64,
    above_r: f64,
    steps: usize,
    seed: u64,
) -> Result<Trajectory, String> {
    let variant = ClickModelVariant::from_str(variant).map_err(|e| e.to_string())?;
    if !(1..=PAGE).contains(&rank) {
        return Err(format!("rank must be in 1..={PAGE}"));
    }
    let spec = ClickModelSpec::default_for(variant, PAGE);
    let with_doc = |r: f64| {
        let mut v = vec![above_r; rank];
        v[rank - 1] = r;
        v
    };
    let truth = spec
        .resolve(&with_doc(true_r))
        .map_err(|e| e.to_string())?
        .at(rank - 1);
    let p_click = click_probability(true_r, truth);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = DocumentState::new(0.5).map_err(|e| e.to_string())?;
    let mut clicks = 0u64;
    let mut out = Trajectory {
        estimate: Vec::with_capacity(steps),
        ctr: Vec::with_capacity(steps),
        click_probability: p_click,
    };
    for n in 1..=steps {
        let params = spec
            .resolve(&with_doc(state.r_hat()))
            .map_err(|e| e.to_string())?
            .at(rank - 1);
        let clicked = rng.gen::<f64>() < p_click;
        clicks += u64::from(clicked);
        state = state.update(clicked, &effective_counts(state.r_hat(), params));
        out.estimate.push(state.r_hat());
        out.ctr.push(clicks as f64 / n as f64);
    }
    Ok(out)
}

fn to_js<T: Serialize>(v: Result<T, String>) -> Result<String, JsError> {
    let v = v.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = countCurves)]
pub fn count_curves_js(variant: &str, r_hat: f64) -> Result<String, JsError> {
    to_js(count_curves(variant, r_hat))
}

#[wasm_bindgen(js_name = learningCurves)]
#[allow(clippy::too_many_arguments)]
pub fn learning_curves_js(
    variant: &str,
    lambda: f64,
    docs: u32,
    relevant: u32,
    grade2_fraction: f64,
    horizon: u32,
    repeats: u32,
    seed: u32,
) -> Result<String, JsError> {
    to_js(learning_curves(
        variant,
        SimulationParams {
            lambda,
            docs: docs as usize,
            relevant: relevant as usize,
            grade2_fraction,
            horizon: horizon as usize,
            repeats: repeats as usize,
            seed: u64::from(seed),
        },
    ))
}

#[wasm_bindgen(js_name = trajectory)]
pub fn trajectory_js(
    variant: &str,
    rank: u32,
    true_r: f64,
    above_r: f64,
    steps: u32,
    seed: u32,
) -> Result<String, JsError> {
    to_js(trajectory(
        variant,
        rank as usize,
        true_r,
        above_r,
        steps as usize,
        u64::from(seed),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_click_counts_move_in_opposite_directions() {
        let c = count_curves("mc", 0.4).unwrap();
        assert_eq!(c.alpha.len(), PAGE);
        assert!(c.alpha.windows(2).all(|w| w[1] > w[0]));
        assert!(c.beta.windows(2).all(|w| w[1] < w[0]));
        assert!(count_curves("nope", 0.4).is_err());
        assert!(count_curves("eh", 1.5).is_err());
    }

    #[test]
    fn curves_span_the_horizon() {
        let p = SimulationParams {
            lambda: 0.1,
            docs: 30,
            relevant: 5,
            grade2_fraction: 0.5,
            horizon: 40,
            repeats: 2,
            seed: 3,
        };
        let c = learning_curves("dcm", p).unwrap();
        assert_eq!(c.map.len(), 40);
        assert_eq!(c.final_map, c.map[39]);
        assert!(c.ndcg.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(learning_curves("dcm", SimulationParams { docs: 5, ..p }).is_err());
    }

    #[test]
    fn estimate_undoes_position_bias_that_ctr_keeps() {
        let t = trajectory("eh", 5, 0.6, 0.5, 4000, 9).unwrap();
        // Examination at rank 5 is 0.8^4, so the raw rate sits near 0.25.
        assert!((t.click_probability - 0.6 * 0.8f64.powi(4)).abs() < 1e-12);
        let last = t.estimate.len() - 1;
        assert!((t.ctr[last] - t.click_probability).abs() < 0.03);
        assert!(t.estimate[last] > t.ctr[last] + 0.1);
        assert!(trajectory("eh", 11, 0.6, 0.5, 10, 0).is_err());
    }

    #[test]
    fn json_shape() {
        let json = serde_json::to_string(&count_curves("dcm", 0.5).unwrap()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["trust"][0], 1.0);
        assert_eq!(v["alpha"].as_array().unwrap().len(), PAGE);
    }
}
