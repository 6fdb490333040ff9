//! EM fits on seeded synthetic histories.

use ierank::em::{em_fit, em_fit_ranks, EmOptions, MixtureParams, RankClickHistory, RankMixture};
use ierank::DocId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent mixture log-likelihood.
fn oracle_ll(params: &MixtureParams, histories: &[RankClickHistory]) -> f64 {
    let mut ll = 0.0;
    for h in histories {
        let m = params.ranks[&h.rank];
        for (doc, c) in &h.observations {
            let r = params.r[doc];
            let p_click = r * m.pi + m.b * (1.0 - m.pi);
            ll += if *c {
                p_click.ln()
            } else {
                (1.0 - p_click).ln()
            };
        }
    }
    ll
}

/// 200 observations of 4 documents at one rank.
fn synthetic_history(seed: u64) -> RankClickHistory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let true_r: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..0.95)).collect();
    let b = rng.gen_range(0.05..0.6);
    let pi = rng.gen_range(0.3..0.95);
    let observations = (0..200)
        .map(|_| {
            let d = rng.gen_range(0..4);
            let p = true_r[d] * pi + b * (1.0 - pi);
            (DocId::new(format!("d{d}")), rng.gen::<f64>() < p)
        })
        .collect();
    RankClickHistory {
        rank: 1,
        observations,
    }
}

/// Every parameter nudged by +-0.01 on its own, kept inside [0, 1].
fn grid_neighbors(params: &MixtureParams) -> Vec<MixtureParams> {
    let mut out = Vec::new();
    for step in [-0.01, 0.01] {
        for doc in params.r.keys() {
            let mut p = params.clone();
            let v = p.r.get_mut(doc).unwrap();
            *v = (*v + step).clamp(0.0, 1.0);
            out.push(p);
        }
        for (&rank, m) in &params.ranks {
            for nudge_b in [true, false] {
                let mut p = params.clone();
                let RankMixture { b, pi } = *m;
                let next = if nudge_b {
                    RankMixture {
                        b: (b + step).clamp(0.0, 1.0),
                        pi,
                    }
                } else {
                    RankMixture {
                        b,
                        pi: (pi + step).clamp(0.0, 1.0),
                    }
                };
                p.ranks.insert(rank, next);
                out.push(p);
            }
        }
    }
    out
}

#[test]
fn likelihood_never_decreases_and_beats_grid_neighbors() {
    for seed in 0..50 {
        let h = synthetic_history(seed);
        let fit = em_fit(&h, &EmOptions::default()).unwrap();
        for w in fit.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "seed {seed}: {} -> {}", w[0], w[1]);
        }
        let hs = std::slice::from_ref(&h);
        let ll = oracle_ll(&fit.params, hs);
        assert!((ll - fit.log_likelihood).abs() < 1e-9, "seed {seed}");
        for n in grid_neighbors(&fit.params) {
            let other = oracle_ll(&n, hs);
            assert!(ll >= other - 1e-6, "seed {seed}: {ll} < {other} at {n:?}");
        }
    }
}

#[test]
fn joint_fit_over_ranks_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let histories: Vec<RankClickHistory> = (1..=3)
        .map(|rank| {
            let b = 0.3 / rank as f64;
            RankClickHistory {
                rank,
                observations: (0..150)
                    .map(|_| {
                        let d = rng.gen_range(0..5);
                        let p = 0.15 * d as f64 * 0.7 + b * 0.3;
                        (DocId::new(format!("d{d}")), rng.gen::<f64>() < p)
                    })
                    .collect(),
            }
        })
        .collect();
    let fit = em_fit_ranks(&histories, &EmOptions::default()).unwrap();
    assert!(fit.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    assert_eq!(fit.params.ranks.len(), 3);
    assert!((oracle_ll(&fit.params, &histories) - fit.log_likelihood).abs() < 1e-9);
}

#[test]
fn single_document_reaches_the_click_rate() {
    let observations = (0..40).map(|i| (DocId::from("x"), i % 5 == 0)).collect();
    let fit = em_fit(
        &RankClickHistory {
            rank: 2,
            observations,
        },
        &EmOptions::default(),
    )
    .unwrap();
    let m = fit.rank(2).unwrap();
    let p = fit.r("x").unwrap() * m.pi + m.b * (1.0 - m.pi);
    assert!((p - 0.2).abs() < 1e-12);
}
