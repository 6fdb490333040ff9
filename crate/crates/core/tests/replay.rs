//! Restricted replay over generated logs.

use ierank::click_model::{ClickModelSpec, ClickModelVariant};
use ierank::metrics::JudgedRanking;
use ierank::replay::{
    generate_log, replay_step, run_replay, Arrival, ClickModelSource, LogGenConfig, LoggerPolicy,
    QueryFilter, ReplayConfig, SessionRecord,
};
use ierank::simulator::{gen_topics, Qrels};
use ierank::{DocId, Policy, PolicyConfig};

fn corpus() -> (Qrels, Vec<SessionRecord>) {
    let qrels = gen_topics(4, 30, 6, 0.5, 21).unwrap();
    let log = generate_log(
        &qrels,
        &LogGenConfig {
            sessions: 2000,
            page_size: 10,
            logger: LoggerPolicy::RandomK,
            user_model: ClickModelSpec::default_for(ClickModelVariant::DependentClick, 10),
            seed: 4,
        },
    )
    .unwrap();
    (qrels, log)
}

fn config(variant: ClickModelVariant, training: f64, arrival: Arrival) -> ReplayConfig {
    let mut c = ReplayConfig::new(ClickModelSource::Estimated(variant), 0.1);
    c.training_fraction = training;
    c.arrival = arrival;
    c.filter = QueryFilter {
        min_sessions: 100,
        min_judged: 10,
    };
    c
}

#[test]
fn training_helps_every_model() {
    let (qrels, log) = corpus();
    for variant in ClickModelVariant::ALL {
        let cold = run_replay(&log, &qrels, &config(variant, 0.0, Arrival::Dynamic)).unwrap();
        let warm = run_replay(&log, &qrels, &config(variant, 0.5, Arrival::Dynamic)).unwrap();
        assert!(
            warm.policy_map.mean >= cold.policy_map.mean,
            "{variant}: warm {} < cold {}",
            warm.policy_map.mean,
            cold.policy_map.mean
        );
        assert_eq!(warm.queries[0].training_sessions, 250);
        assert_eq!(warm.queries[0].evals.len(), 250);
    }
}

#[test]
fn best_permutation_bounds_policy_and_data() {
    let (qrels, log) = corpus();
    for arrival in [Arrival::Dynamic, Arrival::Prior] {
        let res = run_replay(
            &log,
            &qrels,
            &config(ClickModelVariant::MixedClick, 0.0, arrival),
        )
        .unwrap();
        for e in res.queries.iter().flat_map(|q| &q.evals) {
            assert!(e.policy_map <= e.best_map && e.data_map <= e.best_map);
            assert!(e.policy_ndcg <= e.best_ndcg + 1e-15 && e.data_ndcg <= e.best_ndcg + 1e-15);
        }
    }
}

#[test]
fn displayed_rankings_are_permutations_of_the_session() {
    let (qrels, log) = corpus();
    let spec = ClickModelSpec::default_for(ClickModelVariant::ExaminationHypothesis, 10);
    let mut policy = Policy::new(PolicyConfig::new(spec, 10, 0.1)).unwrap();
    for s in log.iter().filter(|s| s.query_id == "t01") {
        let shown = replay_step(&mut policy, s, Arrival::Dynamic)
            .unwrap()
            .unwrap();
        let mut a: Vec<&DocId> = shown.docs.iter().collect();
        let mut b: Vec<&DocId> = s.docs.iter().collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        let j = JudgedRanking::new(&shown.docs, qrels.topic("t01").unwrap(), 10);
        assert!((0.0..=1.0).contains(&j.average_precision(10)));
    }
}

#[test]
fn replay_is_deterministic_and_arrival_modes_agree() {
    let (qrels, log) = corpus();
    let dynamic = config(ClickModelVariant::DependentClick, 0.5, Arrival::Dynamic);
    let a = run_replay(&log, &qrels, &dynamic).unwrap();
    assert_eq!(a, run_replay(&log, &qrels, &dynamic).unwrap());
    let prior = run_replay(
        &log,
        &qrels,
        &config(ClickModelVariant::DependentClick, 0.5, Arrival::Prior),
    )
    .unwrap();
    // Only shown documents are ever scored, so loading them early changes nothing.
    assert_eq!(a.policy_map, prior.policy_map);
}
