//! The `ierank` binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ierank::click_model::DEFAULT_DECAY;
use ierank::replay::parse_session_log;
use ierank::simulator::parse_qrels;
use ierank_cli::commands::{generate, replay, simulate};
use ierank_cli::manifest::{Experiment, Manifest, Overrides};
use ierank_cli::output::parse_table;

fn ierank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ierank"))
        .args(args)
        .env_remove("IERANK_WORKERS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = ierank(args);
    assert!(
        out.status.success(),
        "ierank {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_manifest(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

/// Small qrels and a DCM log over them in `dir/data`.
fn small_corpus(dir: &Path, logger: &str, sessions: usize) -> (PathBuf, PathBuf) {
    let data = dir.join("data");
    let qm = write_manifest(
        dir,
        "gen-qrels",
        "experiment = \"gen-qrels\"\ntopics = 3\ndocs = 40\nrelevant = 8\nseed = 5\n",
    );
    ok(&["gen-qrels", "--manifest", &qm, "--out-dir", &s(&data)]);
    let lm = write_manifest(
        dir,
        "gen-log",
        &format!(
            "experiment = \"gen-log\"\nqrels = \"data/qrels.txt\"\nsessions = {sessions}\n\
             logger = \"{logger}\"\nuser_model = \"dcm\"\nseed = 6\n"
        ),
    );
    ok(&["gen-log", "--manifest", &lm, "--out-dir", &s(&data)]);
    (data.join("qrels.txt"), data.join("sessions.tsv"))
}

fn examples_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

#[test]
fn every_example_manifest_parses_and_names_its_experiment() {
    let mut seen = Vec::new();
    for entry in fs::read_dir(examples_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let m = Manifest::load(&path).unwrap();
            seen.push(m.experiment.unwrap());
        }
    }
    for exp in [
        Experiment::Simulate,
        Experiment::Replay,
        Experiment::EstimateParams,
        Experiment::GenQrels,
        Experiment::GenLog,
        Experiment::Eval,
    ] {
        assert!(seen.contains(&exp), "no example for {exp}");
    }
}

#[test]
fn example_pipeline_runs_from_a_copy() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    fs::create_dir(root.join("data")).unwrap();
    for entry in fs::read_dir(examples_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            fs::copy(&path, root.join(path.file_name().unwrap())).unwrap();
        }
    }
    for entry in fs::read_dir(examples_dir().join("data")).unwrap() {
        let path = entry.unwrap().path();
        fs::copy(&path, root.join("data").join(path.file_name().unwrap())).unwrap();
    }
    for exp in ["gen-qrels", "gen-log", "estimate-params", "replay", "eval"] {
        ok(&[exp, "--manifest", &s(&root.join(format!("{exp}.toml")))]);
    }
    assert!(root.join("out/replay/replay_table.txt").is_file());
    assert!(root.join("out/eval/eval.csv").is_file());

    // Too slow to run unoptimized; resolving checks keys and paths.
    for name in ["simulate", "simulate-mismatch"] {
        Manifest::load(&root.join(format!("{name}.toml")))
            .unwrap()
            .resolve(Experiment::Simulate, Overrides::default())
            .unwrap();
    }
}

#[test]
fn worker_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let m = write_manifest(
        root,
        "simulate",
        "experiment = \"simulate\"\ntopics = 2\ndocs = 30\nrelevant = 5\nhorizon = 40\n\
         repeats = 3\nlambdas = [0.0, 0.5]\nper_repeat = true\n",
    );
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let out = root.join(format!("w{workers}"));
        ok(&[
            "simulate",
            "--manifest",
            &m,
            "--workers",
            workers,
            "--out-dir",
            &s(&out),
        ]);
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn simulate_tables_read_back() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let m = write_manifest(
        root,
        "simulate",
        "experiment = \"simulate\"\ntopics = 2\ndocs = 30\nrelevant = 5\nhorizon = 25\n\
         repeats = 2\nmodels = [\"eh\"]\nlambdas = [0.0, 0.1]\nper_repeat = true\n",
    );
    let out = root.join("out");
    ok(&[
        "simulate",
        "--manifest",
        &m,
        "--out-dir",
        &s(&out),
        "--plot",
    ]);

    let steps = parse_table(
        &fs::read(out.join(simulate::STEPS_FILE)).unwrap(),
        simulate::STEPS_SCHEMA,
    )
    .unwrap();
    // 2 lambdas x 2 topics x 25 steps.
    assert_eq!(steps.rows.len(), 100);
    let map = steps.column("map").unwrap();
    for row in &steps.rows {
        let v: f64 = row[map].parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    let runs = parse_table(
        &fs::read(out.join(simulate::RUNS_FILE)).unwrap(),
        simulate::RUNS_SCHEMA,
    )
    .unwrap();
    assert_eq!(runs.rows.len(), 200);

    let summary = parse_table(
        &fs::read(out.join(simulate::SUMMARY_FILE)).unwrap(),
        simulate::SUMMARY_SCHEMA,
    )
    .unwrap();
    assert_eq!(summary.rows.len(), 2);
    assert_eq!(summary.rows[0][summary.column("runs").unwrap()], "4");
    assert!(out.join("plot_map_eh.svg").is_file());
    assert!(out.join(simulate::GRID_FILE).is_file());
}

#[test]
fn static_logger_fills_every_page() {
    let tmp = tempfile::tempdir().unwrap();
    let (qrels, log) = small_corpus(tmp.path(), "static", 1000);
    let sessions = parse_session_log(fs::read(&log).unwrap().as_slice()).unwrap();
    assert_eq!(sessions.len(), 1000);
    assert!(sessions.iter().all(|r| r.docs.len() == 10));

    // Per-rank click rates against the cascade's closed form for each
    // topic's fixed ranking, within three standard errors.
    let qrels = parse_qrels(fs::read(&qrels).unwrap().as_slice())
        .unwrap()
        .qrels;
    let mut expected = [0.0; 10];
    let mut weight = 0.0;
    for (topic, judgments) in qrels.topics() {
        let shown = &sessions.iter().find(|r| r.query_id == topic).unwrap().docs;
        let n = sessions.iter().filter(|r| r.query_id == topic).count() as f64;
        let mut reach = 1.0;
        for (i, d) in shown.iter().enumerate() {
            let r = judgments.relevance(d.as_str());
            expected[i] += n * reach * r;
            reach *= 1.0 - r + DEFAULT_DECAY * r;
        }
        weight += n;
    }
    let rates = parse_table(
        &fs::read(log.with_file_name(generate::CLICK_RATES_FILE)).unwrap(),
        generate::CLICK_RATES_SCHEMA,
    )
    .unwrap();
    let rate = rates.column("rate").unwrap();
    for (i, row) in rates.rows.iter().enumerate() {
        let p = expected[i] / weight;
        let got: f64 = row[rate].parse().unwrap();
        let sigma = (p * (1.0 - p) / weight).sqrt();
        assert!(
            (got - p).abs() <= 3.0 * sigma + 1e-12,
            "rank {}: {got} vs {p}",
            i + 1
        );
    }
}

#[test]
fn replay_default_grid_has_24_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    small_corpus(root, "random-k", 600);
    let m = write_manifest(
        root,
        "replay",
        "experiment = \"replay\"\nqrels = \"data/qrels.txt\"\nlog = \"data/sessions.tsv\"\n\
         min_sessions = 100\nmin_judged = 5\n",
    );
    let out = root.join("out");
    ok(&["replay", "--manifest", &m, "--out-dir", &s(&out)]);
    let summary = parse_table(
        &fs::read(out.join(replay::SUMMARY_FILE)).unwrap(),
        replay::SUMMARY_SCHEMA,
    )
    .unwrap();
    assert_eq!(summary.rows.len(), 24);
    let queries = parse_table(
        &fs::read(out.join(replay::QUERIES_FILE)).unwrap(),
        replay::QUERIES_SCHEMA,
    )
    .unwrap();
    assert_eq!(queries.rows.len(), 24 * 3);
    let table = fs::read_to_string(out.join(replay::TABLE_FILE)).unwrap();
    assert!(table.contains("upper bound") && table.contains("dcm prior"));

    let ub = root.join("ub");
    ok(&[
        "replay",
        "--manifest",
        &m,
        "--out-dir",
        &s(&ub),
        "--upper-bound-only",
    ]);
    assert!(ub.join(replay::UPPER_FILE).is_file());
    assert!(!ub.join(replay::SUMMARY_FILE).exists());
}

#[test]
fn mismatched_ids_fail_without_leaving_output() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let (_, log) = small_corpus(root, "random-k", 300);
    let other = root.join("other.txt");
    fs::write(&other, "x01 0 x01-d1 2\nx01 0 x01-d2 0\n").unwrap();
    let out = root.join("out");
    let res = ierank(&[
        "replay",
        "--qrels",
        &s(&other),
        "--log",
        &s(&log),
        "--out-dir",
        &s(&out),
    ]);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("error:"), "{err}");
    assert!(!out.exists());
}

#[test]
fn manifest_errors_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let unknown = write_manifest(root, "a", "experiment = \"eval\"\ncolour = 1\n");
    let res = ierank(&["eval", "--manifest", &unknown]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("colour"));

    let wrong = write_manifest(root, "b", "experiment = \"replay\"\n");
    let res = ierank(&["simulate", "--manifest", &wrong]);
    assert!(!res.status.success());

    let misplaced = write_manifest(root, "c", "horizon = 10\n");
    let res = ierank(&["gen-qrels", "--manifest", &misplaced]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("horizon"));
}

#[test]
fn estimate_params_reports_every_model_and_rank() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let (qrels, log) = small_corpus(root, "random-k", 600);
    let out = root.join("fit");
    ok(&[
        "estimate-params",
        "--qrels",
        &s(&qrels),
        "--log",
        &s(&log),
        "--out-dir",
        &s(&out),
    ]);
    let report = fs::read_to_string(out.join("fit_report.tsv")).unwrap();
    // Header plus 3 queries x 3 models x 10 ranks.
    assert_eq!(report.lines().count(), 1 + 90);
}
