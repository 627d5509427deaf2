use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cinepipe(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cinepipe")).arg("--store").arg(store).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn plan_is_deterministic_and_balanced() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let a = ok(&cinepipe(&store, &["plan", "--n", "26", "--seed", "5"]));
    let b = ok(&cinepipe(&store, &["plan", "--n", "26", "--seed", "5"]));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 26);
    let out = dir.path().join("plan.jsonl");
    let report: Value = serde_json::from_str(&ok(&cinepipe(
        &store,
        &["plan", "--n", "26", "--seed", "5", "--out", out.to_str().unwrap()],
    )))
    .unwrap();
    assert_eq!(std::fs::read_to_string(&out).unwrap(), a);
    assert!(report["genre"]["max_deviation"].as_u64().unwrap() <= 1);
}

#[test]
fn batch_then_export() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let plan = dir.path().join("plan.jsonl");
    ok(&cinepipe(&store, &["plan", "--n", "3", "--seed", "1", "--out", plan.to_str().unwrap()]));
    let report: Value =
        serde_json::from_str(&ok(&cinepipe(&store, &["batch", plan.to_str().unwrap(), "--parallelism", "2"]))).unwrap();
    assert_eq!((report["total"].as_u64(), report["finals"].as_u64()), (Some(3), Some(3)));

    let manifest = dir.path().join("manifest.jsonl");
    let balance = dir.path().join("balance.json");
    ok(&cinepipe(&store, &["export", "--out", manifest.to_str().unwrap(), "--balance-out", balance.to_str().unwrap()]));
    let text = std::fs::read_to_string(&manifest).unwrap();
    assert_eq!(text.lines().count(), 3);
    for line in text.lines() {
        let e: Value = serde_json::from_str(line).unwrap();
        assert_eq!(e["keyframes"].as_array().unwrap().len(), e["triplets"].as_array().unwrap().len() + 1);
    }
    let balance: Value = serde_json::from_str(&std::fs::read_to_string(&balance).unwrap()).unwrap();
    assert!(balance.get("genre").is_some());

    // everything is final, so resume has nothing left to change
    let resumed: Value = serde_json::from_str(&ok(&cinepipe(&store, &["resume"]))).unwrap();
    assert_eq!(resumed.as_array().unwrap().len(), 0);
}

#[test]
fn run_registers_from_plan() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let plan = dir.path().join("plan.jsonl");
    ok(&cinepipe(&store, &["plan", "--n", "1", "--seed", "9", "--out", plan.to_str().unwrap()]));
    let runs: Value = serde_json::from_str(&ok(&cinepipe(&store, &["run", "--plan", plan.to_str().unwrap()]))).unwrap();
    assert_eq!(runs[0]["stage"], "final");
    assert!(runs[0]["total_frames"].as_u64().unwrap() > 0);
    assert!(!cinepipe(&store, &["run", "missing-run"]).status.success());
}

#[test]
fn mock_gen_round_trips_through_transition() {
    let dir = tempfile::tempdir().unwrap();
    let tracks = dir.path().join("tracks.json");
    let truth = dir.path().join("truth.json");
    ok(&cinepipe(
        dir.path(),
        &[
            "mock-gen",
            "--stall-a",
            "4",
            "--stall-b",
            "2",
            "--len-a",
            "30",
            "--len-b",
            "30",
            "--out",
            tracks.to_str().unwrap(),
            "--truth-out",
            truth.to_str().unwrap(),
        ],
    ));
    let summary: Value =
        serde_json::from_str(&ok(&cinepipe(dir.path(), &["transition", tracks.to_str().unwrap(), "--frames", "10"])))
            .unwrap();
    assert_eq!((summary["cut_a"].as_u64(), summary["cut_b"].as_u64()), (Some(4), Some(2)));
    assert_eq!(summary["total_frames"].as_u64(), Some(30 - 4 + 10 + 30 - 2));
    let truth: Value = serde_json::from_str(&std::fs::read_to_string(&truth).unwrap()).unwrap();
    assert_eq!(truth["stall_a"], 4);
}

#[test]
fn transition_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = cinepipe(dir.path(), &["transition", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("track"));
    let example = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/example_tracks.json");
    assert!(!cinepipe(dir.path(), &["transition", example.to_str().unwrap(), "--window", "31"]).status.success());
}

#[test]
fn eval_verbs() {
    let dir = tempfile::tempdir().unwrap();
    let w = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p.to_str().unwrap().to_string()
    };
    let ratings = w(
        "ratings.jsonl",
        r#"{"evaluator_id":"a","item_id":"1","method_id":"guided","metric_id":"smooth","score":4}
{"evaluator_id":"b","item_id":"1","method_id":"guided","metric_id":"smooth","score":5}
"#,
    );
    let v: Value = serde_json::from_str(&ok(&cinepipe(dir.path(), &["eval", "ratings", &ratings]))).unwrap();
    assert_eq!(v[0]["summary"]["mean"], 4.5);

    let labels = w(
        "labels.jsonl",
        r#"{"item_id":"1","field":"genre","correct":true}
{"item_id":"2","field":"genre","correct":false}
"#,
    );
    let v: Value = serde_json::from_str(&ok(&cinepipe(dir.path(), &["eval", "accuracy", &labels]))).unwrap();
    assert_eq!(v["genre"], 50.0);

    let ranks = w(
        "ranks.jsonl",
        r#"{"evaluator_id":"a","item_id":"1","ranking":["x","y"]}
{"evaluator_id":"b","item_id":"1","ranking":["y","x"]}
{"evaluator_id":"c","item_id":"1","ranking":["y","x"]}
{"evaluator_id":"d","item_id":"1","ranking":["y","x"]}
"#,
    );
    let v: Value = serde_json::from_str(&ok(&cinepipe(dir.path(), &["eval", "win-rate", &ranks]))).unwrap();
    assert_eq!((v["x"].as_f64(), v["y"].as_f64()), (Some(25.0), Some(75.0)));

    let truth = r#"{"genre":"horror","subject_count":"single","dynamicity":"static","shot_count":"1"}"#;
    let wrong = r#"{"genre":"comedy","subject_count":"single","dynamicity":"static","shot_count":"1"}"#;
    let audit = w(
        "audit.jsonl",
        &format!(
            "{{\"model\":\"m\",\"sample_id\":\"1\",\"truth\":{truth},\"votes\":[{truth}]}}\n\
             {{\"model\":\"m\",\"sample_id\":\"2\",\"truth\":{truth},\"votes\":[{wrong}]}}\n"
        ),
    );
    let v: Value = serde_json::from_str(&ok(&cinepipe(dir.path(), &["eval", "audit", &audit]))).unwrap();
    assert_eq!(v[0]["model"], "m");
    assert_eq!(v[0]["fields"]["genre"]["accuracy"], 50.0);
    assert_eq!(v[0]["average_display"], 87.5);

    let empty = w("empty.jsonl", "");
    assert!(!cinepipe(dir.path(), &["eval", "win-rate", &empty]).status.success());
}
