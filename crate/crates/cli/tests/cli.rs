use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Runs from the workspace root so default data paths resolve.
fn todsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_todsim"))
        .args(args)
        .current_dir(workspace())
        .env_remove("DIALOGIC_API_KEY")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn simulate_mock(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["simulate", "--backend", "mock", "--num", "5", "--seed", "11", "--output", p(&out)];
    args.extend_from_slice(extra);
    let res = todsim(&args);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    out
}

#[test]
fn replay_reproduces_recorded_run_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let transcript = dir.path().join("t.jsonl");
    let recorded = simulate_mock(dir.path(), "rec.json", &["--record", p(&transcript)]);
    let mut outputs = Vec::new();
    for name in ["r1.json", "r2.json"] {
        let path = dir.path().join(name);
        let res = todsim(&[
            "simulate",
            "--backend",
            "replay",
            "--transcript",
            p(&transcript),
            "--num",
            "5",
            "--seed",
            "11",
            "--output",
            p(&path),
        ]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        outputs.push(std::fs::read(path).unwrap());
    }
    let original = std::fs::read(recorded).unwrap();
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], original);
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let one = simulate_mock(dir.path(), "w1.json", &["--workers", "1"]);
    let four = simulate_mock(dir.path(), "w4.json", &["--workers", "4"]);
    assert_eq!(std::fs::read(one).unwrap(), std::fs::read(four).unwrap());
}

#[test]
fn simulated_corpus_validates_and_has_stats() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = simulate_mock(dir.path(), "c.json", &[]);
    let res = todsim(&["validate", p(&corpus)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stdout));

    let res = todsim(&["stats", "--json", p(&corpus)]);
    assert_eq!(code(&res), 0);
    let stats: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(stats["total_dialogues"], 5);
    assert!(stats["total_turns"].as_u64().unwrap() >= 5);
}

#[test]
fn corrupted_corpus_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = simulate_mock(dir.path(), "c.json", &[]);
    let mut doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&corpus).unwrap()).unwrap();
    let turn = &mut doc["dialogues"][0]["turns"][0];
    // A value outside the ontology, and a belief the utterance no longer expresses.
    let belief = turn["belief"].as_object_mut().unwrap();
    let (domain, _) = belief.iter().next().map(|(k, v)| (k.clone(), v.clone())).unwrap();
    belief[&domain] = serde_json::json!({"area": "purple"});
    turn["user"] = serde_json::json!("hello there");
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&doc).unwrap()).unwrap();

    let res = todsim(&["validate", "--json", p(&bad)]);
    assert_eq!(code(&res), 1);
    let report: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report["ok"], false);
    let checks: Vec<&str> =
        report["report"]["violations"].as_array().unwrap().iter().map(|v| v["check"].as_str().unwrap()).collect();
    assert!(checks.contains(&"load"), "{checks:?}");
}

#[test]
fn zero_num_is_a_usage_error() {
    let res = todsim(&["simulate", "--backend", "mock", "--num", "0"]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("--num"));
}

#[test]
fn live_backend_without_key_names_the_variable() {
    let res = todsim(&["simulate", "--num", "1"]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("DIALOGIC_API_KEY"), "{}", stderr(&res));
}

#[test]
fn missing_inputs_name_their_flag() {
    let res = todsim(&["simulate", "--backend", "mock", "--ontology", "/nonexistent/ontology.json"]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("--ontology"));

    let res = todsim(&["simulate", "--backend", "replay"]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("--transcript"));

    let res = todsim(&["simulate", "--backend", "mock", "--decode-preset", "greedy"]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("--decode-preset"));
}

#[test]
fn unmatched_replay_is_a_backend_failure() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let res = todsim(&["simulate", "--backend", "replay", "--transcript", p(&empty), "--num", "2"]);
    assert_eq!(code(&res), 3, "{}", stderr(&res));
}

#[test]
fn unparseable_completions_produce_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let transcript = dir.path().join("t.jsonl");
    simulate_mock(dir.path(), "c.json", &["--record", p(&transcript)]);
    let garbled: String = std::fs::read_to_string(&transcript)
        .unwrap()
        .lines()
        .map(|l| {
            let mut r: serde_json::Value = serde_json::from_str(l).unwrap();
            r["completion"] = serde_json::json!("garbage");
            format!("{r}\n")
        })
        .collect();
    std::fs::write(&transcript, garbled).unwrap();
    let res =
        todsim(&["simulate", "--backend", "replay", "--transcript", p(&transcript), "--num", "5", "--seed", "11"]);
    assert_eq!(code(&res), 4, "{}", stderr(&res));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"backend": {"kind": "mock", "mock_mode": "never_bye"}, "generation": {"max_turns": 3}, "seed": 5}"#,
    )
    .unwrap();
    let turns_per_dialogue = |extra: &[&str]| {
        let out = dir.path().join("c.json");
        let mut args = vec!["simulate", "--config", p(&cfg), "--num", "2", "--output", p(&out)];
        args.extend_from_slice(extra);
        let res = todsim(&args);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap();
        doc["dialogues"].as_array().unwrap().iter().map(|d| d["turns"].as_array().unwrap().len()).collect::<Vec<_>>()
    };
    assert_eq!(turns_per_dialogue(&[]), [3, 3]);
    assert_eq!(turns_per_dialogue(&["--max-turns", "2"]), [2, 2]);
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"bakend": "mock"}"#).unwrap();
    let res = todsim(&["simulate", "--config", p(&cfg)]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("--config"));
}

#[test]
fn augment_dst_writes_augmented_turns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("aug.json");
    let res = todsim(&["augment-dst", "--backend", "mock", "--seed", "3", "--json", "--output", p(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let report: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    let accepted = report["accepted"].as_u64().unwrap();
    assert!(accepted > 0);
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(doc["dialogues"].as_array().unwrap().len() as u64, accepted);

    let res = todsim(&["validate", p(&out)]);
    assert_ne!(code(&res), 2, "{}", stderr(&res));
}
