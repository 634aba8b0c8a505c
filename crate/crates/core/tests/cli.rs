use std::path::Path;
use std::process::Command;

use meterbench::cli::{self, RunManifest, ScoreFile, Summary};
use meterbench::review::{BlindingKey, ResponseStore, ReviewPacket, ReviewResponse};
use meterbench::Error;

fn run(args: &[&str]) -> meterbench::Result<()> {
    let mut argv = vec!["meterbench".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    cli::run(&argv)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn response(packet_id: &str, entry_id: &str, score: u8) -> ReviewResponse {
    ReviewResponse {
        reviewer_token: "reviewer-1".into(),
        packet_id: packet_id.into(),
        entry_id: entry_id.into(),
        c1: score,
        c2: score,
        c3: score,
        c4: score,
        c5: score,
        c6: score,
        c7: score,
        c8: score,
        c9: score,
        c10: score,
    }
}

#[test]
fn full_workflow_produces_final_scores() {
    let root = tempfile::tempdir().unwrap();
    let (data, out) = (root.path().join("data"), root.path().join("run"));
    run(&["gen", "--out", p(&data), "--meters", "30", "--seed", "6"]).unwrap();
    for f in ["readings.csv", "weather.csv", "survey.csv", "ground_truth.csv", "manifest.gen.json"] {
        assert!(data.join(f).exists(), "{f} missing");
    }
    run(&["prep", "--data", p(&data), "--out", p(&out), "--pipeline", "sr"]).unwrap();
    assert!(out.join("monthly_sr.csv").exists() && out.join("daily_sr.csv").exists());

    run(&["predict", "--data", p(&data), "--out", p(&out), "--pipeline", "naive", "--pipeline", "sr"]).unwrap();
    run(&["score", "--data", p(&data), "--out", p(&out)]).unwrap();
    let scores: ScoreFile = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    let ids: Vec<&str> = scores.leaderboard.iter().map(|r| r.pipeline_id.as_str()).collect();
    assert_eq!(ids.len(), 2);
    assert!(ids.contains(&"naive") && ids.contains(&"sr"));

    let finalists = ["--pipeline", "naive", "--pipeline", "sr"];
    let mut explain = vec!["explain", "--data", p(&data), "--out", p(&out), "--sample", "10"];
    explain.extend(finalists);
    run(&explain).unwrap();
    let mut pack = vec!["pack", "--data", p(&data), "--out", p(&out), "--packet-id", "panel"];
    pack.extend(finalists);
    run(&pack).unwrap();

    let packet = ReviewPacket::read(&out.join("packet.json")).unwrap();
    let key = BlindingKey::read(&out.join("blinding_key.json")).unwrap();
    assert_eq!(packet.entries.len(), 2 * 10 * 4);
    let store = ResponseStore::open(&out.join("responses.jsonl")).unwrap();
    for e in &packet.entries {
        let score = if e.label == "A" { 5 } else { 3 };
        store.submit(&packet, response("panel", &e.entry_id, score)).unwrap();
    }
    drop(store);

    run(&["report", "--out", p(&out)]).unwrap();
    let summary: Summary = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.final_scores.len(), 2);
    for row in &summary.final_scores {
        let total = scores
            .leaderboard
            .iter()
            .find(|r| r.pipeline_id == row.pipeline_id)
            .unwrap()
            .total_rae;
        let mean_c = if key.labels["A"] == row.pipeline_id { 5.0 } else { 3.0 };
        let expected = 10.0 * (0.5 * (1.0 - total / 2.0).max(0.0) + 0.5 * (mean_c - 1.0) / 4.0);
        assert!((row.score - expected).abs() < 1e-12, "{}: {} vs {expected}", row.pipeline_id, row.score);
    }
    let md = std::fs::read_to_string(out.join("summary.md")).unwrap();
    assert!(md.contains("## Interpretability scores") && md.contains("| Contestants | C1 |"));

    for command in ["predict", "score", "explain", "pack", "report"] {
        let m = RunManifest::read(&out.join(RunManifest::file_name(command))).unwrap();
        assert_eq!(m.command, command);
        assert!(m.changed_outputs().unwrap().is_empty(), "{command}");
    }
}

#[test]
fn manifest_detects_modified_outputs() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    run(&["gen", "--out", p(&data), "--meters", "12", "--seed", "2"]).unwrap();
    let m = RunManifest::read(&data.join(RunManifest::file_name("gen"))).unwrap();
    assert!(m.changed_outputs().unwrap().is_empty());
    std::fs::write(data.join("survey.csv"), "tampered\n").unwrap();
    assert_eq!(m.changed_outputs().unwrap(), vec![data.join("survey.csv")]);
}

#[test]
fn score_without_truth_is_a_missing_input() {
    let root = tempfile::tempdir().unwrap();
    let (data, out) = (root.path().join("data"), root.path().join("run"));
    run(&["gen", "--out", p(&data), "--meters", "12", "--seed", "3"]).unwrap();
    run(&["predict", "--data", p(&data), "--out", p(&out)]).unwrap();
    std::fs::remove_file(data.join("ground_truth.csv")).unwrap();
    match run(&["score", "--data", p(&data), "--out", p(&out)]) {
        Err(Error::MissingInput(path)) => assert!(path.ends_with("ground_truth.csv")),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unknown_pipeline_and_bad_flags_are_rejected() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    run(&["gen", "--out", p(&data), "--meters", "12", "--seed", "3"]).unwrap();
    let err = run(&["predict", "--data", p(&data), "--out", p(root.path()), "--pipeline", "bogus"]).unwrap_err();
    assert!(matches!(err, Error::UnknownPipeline(ref n) if n == "bogus"), "{err}");
    assert!(matches!(run(&["predict", "--frobnicate"]), Err(Error::InvalidConfig(_))));
}

#[test]
fn binary_reports_errors_with_exit_status() {
    let root = tempfile::tempdir().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_meterbench"))
        .args(["score", "--data", p(root.path()), "--out", p(root.path())])
        .env("METERBENCH_LOG", "off")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.starts_with("error:"), "{stderr}");
}
