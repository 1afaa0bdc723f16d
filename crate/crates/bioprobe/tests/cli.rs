//! End-to-end checks of the installed binary: exit-code contract, partial
//! failure handling, provenance records, and the report converter.

use std::path::{Path, PathBuf};
use std::process::Command;

use bioprobe::audio::{write_wav_pcm16, ModelSpec, OutputLayout};
use bioprobe::manifest::{write_manifest, DatasetManifest, LabeledRecording, TaskSpec};

fn bioprobe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bioprobe"))
}

fn write_fixture_manifest(dir: &Path, rows: &[(&str, &str, &str)]) -> PathBuf {
    let recordings = rows
        .iter()
        .map(|(id, uri, label)| LabeledRecording {
            recording_id: id.to_string(),
            audio_uri: uri.to_string(),
            duration_s: 1.0,
            raw_label: label.to_string(),
        })
        .collect();
    let manifest = DatasetManifest::new("cli-fixture", recordings).unwrap();
    let path = dir.join("manifest.csv");
    write_manifest(&path, &manifest).unwrap();
    path
}

fn write_tone(dir: &Path, name: &str, freq: f64, amplitude: f32) -> PathBuf {
    let samples: Vec<f32> = (0..8000)
        .map(|i| amplitude * (2.0 * std::f64::consts::PI * freq * i as f64 / 8000.0).sin() as f32)
        .collect();
    let path = dir.join(name);
    write_wav_pcm16(&path, 8000, &[&samples]).unwrap();
    path
}

fn fixture_model(dir: &Path) -> PathBuf {
    let model = ModelSpec {
        name: "tiny".into(),
        sample_rate_hz: 8000,
        window_s: 0.5,
        embedding_dim: 8,
        output_layout: OutputLayout::Vector,
    };
    let path = dir.join("model.json");
    model.save(&path).unwrap();
    path
}

#[test]
fn help_exits_zero_and_unknown_flags_exit_one() {
    let status = bioprobe().arg("--help").status().unwrap();
    assert_eq!(status.code(), Some(0));

    let status = bioprobe()
        .args(["manifest-validate", "--definitely-not-a-flag"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    let status = bioprobe().status().unwrap();
    assert_eq!(status.code(), Some(1), "missing subcommand is a user error");
}

#[test]
fn manifest_validate_reports_counts_and_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_fixture_manifest(
        dir.path(),
        &[
            ("r1", "a.wav", "orca-SRKW"),
            ("r2", "b.wav", "humpback"),
            ("r3", "c.wav", "orca-TKW"),
        ],
    );
    let task_path = dir.path().join("task.json");
    TaskSpec::dclde_species().save(&task_path).unwrap();

    let output = bioprobe()
        .args(["manifest-validate", "--manifest"])
        .arg(&manifest)
        .arg("--task")
        .arg(&task_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("3 recordings"));
    assert!(stdout.contains("orca: 2"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "not,a,manifest\n1,2,3\n").unwrap();
    let status = bioprobe()
        .args(["manifest-validate", "--manifest"])
        .arg(&bad)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn embed_continues_past_missing_audio_and_writes_run_record() {
    let dir = tempfile::tempdir().unwrap();
    write_tone(dir.path(), "r1.wav", 440.0, 0.4);
    write_tone(dir.path(), "r2.wav", 880.0, 0.2);
    // r3.wav intentionally absent.
    let manifest = write_fixture_manifest(
        dir.path(),
        &[
            ("r1", "r1.wav", "a"),
            ("r2", "r2.wav", "b"),
            ("r3", "r3.wav", "a"),
        ],
    );
    let model = fixture_model(dir.path());
    let store = dir.path().join("out.embs");

    let output = bioprobe()
        .args(["embed", "--manifest"])
        .arg(&manifest)
        .arg("--model-spec")
        .arg(&model)
        .args(["--provider", "synthetic:3", "--store"])
        .arg(&store)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("r3"), "failure listing must name r3:\n{stderr}");

    let loaded = bioprobe::embedding::store_read(&store).unwrap();
    assert_eq!(loaded.len(), 2);
    assert!(loaded.contains("r1") && loaded.contains("r2"));

    let run_record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.embs.run.json")).unwrap())
            .unwrap();
    assert_eq!(run_record["command"], "embed");
    assert_eq!(run_record["parameters"]["embedded"], 2);
    assert!(run_record["inputs"].as_array().unwrap().len() >= 2);

    // Re-running with identical inputs reproduces the store byte for byte.
    let store2 = dir.path().join("out2.embs");
    let status = bioprobe()
        .args(["embed", "--manifest"])
        .arg(&manifest)
        .arg("--model-spec")
        .arg(&model)
        .args(["--provider", "synthetic:3", "--store"])
        .arg(&store2)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(
        std::fs::read(&store).unwrap(),
        std::fs::read(&store2).unwrap()
    );
}

#[test]
fn embed_fails_when_every_recording_fails() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_fixture_manifest(dir.path(), &[("r1", "missing.wav", "a")]);
    let model = fixture_model(dir.path());
    let status = bioprobe()
        .args(["embed", "--manifest"])
        .arg(&manifest)
        .arg("--model-spec")
        .arg(&model)
        .args(["--provider", "synthetic:3", "--store"])
        .arg(dir.path().join("never.embs"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn eval_rejects_empty_k_values_as_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_fixture_manifest(dir.path(), &[("r1", "x.wav", "a"), ("r2", "y.wav", "b")]);
    let task_path = dir.path().join("task.json");
    TaskSpec::identity("t", ["a", "b"]).unwrap().save(&task_path).unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, r#"{"k_values": [], "trials": 5}"#).unwrap();
    let store_path = dir.path().join("empty.embs");
    let store = bioprobe::embedding::EmbeddingStore::new(2);
    bioprobe::embedding::store_write(&store_path, &store).unwrap();

    let output = bioprobe()
        .args(["eval", "--config"])
        .arg(&config_path)
        .arg("--manifest")
        .arg(&manifest)
        .arg("--task")
        .arg(&task_path)
        .arg("--store")
        .arg(format!("m={}", store_path.display()))
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("k_values"), "stderr: {stderr}");
}

#[test]
fn report_converts_json_to_csv() {
    use bioprobe::experiment::{emit_report, ExperimentReport, ReportCell, ReportFormat, TrialRecord};
    use bioprobe::metrics::AucAveraging;

    let dir = tempfile::tempdir().unwrap();
    let report = ExperimentReport {
        master_seed: 1,
        auc_averaging: AucAveraging::Macro,
        cells: vec![ReportCell::from_trials(
            "species".into(),
            "perch".into(),
            8,
            (0..5)
                .map(|trial| TrialRecord {
                    trial,
                    auc_macro: 0.95,
                    per_class: Default::default(),
                })
                .collect(),
            vec![],
            None,
        )],
    };
    let json_dir = dir.path().join("json");
    emit_report(&report, ReportFormat::Json, &json_dir).unwrap();

    let csv_dir = dir.path().join("csv");
    let status = bioprobe()
        .args(["report", "--report"])
        .arg(json_dir.join("report.json"))
        .args(["--format", "csv", "--out"])
        .arg(&csv_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let trials = std::fs::read_to_string(csv_dir.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 6);
    assert!(csv_dir.join("aggregate.csv").exists());
    assert!(csv_dir.join("run.json").exists());
}

#[test]
fn score_pretrained_runs_from_csv_scores() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_fixture_manifest(
        dir.path(),
        &[
            ("r1", "x.wav", "a"),
            ("r2", "x.wav", "b"),
            ("r3", "x.wav", "a"),
            ("r4", "x.wav", "b"),
        ],
    );
    let task_path = dir.path().join("task.json");
    TaskSpec::identity("t", ["a", "b"]).unwrap().save(&task_path).unwrap();
    let scores_path = dir.path().join("scores.csv");
    std::fs::write(
        &scores_path,
        "recording_id,a,b\nr1,0.9,0.1\nr2,0.2,0.8\nr3,0.8,0.2\nr4,0.1,0.9\n",
    )
    .unwrap();

    let out_dir = dir.path().join("out");
    let output = bioprobe()
        .args(["score-pretrained", "--scores"])
        .arg(&scores_path)
        .arg("--manifest")
        .arg(&manifest)
        .arg("--task")
        .arg(&task_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("macro AUC: 1.0000"), "stdout: {stdout}");

    let result: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("pretrained_auc.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(result["macro"], 1.0);
}

#[test]
fn tsne_needs_enough_points() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_fixture_manifest(dir.path(), &[("r1", "x.wav", "a"), ("r2", "x.wav", "b")]);
    let task_path = dir.path().join("task.json");
    TaskSpec::identity("t", ["a", "b"]).unwrap().save(&task_path).unwrap();

    let mut store = bioprobe::embedding::EmbeddingStore::new(4);
    for (id, value) in [("r1", 1.0f32), ("r2", -1.0)] {
        store
            .insert(bioprobe::embedding::RecordingEmbedding {
                recording_id: id.into(),
                vector: vec![value, 0.0, 0.0, 0.0],
                normalized: true,
            })
            .unwrap();
    }
    let store_path = dir.path().join("tiny.embs");
    bioprobe::embedding::store_write(&store_path, &store).unwrap();

    let output = bioprobe()
        .args(["tsne", "--store"])
        .arg(&store_path)
        .arg("--manifest")
        .arg(&manifest)
        .arg("--task")
        .arg(&task_path)
        .arg("--out")
        .arg(dir.path().join("map"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("at least 4"), "stderr: {stderr}");
}
