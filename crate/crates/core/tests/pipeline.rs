use std::fs;
use std::path::Path;

use xdr_mobility::pipeline::{run_all, run_stage, PipelineConfig, PipelineError, Stage};

fn small_config(out: &Path) -> PipelineConfig {
    let mut c = PipelineConfig {
        out: out.to_path_buf(),
        repeats: 2,
        kmeans_restarts: 3,
        forest_trees: 10,
        ..Default::default()
    };
    c.apply_text("seed = 4\nsynth_users = 60\nsynth_cells = 100\nsynth_kappa = 0.8\n")
        .unwrap();
    c
}

#[test]
fn synth_then_full_pipeline_writes_every_report() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path());
    run_stage(Stage::Synth, &c).unwrap();
    run_all(&c).unwrap();
    let out = dir.path();
    assert!(out.join("report.json").exists());
    assert!(out.join("config.resolved").exists());
    let p = out.join("P0");
    for name in [
        "features.csv",
        "popularity.csv",
        "flow.csv",
        "profiles.csv",
        "importance.csv",
        "thresholds.csv",
        "behaviors.csv",
        "split.csv",
        "model.txt",
        "prediction.json",
        "matching.json",
        "report_prediction.csv",
        "report_matching.csv",
        "report_topk.csv",
        "report_discrimination.csv",
        "report_likelihood.csv",
        "report.json",
    ] {
        assert!(p.join(name).exists(), "{name} missing");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    let prov = &report["provinces"]["P0"];
    assert_eq!(prov["test_users"], 12);
    assert_eq!(prov["train_users"], 48);
    let h = prov["discrimination"]["hellinger"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&h));
}

#[test]
fn encode_without_tables_names_the_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path());
    run_stage(Stage::Synth, &c).unwrap();
    run_stage(Stage::Ingest, &c).unwrap();
    let err = run_stage(Stage::Encode, &c).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(
        matches!(&err, PipelineError::MissingArtifact(p) if p.ends_with("popularity.csv")),
        "{err}"
    );
    assert!(err.to_string().contains("popularity.csv"));
}

#[test]
fn missing_raw_input_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path());
    let err = run_stage(Stage::Ingest, &c).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("catalog.csv"));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let c = small_config(d.path());
        run_stage(Stage::Synth, &c).unwrap();
        run_all(&c).unwrap();
    }
    for rel in ["P0/model.txt", "P0/behaviors.csv", "P0/profiles.csv"] {
        assert_eq!(
            fs::read(a.path().join(rel)).unwrap(),
            fs::read(b.path().join(rel)).unwrap(),
            "{rel}"
        );
    }
    let read_report = |p: &Path| fs::read_to_string(p.join("report.json")).unwrap();
    assert_eq!(read_report(a.path()), read_report(b.path()));
    let c = small_config(a.path());
    let before = fs::read(a.path().join("report.json")).unwrap();
    run_all(&c).unwrap();
    assert_eq!(fs::read(a.path().join("report.json")).unwrap(), before);
}

#[test]
fn scoring_flags_apply_at_inference_but_time_mode_needs_retraining() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path());
    run_stage(Stage::Synth, &c).unwrap();
    run_all(&c).unwrap();
    c.set("alpha", "0.5").unwrap();
    run_stage(Stage::Match, &c).unwrap();
    c.set("time_mode", "slot").unwrap();
    let err = run_stage(Stage::Match, &c).unwrap_err();
    assert!(matches!(err, PipelineError::Config(_)), "{err}");
}

#[test]
fn config_text_round_trips() {
    let mut c = PipelineConfig::default();
    c.apply_text("# comment\nalpha = 0.25\nrt_mode = unique\ntime_mode = slot  # trailing\nprovince = P1\n")
        .unwrap();
    let mut d = PipelineConfig::default();
    d.apply_text(&c.to_text()).unwrap();
    assert_eq!(d.alpha, 0.25);
    assert_eq!(d.to_text(), c.to_text());
    assert!(c.set("alpha", "1.5").is_err());
    assert!(c.set("nonsense", "1").is_err());
    assert!(PipelineConfig::default().apply_text("alpha 0.3").is_err());
}
