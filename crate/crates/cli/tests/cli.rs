use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn mmseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmseg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &Path, value: Value) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, value.to_string()).unwrap();
    path
}

fn quick_config(dir: &Path, k: usize) -> PathBuf {
    write_config(
        dir,
        json!({
            "dcca": {"visual_hidden": [8], "language_hidden": [8], "k": 3, "epochs": 5},
            "window": 4,
            "hsmm": {"states": 4, "sweeps": 4},
            "synth": {"t": 240, "k": k, "d_v": 8, "d_l": 4, "min_len": 60}
        }),
    )
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn seg_file(dir: &Path, name: &str, duration: f64, boundaries: &[f64]) -> PathBuf {
    let path = dir.join(name);
    let v = json!({"format_version": 1, "video_id": "v", "duration_s": duration, "boundaries_s": boundaries});
    fs::write(&path, v.to_string()).unwrap();
    path
}

#[test]
fn synth_writes_all_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = quick_config(tmp.path(), 3);
    let out = tmp.path().join("video");
    let o = mmseg(&["synth", "--config", p(&cfg), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.json", "visual.lsg", "language.lsg", "truth.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let truth = read_json(&out.join("truth.json"));
    assert_eq!(truth["boundaries_s"].as_array().unwrap().len(), 2);
}

#[test]
fn single_segment_truth_is_empty() {
    let tmp = TempDir::new().unwrap();
    let cfg = quick_config(tmp.path(), 1);
    let out = tmp.path().join("video");
    assert!(mmseg(&["synth", "--config", p(&cfg), "--out", p(&out)])
        .status
        .success());
    assert_eq!(
        read_json(&out.join("truth.json"))["boundaries_s"],
        json!([])
    );
}

#[test]
fn unwritable_output_exits_with_io_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = quick_config(tmp.path(), 2);
    // a regular file cannot act as a parent directory
    let blocker = tmp.path().join("blocker");
    fs::write(&blocker, b"x").unwrap();
    let o = mmseg(&[
        "synth",
        "--config",
        p(&cfg),
        "--out",
        p(&blocker.join("video")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn config_errors_exit_with_code_one() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), json!({"hsmm": {"statez": 3}}));
    let o = mmseg(&[
        "synth",
        "--config",
        p(&cfg),
        "--out",
        p(&tmp.path().join("v")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(mmseg(&["segment", "--bogus"]).status.code(), Some(1));
}

#[test]
fn segment_is_byte_identical_per_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = quick_config(tmp.path(), 2);
    let video = tmp.path().join("video");
    assert!(mmseg(&["synth", "--config", p(&cfg), "--out", p(&video)])
        .status
        .success());
    let manifest = video.join("manifest.json");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let o = mmseg(&[
            "segment",
            "--config",
            p(&cfg),
            "--manifest",
            p(&manifest),
            "--out",
            p(&out),
            "--seed",
            "7",
            "--signals",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(out.join("synth-0.json")).unwrap());
        let diag = read_json(&out.join("synth-0.diagnostics.json"));
        assert_eq!(diag["gibbs"]["log_joint"].as_array().unwrap().len(), 4);
        assert_eq!(
            read_json(&out.join("synth-0.signals.json"))
                .as_array()
                .unwrap()
                .len(),
            240
        );
    }
    assert_eq!(outputs[0], outputs[1]);
    let seg = read_json(&tmp.path().join("a").join("synth-0.json"));
    assert_eq!(seg["format_version"], 1);
    assert_eq!(seg["duration_s"], 240.0);
}

#[test]
fn segment_modalities_and_channels() {
    let tmp = TempDir::new().unwrap();
    let cfg = quick_config(tmp.path(), 2);
    let video = tmp.path().join("video");
    assert!(mmseg(&["synth", "--config", p(&cfg), "--out", p(&video)])
        .status
        .success());
    let manifest = video.join("manifest.json");
    for extra in [
        ["--modality", "visual"],
        ["--modality", "language"],
        ["--channels", "gwd"],
    ] {
        let out = tmp.path().join(extra[1]);
        let mut args = vec![
            "segment",
            "--config",
            p(&cfg),
            "--manifest",
            p(&manifest),
            "--out",
            p(&out),
        ];
        args.extend(extra);
        let o = mmseg(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join("synth-0.json").exists());
    }
    let o = mmseg(&[
        "segment",
        "--manifest",
        p(&manifest),
        "--out",
        p(tmp.path()),
        "--channels",
        "audio",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn stage_errors_name_the_stage() {
    let tmp = TempDir::new().unwrap();
    let cfg = quick_config(tmp.path(), 2);
    let video = tmp.path().join("video");
    assert!(mmseg(&["synth", "--config", p(&cfg), "--out", p(&video)])
        .status
        .success());
    fs::remove_file(video.join("visual.lsg")).unwrap();
    let o = mmseg(&[
        "segment",
        "--config",
        p(&cfg),
        "--manifest",
        p(&video.join("manifest.json")),
        "--out",
        p(&tmp.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("load"));
}

#[test]
fn corpus_checkpoint_round_trip_through_segment() {
    let tmp = TempDir::new().unwrap();
    let cfg = quick_config(tmp.path(), 2);
    let video = tmp.path().join("video");
    assert!(mmseg(&["synth", "--config", p(&cfg), "--out", p(&video)])
        .status
        .success());
    let other = tmp.path().join("other");
    assert!(mmseg(&[
        "synth",
        "--config",
        p(&cfg),
        "--seed",
        "5",
        "--out",
        p(&other)
    ])
    .status
    .success());
    let manifest = video.join("manifest.json");
    let ckpt = tmp.path().join("ckpt");
    // two manifests train one corpus-wide pair of transforms
    let o = mmseg(&[
        "train-dcca",
        "--config",
        p(&cfg),
        "--manifest",
        p(&manifest),
        "--manifest",
        p(&other.join("manifest.json")),
        "--out",
        p(&ckpt),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // weights are stored at f32 precision, so compare two runs from the checkpoint
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let o = mmseg(&[
            "segment",
            "--config",
            p(&cfg),
            "--manifest",
            p(&manifest),
            "--out",
            p(&out),
            "--dcca-checkpoint",
            p(&ckpt),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(out.join("synth-0.json")).unwrap());
        assert!(
            read_json(&out.join("synth-0.diagnostics.json"))["dcca_trace"]
                .as_array()
                .unwrap()
                .is_empty()
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn eval_identity_gives_ones() {
    let tmp = TempDir::new().unwrap();
    let truth = seg_file(tmp.path(), "truth.json", 400.0, &[100.0, 250.0]);
    let o = mmseg(&[
        "eval",
        "--truth",
        p(&truth),
        "--pred",
        p(&truth),
        "--omega",
        "30",
    ]);
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "video_id,omega_t,tp,fp,fn,precision,recall,f1");
    assert_eq!(lines[1], "v,30.0,2,0,0,1.0,1.0,1.0");
}

#[test]
fn eval_sweep_rows_and_plot_data() {
    let tmp = TempDir::new().unwrap();
    let truth = seg_file(tmp.path(), "truth.json", 600.0, &[130.0, 290.0]);
    let pred = seg_file(tmp.path(), "pred.json", 600.0, &[100.0, 200.0]);
    let csv_path = tmp.path().join("m.csv");
    let plot = tmp.path().join("plot.json");
    let o = mmseg(&[
        "eval",
        "--truth",
        p(&truth),
        "--pred",
        p(&pred),
        "--omega",
        "30,60,90,120,150,180",
        "--out",
        p(&csv_path),
        "--plot-json",
        p(&plot),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let tps: Vec<usize> = reader
        .records()
        .map(|r| r.unwrap()[2].parse().unwrap())
        .collect();
    assert_eq!(tps.len(), 6);
    assert!(tps.windows(2).all(|w| w[0] <= w[1]));
    let plot = read_json(&plot);
    // omega = 60: one of two boundaries matched on each side
    assert_eq!(plot["series"][0]["f1"][1], 0.5);
    assert_eq!(plot["format_version"], 1);
}

#[test]
fn eval_rejects_malformed_files() {
    let tmp = TempDir::new().unwrap();
    let truth = seg_file(tmp.path(), "truth.json", 100.0, &[50.0]);
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"format_version": 1, "video_id": "v", "duration_s": 100.0, "boundaries_s": [80.0, 20.0]}"#).unwrap();
    assert_eq!(
        mmseg(&["eval", "--truth", p(&truth), "--pred", p(&bad)])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn hca_zero_threshold_gives_no_boundaries() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        json!({"hca": {"alpha_b": 0.5, "beta_b": 0.0}, "synth": {"t": 240, "k": 2, "d_v": 8, "d_l": 4, "min_len": 60}}),
    );
    let video = tmp.path().join("video");
    assert!(mmseg(&["synth", "--config", p(&cfg), "--out", p(&video)])
        .status
        .success());
    let out = tmp.path().join("hca");
    let o = mmseg(&[
        "hca",
        "--config",
        p(&cfg),
        "--manifest",
        p(&video.join("manifest.json")),
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let seg = read_json(&out.join("synth-0.json"));
    assert_eq!(seg["boundaries_s"], json!([]));
    // the output is accepted by the evaluator
    let o = mmseg(&[
        "eval",
        "--truth",
        p(&video.join("truth.json")),
        "--pred",
        p(&out.join("synth-0.json")),
    ]);
    assert!(o.status.success());
}

#[test]
fn defaults_print_a_loadable_config() {
    let o = mmseg(&["defaults", "--desk-scale"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["dcca"]["k"], 8);
    assert_eq!(v["hsmm"]["states"], 20);
}
