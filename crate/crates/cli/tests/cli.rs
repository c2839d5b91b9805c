use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use unigeo::checkpoint::{load_ae, save_ae};
use unigeo::csvio::{read_matrix, write_matrix};
use unigeo::report::sha256_file;
use unigeo_core::autoencoder::{train_ae, AeTrainConfig};
use unigeo_core::datasets::sample_semisphere;
use unigeo_core::rng::SplitMix64;
use unigeo_core::Matrix;

fn unigeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unigeo"))
        .args(args)
        .env_remove("UNIGEO_SEED")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "failed: {}", stderr(&o));
    o
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A fast config for stage tests.
fn small_config(dir: &TempDir, manifold: &str) -> PathBuf {
    let path = p(dir, "cfg.json");
    let text = format!(
        r#"{{"data": {{"manifold": "{manifold}", "n": 300}},
            "ltsa": {{"k": 10}},
            "ae": {{"hidden": [16], "epochs": 5}},
            "curve": {{"epochs": 20}},
            "eval": {{"n_samples": 30}}}}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn csv_round_trip_is_bitwise() {
    let dir = TempDir::new().unwrap();
    let mut rng = SplitMix64::new(5);
    let m = Matrix::from_fn(40, 4, |i, _| rng.uniform(-1e3, 1e3) * 10f64.powi(i as i32 % 9 - 4));
    let path = p(&dir, "m.csv");
    write_matrix(&path, &m).unwrap();
    let back = read_matrix(&path).unwrap();
    assert_eq!(back.shape(), m.shape());
    for (a, b) in back.data().iter().zip(m.data()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    let header = std::fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "x0,x1,x2,x3");
}

#[test]
fn csv_errors_name_the_problem() {
    let dir = TempDir::new().unwrap();
    let empty = p(&dir, "empty.csv");
    std::fs::write(&empty, "").unwrap();
    assert!(format!("{:#}", read_matrix(&empty).unwrap_err()).contains("no data rows"));
    let ragged = p(&dir, "ragged.csv");
    std::fs::write(&ragged, "x0,x1\n1,2\n3,4\n5\n").unwrap();
    let e = format!("{:#}", read_matrix(&ragged).unwrap_err());
    assert!(e.contains("line 4") && e.contains("ragged.csv"), "{e}");
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let dir = TempDir::new().unwrap();
    let cloud = sample_semisphere(120, 1.0, 4).unwrap();
    let chart = Matrix::from_fn(120, 2, |i, j| cloud.points[(i, j)]);
    let cfg = AeTrainConfig {
        hidden: vec![8, 8],
        epochs: 3,
        ..Default::default()
    };
    let model = train_ae(&cloud.points, &chart, &cfg).unwrap().model;
    let path = p(&dir, "model.json");
    save_ae(&path, &model).unwrap();
    assert_eq!(load_ae(&path).unwrap(), model);
    let text = std::fs::read_to_string(&path).unwrap().replace("\"version\": 1", "\"version\": 7");
    std::fs::write(&path, text).unwrap();
    assert!(format!("{:#}", load_ae(&path).unwrap_err()).contains("version"));
}

#[test]
fn gen_data_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (p(&dir, "a.csv"), p(&dir, "b.csv"));
    for out in [&a, &b] {
        ok(unigeo(&["gen-data", "--manifold", "swissroll", "--n", "50", "--seed", "9", "--out", s(out)]));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(read_matrix(&a).unwrap().shape(), (50, 3));
}

#[test]
fn seed_env_overrides_config_seed() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (p(&dir, "a.csv"), p(&dir, "b.csv"), p(&dir, "c.csv"));
    ok(unigeo(&["gen-data", "--n", "20", "--out", s(&a)]));
    let run_env = |seed: &str, out: &Path| {
        Command::new(env!("CARGO_BIN_EXE_unigeo"))
            .args(["gen-data", "--n", "20", "--out", s(out)])
            .env("UNIGEO_SEED", seed)
            .output()
            .unwrap()
    };
    ok(run_env("1", &b));
    ok(run_env("2", &c));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    let bad = run_env("x", &c);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "c.csv");
    let o = unigeo(&["gen-data", "--n", "0", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n must be ≥ 1"), "{}", stderr(&o));

    let o = unigeo(&["gen-data", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = p(&dir, "bad.json");
    std::fs::write(&cfg, r#"{"curve": {"lr": 0.1, "speed": 2}}"#).unwrap();
    let o = unigeo(&["gen-data", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("speed"), "{}", stderr(&o));
}

#[test]
fn missing_artifacts_fail_with_one_and_name_the_file() {
    let dir = TempDir::new().unwrap();
    let missing = p(&dir, "nope.csv");
    let o = unigeo(&["embed", "--cloud", s(&missing), "--out", s(&p(&dir, "e.csv"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.csv"), "{}", stderr(&o));
}

struct Staged {
    dir: TempDir,
    cfg: PathBuf,
    cloud: PathBuf,
    model: PathBuf,
}

fn staged(manifold: &str) -> Staged {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir, manifold);
    let (cloud, emb, model) = (p(&dir, "cloud.csv"), p(&dir, "emb.csv"), p(&dir, "model.json"));
    ok(unigeo(&["gen-data", "--config", s(&cfg), "--out", s(&cloud)]));
    ok(unigeo(&["embed", "--config", s(&cfg), "--cloud", s(&cloud), "--out", s(&emb)]));
    let hist = p(&dir, "ae.csv");
    ok(unigeo(&[
        "train-ae", "--config", s(&cfg), "--cloud", s(&cloud), "--embedding", s(&emb), "--out", s(&model), "--history",
        s(&hist),
    ]));
    assert_eq!(read_matrix(&hist).unwrap().rows(), 5);
    assert_eq!(read_matrix(&emb).unwrap().shape(), (300, 2));
    Staged { dir, cfg, cloud, model }
}

#[test]
fn swissroll_pipeline_writes_decoded_curve() {
    let st = staged("swissroll");
    let (curve, hist, report, decoded, script) = (
        p(&st.dir, "curve.json"),
        p(&st.dir, "curve.csv"),
        p(&st.dir, "report.json"),
        p(&st.dir, "decoded.csv"),
        p(&st.dir, "plot.py"),
    );
    ok(unigeo(&[
        "train-curve", "--config", s(&st.cfg), "--checkpoint", s(&st.model), "--cloud", s(&st.cloud), "--out",
        s(&curve), "--history", s(&hist),
    ]));
    let h = read_matrix(&hist).unwrap();
    assert_eq!(h.shape(), (20, 5));
    ok(unigeo(&[
        "eval", "--config", s(&st.cfg), "--checkpoint", s(&st.model), "--curve", s(&curve), "--cloud", s(&st.cloud),
        "--out", s(&report), "--decoded", s(&decoded), "--plot-script", s(&script),
    ]));
    assert_eq!(read_matrix(&decoded).unwrap().shape(), (31, 3));
    assert!(std::fs::read_to_string(&script).unwrap().contains("decoded.csv"));

    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(doc["report"]["oracle_length"].as_f64().unwrap() > 0.0);
    assert_eq!(doc["config"]["data"]["manifold"], "swissroll");
    assert_eq!(doc["config"]["ae"]["batch_size"], 64);
    let hashes = doc["inputs"].as_object().unwrap();
    assert_eq!(hashes[s(&st.cloud)], sha256_file(&st.cloud).unwrap());
    assert_eq!(hashes.len(), 3);
}

#[test]
fn semisphere_eval_reports_great_circle_oracle() {
    let st = staged("semisphere");
    let (curve, report) = (p(&st.dir, "curve.json"), p(&st.dir, "report.json"));
    ok(unigeo(&[
        "train-curve", "--config", s(&st.cfg), "--checkpoint", s(&st.model), "--cloud", s(&st.cloud),
        "--endpoints", "3,17", "--out", s(&curve),
    ]));
    ok(unigeo(&[
        "eval", "--config", s(&st.cfg), "--checkpoint", s(&st.model), "--curve", s(&curve), "--cloud", s(&st.cloud),
        "--endpoints", "3,17", "--oracle", "greatcircle", "--out", s(&report),
    ]));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let oracle = doc["report"]["oracle_length"].as_f64().unwrap();
    let ratio = doc["report"]["length_ratio"].as_f64().unwrap();
    let length = doc["report"]["polyline_length"].as_f64().unwrap();
    assert!((length / oracle - ratio).abs() < 1e-12);
    assert_eq!(doc["endpoints"]["indices"], serde_json::json!([3, 17]));

    let o = unigeo(&[
        "eval", "--config", s(&st.cfg), "--checkpoint", s(&st.model), "--curve", s(&curve), "--cloud", s(&st.cloud),
        "--oracle", "none", "--out", s(&report),
    ]);
    ok(o);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(doc["report"]["oracle_length"].is_null());
}

#[test]
fn zero_weights_are_a_usage_error() {
    let st = staged("semisphere");
    let o = unigeo(&[
        "train-curve", "--config", s(&st.cfg), "--checkpoint", s(&st.model), "--cloud", s(&st.cloud), "--weights",
        "0,0,0", "--out", s(&p(&st.dir, "c.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("weights all zero"));
}

#[test]
fn train_curve_is_byte_deterministic() {
    let st = staged("semisphere");
    let (a, b) = (p(&st.dir, "a.json"), p(&st.dir, "b.json"));
    for out in [&a, &b] {
        ok(unigeo(&[
            "train-curve", "--config", s(&st.cfg), "--checkpoint", s(&st.model), "--cloud", s(&st.cloud), "--out",
            s(out),
        ]));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn shape_mismatch_names_files() {
    let st = staged("semisphere");
    let other = p(&st.dir, "flat.csv");
    write_matrix(&other, &Matrix::zeros(4, 2)).unwrap();
    let o = unigeo(&[
        "train-curve", "--checkpoint", s(&st.model), "--cloud", s(&other), "--endpoints", "0,1", "--out",
        s(&p(&st.dir, "c.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("model.json") && e.contains("flat.csv"), "{e}");
}

#[test]
fn ablate_emits_rows_in_table_order() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir, "semisphere");
    let out = p(&dir, "table.csv");
    ok(unigeo(&["ablate", "--config", s(&cfg), "--out", s(&out)]));
    let text = std::fs::read_to_string(&out).unwrap();
    let combos: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(combos, unigeo::ablate::COMBOS);
    let real = text.lines().last().unwrap();
    assert!(real.ends_with(",,"), "{real}");
}
