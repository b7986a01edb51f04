use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rankmir::evaluate::{column_std_profile, cosine_similarity_stats, value_histogram};
use rankmir::io::{read_labels, read_matrix, write_matrix, MatrixFormat};
use rankmir::normalize::{ExactRanking, NormalizationPipeline, Step};
use rankmir::repro::ReproConfig;
use rankmir::Matrix;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rankmir")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn bin(p: &Path) -> Matrix {
    read_matrix(p, MatrixFormat::Binary).unwrap()
}

/// Small synthetic dataset with a split; returns the directory.
fn dataset() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "synth", "--out-dir", s(dir.path()), "--seed", "5", "--n-per-class", "12", "--k", "3", "--d", "20",
        "--burst-dims", "6", "--train-fraction", "0.5",
    ]);
    dir
}

#[test]
fn synth_is_reproducible_from_seed() {
    let a = dataset();
    let b = dataset();
    for f in ["features.bin", "labels.txt", "train_features.bin", "test_labels.txt"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let y = read_labels(a.path().join("labels.txt")).unwrap();
    assert_eq!(y.class_counts(), vec![12, 12, 12]);
}

#[test]
fn power_one_is_bit_identical() {
    let d = dataset();
    let out = d.path().join("pn.bin");
    ok(&["normalize", "--input", s(&d.path().join("features.bin")), "--steps", r#"{"steps":[{"power":{"alpha":1.0}}]}"#, "--output", s(&out)]);
    assert!(bin(&out).bit_eq(&bin(&d.path().join("features.bin"))));
}

#[test]
fn single_iteration_rerank_is_identity() {
    let d = dataset();
    let scores = d.path().join("scores.bin");
    write_matrix(&bin(&d.path().join("features.bin")), &scores, MatrixFormat::Binary).unwrap();
    let out = d.path().join("r.bin");
    ok(&["rerank", "--scores", s(&scores), "--iters", "1", "--out", s(&out)]);
    assert!(bin(&out).bit_eq(&bin(&scores)));
}

#[test]
fn normalize_matches_in_process_and_stats_roundtrip() {
    let d = dataset();
    let p = |f: &str| d.path().join(f);
    let pipeline = NormalizationPipeline { steps: vec![Step::rank_exact(), Step::l2()] };
    let steps = serde_json::to_string(&pipeline).unwrap();
    ok(&["normalize", "--input", s(&p("test_features.bin")), "--fit-on", s(&p("train_features.bin")), "--steps", &steps, "--output", s(&p("n.bin"))]);
    let expect = pipeline.fit(&bin(&p("train_features.bin")), ExactRanking::TrainReference).unwrap().transform(&bin(&p("test_features.bin"))).unwrap();
    let got = bin(&p("n.bin"));
    assert!(got.bit_eq(&expect));

    ok(&["stats", "--features", s(&p("n.bin")), "--labels", s(&p("test_labels.txt")), "--bins", "20", "--out", s(&p("st.json")), "--csv-dir", s(&p("csv"))]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(p("st.json")).unwrap()).unwrap();
    let y = read_labels(p("test_labels.txt")).unwrap();
    assert_eq!(report["value_histogram"], serde_json::to_value(value_histogram(&expect, 20, None).unwrap()).unwrap());
    assert_eq!(report["std_profile"], serde_json::to_value(column_std_profile(&expect)).unwrap());
    let cos: Vec<_> = (0..3).map(|k| cosine_similarity_stats(&expect, &y, k, 20).unwrap()).collect();
    assert_eq!(report["cosine"], serde_json::to_value(cos).unwrap());
    assert!(p("csv").join("value_histogram.csv").exists());
    assert!(p("csv").join("cosine_pos_neg_class2.csv").exists());
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let d = dataset();
    let p = |f: &str| d.path().join(f);
    let steps = r#"{"steps":[{"rank_exact":{}},{"power":{"alpha":0.5}},{"l2":{}}]}"#;
    for t in ["1", "4"] {
        let n = p(&format!("n{t}.bin"));
        let m = p(&format!("m{t}.bin"));
        let sc = p(&format!("s{t}.bin"));
        let r = p(&format!("r{t}.bin"));
        ok(&["--threads", t, "normalize", "--input", s(&p("features.bin")), "--steps", steps, "--output", s(&n)]);
        ok(&["--threads", t, "train", "--features", s(&n), "--labels", s(&p("labels.txt")), "--model-out", s(&m), "--epochs", "50"]);
        ok(&["--threads", t, "predict", "--model", s(&m), "--features", s(&n), "--out", s(&sc)]);
        ok(&["--threads", t, "rerank", "--scores", s(&sc), "--out", s(&r)]);
    }
    for f in ["n", "m", "s", "r"] {
        assert_eq!(std::fs::read(p(&format!("{f}1.bin"))).unwrap(), std::fs::read(p(&format!("{f}4.bin"))).unwrap(), "{f}");
    }
}

#[test]
fn config_file_supplies_inputs_and_flags_override() {
    let d = dataset();
    let p = |f: &str| d.path().join(f);
    std::fs::write(
        p("run.json"),
        r#"{"inputs":{"features":"features.bin"},"pipeline":{"steps":[{"l2":{}}]},"seed":9,"output_dir":"out"}"#,
    )
    .unwrap();
    ok(&["--config", s(&p("run.json")), "normalize", "--output", s(&p("a.bin"))]);
    let x = bin(&p("features.bin"));
    assert!(bin(&p("a.bin")).bit_eq(&rankmir::normalize::l2_normalize(&x)));

    ok(&["--config", s(&p("run.json")), "normalize", "--steps", r#"{"steps":[{"power":{"alpha":1.0}}]}"#, "--output", s(&p("b.bin"))]);
    assert!(bin(&p("b.bin")).bit_eq(&x));

    // Seed from the config, then overridden by the flag.
    ok(&["--config", s(&p("run.json")), "fit-reference", "--s", "3", "--output", s(&p("r9.bin"))]);
    ok(&["fit-reference", "--input", s(&p("features.bin")), "--s", "3", "--seed", "9", "--output", s(&p("f9.bin"))]);
    ok(&["--config", s(&p("run.json")), "fit-reference", "--s", "3", "--seed", "10", "--output", s(&p("r10.bin"))]);
    assert_eq!(std::fs::read(p("r9.bin")).unwrap(), std::fs::read(p("f9.bin")).unwrap());
    assert_ne!(std::fs::read(p("r9.bin")).unwrap(), std::fs::read(p("r10.bin")).unwrap());

    let reference = rankmir::normalize::read_rank_reference(p("r9.bin")).unwrap();
    assert_eq!(reference.rng_seed(), Some(9));
    ok(&["normalize", "--input", s(&p("features.bin")), "--reference", s(&p("r9.bin")), "--steps", r#"{"steps":[{"rank_approx":{"s":3,"seed":1}}]}"#, "--output", s(&p("ap.bin"))]);
    let expect = rankmir::normalize::rank_normalize_approx(&x, &reference).unwrap();
    assert!(bin(&p("ap.bin")).bit_eq(&expect));
}

#[test]
fn csv_with_header_roundtrips() {
    let d = dataset();
    let p = |f: &str| d.path().join(f);
    ok(&["--csv-header", "normalize", "--input", s(&p("features.bin")), "--steps", r#"{"steps":[{"l2":{}}]}"#, "--output", s(&p("n.csv"))]);
    let text = std::fs::read_to_string(p("n.csv")).unwrap();
    assert!(text.starts_with("c0,c1,"));
    let back = read_matrix(p("n.csv"), MatrixFormat::Csv { header: true }).unwrap();
    assert!(back.bit_eq(&rankmir::normalize::l2_normalize(&bin(&p("features.bin")))));
}

fn error_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr is not JSON: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn errors_are_json_with_nonzero_exit() {
    let d = dataset();
    let missing: PathBuf = d.path().join("nope.bin");
    let out = run(&["normalize", "--input", s(&missing), "--steps", r#"{"steps":[{"l2":{}}]}"#, "--output", s(&d.path().join("x.bin"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["error"], "io");

    let out = run(&["fit-reference", "--input", s(&d.path().join("features.bin")), "--s", "2", "--output", s(&d.path().join("r.bin"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_of(&out);
    assert_eq!(err["error"], "invalid_parameter");
    assert!(err["message"].as_str().unwrap().contains("--seed"));

    let out = run(&["rerank", "--scores", s(&d.path().join("features.bin")), "--out", s(&d.path().join("r.bin")), "--eta", "0"]);
    assert_eq!(error_of(&out)["error"], "invalid_parameter");

    std::fs::write(d.path().join("bad.csv"), "1,2\n3,x\n").unwrap();
    let out = run(&["stats", "--features", s(&d.path().join("bad.csv")), "--out", s(&d.path().join("st.json"))]);
    let err = error_of(&out);
    assert_eq!(err["error"], "format");
    assert!(err["message"].as_str().unwrap().contains("line 2"), "{err}");

    let out = run(&["train", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["error"], "usage");

    assert!(run(&["--help"]).status.success());
}

#[test]
fn evaluate_reports_map() {
    let d = dataset();
    let p = |f: &str| d.path().join(f);
    let y = read_labels(p("labels.txt")).unwrap();
    let one_hot = Matrix::from_rows(&y.as_slice().iter().map(|&l| (0..3).map(|k| if k == l { 1.0 } else { 0.0 }).collect::<Vec<_>>()).collect::<Vec<_>>()).unwrap();
    write_matrix(&one_hot, p("perfect.bin"), MatrixFormat::Binary).unwrap();
    let v: Value = serde_json::from_str(&ok(&["evaluate", "--scores", s(&p("perfect.bin")), "--labels", s(&p("labels.txt")), "--out", s(&p("e.json"))])).unwrap();
    assert_eq!(v["map"], 1.0);
    assert_eq!(v["per_class_ap"].as_array().unwrap().len(), 3);
    assert!(p("e.json").exists());
}

#[test]
fn small_repro_emits_full_structure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ReproConfig::default();
    cfg.synth.n_per_class = 16;
    cfg.synth.k = 3;
    cfg.synth.d = 24;
    cfg.synth.burst_dims = 8;
    cfg.classifier.epochs = 30;
    cfg.subset_sizes = vec![1, 5, 10];
    cfg.repeats = 2;
    let exp = dir.path().join("exp.json");
    std::fs::write(&exp, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = dir.path().join("report.json");
    ok(&["--threads", "2", "repro", "--experiment", s(&exp), "--out", s(&out)]);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let labels: Vec<&str> = r["normalization"].as_array().unwrap().iter().map(|p| p["pipeline"].as_str().unwrap()).collect();
    assert_eq!(labels, ["[L2]", "[PN(0.5), L2]", "[RaN, L2]"]);
    let subsets = r["subset_sizes"].as_array().unwrap();
    assert_eq!(subsets.iter().map(|s| s["s"].as_u64().unwrap()).collect::<Vec<_>>(), [1, 5, 10]);
    assert!(subsets.iter().all(|s| s["maps_mir"].as_array().unwrap().len() == 2));
    assert_eq!(r["mir_curve"].as_array().unwrap().len(), 4);
    assert_eq!(r["train_rows"], 24);
    assert_eq!(r["config"], serde_json::to_value(&cfg).unwrap());

    // Same config on one thread gives the same report.
    let out1 = dir.path().join("report1.json");
    ok(&["repro", "--experiment", s(&exp), "--out", s(&out1)]);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&out1).unwrap());
}

#[test]
fn shipped_default_config_matches_library_default() {
    let shipped: ReproConfig =
        serde_json::from_str(&std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/default_repro.json")).unwrap()).unwrap();
    assert_eq!(shipped, ReproConfig::default());
    let printed: ReproConfig = serde_json::from_str(&ok(&["repro", "--print-default-config"])).unwrap();
    assert_eq!(printed, shipped);
}
