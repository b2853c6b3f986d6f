use std::path::Path;
use std::process::{Command, Output};

fn bounce(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bounce"))
        .args(args)
        .env("BB_THREADS", "1")
        .output()
        .expect("run bounce")
}

fn ok(args: &[&str]) -> String {
    let out = bounce(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    bounce(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// 12x12 frames, 8 training sequences of 12 frames.
fn tiny_data(dir: &Path) -> String {
    let data = dir.join("data");
    ok(&["generate", "--seqs", "8", "--frames", "12", "--size", "12", "--seed", "4", "--out", s(&data)]);
    s(&data).to_string()
}

const TINY_MODEL: [&str; 12] = [
    "--kernels", "3", "--channels", "1", "--epochs", "1", "--context", "3", "--horizon", "2", "--batch", "4",
];

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&["generate", "--seqs", "10", "--frames", "5", "--seed", "7", "--out", s(out)]);
    }
    for name in ["train.bbv", "valid.bbv", "test.bbv", "train.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("test.json")).unwrap()).unwrap();
    assert_eq!(meta["generator"]["n_sequences"], 2);
    assert_eq!(meta["generator"]["n_frames"], 5);
    assert_eq!(meta["split"], "test");
    assert!(meta["master_seed"].is_u64());
}

#[test]
fn train_evaluate_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_data(dir.path());
    let run = dir.path().join("run");
    let mut args = vec!["train", "--model", "convlstm", "--data", &data, "--out", s(&run)];
    args.extend(TINY_MODEL);
    ok(&args);
    for f in ["checkpoint.json", "checkpoint.bin", "loss.csv", "config.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(run.join("checkpoint.json")).unwrap()).unwrap();
    assert_eq!(manifest["metadata"]["seed"], 0);
    assert_eq!(manifest["metadata"]["config"]["train"]["epochs"], 1);

    let eval = dir.path().join("eval");
    let stdout = ok(&["evaluate", "--ckpt", s(&run), "--data", &data, "--context", "3", "--horizon", "9", "--out", s(&eval)]);
    assert!(stdout.contains("frame  9"));
    let csv = std::fs::read_to_string(eval.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    assert!(csv.starts_with("frame_index,mse_mean,mse_se,cd_mean,cd_se,n_sequences\n"));
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(eval.join("report.json")).unwrap()).unwrap();
    assert_eq!(doc["provenance"]["training"]["seed"], 0);

    let one = dir.path().join("one");
    ok(&["evaluate", "--ckpt", s(&run), "--data", &data, "--context", "3", "--horizon", "1", "--out", s(&one)]);
    assert_eq!(std::fs::read_to_string(one.join("report.csv")).unwrap().lines().count(), 2);

    let base = dir.path().join("base");
    ok(&["evaluate", "--baseline", "empty", "--data", &data, "--context", "3", "--horizon", "9", "--out", s(&base)]);
    let charts = dir.path().join("charts");
    ok(&[
        "report", "--csv", s(&eval.join("report.csv")), "--csv", s(&base.join("report.csv")), "--out", s(&charts),
    ]);
    let svg = std::fs::read_to_string(charts.join("mse.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains(">eval<") && svg.contains(">base<"));
    assert!(charts.join("cd.svg").is_file());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing");
    assert_eq!(code(&["train", "--data", s(&missing)]), 3);
    assert_eq!(code(&["evaluate", "--baseline", "empty", "--data", s(&missing)]), 3);

    let data = tiny_data(dir.path());
    let out = dir.path().join("x");
    let mut bad_lr = vec!["train", "--data", &data, "--out", s(&out), "--lr", "-1"];
    bad_lr.extend(TINY_MODEL);
    assert_eq!(code(&bad_lr), 2);
    assert_eq!(code(&["gridsearch", "--axis", "dropout", "--values", "1", "--data", &data]), 2);
    assert_eq!(code(&["train", "--model", "gru", "--data", &data]), 2);
    assert_eq!(code(&["evaluate", "--data", &data]), 2);

    // Sequences of 12 frames cannot hold 10 + 20.
    let long = dir.path().join("long");
    let mut short = vec!["train", "--data", &data, "--out", s(&long), "--kernels", "3", "--channels", "1"];
    short.extend(["--context", "10", "--horizon", "20"]);
    assert_eq!(code(&short), 3);

    let corrupt = dir.path().join("corrupt.bbv");
    std::fs::write(&corrupt, b"NOPE0000").unwrap();
    assert_eq!(code(&["evaluate", "--baseline", "empty", "--data", s(&corrupt)]), 3);

    let div = dir.path().join("div");
    let mut diverge = vec!["train", "--data", &data, "--out", s(&div), "--lr", "1e39", "--optimizer", "sgd", "--no-clip"];
    diverge.extend(TINY_MODEL);
    assert_eq!(code(&diverge), 4);
    assert!(div.join("checkpoint.json").is_file());
}

#[test]
fn compare_curriculum_pairs_two_models() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_data(dir.path());
    let out = dir.path().join("cmp");
    let mut args = vec!["compare-curriculum", "--n", "1", "--data", &data, "--out", s(&out)];
    args.extend(TINY_MODEL);
    ok(&args);
    assert!(out.join("forced-0/checkpoint.json").is_file());
    assert!(out.join("curriculum-0/checkpoint.json").is_file());
    assert!(!out.join("forced-1").exists());
    let paired = std::fs::read_to_string(out.join("paired.csv")).unwrap();
    assert!(paired.starts_with("frame_index,forced_mse_mean"));
    assert_eq!(paired.lines().count(), 3);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("forced-0/checkpoint.json")).unwrap()).unwrap();
    assert_eq!(manifest["spec"]["architecture"], "seq2seq");
}

#[test]
fn gridsearch_ranks_values() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_data(dir.path());
    let out = dir.path().join("grid");
    let mut args = vec!["gridsearch", "--axis", "lr", "--values", "0.001,0.01", "--data", &data, "--out", s(&out)];
    args.extend(TINY_MODEL);
    ok(&args);
    let csv = std::fs::read_to_string(out.join("gridsearch.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("1,") && rows[2].starts_with("2,"));
}

#[test]
fn inspect_hidden_writes_png() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_data(dir.path());
    let run = dir.path().join("run");
    let mut args = vec!["train", "--data", &data, "--out", s(&run), "--kernels", "3,3", "--channels", "4,1"];
    args.extend(&TINY_MODEL[4..]);
    ok(&args);
    let png = dir.path().join("h/layer0.png");
    let stdout = ok(&["inspect-hidden", "--ckpt", s(&run), "--data", &data, "--layer", "0", "--out", s(&png)]);
    assert!(stdout.contains("wrote 4 channels"));
    assert!(png.is_file());
    assert_eq!(code(&["inspect-hidden", "--ckpt", s(&run), "--data", &data, "--layer", "5"]), 2);

    let lstm = dir.path().join("lstm");
    let mut args = vec!["train", "--model", "lstm", "--hidden-units", "8,144", "--data", &data, "--out", s(&lstm)];
    args.extend(&TINY_MODEL[4..]);
    ok(&args);
    assert_eq!(code(&["inspect-hidden", "--ckpt", s(&lstm), "--data", &data]), 2);
}
