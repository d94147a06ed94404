use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

const SMALL: &str = "\
[data.synth]
n_train = 2000
n_valid = 500

[model]
embedding_dim = 4
product_units = 8
cross_depth = 2
mlp_widths = [16]

[train]
epochs = 2
";

fn xcn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xcn"))
        .args(args)
        .current_dir(dir)
        .env_remove("XCN_THREADS")
        .output()
        .expect("xcn runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Value of the first `key=value` line.
fn field(text: &str, key: &str) -> Option<String> {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .map(str::to_string)
}

fn assert_exit(o: &Output, code: i32) {
    assert_eq!(o.status.code(), Some(code), "stdout:\n{}\nstderr:\n{}", stdout(o), stderr(o));
}

fn small_run(dir: &Path, out: &str) -> Output {
    fs::write(dir.join("small.toml"), SMALL).unwrap();
    let o = xcn(dir, &["train", "--config", "small.toml", "--out", out]);
    assert_exit(&o, 0);
    o
}

#[test]
fn missing_data_is_a_usage_error_naming_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = xcn(dir.path(), &["train"]);
    assert_exit(&o, 2);
    assert!(stderr(&o).contains("--data"), "{}", stderr(&o));
}

#[test]
fn every_unknown_config_key_is_listed() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "bogus = 1\n[train]\nlearning_rate = 0.1\n[model]\ndepth = 2\n").unwrap();
    let o = xcn(dir.path(), &["train", "--config", "c.toml", "--synth", "default"]);
    assert_exit(&o, 2);
    let err = stderr(&o);
    for key in ["bogus", "train.learning_rate", "model.depth"] {
        assert!(err.contains(key), "{err}");
    }
}

#[test]
fn invalid_values_are_listed_together() {
    let dir = tempfile::tempdir().unwrap();
    let o = xcn(
        dir.path(),
        &["train", "--synth", "default", "--lr=-1", "--batch-size", "0", "--embedding-dim", "0"],
    );
    assert_exit(&o, 2);
    let err = stderr(&o);
    for key in ["train.lr", "train.batch_size", "model.embedding_dim"] {
        assert!(err.contains(key), "{err}");
    }
}

#[test]
fn missing_config_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_exit(&xcn(dir.path(), &["train", "--config", "nope.toml"]), 3);
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_xcn"))
        .arg("inspect")
        .env("XCN_THREADS", "many")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_exit(&o, 2);
    assert!(stderr(&o).contains("XCN_THREADS"));
}

#[test]
fn training_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = small_run(d, "a");
    for f in ["model.ckpt", "train_log.jsonl", "run_config.toml"] {
        assert!(d.join("a").join(f).exists(), "{f} missing");
    }
    let text = stdout(&o);
    assert_eq!(field(&text, "interrupted").as_deref(), Some("false"));
    assert!(field(&text, "bayes_auc").is_some());
    assert!(field(&text, "auc").is_some());

    small_run(d, "b");
    assert_eq!(fs::read(d.join("a/model.ckpt")).unwrap(), fs::read(d.join("b/model.ckpt")).unwrap());

    // The persisted config alone reproduces the run.
    let o = xcn(d, &["train", "--config", "a/run_config.toml", "--out", "c"]);
    assert_exit(&o, 0);
    assert_eq!(fs::read(d.join("a/model.ckpt")).unwrap(), fs::read(d.join("c/model.ckpt")).unwrap());

    let o = xcn(d, &["train", "--config", "small.toml", "--seed", "5", "--out", "e"]);
    assert_exit(&o, 0);
    assert_ne!(fs::read(d.join("a/model.ckpt")).unwrap(), fs::read(d.join("e/model.ckpt")).unwrap());
}

#[test]
fn eval_reproduces_the_last_logged_validation_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_run(d, "run");
    let log = fs::read_to_string(d.join("run/train_log.jsonl")).unwrap();
    let last: serde_json::Value = serde_json::from_str(log.lines().last().unwrap()).unwrap();

    let o = xcn(d, &["eval", "--run-dir", "run"]);
    assert_exit(&o, 0);
    let text = stdout(&o);
    let auc: f64 = field(&text, "auc").unwrap().parse().unwrap();
    let ll: f64 = field(&text, "logloss").unwrap().parse().unwrap();
    assert_eq!(auc.to_bits(), last["val_auc"].as_f64().unwrap().to_bits());
    assert_eq!(ll.to_bits(), last["val_logloss"].as_f64().unwrap().to_bits());
}

#[test]
fn damaged_checkpoints_give_structured_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_run(d, "run");
    let bytes = fs::read(d.join("run/model.ckpt")).unwrap();

    fs::write(d.join("short.ckpt"), &bytes[..bytes.len() - 8]).unwrap();
    let o = xcn(d, &["eval", "--checkpoint", "short.ckpt", "--run-dir", "run"]);
    assert_exit(&o, 3);
    assert!(stderr(&o).contains("short.ckpt") && stderr(&o).contains("checkpoint"), "{}", stderr(&o));

    fs::write(d.join("head.ckpt"), &bytes[..40]).unwrap();
    assert_exit(&xcn(d, &["eval", "--checkpoint", "head.ckpt", "--run-dir", "run"]), 3);

    fs::write(d.join("junk.ckpt"), b"not a checkpoint\n").unwrap();
    assert_exit(&xcn(d, &["inspect", "--checkpoint", "junk.ckpt"]), 3);

    let text = String::from_utf8_lossy(&bytes).into_owned();
    let v9 = text.replacen("\"format_version\":1", "\"format_version\":9", 1);
    assert_eq!(v9.len(), text.len());
    let mut patched = v9.into_bytes();
    patched.truncate(bytes.len());
    fs::write(d.join("v9.ckpt"), &patched).unwrap();
    for args in [
        vec!["inspect", "--checkpoint", "v9.ckpt"],
        vec!["eval", "--checkpoint", "v9.ckpt", "--run-dir", "run"],
    ] {
        let o = xcn(d, &args);
        assert_exit(&o, 3);
        assert!(stderr(&o).contains("version 9"), "{}", stderr(&o));
    }
}

/// Writes a small synthetic TSV pair and trains on it as file data.
fn tsv_run(d: &Path) {
    let o = xcn(d, &["synth", "--out", "data", "--n-train", "3000", "--n-valid", "400"]);
    assert_exit(&o, 0);
    let o = xcn(
        d,
        &[
            "train", "--data", "data/train.tsv", "--valid", "data/valid.tsv", "--num-dense", "4", "--num-sparse", "4",
            "--dense-transform", "identity", "--min-freq", "1", "--epochs", "1", "--batch-size", "256",
            "--embedding-dim", "4", "--product-units", "8", "--mlp-widths", "16", "--out", "run",
        ],
    );
    assert_exit(&o, 0);
    assert!(d.join("run/vocab.json").exists());
}

#[test]
fn file_data_round_trip_and_scoring() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    tsv_run(d);

    let o = xcn(d, &["eval", "--checkpoint", "run/model.ckpt", "--data", "data/valid.tsv"]);
    assert_exit(&o, 0);
    let log = fs::read_to_string(d.join("run/train_log.jsonl")).unwrap();
    let last: serde_json::Value = serde_json::from_str(log.lines().last().unwrap()).unwrap();
    let auc: f64 = field(&stdout(&o), "auc").unwrap().parse().unwrap();
    assert_eq!(auc.to_bits(), last["val_auc"].as_f64().unwrap().to_bits());

    let o = xcn(d, &["predict", "--checkpoint", "run/model.ckpt", "--data", "data/valid.tsv", "--out", "p1.txt"]);
    assert_exit(&o, 0);
    assert_eq!(field(&stdout(&o), "predictions").as_deref(), Some("400"));
    let p1 = fs::read_to_string(d.join("p1.txt")).unwrap();
    let preds: Vec<f64> = p1.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(preds.len(), 400);
    assert!(preds.iter().all(|&p| p > 0.0 && p < 1.0));

    assert_exit(
        &xcn(d, &["predict", "--checkpoint", "run/model.ckpt", "--data", "data/valid.tsv", "--out", "p2.txt"]),
        0,
    );
    assert_eq!(p1, fs::read_to_string(d.join("p2.txt")).unwrap());

    // Reversing the rows reverses the predictions.
    let rows = fs::read_to_string(d.join("data/valid.tsv")).unwrap();
    let reversed: Vec<&str> = rows.lines().rev().collect();
    fs::write(d.join("rev.tsv"), reversed.join("\n") + "\n").unwrap();
    assert_exit(
        &xcn(d, &["predict", "--checkpoint", "run/model.ckpt", "--data", "rev.tsv", "--out", "p3.txt"]),
        0,
    );
    let p3 = fs::read_to_string(d.join("p3.txt")).unwrap();
    let mut p3_lines: Vec<&str> = p3.lines().collect();
    p3_lines.reverse();
    assert_eq!(p3_lines, p1.lines().collect::<Vec<_>>());
}

#[test]
fn single_class_eval_reports_auc_unavailable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    tsv_run(d);
    let rows = fs::read_to_string(d.join("data/valid.tsv")).unwrap();
    let negatives: Vec<&str> = rows.lines().filter(|l| l.starts_with("0\t")).collect();
    assert!(!negatives.is_empty());
    fs::write(d.join("neg.tsv"), negatives.join("\n") + "\n").unwrap();

    let o = xcn(d, &["eval", "--checkpoint", "run/model.ckpt", "--data", "neg.tsv"]);
    assert_exit(&o, 0);
    let text = stdout(&o);
    assert_eq!(field(&text, "auc").as_deref(), Some("unavailable"));
    let ll: f64 = field(&text, "logloss").unwrap().parse().unwrap();
    assert!(ll.is_finite() && ll > 0.0);
    assert_eq!(field(&text, "n_pos").as_deref(), Some("0"));
}

#[test]
fn scoring_with_the_wrong_vocabulary_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    tsv_run(d);
    let o = xcn(d, &["eval", "--checkpoint", "run/model.ckpt", "--data", "data/valid.tsv", "--vocab", "missing.json"]);
    assert_exit(&o, 3);

    // A vocabulary built with a different frequency cut has other sizes.
    let o = xcn(
        d,
        &[
            "train", "--data", "data/train.tsv", "--num-dense", "4", "--num-sparse", "4", "--min-freq", "100000",
            "--epochs", "1", "--mlp-widths", "4", "--out", "other",
        ],
    );
    assert_exit(&o, 0);
    let o = xcn(
        d,
        &["eval", "--checkpoint", "run/model.ckpt", "--data", "data/valid.tsv", "--vocab", "other/vocab.json"],
    );
    assert_exit(&o, 2);
    assert!(stderr(&o).contains("do not match"), "{}", stderr(&o));
}

#[test]
fn numeric_blow_up_exits_with_the_numeric_code() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let o = xcn(dir.path(), &["train", "--config", "small.toml", "--lr", "1e300", "--out", "nan"]);
    assert_exit(&o, 4);
    assert!(stderr(&o).contains("non-finite"), "{}", stderr(&o));
}

#[test]
fn gradcheck_passes_and_catches_an_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let o = xcn(dir.path(), &["gradcheck"]);
    assert_exit(&o, 0);
    let text = stdout(&o);
    let groups: Vec<&str> = text
        .lines()
        .filter_map(|l| l.strip_prefix("group=").and_then(|r| r.split_whitespace().next()))
        .collect();
    let mut unique = groups.clone();
    unique.sort_unstable();
    unique.dedup();
    assert_eq!(unique.len(), groups.len(), "a group is listed twice");
    for g in ["cross.weight", "cross.bias", "product.theta", "product.order1", "concat.weight", "mlp.output.bias"] {
        assert!(groups.contains(&g), "{g} missing");
    }
    assert_eq!(field(&text, "status").as_deref(), Some("pass"));

    let o = xcn(dir.path(), &["gradcheck", "--inject-fault", "product.theta"]);
    assert_exit(&o, 1);
    let text = stdout(&o);
    let theta = text.lines().find(|l| l.starts_with("group=product.theta ")).unwrap();
    assert!(theta.ends_with("status=FAIL"), "{theta}");
    assert_eq!(text.matches("status=FAIL").count(), 2, "{text}");
}

#[test]
fn gradcheck_reads_a_model_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.toml"), "cross_depth = 3\nmlp_widths = [6, 5]\n").unwrap();
    let o = xcn(dir.path(), &["gradcheck", "--config", "g.toml", "--seed", "4"]);
    assert_exit(&o, 0);
    assert!(stdout(&o).contains("group=mlp.hidden1.weight"));

    fs::write(dir.path().join("bad.toml"), "depth = 3\n").unwrap();
    assert_exit(&xcn(dir.path(), &["gradcheck", "--config", "bad.toml"]), 2);
}

#[test]
fn synth_writes_files_and_reports_bayes_auc() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = xcn(d, &["synth", "--out", "s", "--n-train", "1000", "--n-valid", "200", "--gzip"]);
    assert_exit(&o, 0);
    for f in ["train.tsv.gz", "valid.tsv.gz", "train_probs.txt", "valid_probs.txt"] {
        assert!(d.join("s").join(f).exists(), "{f} missing");
    }
    let text = stdout(&o);
    assert_eq!(field(&text, "n_train").as_deref(), Some("1000"));
    let bayes: f64 = field(&text, "bayes_auc.valid").unwrap().parse().unwrap();
    assert!(bayes > 0.6 && bayes < 1.0, "{bayes}");

    let again = xcn(d, &["synth", "--out", "s2", "--n-train", "1000", "--n-valid", "200", "--gzip"]);
    assert_eq!(stdout(&again).replace("out=s2", "out=s"), text);

    let null = xcn(d, &["synth", "--preset", "null", "--out", "n", "--n-train", "4000", "--n-valid", "10"]);
    let b: f64 = field(&stdout(&null), "bayes_auc.train").unwrap().parse().unwrap();
    assert!((b - 0.5).abs() < 0.05, "{b}");
}

#[test]
fn inspect_defaults_show_both_balance_indices() {
    let dir = tempfile::tempdir().unwrap();
    let o = xcn(dir.path(), &["inspect"]);
    assert_exit(&o, 0);
    let text = stdout(&o);
    assert_eq!(field(&text, "balance_index.with_input").as_deref(), Some("0.65"));
    assert_eq!(field(&text, "balance_index.cross_only").as_deref(), Some("0.52"));
    assert_eq!(field(&text, "params.cross").as_deref(), Some("104"));
    assert_eq!(field(&text, "dims.concat").as_deref(), Some("265"));
}

#[test]
fn inspect_counts_add_up() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_run(d, "run");
    for args in [vec!["inspect", "--checkpoint", "run/model.ckpt"], vec!["inspect", "--config", "small.toml"]] {
        let o = xcn(d, &args);
        assert_exit(&o, 0);
        let text = stdout(&o);
        let get = |k: &str| -> usize { field(&text, k).unwrap().parse().unwrap() };
        let parts = ["cross", "embedding", "product", "concat", "mlp"].map(|k| get(&format!("params.{k}")));
        assert_eq!(parts.iter().sum::<usize>(), get("params.total"), "{text}");
        assert_eq!(get("params.cross"), 2 * 4 * 2);
    }
}

#[test]
fn interrupt_writes_a_final_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Large enough that it is still running when the signal arrives.
    fs::write(d.join("long.toml"), "[data.synth]\nn_train = 200000\n[train]\nepochs = 50\neval_every = 0\n").unwrap();
    let child = Command::new(env!("CARGO_BIN_EXE_xcn"))
        .args(["train", "--config", "long.toml", "--out", "run"])
        .current_dir(d)
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let log = d.join("run/train_log.jsonl");
    let started = Instant::now();
    while fs::read_to_string(&log).map_or(true, |s| s.lines().count() < 3) {
        assert!(started.elapsed() < Duration::from_secs(120), "training never logged");
        std::thread::sleep(Duration::from_millis(50));
    }
    let status = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(status.success());
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(130), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert_eq!(field(&text, "interrupted").as_deref(), Some("true"));

    let o = xcn(d, &["inspect", "--checkpoint", "run/model.ckpt"]);
    assert_exit(&o, 0);
    assert_eq!(field(&stdout(&o), "checkpoint.interrupted").as_deref(), Some("true"));
}
