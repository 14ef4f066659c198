use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 3
[data]
n_total = 12000
process_overrides = [
  { name = "ttH", cross_section = 20.0 },
  { name = "ttZ", cross_section = 20.0 },
  { name = "ttW", cross_section = 20.0 },
  { name = "wz", cross_section = 20.0 },
  { name = "ww", cross_section = 20.0 },
]
[train]
hidden_dim = 8
max_epochs = 2
patience = 1
[ig]
steps = 4
n_signal_inputs = 10
[eval]
k_max = 2
"#;

fn igx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_igx"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bad_fraction_sum_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[data]\nfractions = { train = 0.6, val = 0.2, test = 0.3 }\n");
    let o = igx(&["generate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sum to 1"), "{}", stderr(&o));
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[ig]\nstep = 10\n");
    let o = igx(&["generate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("step"), "{}", stderr(&o));
}

#[test]
fn unknown_baseline_exits_2() {
    let o = igx(&["attribute", "--baseline", "ones"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_3() {
    let o = igx(&["generate", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn train_without_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = igx(&["train", "--out", dir.path().join("empty").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn evaluate_names_the_missing_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = igx(&["evaluate", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("B0.json"), "{}", stderr(&o));
}

#[test]
fn generate_train_attribute_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("nested/out");
    let out_s = out.to_str().unwrap();

    let o = igx(&["generate", "--config", &cfg, "--out", out_s, "--seed", "11"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for s in ["train", "val", "test"] {
        assert!(out.join(format!("data/{s}.csv")).exists());
    }

    let o = igx(&["train", "--config", &cfg, "--out", out_s, "--seed", "11"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("model/checkpoint.igxm").exists());
    let log = fs::read_to_string(out.join("model/training_log.csv")).unwrap();
    assert!(log.starts_with("epoch,train_loss,val_loss"));

    let o = igx(&[
        "attribute", "--config", &cfg, "--out", out_s, "--seed", "11", "--baseline", "zero", "--steps", "6",
        "--baseline-space", "raw", "--sequential",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("B0:"));
    let json = fs::read_to_string(out.join("attribution/B0.json")).unwrap();
    assert!(json.contains("\"steps\": 6"), "{json}");
    let echo = fs::read_to_string(out.join("run_config.toml")).unwrap();
    assert!(echo.contains("seed = 11"));
    assert!(echo.contains("baseline_space = \"raw\""));
}
