use std::fs;
use std::process::{Command, Output};

fn vepm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vepm"))
        .args(args)
        .env_remove("VEPM_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn certify_m4_is_minimal() {
    let dir = tempfile::tempdir().unwrap();
    let out = vepm(&["certify", "m4", "--out", dir.path().to_str().unwrap()]);
    let text = stdout(&out);
    assert!(text.contains("VE=true minimal=true"), "{text}");
    assert!(dir.path().join("manifest.txt").exists());
    assert!(dir.path().join("certify.csv").exists());
}

#[test]
fn certify_m1_is_not_value_equivalent() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&vepm(&["certify", "m1", "--out", dir.path().to_str().unwrap()]));
    assert!(text.contains("VE=false minimal=false"), "{text}");
}

#[test]
fn sample_budget_output() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "bounds",
        "--thm",
        "3",
        "--states",
        "130",
        "--actions",
        "3",
        "--delta",
        "0.1",
        "--out",
    ];
    let text = stdout(&vepm(&[&args[..], &[dir.path().to_str().unwrap()]].concat()));
    assert!(text.contains("N = 2070552528"), "{text}");
    assert!(text.contains("k = 131"), "{text}");
    let records = fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert!(records.contains("samples_per_pair,2070552528"), "{records}");
}

#[test]
fn sample_budget_at_tight_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&vepm(&[
        "bounds",
        "--thm",
        "3",
        "--states",
        "512",
        "--actions",
        "3",
        "--eps",
        "0.01",
        "--gamma",
        "0.95",
        "--delta",
        "0.05",
        "--out",
        dir.path().to_str().unwrap(),
    ]));
    assert!(text.contains("N = 63685115341\n"), "{text}");
    assert!(text.contains("k = 162\n"), "{text}");
}

#[test]
fn planning_loss_bound_output() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["bounds", "--thm", "2", "--states", "512", "--actions", "3", "--out"];
    let text = stdout(&vepm(&[&args[..], &[dir.path().to_str().unwrap()]].concat()));
    assert!(text.contains("bound = 30292.3173934"), "{text}");
}

#[test]
fn invalid_arguments_fail() {
    assert!(!vepm(&["bounds", "--thm", "4", "--states", "1", "--actions", "1"])
        .status
        .success());
    assert!(!vepm(&["certify", "m9"]).status.success());
    let dir = tempfile::tempdir().unwrap();
    let out = vepm(&[
        "value-loss",
        "--config",
        "/nonexistent/vepm.conf",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn value_loss_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    stdout(&vepm(&["value-loss", "--out", a.to_str().unwrap()]));
    // replay from the written manifest
    let manifest = a.join("manifest.txt");
    stdout(&vepm(&[
        "value-loss",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]));
    let x = fs::read(a.join("value-loss.csv")).unwrap();
    let y = fs::read(b.join("value-loss.csv")).unwrap();
    assert_eq!(x, y);
    assert!(String::from_utf8(x)
        .unwrap()
        .starts_with("experiment,model_id,variant,seed,parameter,metric,value\n"));
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(
        &cfg,
        "# shorter learning runs\n[sample_complexity]\nepisodes = 40\ndecay_episodes = 20\n",
    )
    .unwrap();
    let out = dir.path().join("sc");
    let text = stdout(&vepm(&[
        "sample-complexity",
        "--config",
        cfg.to_str().unwrap(),
        "--runs",
        "2",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(text.contains("sample-complexity:"), "{text}");
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 5"));
    assert!(manifest.contains("episodes = 40"));
    assert!(manifest.contains("runs = 2"));
}
