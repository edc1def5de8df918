use std::fs;

use vepm_core::squirrels_world::ModelId;
use vepm_experiments::planning_loss::exp_planning_loss;
use vepm_experiments::planning_time::exp_planning_time;
use vepm_experiments::records::{check_records, read_records_file};
use vepm_experiments::sample_complexity::exp_sample_complexity_for;
use vepm_experiments::{run_to_dir, timing_file_name, Experiment, RunManifest, Settings, Variant, MANIFEST_FILE};

fn quick() -> Settings {
    let mut s = Settings::default();
    s.planning_loss.runs = 3;
    s.planning_loss.n_values = vec![3, 20];
    s.planning_time.runs = 2;
    s.sample_complexity.runs = 2;
    s.sample_complexity.episodes = 60;
    s.sample_complexity.decay_episodes = 30;
    s
}

#[test]
fn manifest_reads_back_as_the_same_settings() {
    let mut settings = quick();
    settings.seed = 17;
    settings.world_overrides.push(("slip_prob".into(), "0.2".into()));
    let manifest = RunManifest::new("value-loss", &settings, Variant::Stoch, "out".as_ref(), None, vec![]).unwrap();
    let back: Settings = manifest.to_text().parse().unwrap();
    assert_eq!(back.seed, 17);
    assert_eq!(back.variant, Some(Variant::Stoch));
    assert_eq!(back.planning_loss, settings.planning_loss);
    assert_eq!(back.sample_complexity, settings.sample_complexity);
    assert_eq!(
        back.world(Variant::Stoch).unwrap(),
        settings.world(Variant::Stoch).unwrap()
    );
}

#[test]
fn value_loss_run_writes_manifest_then_records() {
    let dir = tempfile::tempdir().unwrap();
    let files = run_to_dir(Experiment::ValueLoss, &Settings::default(), dir.path(), None).unwrap();
    assert_eq!(files.manifest, dir.path().join(MANIFEST_FILE));
    assert!(files.timing.is_none());
    let records = read_records_file(&files.records).unwrap();
    check_records(&records).unwrap();
    assert_eq!(records.len(), 15);
    let text = fs::read_to_string(&files.manifest).unwrap();
    assert!(text.starts_with("[manifest]\nexperiment = value-loss\n"));
    assert!(text.contains("variant = det"));
}

#[test]
fn timing_is_kept_out_of_records() {
    let dir = tempfile::tempdir().unwrap();
    let files = run_to_dir(Experiment::PlanningTime, &quick(), dir.path(), None).unwrap();
    let timing = files.timing.expect("timing file");
    assert_eq!(timing, dir.path().join(timing_file_name("planning-time")));
    let records = read_records_file(&files.records).unwrap();
    assert!(records.iter().all(|r| !r.metric.ends_with("wall_time_seconds")));
    let timing = read_records_file(&timing).unwrap();
    assert!(timing.iter().all(|r| r.metric.ends_with("wall_time_seconds")));
}

#[test]
fn sweep_counts_do_not_depend_on_run() {
    let out = exp_planning_time(&quick(), Variant::Det).unwrap();
    let counts: Vec<u64> = out.summary.iter().map(|c| c.multiply_add_count).collect();
    // frozen from the built deterministic models
    assert_eq!(counts.first(), Some(&1542));
    assert_eq!(counts.last(), Some(&196_614));
    assert!(counts.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn planning_loss_small_run() {
    let out = exp_planning_loss(&quick(), Variant::Stoch).unwrap();
    check_records(&out.records).unwrap();
    assert_eq!(out.summary.len(), 4 * 2);
    for cell in &out.summary {
        assert_eq!(cell.losses.len(), 3);
        assert_eq!(cell.inequality_violations, 0);
        assert!(cell.losses.iter().all(|&l| l >= -1e-9));
    }
}

#[test]
fn deterministic_world_is_learned_exactly_from_one_sample() {
    // every deterministic row is recovered from a single draw
    let mut s = quick();
    s.planning_loss.n_values = vec![1];
    let out = exp_planning_loss(&s, Variant::Det).unwrap();
    assert!(out.summary.iter().all(|c| c.mean <= 2e-8));
}

#[test]
fn learning_runs_are_reproducible() {
    let s = quick();
    let a = exp_sample_complexity_for(&s, Variant::Det, &[ModelId::M4]).unwrap();
    let b = exp_sample_complexity_for(&s, Variant::Det, &[ModelId::M4]).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.summary.optimal_return, 10.0);
    assert_eq!(a.summary.runs.len(), 2);
}

#[test]
fn different_seeds_give_different_records() {
    let mut s = quick();
    let a = exp_planning_loss(&s, Variant::Stoch).unwrap();
    s.seed = 1;
    let b = exp_planning_loss(&s, Variant::Stoch).unwrap();
    assert_ne!(a.records, b.records);
}

#[test]
fn bad_config_is_reported_with_line() {
    let err = "[world]\ncolumns = 16\nbogus = 1\n".parse::<Settings>().unwrap_err();
    assert!(err.to_string().contains("bogus"), "{err}");
    let err = "[planning]\ntol = -1\n"
        .parse::<Settings>()
        .and_then(|s| s.validate())
        .unwrap_err();
    assert!(err.to_string().contains("tol"), "{err}");
}
