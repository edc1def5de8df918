use vepm_core::estimation::{estimate_model, max_row_l1, sample_dataset, CountTable, TruthReference};
use vepm_core::squirrels_world::{build_sw_relevant, SwConfig};
use vepm_core::PlanningConfig;

fn truth() -> vepm_core::Model {
    build_sw_relevant::<f64>(&SwConfig::stochastic()).unwrap().model
}

#[test]
fn estimates_converge_with_samples() {
    let m = truth();
    let mut means = Vec::new();
    for n in [100u64, 10_000, 1_000_000] {
        let errs: Vec<f64> = (0..20)
            .map(|seed| {
                let counts = sample_dataset(&m, n, seed).unwrap();
                max_row_l1(&estimate_model(&m, &counts).unwrap(), &m).unwrap()
            })
            .collect();
        means.push(errs.iter().sum::<f64>() / errs.len() as f64);
    }
    // L1 error shrinks like n^{-1/2}: a factor of 10 per hundredfold samples
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
    assert!(means[1] / means[2] > 5.0 && means[1] / means[2] < 20.0, "{means:?}");
    assert!(means[2] < 0.01, "{means:?}");
}

#[test]
fn dataset_is_seed_deterministic() {
    let m = truth();
    let a = sample_dataset(&m, 50, 9).unwrap();
    let b = sample_dataset(&m, 50, 9).unwrap();
    let c = sample_dataset(&m, 50, 10).unwrap();
    let rows = |t: &CountTable| -> Vec<Vec<(usize, u64)>> {
        (0..m.state_count())
            .flat_map(|s| (0..3).map(move |a| (s, a)))
            .map(|(s, a)| t.row(s, a).collect())
            .collect()
    };
    assert_eq!(rows(&a), rows(&b));
    assert_ne!(rows(&a), rows(&c));
    for s in 0..m.state_count() {
        let expected = if m.is_terminal(s) { 0 } else { 50 };
        for a_ in 0..3 {
            assert_eq!(a.total(s, a_), expected);
        }
    }
}

#[test]
fn large_counts_keep_row_totals() {
    let m = truth();
    let counts = sample_dataset(&m, 2_000_000_000, 3).unwrap();
    for s in (0..m.state_count()).filter(|&s| !m.is_terminal(s)) {
        assert!((0..3).all(|a| counts.total(s, a) == 2_000_000_000));
    }
}

#[test]
fn true_model_has_zero_planning_loss() {
    let m = truth();
    let reference = TruthReference::new(&m, &PlanningConfig::default()).unwrap();
    assert!(reference.loss(&m).unwrap() <= 2e-8);
}

#[test]
fn certainty_equivalence_inequalities_hold() {
    let m = truth();
    let reference = TruthReference::new(&m, &PlanningConfig::default()).unwrap();
    for seed in 0..5 {
        let counts = sample_dataset(&m, 5, seed).unwrap();
        let estimated = estimate_model(&m, &counts).unwrap();
        let report = reference.report(&estimated).unwrap();
        assert!(report.loss >= -1e-9);
        assert!(report.value_error_check.holds(reference.check_slack()));
        assert!(report.residual_checks.iter().all(|c| c.holds(reference.check_slack())));
    }
}

#[test]
fn trajectory_counts() {
    let mut t = CountTable::new(4, 2);
    t.update_from_trajectory([(0, 1, 2), (2, 0, 3), (0, 1, 2)]).unwrap();
    assert_eq!(t.count(0, 1, 2), 2);
    assert_eq!(t.total(2, 0), 1);
    assert_eq!(t.visited_pairs(), 2);
    assert!(t.add(4, 0, 0, 1).is_err());
}
