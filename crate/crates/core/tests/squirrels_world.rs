use std::sync::OnceLock;

use vepm_core::abstraction::{lift_policy, project_model, FeatureSubset, OmittedDistribution};
use vepm_core::planners::value_iteration;
use vepm_core::squirrels_world::{
    build_sw, build_sw_relevant, hawk_move, start_value, uncontrolled_occupancy, Action, HawkDir, ModelId, SwConfig,
    CLOUD, HAWK, HAWK_DIR, SQUIRREL, WEATHER, WIND,
};
use vepm_core::{abstraction::ValueLossContext, PlanningConfig, World};

/// Optimal start value of the deterministic world, frozen from the first
/// run (10 · 0.95^17: the nut is reached on the 18th step).
const DET_START_VALUE: f64 = 4.181203352191771;
const STOCH_START_VALUE: f64 = 1.8912386245301696;

fn det() -> &'static World {
    static W: OnceLock<World> = OnceLock::new();
    W.get_or_init(|| build_sw(&SwConfig::deterministic()).unwrap())
}

fn decode(w: &World, s: usize) -> Vec<usize> {
    w.model.schema().decode(s).unwrap().values().to_vec()
}

#[test]
fn deterministic_start_value() {
    let plan = value_iteration(&det().model, &PlanningConfig::default()).unwrap();
    let v = plan.values[det().start];
    assert!((v - DET_START_VALUE).abs() < 1e-7, "{v}");
    assert!((v - 10.0 * 0.95f64.powi(17)).abs() < 1e-7);
    assert!((start_value(&SwConfig::deterministic()).unwrap() - DET_START_VALUE).abs() < 1e-7);
}

#[test]
fn stochastic_start_value_of_relevant_model() {
    let v = start_value(&SwConfig::stochastic()).unwrap();
    assert!((v - STOCH_START_VALUE).abs() < 1e-7, "{v}");
}

#[test]
fn optimal_episode_reaches_nut() {
    let w = det();
    let plan = value_iteration(&w.model, &PlanningConfig::default()).unwrap();
    let ep = vepm_core::squirrels_world::simulate_episode_seeded(w, |s, _| plan.policy.action(s), 100, 0);
    assert_eq!(ep.len(), 18);
    assert_eq!(ep.steps.last().unwrap().next_state, w.nut);
    assert_eq!(ep.total_reward, 10.0);
    assert!((ep.discounted_return(0.95) - DET_START_VALUE).abs() < 1e-7);
}

#[test]
fn state_space_shape() {
    let w = det();
    assert_eq!(w.model.state_count(), 16 * 16 * 2 * 16 * 4 * 2 + 2);
    assert_eq!(w.model.action_count(), 3);
    assert_eq!(w.caught, 65_536);
    assert_eq!(w.nut, 65_537);
    assert_eq!(decode(w, w.start), vec![0, 0, HawkDir::Right as usize, 0, 0, 0]);
    let rel = build_sw_relevant::<f64>(&SwConfig::deterministic()).unwrap();
    assert_eq!(rel.model.state_count(), 514);
}

#[test]
fn deterministic_rows_have_one_successor() {
    let m = &det().model;
    assert!(m.rows().iter().all(|r| r.support_len() == 1));
}

#[test]
fn capture_when_hawk_sweeps_open_cell() {
    let w = det();
    let cfg = &w.config;
    for s in (0..65_536).step_by(7) {
        let f = decode(w, s);
        if f[0] == cfg.nut_column() {
            continue;
        }
        let dir = if f[2] == 0 { HawkDir::Left } else { HawkDir::Right };
        let mv = hawk_move(f[1], dir, cfg.hawk_speed, cfg.columns);
        for action in Action::ALL {
            let target = match action {
                Action::Left => f[0].saturating_sub(1),
                Action::Right => f[0] + 1,
                Action::Stay => f[0],
            };
            let next = w.model.row(s, action.index()).entries().next().unwrap().0;
            let exposed = mv.swept.contains(&target) && !cfg.bush_columns.contains(&target);
            assert_eq!(next == w.caught, exposed, "state {f:?} action {action:?}");
            if !exposed && target == cfg.nut_column() {
                assert_eq!(next, w.nut);
                assert_eq!(w.model.reward(s, action.index()), 10.0);
            }
        }
    }
}

#[test]
fn hawk_bounces_at_walls() {
    let mv = hawk_move(13, HawkDir::Right, 5, 16);
    assert_eq!(mv.swept, vec![14, 15, 14, 13, 12]);
    assert_eq!((mv.col, mv.dir), (12, HawkDir::Left));
    let mv = hawk_move(2, HawkDir::Left, 5, 16);
    assert_eq!(mv.swept, vec![1, 0, 1, 2, 3]);
    assert_eq!(mv.dir, HawkDir::Right);
}

#[test]
fn deterministic_distractors_drift() {
    let w = det();
    for s in (0..65_536).step_by(131) {
        let f = decode(w, s);
        if f[0] == 15 {
            continue;
        }
        let next = w.model.row(s, Action::Stay.index()).entries().next().unwrap().0;
        if next >= w.caught {
            continue;
        }
        let g = decode(w, next);
        assert_eq!(g[3], (f[3] + 1) % 16, "cloud");
        assert_eq!(g[4], (f[4] + 1) % 4, "wind");
        assert_eq!(g[5], 1 - f[5], "weather");
    }
}

#[test]
fn stochastic_rows_factor_over_distractors() {
    let w = build_sw::<f64>(&SwConfig::stochastic()).unwrap();
    let m = &w.model;
    // the relevant-feature marginal and the reward do not depend on cloud, wind or weather
    for rel in (0..512).step_by(5) {
        if rel / 32 == 15 {
            continue;
        }
        for a in 0..3 {
            let marginal = |s: usize| {
                let mut out = vec![0.0; 514];
                for (next, p) in m.row(s, a).entries() {
                    let r = if next >= 65_536 {
                        next - 65_536 + 512
                    } else {
                        next / 128
                    };
                    out[r] += p;
                }
                out
            };
            let base = marginal(rel * 128);
            for irr in [1, 37, 127] {
                let s = rel * 128 + irr;
                assert_eq!(m.reward(s, a), m.reward(rel * 128, a));
                let other = marginal(s);
                assert!(base.iter().zip(&other).all(|(x, y)| (x - y).abs() < 1e-12));
            }
            let row = m.row(rel * 128 + 5, a);
            assert!((row.sum() - 1.0).abs() < 1e-12);
            // squirrel 2 × hawk 2 × cloud 3 × wind 4 × weather 2
            assert!(row.support_len() <= 96);
        }
    }
}

#[test]
fn exact_projection_equals_relevant_model() {
    let w = det();
    let partial = project_model(&w.model, &ModelId::M4.subset(), &OmittedDistribution::Uniform).unwrap();
    assert!(partial.exact);
    let rel = build_sw_relevant::<f64>(&SwConfig::deterministic()).unwrap();
    assert_eq!(partial.model.state_count(), rel.model.state_count());
    for s in 0..rel.model.state_count() {
        for a in 0..3 {
            assert_eq!(partial.model.reward(s, a), rel.model.reward(s, a));
            let x: Vec<_> = partial.model.row(s, a).entries().collect();
            let y: Vec<_> = rel.model.row(s, a).entries().collect();
            assert_eq!(x.len(), y.len());
            for ((i, p), (j, q)) in x.into_iter().zip(y) {
                assert_eq!(i, j);
                assert!((p - q).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn projection_maps_features_consistently() {
    let w = det();
    let (pw, proj) = w.project(&ModelId::M5.subset(), &OmittedDistribution::Uniform).unwrap();
    assert_eq!(pw.model.state_count(), 16 * 16 * 2 * 16 + 2);
    for s in (0..65_536).step_by(97) {
        let f = decode(w, s);
        let g = pw.model.schema().decode(proj.project_index(s)).unwrap();
        assert_eq!(g.values(), &f[..4]);
    }
    assert_eq!(pw.caught, proj.project_index(w.caught));
    // lifting a projected policy keeps it constant on each block
    let plan = value_iteration(&pw.model, &PlanningConfig::default()).unwrap();
    let lifted = lift_policy(&plan.policy, &proj).unwrap();
    for s in (0..65_536).step_by(11) {
        assert_eq!(lifted.action(s), plan.policy.action(proj.project_index(s)));
    }
}

#[test]
fn deterministic_value_losses() {
    let w = det();
    let ctx = ValueLossContext::new(&w.model, &PlanningConfig::default()).unwrap();
    let loss = |id: ModelId| ctx.value_loss(&id.subset()).unwrap().loss;
    assert!((loss(ModelId::M1) - 9.025).abs() < 1e-7);
    assert!((loss(ModelId::M2) - 9.025).abs() < 1e-7);
    assert!((loss(ModelId::M3) - 7.737809374999999).abs() < 1e-7);
    for id in [ModelId::M4, ModelId::M5, ModelId::M6, ModelId::M7] {
        assert!(loss(id) <= 2e-8, "{id}");
    }
}

#[test]
fn occupancy_weights_are_a_distribution() {
    let subset = FeatureSubset::new([SQUIRREL, HAWK, HAWK_DIR]).unwrap();
    let dist = uncontrolled_occupancy::<f64>(&SwConfig::stochastic(), &subset, 200).unwrap();
    match dist {
        OmittedDistribution::Weights(w) => {
            assert_eq!(w.len(), 16 * 4 * 2);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(w.iter().all(|&x| x >= 0.0));
        }
        OmittedDistribution::Uniform => panic!("expected explicit weights"),
    }
    let no_squirrel = FeatureSubset::new([HAWK, CLOUD, WIND, WEATHER]).unwrap();
    assert!(uncontrolled_occupancy::<f64>(&SwConfig::stochastic(), &no_squirrel, 10).is_err());
}

#[test]
fn unsolvable_layout_is_rejected() {
    let cfg = SwConfig {
        bush_columns: Default::default(),
        ..SwConfig::deterministic()
    };
    assert!(matches!(build_sw::<f64>(&cfg), Err(vepm_core::Error::Unsolvable(_))));
}

#[test]
fn same_build_is_bitwise_identical() {
    let a = build_sw_relevant::<f64>(&SwConfig::stochastic()).unwrap();
    let b = build_sw_relevant::<f64>(&SwConfig::stochastic()).unwrap();
    assert_eq!(a.model.rewards(), b.model.rewards());
    for (x, y) in a.model.rows().iter().zip(b.model.rows()) {
        assert!(x.entries().eq(y.entries()));
    }
}
