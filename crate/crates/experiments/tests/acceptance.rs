//! Acceptance checks at the default configuration. Prints one line per
//! criterion and exits non-zero if any fails.
//!
//! Run with `cargo test -p vepm-experiments --test acceptance`; the test
//! profile is optimized. The planning-loss sweep dominates the runtime at
//! roughly twenty minutes on one core.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng as _;
use vepm_core::estimation::sample_complexity_budget;
use vepm_core::mdp::{
    inf_norm_diff, q_from_values, FeatureSchema, ModelParts, TabularModel, TransitionRow, ValueTable,
};
use vepm_core::planners::{q_value_iteration, value_iteration, vi_single_sweep};
use vepm_core::rng::seeded;
use vepm_core::squirrels_world::ModelId;
use vepm_core::PlanningConfig;
use vepm_experiments::planning_loss::{exp_bound_check, exp_planning_loss, BoundCheckConfig, LossCell};
use vepm_experiments::planning_time::exp_planning_time;
use vepm_experiments::sample_budget::{exp_budget_check, BudgetCheckConfig};
use vepm_experiments::sample_complexity::exp_sample_complexity;
use vepm_experiments::value_loss::exp_value_loss;
use vepm_experiments::{records_file_name, run_to_dir, Experiment, Settings, Variant, MANIFEST_FILE};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Self::new(false, format!("error: {e}"))
    }
}

fn value_loss_check(settings: &Settings) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for variant in Variant::ALL {
        let rows = match exp_value_loss(settings, variant) {
            Ok(out) => out.summary,
            Err(e) => return Outcome::error(e),
        };
        for row in &rows {
            let ok = match row.model {
                ModelId::M4 | ModelId::M5 | ModelId::M6 => row.loss <= 2e-8,
                ModelId::M1 | ModelId::M2 | ModelId::M3 => row.loss >= 0.1,
                ModelId::M7 => true,
            };
            pass &= ok;
        }
        let list: Vec<String> = rows.iter().map(|r| format!("{}={:.3e}", r.model, r.loss)).collect();
        parts.push(format!("{variant}: {}", list.join(" ")));
    }
    Outcome::new(pass, parts.join("; "))
}

/// `a <= b`, or a tie within one standard error of either mean.
fn ordered(a: &LossCell, b: &LossCell) -> bool {
    a.mean <= b.mean || a.mean - b.mean <= a.stderr.max(b.stderr)
}

fn planning_loss_checks(settings: &Settings) -> (Outcome, Outcome) {
    let cells = match exp_planning_loss(settings, Experiment::PlanningLoss.default_variant()) {
        Ok(out) => out.summary,
        Err(e) => return (Outcome::error(&e), Outcome::error(e)),
    };
    let cell = |id: ModelId, n: u64| cells.iter().find(|c| c.model == id && c.n == n).expect("cell");
    let models = [ModelId::M4, ModelId::M5, ModelId::M6, ModelId::M7];
    let ns = &settings.planning_loss.n_values;
    let mut pass = true;
    let mut detail = Vec::new();
    for &n in ns {
        for pair in models.windows(2) {
            pass &= ordered(cell(pair[0], n), cell(pair[1], n));
        }
        let means: Vec<String> = models.iter().map(|&m| format!("{:.3}", cell(m, n).mean)).collect();
        detail.push(format!("n={n}: {}", means.join(" <= ")));
    }
    let (first, last) = (ns[0], ns[ns.len() - 1]);
    for m in models {
        pass &= cell(m, last).mean <= cell(m, first).mean;
    }
    let violations: usize = cells.iter().map(|c| c.inequality_violations).sum();
    let trials: usize = cells.iter().map(|c| c.losses.len()).sum();
    (
        Outcome::new(pass, detail.join("; ")),
        Outcome::new(violations == 0, format!("{violations} violations in {trials} trials")),
    )
}

fn planning_time_check(settings: &Settings) -> Outcome {
    let costs = match exp_planning_time(settings, Variant::Det) {
        Ok(out) => out.summary,
        Err(e) => return Outcome::error(e),
    };
    let increasing = costs
        .windows(2)
        .all(|w| w[0].multiply_add_count < w[1].multiply_add_count);
    let ratio = costs[costs.len() - 1].multiply_add_count as f64 / costs[0].multiply_add_count as f64;
    let list: Vec<String> = costs
        .iter()
        .map(|c| format!("{}={}", c.model, c.multiply_add_count))
        .collect();
    Outcome::new(
        increasing && ratio >= 64.0,
        format!("{} m7/m4={ratio:.1}", list.join(" ")),
    )
}

fn sample_complexity_check(settings: &Settings) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for variant in Variant::ALL {
        let summary = match exp_sample_complexity(settings, variant) {
            Ok(out) => out.summary,
            Err(e) => return Outcome::error(e),
        };
        let (m4, m7) = (
            summary.median_first_success(ModelId::M4),
            summary.median_first_success(ModelId::M7),
        );
        pass &= m4 < m7;
        detail.push(format!("{variant}: median m4={m4} m7={m7}"));
    }
    Outcome::new(pass, detail.join("; "))
}

fn budget_check(settings: &Settings) -> Outcome {
    let check = BudgetCheckConfig::default();
    match exp_budget_check(settings, Variant::Stoch, &check) {
        Ok(out) => {
            let s = out.summary;
            let budget = s.budget.expect("budget");
            let worst = s.errors.iter().copied().fold(0.0, f64::max);
            Outcome::new(
                s.within_epsilon >= 90,
                format!(
                    "{}/{} within eps={} (states={}, N={}, k={}, worst={worst:.2e})",
                    s.within_epsilon,
                    s.errors.len(),
                    check.epsilon,
                    s.states,
                    budget.samples_per_pair,
                    budget.epochs
                ),
            )
        }
        Err(e) => Outcome::error(e),
    }
}

fn bound_check(settings: &Settings) -> Outcome {
    let check = BoundCheckConfig::default();
    match exp_bound_check(settings, Variant::Stoch, &check) {
        Ok(out) => {
            let s = out.summary;
            let worst = s.losses.iter().copied().fold(0.0, f64::max);
            let allowed = (check.delta * check.trials as f64).floor() as usize;
            Outcome::new(
                s.exceedances <= allowed,
                format!(
                    "{} of {} trials exceed bound {:.1} (worst loss {worst:.3})",
                    s.exceedances, check.trials, s.bound
                ),
            )
        }
        Err(e) => Outcome::error(e),
    }
}

fn random_model(rng: &mut vepm_core::rng::Rng, states: usize, gamma: f64) -> TabularModel<f64> {
    let actions = rng.random_range(1..=4);
    let mut transitions = Vec::with_capacity(states * actions);
    let mut rewards = Vec::with_capacity(states * actions);
    let terminal: Vec<bool> = (0..states).map(|_| rng.random_bool(0.05)).collect();
    for (s, &t) in terminal.iter().enumerate() {
        for _ in 0..actions {
            if t {
                transitions.push(TransitionRow::point_mass(states, s));
                rewards.push(0.0);
                continue;
            }
            let k = rng.random_range(1..=8usize.min(states));
            let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = w.iter().sum();
            let entries = w.iter().map(|x| (rng.random_range(0..states), x / total)).collect();
            transitions.push(TransitionRow::from_entries(states, entries).expect("row"));
            rewards.push(rng.random_range(0.0..1.0));
        }
    }
    TabularModel::new(ModelParts {
        schema: FeatureSchema::new([("s", states)]).expect("schema"),
        sentinels: vec![],
        action_count: actions,
        transitions,
        rewards,
        discount: gamma,
        terminal,
        r_max: 1.0,
    })
    .expect("model")
}

/// Q-value iteration properties on randomized models.
fn qvi_property_check(seed: u64) -> Outcome {
    const MODELS: usize = 100;
    let eps = 0.05;
    let mut rng = seeded(seed);
    let mut failures = Vec::new();
    let mut largest = 0;
    for i in 0..MODELS {
        let states = if i == 0 { 4096 } else { 1 << rng.random_range(0..=12) };
        largest = largest.max(states);
        let gamma = rng.random_range(0.5..0.95);
        let m = random_model(&mut rng, states, gamma);
        let Ok(plan) = value_iteration(&m, &PlanningConfig::with_tol(1e-12)) else {
            failures.push(format!("model {i}: value iteration failed"));
            continue;
        };
        let q_star = q_from_values(&m, &plan.values).expect("shape");
        let k = sample_complexity_budget(states, m.action_count(), eps, gamma, 0.1)
            .expect("budget")
            .epochs as usize;

        let q0 = q_value_iteration(&m, 0);
        let q1 = q_value_iteration(&m, 1);
        let qk = q_value_iteration(&m, k);
        let agree = inf_norm_diff(&qk.max_values(), &plan.values).expect("shape");
        let mut contracts = true;
        let mut prev = q0.inf_norm_diff(&q_star).expect("shape");
        for j in 1..=5 {
            let e = q_value_iteration(&m, j).inf_norm_diff(&q_star).expect("shape");
            contracts &= e <= gamma * prev + 1e-9;
            prev = e;
        }
        let u = ValueTable::new((0..states).map(|_| rng.random_range(-5.0..5.0)).collect());
        let w = ValueTable::new((0..states).map(|_| rng.random_range(-5.0..5.0)).collect());
        let (tu, _) = vi_single_sweep(&m, &u).expect("shape");
        let (tw, _) = vi_single_sweep(&m, &w).expect("shape");
        contracts &= inf_norm_diff(&tu, &tw).expect("shape") <= gamma * inf_norm_diff(&u, &w).expect("shape") + 1e-9;

        let checks = [
            ("Q0=0", q0.as_slice().iter().all(|&q| q == 0.0)),
            ("Q1=r", q1.as_slice() == m.rewards()),
            ("QVI/VI", agree <= eps),
            ("contraction", contracts),
        ];
        for (name, ok) in checks {
            if !ok {
                failures.push(format!("model {i} ({states} states): {name}"));
            }
        }
    }
    if failures.is_empty() {
        Outcome::new(
            true,
            format!("{MODELS} models up to {largest} states, 4 properties each"),
        )
    } else {
        Outcome::new(false, failures.join(", "))
    }
}

/// Runs each experiment, reruns it from the manifest it wrote, and compares
/// record files byte for byte. Run counts are cut down to keep this quick;
/// the seeding does not depend on them.
fn reproducibility_check(settings: &Settings) -> Outcome {
    let mut small = settings.clone();
    small.planning_loss.runs = 2;
    small.planning_time.runs = 3;
    small.sample_complexity.runs = 3;
    small.sample_complexity.episodes = 100;
    small.sample_complexity.decay_episodes = 50;
    let Ok(tmp) = tempfile::tempdir() else {
        return Outcome::new(false, "cannot create a temporary directory");
    };
    let mut mismatched = Vec::new();
    for experiment in Experiment::ALL {
        let name = experiment.name();
        let first = tmp.path().join(format!("{name}-a"));
        let second = tmp.path().join(format!("{name}-b"));
        let result = run_to_dir(experiment, &small, &first, None).and_then(|_| {
            let replay = Settings::from_file(&first.join(MANIFEST_FILE))?;
            run_to_dir(experiment, &replay, &second, Some(&first.join(MANIFEST_FILE)))
        });
        if let Err(e) = result {
            return Outcome::error(format!("{name}: {e}"));
        }
        if !same_bytes(&first, &second, &records_file_name(name)) {
            mismatched.push(name);
        }
    }
    Outcome::new(
        mismatched.is_empty(),
        if mismatched.is_empty() {
            format!("{} experiments replayed from their manifests", Experiment::ALL.len())
        } else {
            format!("records differ for {}", mismatched.join(", "))
        },
    )
}

fn same_bytes(a: &Path, b: &Path, file: &str) -> bool {
    match (fs::read(a.join(file)), fs::read(b.join(file))) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

fn main() -> ExitCode {
    let settings = Settings::default();
    let mut results: Vec<(u8, &str, Outcome, f64)> = Vec::new();
    let mut timed = |id: u8, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {id} {name}: {} ({secs:.1}s)", outcome.detail);
        results.push((id, name, outcome, secs));
    };

    timed(1, "zero value loss of m4-m6, positive for m1-m3", &mut || {
        value_loss_check(&settings)
    });
    let mut inequalities = None;
    timed(2, "planning loss ordering m4<=m5<=m6<=m7 and n=20<=n=3", &mut || {
        let (order, ineq) = planning_loss_checks(&settings);
        inequalities = Some(ineq);
        order
    });
    timed(3, "sweep cost m4<m5<m6<m7, m7/m4>=64", &mut || {
        planning_time_check(&settings)
    });
    timed(4, "m4 agent reaches 95% of optimal before m7", &mut || {
        sample_complexity_check(&settings)
    });
    timed(5, "sample budget gives eps-accurate Q in >=90/100 trials", &mut || {
        budget_check(&settings)
    });
    timed(6, "planning loss exceeds its bound in <=5% of trials", &mut || {
        bound_check(&settings)
    });
    timed(7, "Q-value iteration properties", &mut || {
        qvi_property_check(settings.seed)
    });
    timed(
        8,
        "value-error and residual inequalities on every planning-loss trial",
        &mut || {
            inequalities
                .take()
                .unwrap_or_else(|| Outcome::new(false, "planning-loss runs missing"))
        },
    );
    timed(9, "records byte-identical when rerun from the manifest", &mut || {
        reproducibility_check(&settings)
    });

    let failed: Vec<u8> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
