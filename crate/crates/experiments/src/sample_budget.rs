//! Monte Carlo check of the generative-model sample budget: estimate a model
//! from `N` draws per pair, run `k` epochs of Q-value iteration and measure
//! the distance to the true optimal Q-values.

use vepm_core::estimation::{estimate_model, sample_complexity_budget, sample_dataset, SampleBudget};
use vepm_core::mdp::q_from_values;
use vepm_core::planners::{q_value_iteration, value_iteration};
use vepm_core::rng::derive_seed;
use vepm_core::squirrels_world::{build_sw_relevant, SwConfig};
use vepm_core::PlanningConfig;

use crate::config::Settings;
use crate::error::{Error, Result};
use crate::records::{ExperimentRecord, Variant};
use crate::Output;

pub const NAME: &str = "sample-budget";

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetCheckConfig {
    pub columns: usize,
    pub bush_columns: Vec<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub trials: usize,
}

impl Default for BudgetCheckConfig {
    fn default() -> Self {
        Self {
            columns: 8,
            bush_columns: vec![2, 3, 5],
            epsilon: 0.05,
            delta: 0.1,
            trials: 100,
        }
    }
}

impl BudgetCheckConfig {
    /// The configured world shrunk to `columns` columns.
    pub fn world(&self, base: &SwConfig) -> Result<SwConfig> {
        let cfg = SwConfig {
            columns: self.columns,
            bush_columns: self.bush_columns.iter().copied().collect(),
            hawk_start_col: base.hawk_start_col.min(self.columns - 1),
            ..base.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BudgetCheck {
    pub states: usize,
    pub budget: Option<SampleBudget>,
    /// `||Q^k - Q*||∞` per trial.
    pub errors: Vec<f64>,
    pub within_epsilon: usize,
}

/// Runs on the squirrel/hawk-only model of the reduced world, which is what
/// a value-equivalent partial model reduces to.
pub fn exp_budget_check(
    settings: &Settings,
    variant: Variant,
    check: &BudgetCheckConfig,
) -> Result<Output<BudgetCheck>> {
    if check.trials == 0 {
        return Err(Error::setting("trials", "must be at least 1"));
    }
    let cfg = check.world(&settings.world(variant)?)?;
    let world = build_sw_relevant::<f64>(&cfg)?;
    let truth = &world.model;
    let (states, actions) = (truth.state_count(), truth.action_count());
    let budget = sample_complexity_budget(states, actions, check.epsilon, truth.discount(), check.delta)?;

    // reference Q* well inside epsilon
    let plan = value_iteration(truth, &PlanningConfig::with_tol(1e-12))?;
    let q_star = q_from_values(truth, &plan.values)?;

    let param = format!("epsilon={},delta={}", check.epsilon, check.delta);
    let mut out: Output<BudgetCheck> = Output::default();
    for trial in 0..check.trials {
        let seed = derive_seed(settings.seed, &format!("{NAME}/{variant}"), trial as u64);
        let counts = sample_dataset(truth, budget.samples_per_pair, seed)?;
        let estimated = estimate_model(truth, &counts)?;
        let q = q_value_iteration(&estimated, budget.epochs as usize);
        let err = q.inf_norm_diff(&q_star)?;
        out.records.push(ExperimentRecord::new(
            NAME,
            "m4",
            variant,
            seed,
            param.clone(),
            "q_error",
            err,
        ));
        out.summary.errors.push(err);
    }
    let within = out.summary.errors.iter().filter(|&&e| e <= check.epsilon).count();
    for (metric, value) in [
        ("states", states as f64),
        ("samples_per_pair", budget.samples_per_pair as f64),
        ("epochs", budget.epochs as f64),
        ("trials_within_epsilon", within as f64),
    ] {
        out.records.push(ExperimentRecord::new(
            NAME,
            "m4",
            variant,
            settings.seed,
            param.clone(),
            metric,
            value,
        ));
    }
    out.summary.states = states;
    out.summary.budget = Some(budget);
    out.summary.within_epsilon = within;
    Ok(out)
}
