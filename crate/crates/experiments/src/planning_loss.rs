//! Certainty-equivalence planning loss from `n` samples per pair, for the
//! value-equivalent models, plus the check of the loss bound.

use vepm_core::estimation::{
    estimate_model, planning_loss_bound, sample_dataset, BoundParams, PolicyClassSize, TruthReference,
};
use vepm_core::rng::derive_seed;
use vepm_core::squirrels_world::ModelId;

use crate::config::Settings;
use crate::error::{Error, Result};
use crate::records::{mean_stderr, ExperimentRecord, Variant};
use crate::worlds::{build_world, partial_model};
use crate::Output;

pub const NAME: &str = "planning-loss";
pub const BOUND_NAME: &str = "planning-loss-bound";
pub const MODELS: [ModelId; 4] = [ModelId::M4, ModelId::M5, ModelId::M6, ModelId::M7];

/// One model at one dataset size, aggregated over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct LossCell {
    pub model: ModelId,
    pub n: u64,
    pub losses: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
    /// Runs where one of the three value-error / residual inequalities failed.
    pub inequality_violations: usize,
}

fn run_seed(master: u64, variant: Variant, id: ModelId, n: u64, run: usize) -> u64 {
    derive_seed(master, &format!("{NAME}/{variant}/{id}/n={n}"), run as u64)
}

pub fn exp_planning_loss(settings: &Settings, variant: Variant) -> Result<Output<Vec<LossCell>>> {
    let cfg = &settings.planning_loss;
    let world = build_world(&settings.world(variant)?)?;
    let mut out: Output<Vec<LossCell>> = Output::default();
    for id in MODELS {
        let view = partial_model(&world, id)?;
        let truth = view.model();
        let reference = TruthReference::new(truth, &settings.planning)?;
        let slack = reference.check_slack();
        for &n in &cfg.n_values {
            let param = format!("n={n}");
            let mut losses = Vec::with_capacity(cfg.runs);
            let mut violations = 0;
            for run in 0..cfg.runs {
                let seed = run_seed(settings.seed, variant, id, n, run);
                let counts = sample_dataset(truth, n, seed)?;
                let estimated = estimate_model(truth, &counts)?;
                let report = reference.report(&estimated)?;
                let checks = [
                    report.value_error_check,
                    report.residual_checks[0],
                    report.residual_checks[1],
                ];
                let held = checks.iter().filter(|c| c.holds(slack)).count();
                if held < checks.len() {
                    violations += 1;
                }
                let rec = |metric: &str, value: f64| {
                    ExperimentRecord::new(NAME, id, variant, seed, param.clone(), metric, value)
                };
                out.records.push(rec("planning_loss", report.loss));
                out.records.push(rec("value_error_bound", report.value_error_check.rhs));
                out.records.push(rec("inequalities_held", held as f64));
                losses.push(report.loss);
            }
            let (mean, stderr) = mean_stderr(&losses);
            let agg = |metric: &str, value: f64| {
                ExperimentRecord::new(NAME, id, variant, settings.seed, param.clone(), metric, value)
            };
            out.records.push(agg("mean_planning_loss", mean));
            out.records.push(agg("stderr_planning_loss", stderr));
            out.records.push(agg("inequality_violations", violations as f64));
            out.summary.push(LossCell {
                model: id,
                n,
                losses,
                mean,
                stderr,
                inequality_violations: violations,
            });
        }
    }
    Ok(out)
}

/// Settings of the bound check.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheckConfig {
    pub model: ModelId,
    pub n: u64,
    pub delta: f64,
    pub trials: usize,
}

impl Default for BoundCheckConfig {
    fn default() -> Self {
        Self {
            model: ModelId::M4,
            n: 20,
            delta: 0.05,
            trials: 200,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundCheck {
    pub bound: f64,
    pub losses: Vec<f64>,
    pub exceedances: usize,
}

/// Empirical planning losses against the bound, with `|A|^|F|` standing in
/// for the policy-class size.
pub fn exp_bound_check(settings: &Settings, variant: Variant, check: &BoundCheckConfig) -> Result<Output<BoundCheck>> {
    if check.trials == 0 {
        return Err(Error::setting("trials", "must be at least 1"));
    }
    let world = build_world(&settings.world(variant)?)?;
    let view = partial_model(&world, check.model)?;
    let truth = view.model();
    let (states, actions) = (truth.state_count(), truth.action_count());
    let params = BoundParams {
        delta: check.delta,
        epsilon: 0.05,
        n: check.n,
        policy_class_size: PolicyClassSize::all_deterministic(states, actions)?,
    };
    let bound = planning_loss_bound(states, actions, &params, truth.r_max(), truth.discount())?;
    let reference = TruthReference::new(truth, &settings.planning)?;
    let param = format!("n={}", check.n);
    let mut out = Output::default();
    let mut losses = Vec::with_capacity(check.trials);
    for trial in 0..check.trials {
        let seed = derive_seed(
            settings.seed,
            &format!("{BOUND_NAME}/{variant}/{}", check.model),
            trial as u64,
        );
        let counts = sample_dataset(truth, check.n, seed)?;
        let loss = reference.loss(&estimate_model(truth, &counts)?)?;
        out.records.push(ExperimentRecord::new(
            BOUND_NAME,
            check.model,
            variant,
            seed,
            param.clone(),
            "planning_loss",
            loss,
        ));
        losses.push(loss);
    }
    let exceedances = losses.iter().filter(|&&l| l > bound).count();
    for (metric, value) in [("bound", bound), ("exceedances", exceedances as f64)] {
        out.records.push(ExperimentRecord::new(
            BOUND_NAME,
            check.model,
            variant,
            settings.seed,
            param.clone(),
            metric,
            value,
        ));
    }
    out.summary = BoundCheck {
        bound,
        losses,
        exceedances,
    };
    Ok(out)
}
