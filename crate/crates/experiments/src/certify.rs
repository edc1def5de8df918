//! Value-equivalence and minimality certificates for catalog models, and
//! the bound calculators as records.

use vepm_core::abstraction::{certify_minimal, MinimalityReport};
use vepm_core::estimation::{planning_loss_bound, BoundParams, SampleBudget};
use vepm_core::squirrels_world::ModelId;

use crate::config::Settings;
use crate::error::Result;
use crate::records::{ExperimentRecord, Variant};
use crate::worlds::build_world;
use crate::Output;

pub const NAME: &str = "certify";
pub const BOUNDS_NAME: &str = "bounds";

/// Loss allowed for a certificate: twice the planning tolerance, the
/// numerical floor of a value-loss computation.
pub fn certification_tol(settings: &Settings) -> f64 {
    2.0 * settings.planning.tol
}

pub fn exp_certify(settings: &Settings, variant: Variant, model: ModelId) -> Result<Output<MinimalityReport<f64>>> {
    let world = build_world(&settings.world(variant)?)?;
    let report = certify_minimal(&world.model, &model.subset(), certification_tol(settings))?;
    let rec = |param: String, metric: &str, value: f64| {
        ExperimentRecord::new(NAME, model, variant, settings.seed, param, metric, value)
    };
    let flag = |b: bool| f64::from(u8::from(b));
    let mut records = vec![
        rec(
            String::new(),
            "value_equivalent",
            flag(report.certificate.value_equivalent),
        ),
        rec(String::new(), "value_loss", report.certificate.loss),
        rec(String::new(), "minimal", flag(report.minimal)),
    ];
    for (feature, cert) in &report.reductions {
        let param = format!("without={feature}");
        records.push(rec(param.clone(), "value_equivalent", flag(cert.value_equivalent)));
        records.push(rec(param, "value_loss", cert.loss));
    }
    Ok(Output {
        records,
        timing: Vec::new(),
        summary: report,
    })
}

fn bound_record(seed: u64, parameter: String, metric: &str, value: f64) -> ExperimentRecord {
    // the calculators are not tied to a world variant; det is recorded
    ExperimentRecord::new(BOUNDS_NAME, "-", Variant::Det, seed, parameter, metric, value)
}

/// Records for the planning-loss bound.
pub fn planning_bound_records(
    seed: u64,
    states: usize,
    actions: usize,
    params: &BoundParams,
    r_max: f64,
    gamma: f64,
) -> Result<(f64, Vec<ExperimentRecord>)> {
    let bound = planning_loss_bound(states, actions, params, r_max, gamma)?;
    let param = format!(
        "states={states},actions={actions},n={},delta={},ln_policy_class={},r_max={r_max},gamma={gamma}",
        params.n,
        params.delta,
        params.policy_class_size.ln()
    );
    Ok((bound, vec![bound_record(seed, param, "planning_loss_bound", bound)]))
}

/// Records for the generative-model sample budget.
pub fn sample_budget_records(
    seed: u64,
    states: usize,
    actions: usize,
    params: &BoundParams,
    gamma: f64,
) -> Result<(SampleBudget, Vec<ExperimentRecord>)> {
    let budget = params.sample_budget(states, actions, gamma)?;
    let param = format!(
        "states={states},actions={actions},epsilon={},delta={},gamma={gamma}",
        params.epsilon, params.delta
    );
    let records = vec![
        bound_record(seed, param.clone(), "samples_per_pair", budget.samples_per_pair as f64),
        bound_record(seed, param.clone(), "epochs", budget.epochs as f64),
        bound_record(seed, param, "total_samples", budget.total_samples(states, actions)),
    ];
    Ok((budget, records))
}
