//! Value loss of every catalog model's optimal policy, lifted to the full
//! world. A single deterministic run.

use vepm_core::abstraction::ValueLossContext;
use vepm_core::squirrels_world::ModelId;

use crate::config::Settings;
use crate::error::Result;
use crate::records::{ExperimentRecord, Variant};
use crate::worlds::build_world;
use crate::Output;

pub const NAME: &str = "value-loss";

#[derive(Debug, Clone, PartialEq)]
pub struct ValueLossRow {
    pub model: ModelId,
    pub loss: f64,
    pub exact: bool,
}

pub fn exp_value_loss(settings: &Settings, variant: Variant) -> Result<Output<Vec<ValueLossRow>>> {
    let world = build_world(&settings.world(variant)?)?;
    let ctx = ValueLossContext::new(&world.model, &settings.planning)?;
    let mut out: Output<Vec<ValueLossRow>> = Output::default();
    for id in ModelId::ALL {
        let report = ctx.value_loss(&id.subset())?;
        let rec = |metric: &str, value: f64| ExperimentRecord::new(NAME, id, variant, settings.seed, "", metric, value);
        out.records.push(rec("value_loss", report.loss));
        out.records
            .push(rec("exact_projection", f64::from(u8::from(report.exact))));
        out.summary.push(ValueLossRow {
            model: id,
            loss: report.loss,
            exact: report.exact,
        });
    }
    out.records.push(ExperimentRecord::new(
        NAME,
        "full",
        variant,
        settings.seed,
        "",
        "optimal_start_value",
        ctx.optimal_values()[world.start],
    ));
    Ok(out)
}
