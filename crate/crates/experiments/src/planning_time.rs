//! Cost of one value-iteration sweep on each value-equivalent model.
//!
//! Multiply-add counts are deterministic and go to the record file; wall
//! times go to the separate timing file.

use vepm_core::mdp::ValueTable;
use vepm_core::planners::vi_single_sweep;
use vepm_core::squirrels_world::ModelId;

use crate::config::Settings;
use crate::error::Result;
use crate::records::{mean_stderr, ExperimentRecord, Variant};
use crate::worlds::{build_world, partial_model};
use crate::Output;

pub const NAME: &str = "planning-time";
pub const MODELS: [ModelId; 4] = [ModelId::M4, ModelId::M5, ModelId::M6, ModelId::M7];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCost {
    pub model: ModelId,
    pub states: usize,
    pub multiply_add_count: u64,
    pub mean_wall_time: f64,
}

pub fn exp_planning_time(settings: &Settings, variant: Variant) -> Result<Output<Vec<SweepCost>>> {
    let runs = settings.planning_time.runs;
    let world = build_world(&settings.world(variant)?)?;
    let mut out: Output<Vec<SweepCost>> = Output::default();
    for id in MODELS {
        let view = partial_model(&world, id)?;
        let m = view.model();
        let v = ValueTable::zeros(m.state_count());
        let mut times = Vec::with_capacity(runs);
        let mut count = 0;
        for run in 0..runs {
            let (_, stats) = vi_single_sweep(m, &v)?;
            count = stats.multiply_add_count;
            let param = format!("run={run}");
            out.records.push(ExperimentRecord::new(
                NAME,
                id,
                variant,
                settings.seed,
                param.clone(),
                "multiply_add_count",
                count as f64,
            ));
            let secs = stats.wall_time.as_secs_f64();
            out.timing.push(ExperimentRecord::new(
                NAME,
                id,
                variant,
                settings.seed,
                param,
                "wall_time_seconds",
                secs,
            ));
            times.push(secs);
        }
        let (mean, se) = mean_stderr(&times);
        for (metric, value) in [("mean_wall_time_seconds", mean), ("stderr_wall_time_seconds", se)] {
            out.timing.push(ExperimentRecord::new(
                NAME,
                id,
                variant,
                settings.seed,
                "",
                metric,
                value,
            ));
        }
        out.records.push(ExperimentRecord::new(
            NAME,
            id,
            variant,
            settings.seed,
            "",
            "states",
            m.state_count() as f64,
        ));
        out.summary.push(SweepCost {
            model: id,
            states: m.state_count(),
            multiply_add_count: count,
            mean_wall_time: mean,
        });
    }
    Ok(out)
}
