//! Building the full world and its partial models.

use vepm_core::abstraction::{project_model, Projection};
use vepm_core::mdp::TabularModel;
use vepm_core::squirrels_world::{build_sw, ModelId, SwConfig};
use vepm_core::{OmittedDistribution, World};

use crate::error::Result;

/// A partial model of a world. The identity subset borrows the full model
/// instead of copying it.
pub enum ModelView<'a> {
    Full(&'a TabularModel<f64>),
    Projected(Box<TabularModel<f64>>),
}

impl ModelView<'_> {
    pub fn model(&self) -> &TabularModel<f64> {
        match self {
            ModelView::Full(m) => m,
            ModelView::Projected(m) => m,
        }
    }
}

pub fn build_world(cfg: &SwConfig) -> Result<World> {
    Ok(build_sw(cfg)?)
}

/// `id`'s model of `world` under a uniform omitted distribution.
pub fn partial_model(world: &World, id: ModelId) -> Result<ModelView<'_>> {
    let subset = id.subset();
    if subset.is_identity_for(world.model.schema()) {
        return Ok(ModelView::Full(&world.model));
    }
    let partial = project_model(&world.model, &subset, &OmittedDistribution::Uniform)?;
    Ok(ModelView::Projected(Box::new(partial.model)))
}

pub fn projection(world: &World, id: ModelId) -> Result<Projection> {
    Ok(Projection::for_model(&world.model, &id.subset())?)
}
