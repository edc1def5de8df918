//! Factored tabular MDPs and the machinery around value-equivalent partial
//! models: planners, feature-subset projections, certainty-equivalence
//! estimation and the squirrel-and-hawk corridor world.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64` for the common case.

pub mod abstraction;
mod error;
pub mod estimation;
pub mod mdp;
pub mod planners;
pub mod rng;
mod scalar;
pub mod squirrels_world;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use abstraction::{FeatureSubset, OmittedDistribution, Projection};
pub use mdp::{FeatureSchema, FeatureVector, Policy, StateIndex, DEFAULT_TOL};
pub use planners::{PlanningConfig, TieBreak};

pub type Model = mdp::TabularModel<f64>;
pub type Model32 = mdp::TabularModel<f32>;
pub type Values = mdp::ValueTable<f64>;
pub type Values32 = mdp::ValueTable<f32>;
pub type QValues = mdp::QTable<f64>;
pub type QValues32 = mdp::QTable<f32>;
pub type PartialModel = abstraction::PartialModel<f64>;
pub type PartialModel32 = abstraction::PartialModel<f32>;
pub type World = squirrels_world::SwWorld<f64>;
pub type World32 = squirrels_world::SwWorld<f32>;
