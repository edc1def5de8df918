//! Feature-vector state spaces, tabular models and exact policy evaluation.

mod model;
mod schema;
mod values;

pub use model::{
    row_sum_tolerance, validate_model, ModelParts, TabularModel, TransitionRow, ValidationReport, Violation,
};
pub use schema::{Feature, FeatureSchema, FeatureVector, StateIndex};
pub use values::{
    evaluation_backup, inf_norm_diff, max_gap_state, policy_evaluation, q_from_values, Policy, QTable, ValueTable,
};

/// Default tolerance for evaluation and planning.
pub const DEFAULT_TOL: f64 = 1e-8;

pub fn encode_state(schema: &FeatureSchema, fv: &FeatureVector) -> crate::Result<StateIndex> {
    schema.encode(fv)
}

pub fn decode_state(schema: &FeatureSchema, index: StateIndex) -> crate::Result<FeatureVector> {
    schema.decode(index)
}
