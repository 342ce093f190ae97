//! Invariants `ξ`, one-variable profiles and the chain rule that lifts them to
//! fields on ℝⁿ.

mod classify;
mod invariant;
mod profile;

pub use classify::{classify_invariant, InvariantClass, CLASSIFY_RESIDUAL_LIMIT};
pub use invariant::{
    build_invariant, invariant_jet, FieldJet, InvariantDescription, InvariantKind, InvariantSpec,
};
pub use profile::{
    lift_profile, potential_from_h, Interval, ProfileExpr, ProfileJet, ProfileSource,
    SampledProfile, ScalarProfile,
};
