//! Sampling-based reductions between RL tasks: descriptors, the induced
//! transition function, the simulator wrapper, built-in reductions and the
//! policy map back to the original MDP.

mod builtin;
mod descriptor;
mod policy_map;
mod wrap;

pub use builtin::{
    automaton_product_reduction, identity_reduction, lambda_sink_reduction, multidiscount_reduction,
    product_rm_reduction, two_discount_reduction, two_discount_spec, Aggregation, AutomatonProduct, ACCEPTING_PROPOSITION,
};
pub use descriptor::{compose, induced_transitions, validate_reduction, ReductionDescriptor, ReductionViolation};
pub use policy_map::{check_optimality_preservation, map_policy, PreservationReport};
pub use wrap::{wrap_simulator, WrappedSimulator};
