//! Specifications: reward machines, reachability, safety and LTL, with exact
//! evaluation on known MDPs.

pub mod buchi;
pub mod eval;
pub mod ltl;
pub mod machine;

pub use buchi::BuchiAutomaton;
pub use eval::{
    is_eps_optimal, optimal_limit_average, optimal_value, spec_value, PolicyRef, ProductMdp,
    Specification, Tracker, DEFAULT_POLICY_BUDGET,
};
pub use ltl::{ltl_eval_lasso, parse_ltl, BuiltinLtl, LassoWord, Ltl, LtlFormula, ParseError, ParseErrorKind};
pub use machine::{
    build_reach_arm, build_safe_arm, classify_arm, project_labels, rm_return, AbstractRewardMachine, ArmKind,
    Machine, ReturnMode, RewardMachine, RunRef,
};
