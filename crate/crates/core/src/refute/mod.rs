//! Constructive counterexamples and experiments showing where reductions
//! between specification classes cannot exist.

pub mod cycles;
pub mod figures;
pub mod pac;
pub mod report;
pub mod robust;
pub mod sweep;
pub mod thm1;

pub use cycles::{
    analyze_arm_for_buchi, analyze_cycles, build_thm3_witness, Cycle, CycleAnalysis, Thm3Witness, WitnessPlan,
    CYCLE_CAP,
};
pub use figures::{fig1_mdp, fig3_mdp, fig4_mdp};
pub use pac::{stationary_values, pac_indistinguishability_experiment, wilson_interval, PacExperiment, PacLearner};
pub use report::{csv_float, ExperimentReport, Table, Verdict};
pub use robust::robustness_experiment;
pub use sweep::{preservation_sweep, SweepKind, SweepPoint};
pub use thm1::{canonical_reach_rm, constant_rm, synthesize_thm1_counterexample, Thm1Witness};
