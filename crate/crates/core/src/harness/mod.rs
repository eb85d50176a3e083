//! Seeded experiment runner behind the command-line tool.

pub mod acceptance;
pub mod config;
pub mod experiments;
pub mod io;

pub use config::{ExperimentConfig, GroupingConfig, Outputs, PhiChoice};
pub use experiments::{
    augmented_objective, run_augmented_identity_check, run_cone_membership_check, run_gre_curve,
    run_grouping_experiment, run_proposition_experiments, run_theorem1_experiment, write_csv,
    ExperimentOutcome, ExperimentSummary, GreCurve, GreCurveSpec, GroupingOutcome, GroupingRow,
    GroupingVariant, PointSummary, PropositionSummary, ReplicationRecord,
};
