//! Quaternionic Hopfield networks on unit quaternions.
//!
//! Three models are provided: the multivalued network that updates one
//! phase angle at a time ([`Model::MvQhnn`]), its variant that updates all
//! three angles at once ([`Model::MvQhnn3`]), and the continuous-valued
//! network that normalizes the activation potential ([`Model::CvQhnn`]).
//! Around them sit energy diagnostics, exhaustive fixed-point search for
//! small instances, and reproducible convergence experiments.

pub mod diagnostics;
pub mod dynamics;
pub mod experiments;
pub mod instances;
pub mod network;
pub mod quaternion;
pub mod report;

pub use dynamics::{
    enumerate_fixed_points, is_fixed_point, quantize, run, run_observed, step_cvqhnn, step_mvqhnn, step_mvqhnn3,
    AngleSelector, DynamicsError, Model, NeuronUpdate, RunConfig, Time, Tolerances, TrajectoryOutcome, Transition,
    UpdateMode, Verdict,
};
pub use experiments::{
    convergence_sweep, large_k_equivalence, reproduce_example, ComparisonReport, ExperimentError, ReproReport,
    SweepConfig, SweepResult,
};
pub use instances::{example_instance, example_resolution, Instance, InstanceDocument};
pub use network::{
    random_hermitian_weights, random_state, ConditionReport, NetworkError, NetworkState, PhaseIndex, ResolutionFactors,
    WeightMatrix,
};
pub use quaternion::{NotRepresentable, PhaseTriple, Quaternion};
