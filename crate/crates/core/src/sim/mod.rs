//! Monte-Carlo simulation of the Galerkin-truncated systems.

pub mod kernels;
pub mod rng;
pub mod spec;
pub mod stepper;

pub use rng::{brownian_increments, NoiseLayout, PathNoise, PathSeed, StepNoise};
pub use spec::{
    ClassFlags, DiffusionSpec, DriftKind, DriftSpec, InitialState, Model, NoiseLaw, NoiseSpec, PiecewiseLinear,
    SimGrid,
};
pub use stepper::{
    coupled_sup_error, coupled_sup_error_detailed, run_path, run_path_aggregated, simulate_first_order, simulate_second_order,
    write_first_order_csv, write_second_order_csv, FirstOrderStepper, FirstOrderTrajectory, GridSup,
    SecondOrderStepper, SecondOrderTrajectory, Stepper,
};
