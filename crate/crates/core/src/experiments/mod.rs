//! Heisenberg-model experiments: Hamiltonians, two-qubit closed forms, sweep
//! configs and the sweep driver with its CSV output.

pub mod analytic;
pub mod config;
pub mod model;
pub mod sweep;

pub use analytic::{analytic_two_qubit, heisenberg_coefficients, rho1_from_one_plus, TwoQubitAnalytic};
pub use config::{ExperimentConfig, InitialState, Output, PipelineSpec, TimeGrid, TimeScale, SCHEMA_VERSION};
pub use model::{build_hamiltonian, relabel_order, Couplings, SpinModel, MAX_QUBITS};
pub use sweep::{format_g, run_sweep, to_csv, RowValues, Sweep, SweepRow};
