//! Short-term voltage stability toolkit: fault simulation on bus/branch
//! cases, flux-linkage based voltage inertia (VIC) and voltage recovery
//! (VRC) indexes, and per-fault security requirements.

pub mod analytic;
pub mod case;
pub mod error;
pub mod indexes;
pub mod io;
pub mod linalg;
pub mod models;
pub mod network;
pub mod powerflow;
pub mod simulate;
pub mod study;

pub use case::{
    apply_operating_point, load_case, load_operating_point, load_scenarios, FaultScenario, OperatingPoint,
    SystemCase,
};
pub use error::{Error, ErrorClass, Result};
pub use powerflow::{init_dynamics, solve_power_flow, DynamicInit, PowerFlowSolution};
