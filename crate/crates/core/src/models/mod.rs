//! Dynamic device models as pure functions: third-order synchronous
//! generator with a first-order exciter, and a first-order induction motor.

pub mod generator;
pub mod motor;

pub use generator::{
    decompose_q, generator_derivatives, generator_xy_admittance, stator_algebra, GeneratorDerivatives,
    GeneratorModel, GeneratorState, StatorOutputs, XyAdmittance, DEFAULT_EFD_MAX,
};
pub use motor::{motor_coefficients, motor_derivatives, MotorCoefficients, MotorModel, MotorState};
