//! Numerical emulation of mixed-state quantum circuits that estimate
//! two-point time-correlation functions `C(t)` and transition rates `Ċ(t)`
//! for Markovian open quantum systems.
//!
//! The crate is organized bottom-up:
//!
//! - [`operators`]: dense complex-matrix utilities (tensor products, partial
//!   traces, controlled-gate block algebra, Hermitian exponentials).
//! - [`lindblad`]: the master-equation generator in both pictures, an exact
//!   superoperator propagator, and a fixed-step RK4 integrator.
//! - [`modular`]: the ancilla-dilation scheme that realizes one first-order
//!   time step of the dissipative dynamics with unitaries only.
//! - [`rate`]: the measurement circuits themselves — expectation values of a
//!   control qubit after mixed swaps and controlled operator insertions — and
//!   their assembly into `C(t)` and `Ċ(t)`, plus finite-shot emulation.
//! - [`models`]: concrete systems (damped spin-1/2 with closed-form
//!   references, a discretized double-well particle with thermal damping) and
//!   rate-constant fitting.

pub mod error;
pub mod lindblad;
pub mod models;
pub mod modular;
pub mod operators;
pub mod rate;

pub use error::CoreError;
pub use lindblad::{LindbladModel, Picture};
pub use modular::{ModularConfig, ModularResult};
pub use rate::{CircuitParams, Evolver, ExpectationEstimate, TransitionSetup};

/// Dense square complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;

/// Complex scalar type used throughout the crate.
pub type C64 = num_complex::Complex64;
