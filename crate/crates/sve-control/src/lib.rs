//! Backstepping boundary stabilization for the linearized Saint-Venant–Exner
//! channel model.
//!
//! The physical model couples water depth `H`, velocity `V`, and a moving
//! sediment bed `B` on a unit-length channel.  Linearized about a uniform
//! equilibrium `(H*, V*, B*)`, the deviations form a 3×3 first-order
//! hyperbolic system whose characteristic speeds are the roots of
//!
//! ```text
//!     λ³ − 2V*λ² + (V*² − gH* − g·a·V*²)λ + g·a·V*³ = 0,
//! ```
//!
//! always one negative and two positive.  In characteristic variables the
//! system becomes two rightward transport equations coupled to one leftward
//! equation, controlled through the rightmost boundary.  This crate builds
//! that chain end to end:
//!
//! - [`model`]: equilibrium validation and the linearized matrices;
//! - [`cubic`] / [`characteristics`]: the characteristic speeds, the
//!   diagonalizing transform, and the exponential change of variables that
//!   freezes the leftward equation's self-coupling;
//! - [`grid`], [`kernels`], [`volterra`]: the backstepping kernel equations
//!   on the triangle `{0 ≤ ξ ≤ x ≤ 1}`, solved by characteristic marching
//!   with Picard sweeps, plus the Volterra machinery for target-system
//!   couplings and inverse transforms;
//! - [`lyapunov`]: the weighted L² functionals certifying decay;
//! - [`simulator`]: a finite-volume closed-loop simulator for the plant, the
//!   boundary observer, and both feedback laws.
//!
//! Everything is deterministic: no randomness, no global state, and no
//! dependence on iteration order beyond what the algorithms fix themselves.

pub mod characteristics;
pub mod coefficients;
pub mod cubic;
pub mod grid;
pub mod kernels;
mod linalg;
pub mod lyapunov;
pub mod model;
pub mod simulator;
pub mod volterra;

pub use characteristics::{
    char_coefficients, char_transform, from_characteristic, rescale_w, spectrum,
    to_characteristic, unrescale_w, CharCoefficients, CharError, CharField, Regime, Spectrum,
};
pub use coefficients::{AbstractCoefficients, CoefFn};
pub use grid::{GridError, TriangleGrid};
pub use kernels::{
    kernel_residual, observer_gains, solve_controller_kernels, solve_observer_kernels,
    KernelError, KernelField, KernelRole, KernelSolution, ObserverGains, ResidualReport,
    SolverOptions,
};
pub use lyapunov::{lyapunov_total, lyapunov_v1, lyapunov_v2, LyapunovWeights};
pub use model::{
    equilibrium_slope, froude, linearize, EquilibriumSetup, LinearizedMatrices, ModelError,
    PhysicalParams,
};
pub use simulator::{
    init_state, run, write_trace_csv, BoundaryTerms, Controller, Engine, EngineOptions,
    HeatHistory, ObserverInit, PlantState, RunOutput, SimConfig, SimError, Snapshot, StepInfo,
    TraceRecord,
};
pub use volterra::{
    compose, controller_inverse_kernels, coupling_kernels, observer_coupling_kernels,
    observer_inverse_kernels, volterra_apply, volterra_resolvent, AlphaArg, CouplingKernels,
    InverseKernels, ObserverCouplings,
};
