//! Implicit discontinuous Galerkin spectral element solvers for 1D scalar
//! conservation laws.
//!
//! Two fully discrete schemes are provided: backward Euler in time and a
//! space-time slab formulation. Both use entropy-conservative volume fluxes,
//! monotone interface fluxes and a graph viscosity whose coefficients make the
//! schemes maximum-principle preserving and entropy stable.

pub mod adapt;
pub mod basis;
pub mod grid;
pub mod linalg;
pub mod physics;
pub mod reference;
pub mod scheme;
pub mod solver;
pub mod suite;
pub mod twopoint;
pub mod verify;

pub use basis::LobattoBasis;
pub use grid::{Field, Grid1D};
pub use physics::{make_problem, BoundaryCondition, EntropyKind, EntropyPair, Flux, Problem};
pub use scheme::{Discretization, SchemeKind, ViscosityConfig, ViscosityMode};
pub use solver::{advance, Method, RunReport, SolverConfig};
pub use twopoint::{EcEntropy, EcFlux, InterfaceFlux, InterfaceKind};

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("polynomial degree {0} is outside 1..=12")]
    InvalidDegree(usize),
    #[error("unknown problem id {0}, expected 1..=5")]
    UnknownProblem(u8),
    #[error("alpha = {alpha} is below the Lipschitz bound {bound}")]
    AlphaBelowLipschitz { alpha: f64, bound: f64 },
    #[error("interface flux {0:?} has no entropy flux companion")]
    NoEntropyCompanion(InterfaceKind),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("nonlinear solve failed at step {step}: {reason} (residual {residual:e})")]
    SolverFailure { step: usize, residual: f64, reason: String },
    #[error("root not bracketed on [{lo}, {hi}]")]
    NotBracketed { lo: f64, hi: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
