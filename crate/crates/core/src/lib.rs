//! Numerical solvers for accretive growth driven by an activation field.
//!
//! The growing body is described by its time-of-attachment field `v`: the
//! body at time `t` is the sublevel `V(t) = { v < t }`. The field `v` is a
//! constrained geodesic distance whose anisotropic metric depends on a
//! space-time average `Ku` of an activation field `u`, which in turn solves
//! `-Δu = 1` on each `V(t)` with `u = 0` on a fixed Dirichlet portion.
//!
//! Modules:
//! - [`grid`]: lattices, masks and nodal fields,
//! - [`hamiltonian`]: Hamiltonian models and their support functions,
//! - [`hj`]: label-setting solver for `v` and optimal-curve backtracking,
//! - [`elliptic`]: masked Poisson solves on the growing sublevels,
//! - [`convolution`]: the space-time activation average `Ku`,
//! - [`coupling`]: the alternating fixed-point iteration,
//! - [`diagnostics`]: regularity statistics checked against their bounds,
//! - [`config`] and [`io`]: run configuration and CSV/JSON field files.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the double-precision instantiation used by the CLI.

// `!(x > 0)` is the NaN-rejecting positivity test used by every validator.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod convolution;
pub mod coupling;
pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod hj;
pub mod io;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Grid = grid::Grid<f64>;
pub type Mask = grid::Mask<f64>;
pub type ScalarField = grid::ScalarField<f64>;
pub type DomainSpec = grid::DomainSpec<f64>;
pub type HamiltonianModel = hamiltonian::HamiltonianModel<f64>;
pub type SupportEvaluator = hamiltonian::SupportEvaluator<f64>;
pub type MetricField = hj::MetricField<f64>;
pub type AttachmentField = hj::AttachmentField<f64>;
pub type TimeField = elliptic::TimeField<f64>;
pub type ActivationTrace = convolution::ActivationTrace<f64>;
pub type KernelPair = convolution::KernelPair<f64>;
pub type CouplingConfig = coupling::CouplingConfig<f64>;
pub type CoupledState = coupling::CoupledState<f64>;
