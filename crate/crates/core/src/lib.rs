//! Simulation of kinetically constrained Rydberg-chain dynamics.
//!
//! The crate builds PXP, van der Waals Rydberg and Dicke-scarred toy
//! Hamiltonians on full or blockade-constrained bases, evolves states with a
//! Krylov propagator and implements the echo, information-transport and
//! noise-mitigation protocols used to study quantum many-body scars.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basis;
pub mod error;
pub mod evolve;
pub mod hamiltonian;
mod linalg;
pub mod noise;
pub mod protocols;
pub mod quantities;
pub mod scalar;

pub use basis::{build_basis, BoundaryCondition, HilbertBasis, SpinConfig};
pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` sparse operator.
pub type Operator = hamiltonian::SparseOperator<f64>;
/// `f64` state vector.
pub type State = evolve::StateVector<f64>;
/// `f64` reduced density matrix.
pub type Density = quantities::SingleSiteDensity<f64>;
/// `f64` spatio-temporal grid.
pub type Grid = protocols::SpatioTemporalGrid<f64>;
/// `f64` propagator settings.
pub type Evolve = evolve::EvolveConfig<f64>;
/// `f64` noise parameters.
pub type Noise = noise::NoiseParams<f64>;
/// `f32` state vector.
pub type State32 = evolve::StateVector<f32>;
/// `f32` sparse operator.
pub type Operator32 = hamiltonian::SparseOperator<f32>;
