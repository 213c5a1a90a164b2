//! Dynamical entanglement generation in bipartite bosonic systems.
//!
//! The crate has two halves that are meant to be compared against each other:
//!
//! * an exact quantum simulation on a truncated multi-mode Fock space
//!   ([`fock`], [`model`], [`states`], [`propagator`], [`entanglement`]), and
//! * the semiclassical prediction `I(t) = 1/sqrt(det(1 + (δt)² u))` for the
//!   purity of an initially separable pair of Gaussian wave packets
//!   ([`semiclassics`]).
//!
//! Everything is built from plain sparse matrices over [`Complex64`]; dense
//! linear algebra is only used for the small `d_A × d_B` classical matrices.

pub mod entanglement;
pub mod error;
pub mod fock;
pub mod model;
pub mod propagator;
pub mod semiclassics;
pub mod states;

pub use num_complex::Complex64;

pub use entanglement::{Bipartition, Provenance, PuritySeries};
pub use error::{Error, Result};
pub use fock::{SparseOperator, SpaceConfig, StateVector};
pub use model::{CouplingCase, ModelSpec, OneOneParams, TwoTwoParams};
pub use propagator::{Method, PropagationConfig, TimeGrid};
pub use semiclassics::{PacketSpec, UMatrix};
pub use states::{ActionDensity, CoherentSpec};
