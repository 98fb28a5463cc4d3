//! Numerical toolkit for matching a 2D quantum spin-lattice regularization of
//! the 1+1D O(3) non-linear sigma model to its continuum limit, and for
//! emulating the adiabatic preparation of its vacuum on a Rydberg-atom array.
//!
//! The pieces:
//!
//! - [`model`] — lattice geometries and Hamiltonians as explicit term lists;
//! - [`tensor`] — MPS/MPO machinery (canonical forms, truncation, sampling);
//! - [`groundstate`] — two-site DMRG for vacua and energy gaps;
//! - [`dynamics`] — one-site TDVP with global Krylov bond expansion;
//! - [`observables`] — correlation matrix, renormalized coupling ḡ(L),
//!   step-scaling points, shot statistics, perturbative reference;
//! - [`spiral`] — adiabatic-spiral pulse schedules and penalty optimization;
//! - [`oracle`] — exact diagonalization ground truth for small lattices;
//! - [`mc`] — classical Wolff-cluster Monte Carlo reference curve.

pub mod dynamics;
pub mod error;
pub mod groundstate;
pub mod mc;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod spiral;
pub mod tensor;

pub use error::{Error, Result};
