//! Numerical core for stress relaxation in viscoelastic media.
//!
//! The library simulates two coupled descriptions of a viscoelastic medium on
//! a periodic torus and provides the algebraic and energy machinery to compare
//! them quantitatively:
//!
//! * [`relax`] — the semilinear hyperbolic relaxation system for the
//!   deformation gradient `F`, velocity `v` and stress `S`, where `S` relaxes
//!   toward its equilibrium value on a time scale `eps`.
//! * [`equilibrium`] — the incompletely parabolic limit system obtained for
//!   `eps -> 0`, in which the stress is enslaved to `T(F) + mu * grad(v)`.
//! * [`algebra`] — the block flux matrices of the relaxation system, their
//!   positive definite symmetrizer, and the associated checks.
//! * [`energy`] — quadratic and Sobolev-weighted energies of solution
//!   differences, the relative modulated energy with its flux and identity
//!   residual, and the fading-memory representation of the relaxed stress.
//!
//! Spatial discretization is Fourier pseudospectral on `[0, L)^d`, `d <= 3`
//! ([`grid`], [`field`], [`spectral`]); time stepping is explicit RK4 for the
//! relaxation system and an exponential (ETDRK4) integrator for the stiff
//! diffusion of the equilibrium system.

pub mod algebra;
pub mod energy;
pub mod equilibrium;
pub mod error;
pub mod field;
pub mod grid;
pub mod relax;
pub mod spectral;
pub mod stress;

pub use error::{CoreError, Result};
