//! Self-gravitating barotropic stars as constrained minimizers of the fluid
//! energy.
//!
//! The crate is organized bottom-up:
//!
//! * [`eos`] — equations of state `P(ρ)` and the convex internal energy `Φ`;
//! * [`grid`], [`gravity`] — radial discretizations and monopole potential theory;
//! * [`steady`] — static stars from the semilinear Poisson equation;
//! * [`energetics`] — energy functionals, the stability distance and metric;
//! * [`varmin`] — direct projected-gradient minimization of the reduced energy;
//! * [`hydro`] — a well-balanced finite-volume Euler–Poisson solver;
//! * [`kinetic`] — the kinetic (Vlasov) side: Casimirs, Legendre transforms
//!   and the lifted phase-space density;
//! * [`invariants`] — the end-to-end checks, each with a pass/fail verdict.
//!
//! Units are dimensionless with the gravitational constant absorbed, so the
//! potential satisfies `ΔV = 4πρ`.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Stencil code indexes several parallel arrays at once.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod quad;
pub mod eos;
pub mod grid;
pub mod gravity;
pub mod steady;
pub mod energetics;
pub mod varmin;
pub mod hydro;
pub mod kinetic;
pub mod invariants;

pub use error::{Error, Result};
pub use eos::EosSpec;
pub use grid::{FlowField, GridDensity, RadialGrid};
pub use steady::RadialProfile;

/// Version of this library, recorded in run provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
