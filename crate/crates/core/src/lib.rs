//! A numerical laboratory for an ODE `x' = F(x)` on truncated `l2` whose
//! linearization at the origin is spectrally unstable while the origin is
//! globally asymptotically stable.
//!
//! The crate is organised bottom-up:
//!
//! * [`kakutani`] builds the weighted shifts `W_eps`, the single-level shifts
//!   `L_k` and the nilpotent classes `Omega_k`, with norms and spectral-radius
//!   estimates carried in log space.
//! * [`field`] builds the radius ladder `r_k`, the smooth level multipliers and
//!   the vector field `F` with its derivative action.
//! * [`flow`] integrates the field (Euler polygons, adaptive RK4, log-radial)
//!   and evaluates the exact truncated linear propagator.
//! * [`certify`] turns each checkable claim of the construction into a
//!   deterministic [`certify::Certificate`].
//!
//! Integrators and certificates are strategies behind common traits, looked
//! up by name in [`flow::IntegratorRegistry`] and [`certify::ClaimRegistry`].

pub mod certify;
pub mod error;
pub mod field;
pub mod flow;
pub mod kakutani;
pub mod numerics;

pub use error::{Error, Result};
