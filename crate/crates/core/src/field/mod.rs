//! The nonlinear construction: radius ladder, smooth level multipliers and the
//! vector field `F(x) = (-gamma I + W_eps - L(|x|)) x`.
//!
//! All radii are handled through their logarithms. `r_k` decays roughly like
//! `exp(-(1 - gamma/K0) 2^(k+1))` and leaves the range of `f64` near `k = 10`.

mod ladder;
mod modulation;
mod profile;
mod vector_field;

pub use ladder::{build_ladder, q_log, q_max, FieldParams, LadderRow, QMax, RadiusLadder};
pub use modulation::{field_weights, modulation, ModulationState};
pub use profile::{smoothstep, smoothstep_log};
pub use vector_field::{shell_index, FieldKind, Generator, Shell, VectorField};
