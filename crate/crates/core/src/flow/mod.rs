//! Time integration of `x' = F(x)` and the exact truncated linear flow.
//!
//! Integrators are strategies behind [`Integrator`], looked up by name in an
//! [`IntegratorRegistry`]: `euler` (the polygon of the decay lemma), `adaptive`
//! (step-doubled RK4 in state space), `logradial` (log-norm and unit direction,
//! for decay far below the `f64` range) and `auto` (adaptive, then one handoff
//! to log-radial).

mod euler;
mod propagator;
mod registry;
mod rk;
mod state;

pub use euler::{
    euler_polygon, euler_product_bound_log, ln_binomial, lemma_bound_log, EulerPolygon,
};
pub use propagator::{
    linear_propagator, operator_norm, DenseMatrix, NormEstimate, PropagatorOperator,
};
pub use registry::{
    AdaptiveRk4, AutoHandoff, EulerIntegrator, Integrator, IntegratorRegistry, LogRadial,
};
pub use state::{
    envelope_log, FinalState, InitialCondition, IntegratorMeta, LogRadialState, RunSpec, Sample,
    StateVector, StepControl, TerminalStatus, Trajectory,
};
