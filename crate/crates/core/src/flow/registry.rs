use std::collections::BTreeMap;

use super::euler::euler_drive;
use super::rk::{drive_adaptive, Cartesian, Halt, Outcome, Polar, Stops};
use super::state::{
    FinalState, InitialCondition, IntegratorMeta, LogRadialState, RunSpec, Sample, Sampler,
    StateVector, StepControl, TerminalStatus, Trajectory,
};
use crate::error::{Error, Result};
use crate::field::VectorField;

/// A time integrator for `x' = F(x)`.
pub trait Integrator: Send + Sync {
    fn name(&self) -> &'static str;

    fn integrate(
        &self,
        field: &VectorField,
        x0: &InitialCondition,
        spec: &RunSpec,
    ) -> Result<Trajectory>;
}

/// Integrators by name.
pub struct IntegratorRegistry {
    entries: BTreeMap<&'static str, Box<dyn Integrator>>,
}

impl Default for IntegratorRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(EulerIntegrator));
        reg.register(Box::new(AdaptiveRk4));
        reg.register(Box::new(LogRadial));
        reg.register(Box::new(AutoHandoff));
        reg
    }
}

impl IntegratorRegistry {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    pub fn register(&mut self, integrator: Box<dyn Integrator>) {
        self.entries.insert(integrator.name(), integrator);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Integrator> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownIntegrator(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

fn tolerance(spec: &RunSpec, method: &str) -> Result<f64> {
    match spec.step {
        StepControl::Tolerance { tol } => Ok(tol),
        StepControl::Fixed { .. } => Err(Error::InvalidParameter(format!(
            "integrator `{method}` needs a tolerance, not a fixed step"
        ))),
    }
}

fn check_dims(field: &VectorField, x0: &InitialCondition) -> Result<()> {
    if x0.dim() < 2 {
        return Err(Error::DimensionTooSmall(x0.dim()));
    }
    let _ = field;
    Ok(())
}

fn origin_trajectory(method: &str, spec: &RunSpec, dim: usize) -> Trajectory {
    Trajectory {
        samples: Vec::new(),
        meta: meta(method, spec, 0, 0, 0),
        status: TerminalStatus::AtOrigin,
        final_time: spec.t_end,
        final_state: FinalState::Cartesian(vec![0.0; dim]),
    }
}

fn meta(method: &str, spec: &RunSpec, steps: usize, rejected: usize, level: usize) -> IntegratorMeta {
    IntegratorMeta {
        method: method.to_string(),
        step: spec.step,
        steps,
        rejected,
        handoffs: 0,
        handoff_time: None,
        envelope_level: level,
    }
}

fn status_of(halt: Halt) -> TerminalStatus {
    match halt {
        Halt::Completed | Halt::Handoff => TerminalStatus::Completed,
        Halt::ReachedTarget => TerminalStatus::ReachedTarget,
        Halt::LadderExhausted => TerminalStatus::LadderExhausted,
        Halt::TailGuard(index) => TerminalStatus::TailGuardBreach { index },
        Halt::StepLimit => TerminalStatus::StepLimit,
    }
}

fn cartesian_start(x0: &InitialCondition) -> Result<StateVector> {
    match x0 {
        InitialCondition::Cartesian(x) => Ok(x.clone()),
        InitialCondition::Polar(p) => {
            let x = p.to_state();
            if x.ln_norm() == f64::NEG_INFINITY || (x.ln_norm() - p.sigma()).abs() > 1e-6 {
                return Err(Error::InvalidParameter(format!(
                    "log-norm {} is not representable in state space",
                    p.sigma()
                )));
            }
            Ok(x)
        }
    }
}

fn polar_start(x0: &InitialCondition) -> Result<LogRadialState> {
    match x0 {
        InitialCondition::Cartesian(x) => LogRadialState::from_state(x),
        InitialCondition::Polar(p) => Ok(p.clone()),
    }
}

fn check_initial_tail(x0: &InitialCondition, spec: &RunSpec) -> Result<()> {
    let breach = match x0 {
        InitialCondition::Cartesian(x) => x.tail_breach(spec.tail_tol),
        InitialCondition::Polar(p) => p.direction().tail_breach(spec.tail_tol),
    };
    match breach {
        Some(i) => Err(Error::InvalidParameter(format!(
            "initial state breaches the tail guard at index {i}"
        ))),
        None => Ok(()),
    }
}

/// Fixed-step Euler polygon.
pub struct EulerIntegrator;

impl Integrator for EulerIntegrator {
    fn name(&self) -> &'static str {
        "euler"
    }

    fn integrate(&self, field: &VectorField, x0: &InitialCondition, spec: &RunSpec) -> Result<Trajectory> {
        spec.validate()?;
        check_dims(field, x0)?;
        let StepControl::Fixed { h } = spec.step else {
            return Err(Error::InvalidParameter("euler needs a fixed step h".into()));
        };
        if x0.is_origin() {
            return Ok(origin_trajectory(self.name(), spec, x0.dim()));
        }
        check_initial_tail(x0, spec)?;
        let x = cartesian_start(x0)?;
        let sampler = Sampler::new(field, 0.0, x.ln_norm());
        let mut samples = vec![sampler.sample(0.0, x.ln_norm())];
        let (xf, tf, steps, status) = euler_drive(field, &x, h, spec, &sampler, &mut samples)?;
        Ok(Trajectory {
            samples,
            meta: meta(self.name(), spec, steps, 0, sampler.level()),
            status,
            final_time: tf,
            final_state: FinalState::Cartesian(xf),
        })
    }
}

/// RK4 with step doubling in state space.
pub struct AdaptiveRk4;

impl Integrator for AdaptiveRk4 {
    fn name(&self) -> &'static str {
        "adaptive"
    }

    fn integrate(&self, field: &VectorField, x0: &InitialCondition, spec: &RunSpec) -> Result<Trajectory> {
        spec.validate()?;
        check_dims(field, x0)?;
        let tol = tolerance(spec, self.name())?;
        if x0.is_origin() {
            return Ok(origin_trajectory(self.name(), spec, x0.dim()));
        }
        check_initial_tail(x0, spec)?;
        let x = cartesian_start(x0)?;
        let sampler = Sampler::new(field, 0.0, x.ln_norm());
        let mut samples = vec![sampler.sample(0.0, x.ln_norm())];
        let sys = Cartesian { field, guard: x.tail_guard(), tail_tol: spec.tail_tol, floor: spec.error_floor };
        let stops = Stops { target: spec.stop_below, handoff: None };
        let out = drive_adaptive(&sys, x.into_components(), 0.0, tol, spec, &stops, &sampler, &mut samples)?;
        Ok(Trajectory {
            samples,
            meta: meta(self.name(), spec, out.steps, out.rejected, sampler.level()),
            status: status_of(out.halt),
            final_time: out.t,
            final_state: FinalState::Cartesian(out.y),
        })
    }
}

fn run_polar(
    field: &VectorField,
    start: &LogRadialState,
    t0: f64,
    tol: f64,
    spec: &RunSpec,
    sampler: &Sampler,
    samples: &mut Vec<Sample>,
) -> Result<Outcome> {
    let mut y = Vec::with_capacity(start.dim() + 1);
    y.push(start.sigma());
    y.extend_from_slice(start.direction().components());
    let sys = Polar { field, guard: start.direction().tail_guard(), tail_tol: spec.tail_tol };
    let stops = Stops { target: spec.stop_below, handoff: None };
    drive_adaptive(&sys, y, t0, tol, spec, &stops, sampler, samples)
}

fn polar_final(y: Vec<f64>) -> FinalState {
    FinalState::Polar { sigma: y[0], direction: y[1..].to_vec() }
}

/// RK4 with step doubling on `(log |x|, x / |x|)`.
pub struct LogRadial;

impl Integrator for LogRadial {
    fn name(&self) -> &'static str {
        "logradial"
    }

    fn integrate(&self, field: &VectorField, x0: &InitialCondition, spec: &RunSpec) -> Result<Trajectory> {
        spec.validate()?;
        check_dims(field, x0)?;
        let tol = tolerance(spec, self.name())?;
        if x0.is_origin() {
            return Ok(origin_trajectory(self.name(), spec, x0.dim()));
        }
        check_initial_tail(x0, spec)?;
        let start = polar_start(x0)?;
        let sampler = Sampler::new(field, 0.0, start.sigma());
        let mut samples = vec![sampler.sample(0.0, start.sigma())];
        let out = run_polar(field, &start, 0.0, tol, spec, &sampler, &mut samples)?;
        Ok(Trajectory {
            samples,
            meta: meta(self.name(), spec, out.steps, out.rejected, sampler.level()),
            status: status_of(out.halt),
            final_time: out.t,
            final_state: polar_final(out.y),
        })
    }
}

/// State-space RK4 until `log |x|` falls below `spec.handoff_log`, then one
/// switch to the log-radial form for the rest of the run.
pub struct AutoHandoff;

impl Integrator for AutoHandoff {
    fn name(&self) -> &'static str {
        "auto"
    }

    fn integrate(&self, field: &VectorField, x0: &InitialCondition, spec: &RunSpec) -> Result<Trajectory> {
        spec.validate()?;
        check_dims(field, x0)?;
        let tol = tolerance(spec, self.name())?;
        if x0.is_origin() {
            return Ok(origin_trajectory(self.name(), spec, x0.dim()));
        }
        check_initial_tail(x0, spec)?;
        let sigma0 = x0.sigma();
        let sampler = Sampler::new(field, 0.0, sigma0);
        let mut samples = vec![sampler.sample(0.0, sigma0)];
        let mut m = meta(self.name(), spec, 0, 0, sampler.level());

        let (start, t_switch) = if sigma0 < spec.handoff_log {
            (polar_start(x0)?, 0.0)
        } else {
            let x = cartesian_start(x0)?;
            let guard = x.tail_guard();
            let sys = Cartesian { field, guard, tail_tol: spec.tail_tol, floor: spec.error_floor };
            let stops = Stops { target: spec.stop_below, handoff: Some(spec.handoff_log) };
            let out = drive_adaptive(&sys, x.into_components(), 0.0, tol, spec, &stops, &sampler, &mut samples)?;
            m.steps += out.steps;
            m.rejected += out.rejected;
            if out.halt != Halt::Handoff || out.t >= spec.t_end {
                return Ok(Trajectory {
                    samples,
                    meta: m,
                    status: status_of(out.halt),
                    final_time: out.t,
                    final_state: FinalState::Cartesian(out.y),
                });
            }
            m.handoffs = 1;
            m.handoff_time = Some(out.t);
            (LogRadialState::from_state(&StateVector::with_guard(out.y, guard)?)?, out.t)
        };
        let out = run_polar(field, &start, t_switch, tol, spec, &sampler, &mut samples)?;
        m.steps += out.steps;
        m.rejected += out.rejected;
        Ok(Trajectory {
            samples,
            meta: m,
            status: status_of(out.halt),
            final_time: out.t,
            final_state: polar_final(out.y),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{build_ladder, FieldKind, FieldParams};

    fn field(kind: FieldKind) -> VectorField {
        VectorField::with_kind(build_ladder(&FieldParams::default()).unwrap(), kind)
    }

    fn start(dim: usize, r: f64) -> InitialCondition {
        let mut v = vec![0.0; dim];
        v[0] = 0.6 * r;
        v[1] = 0.8 * r;
        InitialCondition::Cartesian(StateVector::new(v).unwrap())
    }

    #[test]
    fn default_registry_lists_every_strategy() {
        let reg = IntegratorRegistry::default();
        assert_eq!(reg.names(), vec!["adaptive", "auto", "euler", "logradial"]);
        assert!(matches!(reg.get("rk45"), Err(Error::UnknownIntegrator(_))));
    }

    #[test]
    fn step_control_must_match_the_method() {
        let reg = IntegratorRegistry::default();
        let f = field(FieldKind::Nonlinear);
        let x0 = start(32, 0.5);
        assert!(reg.get("euler").unwrap().integrate(&f, &x0, &RunSpec::with_tolerance(1.0, 1e-8)).is_err());
        assert!(reg.get("adaptive").unwrap().integrate(&f, &x0, &RunSpec::with_step(1.0, 0.1)).is_err());
    }

    #[test]
    fn origin_stays_put() {
        let reg = IntegratorRegistry::default();
        let f = field(FieldKind::Nonlinear);
        let x0 = InitialCondition::Cartesian(StateVector::zeros(16).unwrap());
        for name in ["adaptive", "logradial", "auto"] {
            let tr = reg.get(name).unwrap().integrate(&f, &x0, &RunSpec::with_tolerance(5.0, 1e-8)).unwrap();
            assert_eq!(tr.status, TerminalStatus::AtOrigin);
            assert_eq!(tr.final_state, FinalState::Cartesian(vec![0.0; 16]));
        }
    }

    #[test]
    fn pure_decay_matches_the_exponential() {
        let f = field(FieldKind::DecayOnly);
        let spec = RunSpec::with_tolerance(10.0, 1e-10);
        let sigma0 = 0.5f64.ln();
        let a = AdaptiveRk4.integrate(&f, &start(16, 0.5), &spec).unwrap();
        assert!((a.final_sigma() - (sigma0 - 5.0)).abs() < 1e-9);
        let p = LogRadial.integrate(&f, &start(16, 0.5), &spec).unwrap();
        assert!((p.final_sigma() - (sigma0 - 5.0)).abs() < 1e-12);
        for s in &p.samples {
            assert!((s.sigma - (sigma0 - 0.5 * s.t)).abs() < 1e-12);
        }
    }

    #[test]
    fn log_radial_agrees_with_state_space() {
        let f = field(FieldKind::Nonlinear);
        let spec = RunSpec::with_tolerance(30.0, 1e-10);
        let a = AdaptiveRk4.integrate(&f, &start(64, 0.5), &spec).unwrap();
        let p = LogRadial.integrate(&f, &start(64, 0.5), &spec).unwrap();
        assert_eq!(a.status, TerminalStatus::Completed);
        assert_eq!(p.status, TerminalStatus::Completed);
        assert!((a.final_sigma() - p.final_sigma()).abs() < 1e-6, "{} {}", a.final_sigma(), p.final_sigma());
    }

    #[test]
    fn auto_hands_off_once() {
        let f = field(FieldKind::Nonlinear);
        let spec = RunSpec::with_tolerance(1e5, 1e-8).stop_below(-600.0);
        let tr = AutoHandoff.integrate(&f, &start(64, 0.5), &spec).unwrap();
        assert_eq!(tr.status, TerminalStatus::ReachedTarget);
        assert_eq!(tr.meta.handoffs, 1);
        let th = tr.meta.handoff_time.unwrap();
        let below = tr.first_time_below(spec.handoff_log).unwrap();
        assert!(below >= th - 1e-12);
        assert!(matches!(tr.final_state, FinalState::Polar { .. }));
        // time stays monotone across the switch
        assert!(tr.samples.windows(2).all(|w| w[1].t > w[0].t));
    }
}
