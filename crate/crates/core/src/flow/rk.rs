//! Step-doubled classical RK4 with local extrapolation, shared by the
//! state-space and log-radial integrators.

use super::state::{tail_breach, RunSpec, Sample, Sampler};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::numerics::{dot, ln_norm, norm};

pub(crate) trait OdeSystem {
    fn rhs(&self, y: &[f64], out: &mut [f64]) -> Result<()>;
    /// Scaled error of a step; `<= 1` is acceptable.
    fn error_ratio(&self, y: &[f64], err: &[f64], tol: f64) -> f64;
    fn normalize(&self, _y: &mut [f64]) {}
    fn sigma(&self, y: &[f64]) -> f64;
    fn tail_breach(&self, y: &[f64]) -> Option<usize>;
}

/// `x' = F(x)` in the plain coordinates.
pub(crate) struct Cartesian<'a> {
    pub field: &'a VectorField,
    pub guard: usize,
    pub tail_tol: f64,
    pub floor: f64,
}

impl OdeSystem for Cartesian<'_> {
    fn rhs(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.field.eval_into(y, out)
    }

    fn error_ratio(&self, y: &[f64], err: &[f64], tol: f64) -> f64 {
        norm(err) / (tol * norm(y).max(self.floor))
    }

    fn sigma(&self, y: &[f64]) -> f64 {
        ln_norm(y)
    }

    fn tail_breach(&self, y: &[f64]) -> Option<usize> {
        tail_breach(y, self.guard, self.tail_tol * norm(y))
    }
}

/// `y = (sigma, u)`: `sigma' = <u, A u>`, `u' = A u - <u, A u> u` with
/// `A = -gamma I + W_eps - L(exp(sigma))`.
pub(crate) struct Polar<'a> {
    pub field: &'a VectorField,
    pub guard: usize,
    pub tail_tol: f64,
}

impl OdeSystem for Polar<'_> {
    fn rhs(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let sigma = y[0];
        let u = &y[1..];
        let gen = self.field.generator(sigma)?;
        let (head, du) = out.split_at_mut(1);
        gen.apply_into(u, du);
        let rate = dot(u, du);
        for (d, v) in du.iter_mut().zip(u) {
            *d -= rate * v;
        }
        head[0] = rate;
        Ok(())
    }

    fn error_ratio(&self, _y: &[f64], err: &[f64], tol: f64) -> f64 {
        norm(err) / tol
    }

    fn normalize(&self, y: &mut [f64]) {
        let n = norm(&y[1..]);
        y[0] += n.ln();
        y[1..].iter_mut().for_each(|v| *v /= n);
    }

    fn sigma(&self, y: &[f64]) -> f64 {
        y[0]
    }

    fn tail_breach(&self, y: &[f64]) -> Option<usize> {
        tail_breach(&y[1..], self.guard, self.tail_tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Halt {
    Completed,
    ReachedTarget,
    Handoff,
    LadderExhausted,
    TailGuard(usize),
    StepLimit,
}

pub(crate) struct Outcome {
    pub y: Vec<f64>,
    pub t: f64,
    pub halt: Halt,
    pub steps: usize,
    pub rejected: usize,
}

struct Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], tmp: vec![0.0; n] }
    }
}

fn rk4_step<S: OdeSystem>(sys: &S, y: &[f64], h: f64, out: &mut [f64], w: &mut Workspace) -> Result<()> {
    let n = y.len();
    sys.rhs(y, &mut w.k1)?;
    for i in 0..n {
        w.tmp[i] = y[i] + 0.5 * h * w.k1[i];
    }
    sys.rhs(&w.tmp, &mut w.k2)?;
    for i in 0..n {
        w.tmp[i] = y[i] + 0.5 * h * w.k2[i];
    }
    sys.rhs(&w.tmp, &mut w.k3)?;
    for i in 0..n {
        w.tmp[i] = y[i] + h * w.k3[i];
    }
    sys.rhs(&w.tmp, &mut w.k4)?;
    for i in 0..n {
        out[i] = y[i] + h / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
    }
    Ok(())
}

/// Stopping thresholds on `log |x|` checked after every accepted step.
pub(crate) struct Stops {
    pub target: Option<f64>,
    pub handoff: Option<f64>,
}

fn check_stops(sigma: f64, stops: &Stops) -> Option<Halt> {
    if stops.target.is_some_and(|s| sigma < s) {
        return Some(Halt::ReachedTarget);
    }
    if stops.handoff.is_some_and(|s| sigma < s) {
        return Some(Halt::Handoff);
    }
    None
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn drive_adaptive<S: OdeSystem>(
    sys: &S,
    mut y: Vec<f64>,
    t0: f64,
    tol: f64,
    spec: &RunSpec,
    stops: &Stops,
    sampler: &Sampler,
    samples: &mut Vec<Sample>,
) -> Result<Outcome> {
    let n = y.len();
    let mut w = Workspace::new(n);
    let (mut full, mut half, mut twice) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut t = t0;
    let mut h = (spec.t_end - t0).min(0.1);
    let (mut steps, mut rejected) = (0usize, 0usize);
    let mut since_sample = 0usize;
    let min_h = |t: f64| 1e-14 * t.abs().max(1.0);

    let finish = |halt, y: Vec<f64>, t: f64, steps: usize, rejected, samples: &mut Vec<Sample>, since: usize| {
        if since > 0 {
            samples.push(sampler.sample(t, sys.sigma(&y)));
        }
        Ok(Outcome { y, t, halt, steps, rejected })
    };

    if let Some(halt) = check_stops(sys.sigma(&y), stops) {
        return finish(halt, y, t, 0, 0, samples, 0);
    }
    loop {
        let remaining = spec.t_end - t;
        if remaining <= min_h(t) {
            return finish(Halt::Completed, y, t, steps, rejected, samples, since_sample);
        }
        if steps >= spec.max_steps {
            return finish(Halt::StepLimit, y, t, steps, rejected, samples, since_sample);
        }
        h = h.min(remaining);
        let attempt = rk4_step(sys, &y, h, &mut full, &mut w)
            .and_then(|_| rk4_step(sys, &y, 0.5 * h, &mut half, &mut w))
            .and_then(|_| rk4_step(sys, &half, 0.5 * h, &mut twice, &mut w));
        match attempt {
            Err(Error::LadderExhausted { .. }) => {
                rejected += 1;
                h *= 0.25;
                if h < min_h(t) {
                    return finish(Halt::LadderExhausted, y, t, steps, rejected, samples, since_sample);
                }
                continue;
            }
            Err(e) => return Err(e),
            Ok(()) => {}
        }
        for i in 0..n {
            full[i] = (twice[i] - full[i]) / 15.0;
        }
        let ratio = sys.error_ratio(&twice, &full, tol);
        if ratio <= 1.0 {
            for i in 0..n {
                y[i] = twice[i] + full[i];
            }
            sys.normalize(&mut y);
            t = if h == remaining { spec.t_end } else { t + h };
            steps += 1;
            since_sample += 1;
            let sigma = sys.sigma(&y);
            let halt = if let Some(i) = sys.tail_breach(&y) {
                Some(Halt::TailGuard(i))
            } else {
                check_stops(sigma, stops)
            };
            if let Some(halt) = halt {
                return finish(halt, y, t, steps, rejected, samples, since_sample);
            }
            if since_sample >= spec.sample_stride {
                samples.push(sampler.sample(t, sigma));
                since_sample = 0;
            }
        } else {
            rejected += 1;
        }
        let factor = if ratio == 0.0 { 4.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 4.0) };
        h *= factor;
        if h < min_h(t) {
            return finish(Halt::StepLimit, y, t, steps, rejected, samples, since_sample);
        }
    }
}
