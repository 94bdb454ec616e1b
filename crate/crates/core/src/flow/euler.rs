use super::state::{tail_breach, RunSpec, Sample, Sampler, StateVector, TerminalStatus};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::numerics::{ln_exp_taylor, ln_factorial, ln_norm, log_sum_exp, norm};

/// Nodal values of the Euler polygon `x_{n+1} = x_n + h F(x_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerPolygon {
    pub h: f64,
    pub nodes: Vec<Vec<f64>>,
    pub status: TerminalStatus,
}

impl EulerPolygon {
    pub fn endpoint(&self) -> &[f64] {
        self.nodes.last().expect("polygon has at least the initial node")
    }

    /// Piecewise-linear interpolant `x_n + (t/h - n)(x_{n+1} - x_n)`.
    pub fn at(&self, t: f64) -> Option<Vec<f64>> {
        let last = self.nodes.len() - 1;
        let pos = t / self.h;
        if !(pos >= 0.0) || pos > last as f64 + 1e-9 {
            return None;
        }
        let n = (pos.floor() as usize).min(last.saturating_sub(1));
        if last == 0 {
            return Some(self.nodes[0].clone());
        }
        let theta = pos - n as f64;
        Some(
            self.nodes[n]
                .iter()
                .zip(&self.nodes[n + 1])
                .map(|(a, b)| a + theta * (b - a))
                .collect(),
        )
    }
}

pub(crate) fn check_step(field: &VectorField, h: f64) -> Result<()> {
    if !(h > 0.0) || h * (field.gamma() + field.k0()) >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "Euler step h = {h} violates h (gamma + K0) < 1"
        )));
    }
    Ok(())
}

/// Runs `steps` Euler steps from `x0`, keeping every node.
pub fn euler_polygon(
    x0: &StateVector,
    h: f64,
    steps: usize,
    field: &VectorField,
) -> Result<EulerPolygon> {
    check_step(field, h)?;
    if let Some(i) = x0.tail_breach(1e-12) {
        return Err(Error::InvalidParameter(format!("initial state breaches tail guard at {i}")));
    }
    let mut nodes = Vec::with_capacity(steps + 1);
    nodes.push(x0.components().to_vec());
    let mut fx = vec![0.0; x0.dim()];
    let mut status = TerminalStatus::Completed;
    for _ in 0..steps {
        let x = nodes.last().unwrap();
        match field.eval_into(x, &mut fx) {
            Err(Error::LadderExhausted { .. }) => {
                status = TerminalStatus::LadderExhausted;
                break;
            }
            Err(e) => return Err(e),
            Ok(()) => {}
        }
        let next: Vec<f64> = x.iter().zip(&fx).map(|(a, b)| a + h * b).collect();
        let breach = tail_breach(&next, x0.tail_guard(), 1e-12 * norm(&next));
        nodes.push(next);
        if let Some(index) = breach {
            status = TerminalStatus::TailGuardBreach { index };
            break;
        }
    }
    Ok(EulerPolygon { h, nodes, status })
}

/// Streaming variant used by the registry strategy.
pub(crate) fn euler_drive(
    field: &VectorField,
    x0: &StateVector,
    h: f64,
    spec: &RunSpec,
    sampler: &Sampler,
    samples: &mut Vec<Sample>,
) -> Result<(Vec<f64>, f64, usize, TerminalStatus)> {
    check_step(field, h)?;
    let steps = (spec.t_end / h).round() as usize;
    let mut x = x0.components().to_vec();
    let mut fx = vec![0.0; x.len()];
    let mut status = TerminalStatus::Completed;
    let mut done = 0usize;
    for n in 1..=steps {
        match field.eval_into(&x, &mut fx) {
            Err(Error::LadderExhausted { .. }) => {
                status = TerminalStatus::LadderExhausted;
                break;
            }
            Err(e) => return Err(e),
            Ok(()) => {}
        }
        for (a, b) in x.iter_mut().zip(&fx) {
            *a += h * b;
        }
        done = n;
        let sigma = ln_norm(&x);
        let last = n == steps;
        if let Some(index) = tail_breach(&x, x0.tail_guard(), spec.tail_tol * norm(&x)) {
            status = TerminalStatus::TailGuardBreach { index };
        } else if spec.stop_below.is_some_and(|s| sigma < s) {
            status = TerminalStatus::ReachedTarget;
        }
        let halted = status != TerminalStatus::Completed;
        if last || halted || n % spec.sample_stride == 0 {
            samples.push(sampler.sample(n as f64 * h, sigma));
        }
        if halted {
            break;
        }
    }
    Ok((x, done as f64 * h, done, status))
}

/// `ln C(n, i)`.
pub fn ln_binomial(n: usize, i: usize) -> f64 {
    assert!(i <= n);
    ln_factorial(n) - ln_factorial(i) - ln_factorial(n - i)
}

/// Log of the binomial bound on `|| prod_i ((1 - t gamma/N) I + (t/N) W_i) ||`
/// for `N` factors drawn from one class `Omega_k` with `||W_i|| <= K0`:
/// `sum_{i < 2^k} C(N, i) (1 - t gamma/N)^(N - i) (t K0/N)^i`.
pub fn euler_product_bound_log(steps: usize, t: f64, k: usize, k0: f64, gamma: f64) -> Result<f64> {
    let n = steps as f64;
    let a = 1.0 - t * gamma / n;
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need 1 - t gamma / N > 0, got {a} for N = {steps}"
        )));
    }
    let b = t * k0 / n;
    let top = ((1usize << k) - 1).min(steps);
    let terms: Vec<f64> = (0..=top)
        .map(|i| ln_binomial(steps, i) + (steps - i) as f64 * a.ln() + i as f64 * b.ln())
        .collect();
    Ok(log_sum_exp(&terms))
}

/// `(N + 1 - 2^k) ln(1 - t gamma/N) + ln p_{2^k - 1}(t K0)`: the polynomial bound
/// that dominates [`euler_product_bound_log`] and tends to the envelope.
pub fn lemma_bound_log(steps: usize, t: f64, k: usize, k0: f64, gamma: f64) -> f64 {
    let n = steps as f64;
    let a = 1.0 - t * gamma / n;
    let degree = (1usize << k) - 1;
    (n - degree as f64) * a.ln() + ln_exp_taylor(degree, t * k0)
}
