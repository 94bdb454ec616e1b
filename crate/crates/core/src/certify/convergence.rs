//! Convergence order of the Euler polygon and agreement with the adaptive integrator.

use serde_json::json;

use super::sampling::{ic_rng, random_direction};
use super::{worst, Certificate, Claim};
use crate::error::Result;
use crate::field::{RadiusLadder, VectorField};
use crate::flow::{euler_polygon, AdaptiveRk4, FinalState, InitialCondition, Integrator, RunSpec, StateVector};
use crate::numerics::norm;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

/// Richardson estimates of the order of the Euler endpoint at `t_end` from the
/// steps `h0, h0/2, h0/4, h0/8` must lie within `0.1` of one, and the
/// extrapolated endpoint must match the adaptive integrator to relative `1e-6`.
pub fn certify_euler_order(ladder: &RadiusLadder, h0: f64, t_end: f64, radius: f64, dim: usize, seed: u64) -> Result<Certificate> {
    let params = json!({ "h0": h0, "t_end": t_end, "radius": radius, "dim": dim, "seed": seed });
    let field = VectorField::new(ladder.clone());
    let u = random_direction(&mut ic_rng(seed, 0), dim, 8);
    let x0 = StateVector::new(u.iter().map(|v| v * radius).collect())?;
    let mut ends = Vec::new();
    for i in 0..4 {
        let h = h0 / f64::from(1u32 << i);
        let steps = (t_end / h).round() as usize;
        ends.push(euler_polygon(&x0, h, steps, &field)?.endpoint().to_vec());
    }
    let diffs: Vec<f64> = ends.windows(2).map(|w| distance(&w[0], &w[1])).collect();
    let orders: Vec<f64> = diffs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();

    let extrapolated: Vec<f64> = ends[3].iter().zip(&ends[2]).map(|(a, b)| 2.0 * a - b).collect();
    let spec = RunSpec::with_tolerance(t_end, 1e-12);
    let tr = AdaptiveRk4.integrate(&field, &InitialCondition::Cartesian(x0), &spec)?;
    let FinalState::Cartesian(reference) = &tr.final_state else {
        unreachable!("state-space integrator returns a state vector")
    };
    let deviation = distance(reference, &extrapolated) / norm(reference);

    let order_margins = orders.iter().map(|p| (0.1 / (p - 1.0).abs()).ln());
    let margin = worst(order_margins.chain([(1e-6 / deviation).ln()]));
    let ok = orders.iter().all(|p| (p - 1.0).abs() <= 0.1) && deviation <= 1e-6;
    let witness = json!({ "differences": diffs, "orders": orders, "adaptive_deviation": deviation });
    Ok(Certificate::new("euler-order", params, ok, margin, witness))
}

pub struct EulerOrderClaim {
    pub h0: f64,
    pub t_end: f64,
    pub radius: f64,
    pub dim: usize,
}

impl Default for EulerOrderClaim {
    fn default() -> Self {
        Self { h0: 1e-3, t_end: 2.0, radius: 0.5, dim: 64 }
    }
}

impl Claim for EulerOrderClaim {
    fn id(&self) -> &'static str {
        "euler-order"
    }

    fn summary(&self) -> &'static str {
        "Euler polygons converge with order one to the adaptive solution"
    }

    fn certify(&self, ladder: &RadiusLadder, seed: u64) -> Result<Certificate> {
        certify_euler_order(ladder, self.h0, self.t_end, self.radius, self.dim, seed)
    }
}
