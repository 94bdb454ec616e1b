//! Trajectory certificates: the decay envelope on an annulus, the two-step
//! shell argument, and global attraction down the ladder.

use rayon::prelude::*;
use serde_json::{json, Value};

use super::sampling::{ic_rng, random_direction, shell_ic};
use super::{worst, Certificate, Claim};
use crate::error::{Error, Result};
use crate::field::{q_max, FieldKind, RadiusLadder, VectorField};
use crate::flow::{
    envelope_log, operator_norm, AdaptiveRk4, InitialCondition, Integrator, LogRadial, LogRadialState,
    PropagatorOperator, RunSpec, StateVector, TerminalStatus, Trajectory,
};

/// Long enough that every run ends on a level crossing or the ladder floor.
const T_LONG: f64 = 1e6;

/// First `t > 0` at which `envelope_log(k, t)` drops below `target_log < 0`.
pub fn envelope_crossing_time(k: usize, target_log: f64, k0: f64, gamma: f64) -> f64 {
    if target_log >= 0.0 {
        return 0.0;
    }
    let env = |t: f64| envelope_log(k, t, k0, gamma);
    let mut lo = q_max((1usize << k) - 1, k0, gamma).t_star;
    let mut hi = lo.max(1.0) * 2.0;
    while env(hi) >= target_log {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if env(mid) >= target_log {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    hi
}

fn check_shell_k(ladder: &RadiusLadder, k: usize) -> Result<()> {
    if k < 3 || k + 4 > ladder.kmax() {
        return Err(Error::InvalidParameter(format!(
            "shell argument needs 3 <= k <= kmax - 4, got k = {k} with kmax = {}",
            ladder.kmax()
        )));
    }
    Ok(())
}

fn status_ok(status: &TerminalStatus) -> bool {
    matches!(status, TerminalStatus::ReachedTarget | TerminalStatus::LadderExhausted)
}

fn status_name(status: &TerminalStatus) -> Value {
    serde_json::to_value(status).unwrap_or(Value::Null)
}

/// `exp(tau W) x` for the shift part of `A`, the series stopping once a term vanishes.
fn frozen_exp(w: &crate::field::Generator, tau: f64, x: &[f64], transpose: bool) -> Vec<f64> {
    let n = x.len();
    let mut out = x.to_vec();
    let mut term = x.to_vec();
    let mut next = vec![0.0; n];
    for j in 1..=n {
        if transpose {
            w.apply_transpose_into(&term, &mut next);
        } else {
            w.apply_into(&term, &mut next);
        }
        let c = tau / j as f64;
        let mut any = false;
        for (t, v) in term.iter_mut().zip(&next) {
            *t = c * v;
            any |= *t != 0.0;
        }
        if !any {
            break;
        }
        out.iter_mut().zip(&term).for_each(|(o, t)| *o += t);
    }
    out
}

/// Direction in the leading `block` coordinates that the frozen operator of
/// `sigma` amplifies most over `tau`.
fn adversarial_direction(field: &VectorField, sigma: f64, tau: f64, dim: usize, block: usize, seed: u64) -> Result<Vec<f64>> {
    let w = field.generator(sigma)?.shift_part();
    let project = |mut v: Vec<f64>| {
        v.iter_mut().skip(block).for_each(|x| *x = 0.0);
        v
    };
    let est = operator_norm(
        dim,
        |x| frozen_exp(&w, tau, &project(x.to_vec()), false),
        |y| project(frozen_exp(&w, tau, y, true)),
        seed,
        3,
        1e-8,
        None,
    );
    Ok(project(est.vector))
}

/// One trajectory of the shell argument.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellRun {
    pub label: String,
    pub start: LogRadialState,
    pub sup_sigma: f64,
    /// `(j, first time below r_j)` for `j = k + 1 ..= depth`.
    pub hits: Vec<(usize, Option<f64>)>,
    pub status: TerminalStatus,
    pub final_time: f64,
    pub final_sigma: f64,
    pub steps: usize,
}

impl ShellRun {
    pub fn hit(&self, j: usize) -> Option<f64> {
        self.hits.iter().find(|(l, _)| *l == j).and_then(|(_, t)| *t)
    }
}

/// Log-radial runs from shell `k` down to `r_depth`: `n_ics` random starts
/// (direction over the first `block` coordinates, log-uniform radius), a radial
/// start along `e1` and an adversarial start, both at the top of the shell.
pub fn shell_runs(
    ladder: &RadiusLadder,
    k: usize,
    n_ics: usize,
    dim: usize,
    block: usize,
    depth: usize,
    tol: f64,
    seed: u64,
) -> Result<Vec<ShellRun>> {
    if depth <= k || depth > ladder.kmax() {
        return Err(Error::InvalidParameter(format!("depth {depth} must lie in (k, kmax]")));
    }
    let field = VectorField::with_kind(ladder.clone(), FieldKind::Nonlinear);
    let (lo, hi) = (ladder.r_log(k + 1), ladder.r_log(k));
    let top = hi - 1e-9;
    let mut starts = Vec::with_capacity(n_ics + 2);
    for i in 0..n_ics {
        let ic = shell_ic(&mut ic_rng(seed, i as u64), dim, block, lo, hi)?;
        starts.push((format!("random-{i}"), ic));
    }
    let mut e1 = vec![0.0; dim];
    e1[0] = 1.0;
    starts.push(("radial-e1".to_string(), LogRadialState::new(top, StateVector::new(e1)?)?));
    let tau = ladder.t_star(k);
    let adv = adversarial_direction(&field, top, tau, dim, block, seed)?;
    starts.push(("adversarial".to_string(), LogRadialState::new(top, StateVector::new(adv)?)?));

    let spec = RunSpec::with_tolerance(T_LONG, tol).stop_below(ladder.r_log(depth));
    starts
        .into_par_iter()
        .map(|(label, start)| {
            let tr = LogRadial.integrate(&field, &InitialCondition::Polar(start.clone()), &spec)?;
            let hits = (k + 1..=depth).map(|j| (j, tr.first_time_below(ladder.r_log(j)))).collect();
            Ok(ShellRun {
                label,
                start,
                sup_sigma: tr.max_sigma(),
                hits,
                status: tr.status.clone(),
                final_time: tr.final_time,
                final_sigma: tr.final_sigma(),
                steps: tr.meta.steps,
            })
        })
        .collect()
}

/// `|x(0)|` in shell `k` keeps `|x(t)| < r_{k-1}`; in fact
/// `sup log |x| <= log r_k + log Q_{2^k - 1}`, which leaves at least `log 2`.
pub fn step1_from_runs(ladder: &RadiusLadder, k: usize, runs: &[ShellRun], params: Value) -> Certificate {
    let ceiling = ladder.r_log(k - 1);
    let lemma = ladder.r_log(k) + ladder.q_log(k);
    let mut failure = None;
    let mut worst_run = None;
    let mut margin = f64::INFINITY;
    for run in runs {
        let m = ceiling - run.sup_sigma;
        if m < margin {
            margin = m;
            worst_run = Some(run);
        }
        let ok = run.sup_sigma < ceiling
            && run.sup_sigma <= lemma + 1e-9
            && m >= std::f64::consts::LN_2 - 1e-3
            && status_ok(&run.status);
        if !ok && failure.is_none() {
            failure = Some(run_witness(run, json!({ "ceiling": ceiling, "lemma_bound": lemma })));
        }
    }
    let ok = failure.is_none();
    let witness = failure.unwrap_or_else(|| match worst_run {
        Some(r) => run_witness(r, json!({ "ceiling": ceiling, "lemma_bound": lemma, "runs": runs.len() })),
        None => Value::Null,
    });
    Certificate::new("step1", params, ok && !runs.is_empty(), margin, witness)
}

fn run_witness(run: &ShellRun, extra: Value) -> Value {
    json!({
        "label": run.label,
        "sigma0": run.start.sigma(),
        "sup_sigma": run.sup_sigma,
        "status": status_name(&run.status),
        "final_time": run.final_time,
        "final_sigma": run.final_sigma,
        "hits": run.hits,
        "context": extra,
    })
}

/// Every run from shell `k` gets below `r_{k+2}` within `4 T_env`, where `T_env`
/// is the time for the envelope to fall by `log(r_{k-1} / r_{k+2})`, and keeps
/// descending through the deeper levels in order.
///
/// Also records, for each start, whether the linearized flow over the same
/// horizon stays above `r_{k+2}`.
pub fn step2_from_runs(ladder: &RadiusLadder, k: usize, runs: &[ShellRun], dim: usize, params: Value) -> Result<Certificate> {
    let (k0, gamma) = (ladder.k0(), ladder.gamma());
    let target = ladder.r_log(k + 2);
    let t_env = envelope_crossing_time(k, target - ladder.r_log(k - 1), k0, gamma);
    let mut failure = None;
    let mut t_max: f64 = 0.0;
    let mut worst_label = String::new();
    let mut linear_above = 0usize;
    let mut linear_rows = Vec::new();
    for run in runs {
        let hit = run.hit(k + 2);
        let chained = run.hits.iter().all(|(_, t)| t.is_some())
            && run.hits.windows(2).all(|w| w[0].1 <= w[1].1);
        match hit {
            Some(t) if t <= 4.0 * t_env && chained => {
                if t > t_max {
                    t_max = t;
                    worst_label = run.label.clone();
                }
                let op = PropagatorOperator::new(dim, t, k0, gamma)?;
                let lin = run.start.sigma() + op.log_norm_of(run.start.direction().components());
                if lin >= target {
                    linear_above += 1;
                }
                linear_rows.push(json!({ "label": run.label, "t_hit": t, "linear_sigma": lin }));
            }
            _ => {
                failure.get_or_insert(run_witness(run, json!({ "t_env": t_env, "bound": 4.0 * t_env })));
                t_max = f64::INFINITY;
            }
        }
    }
    let ok = failure.is_none() && !runs.is_empty();
    let margin = (4.0 * t_env / t_max).ln();
    let witness = failure.unwrap_or_else(|| {
        json!({
            "t_env": t_env,
            "max_hitting_time": t_max,
            "slowest": worst_label,
            "linearized_above_target": linear_above,
            "linearized": linear_rows,
        })
    });
    Ok(Certificate::new("step2", params, ok, margin, witness))
}

fn step1_judge(ladder: &RadiusLadder, k: usize, runs: &[ShellRun], _dim: usize, params: Value) -> Result<Certificate> {
    Ok(step1_from_runs(ladder, k, runs, params))
}

fn shell_params(k: usize, n_ics: usize, dim: usize, block: usize, tol: f64, seed: u64) -> Value {
    json!({ "k": k, "n_ics": n_ics, "dim": dim, "block": block, "tol": tol, "seed": seed })
}

pub fn certify_step1(ladder: &RadiusLadder, k: usize, n_ics: usize, dim: usize, seed: u64) -> Result<Certificate> {
    check_shell_k(ladder, k)?;
    let tol = 1e-9;
    let runs = shell_runs(ladder, k, n_ics, dim, dim / 2, k + 2, tol, seed)?;
    Ok(step1_from_runs(ladder, k, &runs, shell_params(k, n_ics, dim, dim / 2, tol, seed)))
}

pub fn certify_step2(ladder: &RadiusLadder, k: usize, n_ics: usize, dim: usize, seed: u64) -> Result<Certificate> {
    check_shell_k(ladder, k)?;
    let tol = 1e-9;
    let runs = shell_runs(ladder, k, n_ics, dim, dim / 2, k + 4, tol, seed)?;
    step2_from_runs(ladder, k, &runs, dim, shell_params(k, n_ics, dim, dim / 2, tol, seed))
}

/// Combines per-shell certificates into one.
fn merge(claim: &str, params: Value, certs: Vec<Certificate>) -> Certificate {
    let ok = certs.iter().all(|c| c.passed());
    let margin = worst(certs.iter().map(|c| c.margin_log));
    let witness = Value::Array(
        certs
            .into_iter()
            .map(|c| json!({ "params": c.params, "verdict": c.verdict, "margin_log": c.margin_log, "witness": c.witness }))
            .collect(),
    );
    Certificate::new(claim, params, ok, margin, witness)
}

/// Annulus `[r_{k+2}, r_{k-1}]` on which `W_eps - L(s)` stays in `Omega_k`;
/// the top is open for `k = 2`.
fn annulus(ladder: &RadiusLadder, k: usize) -> (f64, f64) {
    let upper = if k <= 2 { f64::INFINITY } else { ladder.r_log(k - 1) };
    (ladder.r_log(k + 2), upper)
}

fn envelope_trajectories(ladder: &RadiusLadder, k: usize, ics: &[LogRadialState], t_end: f64, tol: f64) -> Result<Vec<Trajectory>> {
    let field = VectorField::with_kind(ladder.clone(), FieldKind::Nonlinear);
    let (lower, upper) = annulus(ladder, k);
    for ic in ics {
        if ic.sigma() < lower || ic.sigma() > upper {
            return Err(Error::InvalidParameter(format!(
                "initial log-norm {} lies outside the annulus of class {k}",
                ic.sigma()
            )));
        }
    }
    let spec = RunSpec::with_tolerance(t_end, tol).stop_below(lower);
    ics.par_iter()
        .map(|ic| AdaptiveRk4.integrate(&field, &InitialCondition::Polar(ic.clone()), &spec))
        .collect()
}

fn judge_envelope(
    ladder: &RadiusLadder,
    k: usize,
    trajectories: &[Trajectory],
    gamma_env: f64,
    params: Value,
) -> Certificate {
    let (lower, upper) = annulus(ladder, k);
    let k0 = ladder.k0();
    let mut margin = f64::INFINITY;
    let mut worst_point = Value::Null;
    let mut failure = None;
    let mut left_upward = 0usize;
    for (i, tr) in trajectories.iter().enumerate() {
        if matches!(tr.status, TerminalStatus::TailGuardBreach { .. } | TerminalStatus::StepLimit) {
            failure.get_or_insert(json!({ "ic": i, "status": status_name(&tr.status) }));
        }
        let sigma0 = tr.samples[0].sigma;
        for s in &tr.samples {
            if s.sigma < lower {
                break;
            }
            if s.sigma > upper {
                left_upward += 1;
                break;
            }
            let env = envelope_log(k, s.t, k0, gamma_env);
            let slack = env - (s.sigma - sigma0);
            if s.t > 0.0 && slack < margin {
                margin = slack;
                worst_point = json!({ "ic": i, "t": s.t, "sigma": s.sigma, "sigma0": sigma0, "envelope": env });
            }
            if slack < -1e-6 && failure.is_none() {
                failure = Some(json!({ "ic": i, "t": s.t, "sigma": s.sigma, "sigma0": sigma0, "envelope": env }));
            }
        }
    }
    let ok = failure.is_none();
    let witness = failure.unwrap_or_else(|| json!({ "worst": worst_point, "left_annulus_upward": left_upward }));
    Certificate::new("envelope", params, ok, margin, witness)
}

/// Along each trajectory, while it stays in the annulus of class `k`,
/// `log |x(t)| - log |x(0)| <= envelope_log(k, t) + 1e-6`.
pub fn certify_envelope(ladder: &RadiusLadder, k: usize, ics: &[LogRadialState], t_end: f64, tol: f64) -> Result<Certificate> {
    let trs = envelope_trajectories(ladder, k, ics, t_end, tol)?;
    let params = json!({ "k": k, "n_ics": ics.len(), "t_end": t_end, "tol": tol });
    Ok(judge_envelope(ladder, k, &trs, ladder.gamma(), params))
}

/// Random starts in the annulus of class `k`, log-uniform in radius.
pub fn annulus_ics(ladder: &RadiusLadder, k: usize, n: usize, dim: usize, block: usize, seed: u64) -> Result<Vec<LogRadialState>> {
    let (lower, upper) = annulus(ladder, k);
    let upper = upper.min(ladder.r_log(1));
    (0..n)
        .map(|i| shell_ic(&mut ic_rng(seed, (k as u64) << 32 | i as u64), dim, block, lower, upper))
        .collect()
}

/// Global attraction: starts with `log |x0|` in `[lo, hi]` enter `|x| < r_3`
/// no later than the class-2 envelope forces it, then descend through every
/// ladder level in order to the floor without leaving the float range.
pub fn certify_global(
    ladder: &RadiusLadder,
    n_ics: usize,
    radius_range: (f64, f64),
    dim: usize,
    block: usize,
    seed: u64,
) -> Result<Certificate> {
    let (lo, hi) = radius_range;
    if !(lo < hi) || lo < ladder.r_log(3) {
        return Err(Error::InvalidParameter(format!("radius range must satisfy r_3 <= lo < hi, got [{lo}, {hi}]")));
    }
    let kmax = ladder.kmax();
    let (k0, gamma) = (ladder.k0(), ladder.gamma());
    let tol = 1e-9;
    let params = json!({ "n_ics": n_ics, "radius_range": [lo, hi], "dim": dim, "block": block, "tol": tol, "seed": seed });
    let field = VectorField::with_kind(ladder.clone(), FieldKind::Nonlinear);
    let target = ladder.floor_log() + 1.0;
    let spec = RunSpec::with_tolerance(T_LONG, tol).stop_below(target);

    let mut starts: Vec<(String, LogRadialState)> = (0..n_ics)
        .map(|i| Ok((format!("random-{i}"), shell_ic(&mut ic_rng(seed, i as u64), dim, block, lo, hi)?)))
        .collect::<Result<_>>()?;
    let small = ladder.r_log(kmax - 4) - 1.0;
    let dir = random_direction(&mut ic_rng(seed, n_ics as u64), dim, block);
    starts.push(("small".to_string(), LogRadialState::new(small, StateVector::new(dir)?)?));

    let results: Vec<(String, f64, Trajectory)> = starts
        .into_par_iter()
        .map(|(label, ic)| {
            let tr = LogRadial.integrate(&field, &InitialCondition::Polar(ic.clone()), &spec)?;
            Ok((label, ic.sigma(), tr))
        })
        .collect::<Result<_>>()?;

    let mut failure = None;
    let mut margins = Vec::new();
    let mut rows = Vec::new();
    for (label, sigma0, tr) in &results {
        let finite = tr.samples.iter().all(|s| s.sigma.is_finite());
        let deep = tr.final_sigma() <= target + 1e-9 || tr.status == TerminalStatus::LadderExhausted;
        let first = if *sigma0 >= ladder.r_log(3) { 3 } else { kmax - 3 };
        let hits: Vec<Option<f64>> = (first..kmax).map(|j| tr.first_time_below(ladder.r_log(j))).collect();
        let ordered = hits.iter().all(|h| h.is_some()) && hits.windows(2).all(|w| w[0] <= w[1]);
        let mut ok = finite && deep && ordered && status_ok(&tr.status);
        let mut row = json!({
            "label": label, "sigma0": sigma0, "status": status_name(&tr.status),
            "final_time": tr.final_time, "final_sigma": tr.final_sigma(), "hits": hits,
        });
        if first == 3 {
            let t3 = hits[0].unwrap_or(f64::INFINITY);
            let bound = envelope_crossing_time(2, ladder.r_log(3) - sigma0, k0, gamma);
            ok &= t3 <= bound;
            margins.push((bound / t3).ln());
            row["t3"] = json!(t3);
            row["t3_bound"] = json!(bound);
        }
        if !ok {
            failure.get_or_insert(row.clone());
        }
        rows.push(row);
    }

    let origin = LogRadial.integrate(
        &field,
        &InitialCondition::Cartesian(StateVector::zeros(dim)?),
        &RunSpec::with_tolerance(10.0, tol),
    )?;
    if origin.status != TerminalStatus::AtOrigin {
        failure.get_or_insert(json!({ "label": "origin", "status": status_name(&origin.status) }));
    }

    let ok = failure.is_none();
    let witness = failure.unwrap_or_else(|| json!({ "runs": rows, "origin": status_name(&origin.status) }));
    Ok(Certificate::new("global", params, ok, worst(margins), witness))
}

pub struct EnvelopeClaim {
    pub ks: Vec<usize>,
    pub n_ics: usize,
    pub dim: usize,
    pub block: usize,
    pub t_end: f64,
    pub tol: f64,
    /// Factor on `gamma` in the self-test envelope, which must then fail.
    pub injected_gamma_scale: f64,
}

impl Default for EnvelopeClaim {
    fn default() -> Self {
        Self { ks: vec![2, 3, 4], n_ics: 8, dim: 128, block: 16, t_end: 1e4, tol: 1e-10, injected_gamma_scale: 2.0 }
    }
}

impl EnvelopeClaim {
    fn starts(&self, ladder: &RadiusLadder, k: usize, seed: u64) -> Result<Vec<LogRadialState>> {
        let mut ics = annulus_ics(ladder, k, self.n_ics, self.dim, self.block, seed)?;
        if k == 2 {
            let mid = 0.5 * (ladder.r_log(4) + ladder.r_log(1));
            let dir = random_direction(&mut ic_rng(seed, u64::MAX), self.dim, self.block);
            ics.push(LogRadialState::new(mid, StateVector::new(dir)?)?);
        }
        Ok(ics)
    }
}

impl Claim for EnvelopeClaim {
    fn id(&self) -> &'static str {
        "envelope"
    }

    fn summary(&self) -> &'static str {
        "|x(t)| <= p_{2^k-1}(K0 t) e^(-gamma t) |x(0)| inside the class-k annulus"
    }

    fn certify(&self, ladder: &RadiusLadder, seed: u64) -> Result<Certificate> {
        let mut certs = Vec::new();
        let mut detected = Vec::new();
        for &k in &self.ks {
            let ics = self.starts(ladder, k, seed)?;
            let trs = envelope_trajectories(ladder, k, &ics, self.t_end, self.tol)?;
            let params = json!({ "k": k, "n_ics": ics.len(), "t_end": self.t_end, "tol": self.tol });
            certs.push(judge_envelope(ladder, k, &trs, ladder.gamma(), params.clone()));
            let injected = judge_envelope(ladder, k, &trs, self.injected_gamma_scale * ladder.gamma(), params);
            detected.push(!injected.passed());
        }
        // The checker must catch the deliberately wrong envelope at least once.
        let self_test = detected.iter().any(|d| *d);
        certs.push(Certificate::new(
            "envelope",
            json!({ "self_test_gamma_scale": self.injected_gamma_scale }),
            self_test,
            0.0,
            json!({ "injected_violation_detected": detected }),
        ));
        let params = json!({
            "ks": self.ks, "n_ics": self.n_ics, "dim": self.dim, "block": self.block,
            "t_end": self.t_end, "tol": self.tol, "seed": seed,
        });
        let mut merged = merge("envelope", params, certs);
        // The self-test entry carries no slack of its own.
        merged.margin_log = worst(
            merged.witness.as_array().into_iter().flatten().filter_map(|w| {
                w["params"].get("k").map(|_| w["margin_log"].as_f64().unwrap_or(f64::NEG_INFINITY))
            }),
        );
        Ok(merged)
    }
}

macro_rules! shell_claim {
    ($name:ident, $id:literal, $summary:literal, $depth:expr, $judge:expr) => {
        pub struct $name {
            pub ks: Vec<usize>,
            pub n_ics: usize,
            pub dim: usize,
            pub block: usize,
            pub tol: f64,
        }

        impl Default for $name {
            fn default() -> Self {
                Self { ks: vec![3, 4, 5], n_ics: 32, dim: 256, block: 128, tol: 1e-9 }
            }
        }

        impl Claim for $name {
            fn id(&self) -> &'static str {
                $id
            }

            fn summary(&self) -> &'static str {
                $summary
            }

            fn certify(&self, ladder: &RadiusLadder, seed: u64) -> Result<Certificate> {
                let mut certs = Vec::new();
                for &k in &self.ks {
                    check_shell_k(ladder, k)?;
                    let runs = shell_runs(ladder, k, self.n_ics, self.dim, self.block, $depth(k), self.tol, seed)?;
                    let params = shell_params(k, self.n_ics, self.dim, self.block, self.tol, seed);
                    certs.push($judge(ladder, k, &runs, self.dim, params)?);
                }
                let params = json!({
                    "ks": self.ks, "n_ics": self.n_ics, "dim": self.dim, "block": self.block,
                    "tol": self.tol, "seed": seed,
                });
                Ok(merge($id, params, certs))
            }
        }
    };
}

shell_claim!(
    Step1Claim,
    "step1",
    "a start in shell k never reaches r_{k-1}",
    |k: usize| k + 2,
    step1_judge
);

shell_claim!(
    Step2Claim,
    "step2",
    "a start in shell k falls below r_{k+2} within 4 envelope crossing times",
    |k: usize| k + 4,
    step2_from_runs
);

pub struct GlobalClaim {
    pub n_ics: usize,
    /// Deep shells move mass far down the sequence; the runs need more room
    /// than the shell-by-shell claims.
    pub dim: usize,
    pub block: usize,
    /// Upper end of the start radii as `log(|x0| / r_1)`.
    pub top_above_r1: f64,
}

impl Default for GlobalClaim {
    fn default() -> Self {
        Self { n_ics: 16, dim: 2048, block: 128, top_above_r1: 10f64.ln() }
    }
}

impl Claim for GlobalClaim {
    fn id(&self) -> &'static str {
        "global"
    }

    fn summary(&self) -> &'static str {
        "every start reaches |x| < r_3 within the class-2 envelope and descends to the floor"
    }

    fn certify(&self, ladder: &RadiusLadder, seed: u64) -> Result<Certificate> {
        let range = (ladder.r_log(3), ladder.r_log(1) + self.top_above_r1);
        certify_global(ladder, self.n_ics, range, self.dim, self.block, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{build_ladder, FieldParams};

    fn ladder() -> RadiusLadder {
        build_ladder(&FieldParams::default()).unwrap()
    }

    #[test]
    fn crossing_time_solves_the_envelope_equation() {
        let t = envelope_crossing_time(3, -20.0, 2.0, 0.5);
        assert!((envelope_log(3, t, 2.0, 0.5) + 20.0).abs() < 1e-8);
        assert!(t > q_max(7, 2.0, 0.5).t_star);
        assert_eq!(envelope_crossing_time(3, 0.0, 2.0, 0.5), 0.0);
    }

    #[test]
    fn frozen_exponential_matches_the_propagator() {
        let l = ladder();
        let f = VectorField::with_kind(l, FieldKind::Linearized);
        let w = f.generator(0.0).unwrap().shift_part();
        let mut x = vec![0.0; 32];
        x[0] = 1.0;
        x[5] = 0.5;
        let t = 3.0;
        let mine: Vec<f64> = frozen_exp(&w, t, &x, false).iter().map(|v| v * (-0.5 * t).exp()).collect();
        let exact = crate::flow::linear_propagator(32, t, 2.0, 0.5).unwrap().apply(&x);
        for (a, b) in mine.iter().zip(&exact) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        let y: Vec<f64> = (0..32).map(|i| (i as f64).sin()).collect();
        let lhs: f64 = frozen_exp(&w, t, &x, false).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = frozen_exp(&w, t, &y, true).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn shell_k_range_is_enforced() {
        let l = ladder();
        assert!(certify_step1(&l, 2, 1, 64, 0).is_err());
        assert!(certify_step1(&l, 7, 1, 64, 0).is_err());
    }

    #[test]
    fn envelope_rejects_starts_outside_the_annulus() {
        let l = ladder();
        let mut u = vec![0.0; 32];
        u[0] = 1.0;
        let ic = LogRadialState::new(l.r_log(1) + 1.0, StateVector::new(u).unwrap()).unwrap();
        assert!(certify_envelope(&l, 3, &[ic], 10.0, 1e-8).is_err());
    }

    #[test]
    fn envelope_small_run_passes() {
        let l = ladder();
        let ics = annulus_ics(&l, 2, 3, 64, 8, 11).unwrap();
        let c = certify_envelope(&l, 2, &ics, 1e4, 1e-10).unwrap();
        assert!(c.passed(), "{}", c.witness);
    }
}
