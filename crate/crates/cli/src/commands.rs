//! Subcommand bodies. Each one computes everything in memory first, so a
//! rejected input never leaves files behind, then writes its run directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;
use serde_json::{json, Value};
use shiftlab::certify::{ic_rng, norm_sweep, shell_ic, ClaimRegistry, SuiteReport};
use shiftlab::field::{build_ladder, RadiusLadder, VectorField};
use shiftlab::flow::{InitialCondition, IntegratorRegistry, StateVector, Trajectory};
use shiftlab::kakutani::{gelfand_estimate, kappa, WeightRule};

use crate::config::{Format, RunConfig};
use crate::output::{default_run_id, ladder_digest, RunDir, RunManifest};
use crate::UsageError;

/// Where a run goes.
pub struct Target {
    pub root: PathBuf,
    pub run_id: Option<String>,
}

/// What a command reports back to `main`.
pub struct Done {
    pub dir: PathBuf,
    pub all_passed: bool,
    pub failing: Vec<String>,
}

struct Output {
    command: &'static str,
    args: Value,
    files: Vec<(String, Vec<u8>)>,
    verdicts: BTreeMap<String, shiftlab::certify::Verdict>,
    result: Value,
}

impl Output {
    fn new(command: &'static str, args: Value) -> Self {
        Self { command, args, files: Vec::new(), verdicts: BTreeMap::new(), result: Value::Null }
    }

    fn file(mut self, name: String, bytes: Vec<u8>) -> Self {
        self.files.push((name, bytes));
        self
    }
}

fn ladder_of(cfg: &RunConfig) -> Result<RadiusLadder> {
    build_ladder(&cfg.field_params()).map_err(|e| UsageError(e.to_string()).into())
}

fn check_run_id(id: &str) -> Result<(), UsageError> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
    if ok {
        Ok(())
    } else {
        Err(UsageError(format!("run id `{id}` must be a plain name of [A-Za-z0-9._-]")))
    }
}

fn persist(cfg: &RunConfig, ladder: &RadiusLadder, target: &Target, out: Output) -> Result<PathBuf> {
    let run_id = match &target.run_id {
        Some(id) => id.clone(),
        None => default_run_id(out.command, cfg, &out.args),
    };
    check_run_id(&run_id)?;
    let mut dir = RunDir::create(&target.root, &run_id)?;
    for (name, bytes) in &out.files {
        dir.write(name, bytes)?;
    }
    dir.finish(RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: out.command.to_string(),
        run_id,
        config: cfg.clone(),
        args: out.args,
        ladder_digest: ladder_digest(ladder),
        verdicts: out.verdicts,
        result: out.result,
        files: Vec::new(),
    })
}

fn table<T: Serialize>(rows: &[T], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            Ok(w.into_inner()?)
        }
        Format::Json => json_bytes(&rows),
    }
}

fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn done(dir: PathBuf) -> Done {
    Done { dir, all_passed: true, failing: Vec::new() }
}

#[derive(Serialize)]
struct WeightRow {
    n: u64,
    kappa: u32,
    level: u32,
    alpha: f64,
    log_alpha: f64,
}

pub fn weights(cfg: &RunConfig, target: &Target, n_max: u64) -> Result<Done> {
    if n_max == 0 {
        return Err(UsageError("--n-max must be at least 1".into()).into());
    }
    let ladder = ladder_of(cfg)?;
    let rule = WeightRule::full(cfg.k0)?;
    let rows = (1..=n_max)
        .map(|n| {
            let kappa = kappa(n)?;
            Ok(WeightRow { n, kappa, level: kappa + 1, alpha: rule.weight(n)?, log_alpha: rule.log_weight(n)? })
        })
        .collect::<shiftlab::Result<Vec<_>>>()?;
    let out = Output::new("weights", json!({ "n_max": n_max }))
        .file(format!("weights.{}", cfg.format.extension()), table(&rows, cfg.format)?);
    Ok(done(persist(cfg, &ladder, target, out)?))
}

#[derive(Serialize)]
struct SpectrumRow {
    p: u32,
    power: u64,
    log_estimate: f64,
    estimate: f64,
}

pub fn spectrum(cfg: &RunConfig, target: &Target, p_max: u32) -> Result<Done> {
    if !(1..=60).contains(&p_max) {
        return Err(UsageError(format!("--p-max must lie in [1, 60], got {p_max}")).into());
    }
    let ladder = ladder_of(cfg)?;
    let rows: Vec<SpectrumRow> = (1..=p_max)
        .map(|p| {
            let g = gelfand_estimate(cfg.k0, p);
            SpectrumRow { p, power: (1u64 << p) - 1, log_estimate: g, estimate: g.exp() }
        })
        .collect();
    let out = Output::new("spectrum", json!({ "p_max": p_max }))
        .file(format!("spectrum.{}", cfg.format.extension()), table(&rows, cfg.format)?);
    Ok(done(persist(cfg, &ladder, target, out)?))
}

/// Always JSON: the ladder is a nested record, not a flat table.
pub fn ladder(cfg: &RunConfig, target: &Target) -> Result<Done> {
    let ladder = ladder_of(cfg)?;
    let doc = json!({
        "k0": ladder.k0(),
        "gamma": ladder.gamma(),
        "kmax": ladder.kmax(),
        "floor_log": ladder.floor_log(),
        "rows": ladder.rows(),
    });
    let out = Output::new("ladder", json!({})).file("ladder.json".into(), json_bytes(&doc)?);
    Ok(done(persist(cfg, &ladder, target, out)?))
}

/// Starting point of `simulate`.
#[derive(Debug, Clone)]
pub enum StartSpec {
    Components(Vec<f64>),
    Shell { k: usize, direction_seed: u64, block: usize },
}

impl StartSpec {
    fn describe(&self) -> Value {
        match self {
            StartSpec::Components(x) => json!({ "components": x }),
            StartSpec::Shell { k, direction_seed, block } => {
                json!({ "shell": k, "direction_seed": direction_seed, "block": block })
            }
        }
    }

    fn build(&self, ladder: &RadiusLadder, dim: usize) -> Result<InitialCondition, UsageError> {
        let usage = |e: shiftlab::Error| UsageError(e.to_string());
        match self {
            StartSpec::Components(x) => {
                if x.len() > dim {
                    return Err(UsageError(format!("{} components exceed dim {dim}", x.len())));
                }
                let mut v = x.clone();
                v.resize(dim, 0.0);
                Ok(InitialCondition::Cartesian(StateVector::new(v).map_err(usage)?))
            }
            StartSpec::Shell { k, direction_seed, block } => {
                let kmax = ladder.kmax();
                if !(1..kmax).contains(k) {
                    return Err(UsageError(format!("shell must lie in [1, {}], got {k}", kmax - 1)));
                }
                if *block == 0 || *block > dim {
                    return Err(UsageError(format!("block must lie in [1, {dim}], got {block}")));
                }
                // shell k is [r_{k+1}, r_k)
                let (lo, hi) = (ladder.r_log(k + 1), ladder.r_log(*k));
                let mut rng = ic_rng(*direction_seed, *k as u64);
                let p = shell_ic(&mut rng, dim, *block, lo, hi).map_err(usage)?;
                Ok(InitialCondition::Polar(p))
            }
        }
    }
}

fn trajectory_bytes(tr: &Trajectory, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            tr.write_csv(&mut buf)?;
            Ok(buf)
        }
        Format::Json => json_bytes(&json!({ "meta": tr.meta, "status": tr.status, "samples": tr.samples })),
    }
}

pub fn simulate(cfg: &RunConfig, target: &Target, start: &StartSpec, stride: usize) -> Result<Done> {
    let ladder = ladder_of(cfg)?;
    let x0 = start.build(&ladder, cfg.dim)?;
    let registry = IntegratorRegistry::default();
    let integrator = registry.get(&cfg.integrator).map_err(|e| UsageError(e.to_string()))?;
    let spec = cfg.run_spec().stride(stride);
    let field = VectorField::new(ladder.clone());
    let tr = integrator.integrate(&field, &x0, &spec).map_err(|e| match e {
        shiftlab::Error::InvalidParameter(_) => anyhow::Error::from(UsageError(e.to_string())),
        other => other.into(),
    })?;

    let mut out = Output::new("simulate", json!({ "start": start.describe(), "stride": stride }))
        .file(format!("trajectory.{}", cfg.format.extension()), trajectory_bytes(&tr, cfg.format)?);
    out.result = json!({
        "status": tr.status,
        "meta": tr.meta,
        "initial_sigma": x0.sigma(),
        "final_time": tr.final_time,
        "final_sigma": tr.final_sigma(),
        "samples": tr.samples.len(),
    });
    Ok(done(persist(cfg, &ladder, target, out)?))
}

pub fn linearized(cfg: &RunConfig, target: &Target, ts: &[f64], ns: &[usize]) -> Result<Done> {
    if ts.is_empty() || ns.is_empty() {
        return Err(UsageError("--ts and --ns need at least one value".into()).into());
    }
    if ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(UsageError("times must be finite and nonnegative".into()).into());
    }
    if ns.iter().any(|&n| n < 2) || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(UsageError("dimensions must be at least 2 and strictly increasing".into()).into());
    }
    let ladder = ladder_of(cfg)?;
    let rows = norm_sweep(ts, ns, cfg.k0, cfg.gamma, cfg.seed)?;
    let out = Output::new("linearized", json!({ "ts": ts, "ns": ns }))
        .file(format!("linearized.{}", cfg.format.extension()), table(&rows, cfg.format)?);
    Ok(done(persist(cfg, &ladder, target, out)?))
}

/// Runs the selected claims, writes `report.json` and prints a summary.
pub fn certify(cfg: &RunConfig, target: &Target, claims: &[String]) -> Result<Done> {
    let ladder = ladder_of(cfg)?;
    let registry = ClaimRegistry::default();
    let ids: Vec<&str> = if claims.is_empty() {
        registry.ids()
    } else {
        let mut ids = Vec::new();
        for c in claims {
            let id = registry.get(c).map_err(|e| UsageError(e.to_string()))?.id();
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        ids
    };
    let report: SuiteReport = registry.run_suite(&ids, &ladder, cfg.seed)?;

    for c in &report.certificates {
        println!(
            "{:<12} {:<4} margin_log={:>12.6} {:>8} ms",
            c.claim,
            if c.passed() { "PASS" } else { "FAIL" },
            c.margin_log,
            c.runtime_ms
        );
    }
    println!("{} passed, {} failed", report.passed, report.failed);

    let mut out = Output::new("certify", json!({ "claims": ids }))
        .file("report.json".into(), json_bytes(&report)?);
    out.verdicts = report.certificates.iter().map(|c| (c.claim.clone(), c.verdict)).collect();
    out.result = json!({ "passed": report.passed, "failed": report.failed });
    let dir = persist(cfg, &ladder, target, out)?;
    Ok(Done {
        dir,
        all_passed: report.all_passed(),
        failing: report.failing_claims().into_iter().map(String::from).collect(),
    })
}

/// Output root: the flag or environment value, then the config file, then the default.
pub fn resolve_root(flag_or_env: Option<&Path>, file: Option<&str>) -> PathBuf {
    flag_or_env
        .map(Path::to_path_buf)
        .or_else(|| file.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(crate::output::DEFAULT_ROOT))
}
