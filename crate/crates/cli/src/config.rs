//! Run configuration: defaults, then an optional TOML file, then flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use shiftlab::field::FieldParams;
use shiftlab::flow::{IntegratorRegistry, RunSpec};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Effective configuration of one run. Echoed verbatim into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub k0: f64,
    pub gamma: f64,
    pub r1_log: f64,
    pub kmax: usize,
    pub dim: usize,
    pub integrator: String,
    /// Step of the fixed-step `euler` integrator.
    pub h: f64,
    /// Local error tolerance of the adaptive integrators.
    pub tol: f64,
    pub t_end: f64,
    pub seed: u64,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = FieldParams::default();
        Self {
            k0: p.k0,
            gamma: p.gamma,
            r1_log: p.r1_log,
            kmax: p.kmax,
            dim: p.dim,
            integrator: "auto".into(),
            h: 1e-3,
            tol: 1e-9,
            t_end: 2000.0,
            seed: 0,
            format: Format::Csv,
        }
    }
}

/// A partial configuration. Used both for the file layer and the flag layer.
#[derive(Debug, Clone, Default, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Base of the level weights, must exceed 1.
    #[arg(long, global = true)]
    pub k0: Option<f64>,
    /// Linear damping rate in (0, 1).
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Natural log of the outermost ladder radius.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub r1_log: Option<f64>,
    /// Deepest ladder level.
    #[arg(long, global = true)]
    pub kmax: Option<usize>,
    /// Truncation dimension.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Integrator used by `simulate` (euler, adaptive, logradial, auto).
    #[arg(long, global = true)]
    pub integrator: Option<String>,
    #[arg(long, global = true)]
    pub h: Option<f64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output root; only read from a config file, the flag and the
    /// environment variable take priority.
    #[arg(skip)]
    pub out: Option<String>,
}

impl Overrides {
    pub fn from_file(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| UsageError(format!("bad config {}: {e}", path.display())))
    }

    pub fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! take {
            ($($f:ident),*) => {$( if let Some(v) = &self.$f { cfg.$f = v.clone(); } )*};
        }
        take!(k0, gamma, r1_log, kmax, dim, integrator, h, tol, t_end, seed, format);
    }
}

impl RunConfig {
    /// Defaults, then `file`, then `flags`.
    pub fn layered(file: Option<&Overrides>, flags: &Overrides) -> Result<Self, UsageError> {
        let mut cfg = Self::default();
        if let Some(f) = file {
            f.apply(&mut cfg);
        }
        flags.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn field_params(&self) -> FieldParams {
        FieldParams { k0: self.k0, gamma: self.gamma, r1_log: self.r1_log, kmax: self.kmax, dim: self.dim }
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        self.field_params().validate().map_err(|e| UsageError(e.to_string()))?;
        IntegratorRegistry::default().get(&self.integrator).map_err(|e| UsageError(e.to_string()))?;
        self.run_spec().validate().map_err(|e| UsageError(e.to_string()))?;
        if !(self.h > 0.0) {
            return Err(UsageError(format!("h must be positive, got {}", self.h)));
        }
        Ok(())
    }

    /// Integration controls for `simulate`.
    pub fn run_spec(&self) -> RunSpec {
        if self.integrator == "euler" {
            RunSpec::with_step(self.t_end, self.h)
        } else {
            RunSpec::with_tolerance(self.t_end, self.tol)
        }
    }
}
