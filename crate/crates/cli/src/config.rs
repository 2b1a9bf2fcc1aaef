//! Settings shared by every subcommand: defaults, then a config file, then
//! command-line flags.

use std::path::{Path, PathBuf};

use qbell::optimize::OptimizerConfig;
use qbell::scan::Format;
use qbell::{Error, Result};
use serde::Deserialize;

/// Config file contents. Keys match the global flags, plus the remaining
/// optimizer fields.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    /// Sets both the f and x tolerances.
    pub tol: Option<f64>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub max_iterations: Option<usize>,
    pub f_tolerance: Option<f64>,
    pub x_tolerance: Option<f64>,
    pub initial_step: Option<f64>,
}

impl FileConfig {
    /// `.json` files are JSON, everything else TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => {
                serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
            }
            _ => toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display()))),
        }
    }

    /// Overlay `top` on `self`; fields set in `top` win.
    pub fn merged(self, top: FileConfig) -> FileConfig {
        FileConfig {
            seed: top.seed.or(self.seed),
            restarts: top.restarts.or(self.restarts),
            tol: top.tol.or(self.tol),
            threads: top.threads.or(self.threads),
            output: top.output.or(self.output),
            format: top.format.or(self.format),
            max_iterations: top.max_iterations.or(self.max_iterations),
            f_tolerance: top.f_tolerance.or(self.f_tolerance),
            x_tolerance: top.x_tolerance.or(self.x_tolerance),
            initial_step: top.initial_step.or(self.initial_step),
        }
    }

    /// Apply the optimizer-related fields to `base`.
    pub fn apply(&self, base: &OptimizerConfig) -> Result<OptimizerConfig> {
        let mut cfg = base.clone();
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.restarts {
            cfg.restarts = v;
        }
        if let Some(v) = self.max_iterations {
            cfg.max_iterations = v;
        }
        if let Some(v) = self.tol {
            cfg.f_tolerance = v;
            cfg.x_tolerance = v;
        }
        if let Some(v) = self.f_tolerance {
            cfg.f_tolerance = v;
        }
        if let Some(v) = self.x_tolerance {
            cfg.x_tolerance = v;
        }
        if let Some(v) = self.initial_step {
            cfg.initial_step = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
