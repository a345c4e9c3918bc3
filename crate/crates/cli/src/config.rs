//! Run configuration: command-line flags over a JSON file over defaults.

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use pointground::linops::Tag;
use pointground::model::{validate, Params};
use pointground::ode::Tolerances;
use pointground::shooting::ShootingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every command. Unset flags fall back to `--config`,
/// then to the defaults in [`RunConfig::default`].
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON file with any of the fields below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Nonlinearity exponent (> 1).
    #[arg(long = "p")]
    pub p: Option<f64>,
    /// Frequency λ (> |e_α|).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Point-interaction strength α.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Target bracket width for the shooting strength.
    #[arg(long)]
    pub tol_y: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    /// Handoff radius from the series representation to the integrator.
    #[arg(long)]
    pub r0: Option<f64>,
    /// Inner radius of spectral and Green grids.
    #[arg(long)]
    pub r_min: Option<f64>,
    /// Outer radius (defaults to max(20, 12/√λ)).
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Interval count of spectral and Green grids.
    #[arg(long)]
    pub n: Option<usize>,
    /// Perturbation size.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Fields accepted in a `--config` file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub p: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub tol_y: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub r0: Option<f64>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub n: Option<usize>,
    pub eps: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub sectors: Option<Vec<usize>>,
    pub tags: Option<Vec<String>>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub p: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub tol_y: f64,
    pub rtol: f64,
    pub atol: f64,
    pub r0: f64,
    pub r_min: f64,
    pub r_max: Option<f64>,
    pub n: usize,
    pub eps: f64,
    pub out: PathBuf,
    pub format: Format,
    pub sectors: Vec<usize>,
    pub tags: Vec<Tag>,
    pub k: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            p: 3.0,
            lambda: 2.0,
            alpha: 0.0,
            tol_y: 1e-10,
            rtol: 1e-12,
            atol: 1e-14,
            r0: 1e-4,
            r_min: 1e-4,
            r_max: None,
            n: 1000,
            eps: 1e-2,
            out: PathBuf::from("."),
            format: Format::Csv,
            sectors: vec![0, 1, 3],
            tags: vec![Tag::Plus, Tag::Minus],
            k: 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config file {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("{0}")]
    Invalid(String),
}

fn parse_tags(tags: &[String]) -> Result<Vec<Tag>, ConfigError> {
    tags.iter().map(|t| t.parse().map_err(ConfigError::Invalid)).collect()
}

pub fn load_file(path: &Path) -> Result<ConfigFile, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.display().to_string(),
        source,
    })
}

impl RunConfig {
    /// Merges flags over the config file over defaults and checks the
    /// numerical settings. Model parameters are validated separately.
    pub fn resolve(
        args: &CommonArgs,
        sectors: Option<Vec<usize>>,
        tags: Option<Vec<String>>,
        k: Option<usize>,
    ) -> Result<Self, ConfigError> {
        let file = match &args.config {
            Some(path) => load_file(path)?,
            None => ConfigFile::default(),
        };
        let d = RunConfig::default();
        let tags = match tags.or(file.tags) {
            Some(t) => parse_tags(&t)?,
            None => d.tags,
        };
        let cfg = RunConfig {
            p: args.p.or(file.p).unwrap_or(d.p),
            lambda: args.lambda.or(file.lambda).unwrap_or(d.lambda),
            alpha: args.alpha.or(file.alpha).unwrap_or(d.alpha),
            tol_y: args.tol_y.or(file.tol_y).unwrap_or(d.tol_y),
            rtol: args.rtol.or(file.rtol).unwrap_or(d.rtol),
            atol: args.atol.or(file.atol).unwrap_or(d.atol),
            r0: args.r0.or(file.r0).unwrap_or(d.r0),
            r_min: args.r_min.or(file.r_min).unwrap_or(d.r_min),
            r_max: args.r_max.or(file.r_max).or(d.r_max),
            n: args.n.or(file.n).unwrap_or(d.n),
            eps: args.eps.or(file.eps).unwrap_or(d.eps),
            out: args.out.clone().or(file.out).unwrap_or(d.out),
            format: args.format.or(file.format).unwrap_or(d.format),
            sectors: sectors.or(file.sectors).unwrap_or(d.sectors),
            tags,
            k: k.or(file.k).unwrap_or(d.k),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let positive = [
            ("tol_y", self.tol_y),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("r0", self.r0),
            ("r_min", self.r_min),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(r) = self.r_max {
            if !(r.is_finite() && r > 1.0) {
                return Err(ConfigError::Invalid(format!("r_max must exceed 1, got {r}")));
            }
        }
        if self.k == 0 {
            return Err(ConfigError::Invalid("k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<Params, pointground::Error> {
        Ok(validate(self.p, self.lambda, self.alpha)?)
    }

    pub fn shooting(&self) -> ShootingConfig {
        ShootingConfig {
            r0: self.r0,
            tol_y: self.tol_y,
            r_stop: self.r_max,
            tol: Tolerances::new(self.rtol, self.atol),
            ..ShootingConfig::default()
        }
    }
}
