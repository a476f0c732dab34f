use std::path::{Path, PathBuf};
use std::sync::Arc;

use levelset_core::evolve::{RunOptions, ThetaScheme};
use levelset_core::geometry::ExtinctionParams;
use levelset_core::oracles::{tent_u0, two_bump_u0};
use levelset_core::scheme::CflPolicy;
use levelset_core::{BetaKind, CorrectorSpec, Field, GhostPolicy, Grid, H1Spec, HVariant, Schedule};
use anyhow::Context;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A config that does not match the schema. `path` names the offending field.
#[derive(Debug, Error)]
#[error("invalid config at `{path}`: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

fn schema(path: &str, message: impl ToString) -> SchemaError {
    SchemaError {
        path: path.to_string(),
        message: message.to_string(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub name: String,
    pub experiment: Experiment,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub initial: Option<Initial>,
    #[serde(default = "unit_speed")]
    pub h1: H1Spec,
    #[serde(default)]
    pub corrector: CorrectorConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub cfl: CflPolicy,
    #[serde(default)]
    pub scheme: ThetaScheme,
    /// Fixed outer step; bypasses the CFL rule.
    #[serde(default)]
    pub fixed_dt: Option<f64>,
    #[serde(default)]
    pub reference: Option<Reference>,
    /// Errors are measured over `max_i |x_i| <= error_radius` when set.
    #[serde(default)]
    pub error_radius: Option<f64>,
}

fn unit_speed() -> H1Spec {
    H1Spec::constant(1.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Evolve {
        #[serde(default)]
        theta: f64,
    },
    ThetaSweep {
        thetas: Vec<f64>,
    },
    Reinit {
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_max_steps")]
        max_steps: usize,
        #[serde(default = "default_band")]
        band: f64,
    },
    Homogenize {
        #[serde(default = "one")]
        k1: u32,
        #[serde(default = "one")]
        k2: u32,
        eps: Vec<f64>,
    },
    Distance {
        #[serde(default)]
        theta: f64,
    },
    Continuity {
        /// Each entry is `[x, t]` or `[x, y, t]`.
        points: Vec<Vec<f64>>,
        #[serde(default)]
        eps_ball: Option<f64>,
        #[serde(default)]
        delta: Option<f64>,
        #[serde(default)]
        tie_tol: Option<f64>,
    },
    Cell {
        a: f64,
        b: f64,
        theta: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
}

fn default_tol() -> f64 {
    1e-6
}
fn default_max_steps() -> usize {
    100_000
}
fn default_band() -> f64 {
    0.5
}
fn one() -> u32 {
    1
}
fn default_samples() -> usize {
    200
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Evolve { .. } => "evolve",
            Experiment::ThetaSweep { .. } => "theta-sweep",
            Experiment::Reinit { .. } => "reinit",
            Experiment::Homogenize { .. } => "homogenize",
            Experiment::Distance { .. } => "distance",
            Experiment::Continuity { .. } => "continuity",
            Experiment::Cell { .. } => "cell",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: Vec<usize>,
    #[serde(default)]
    pub ghost: GhostPolicy,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Initial {
    /// `max{(1 - |x-2|)_+, (1 - |x+2|)_+}`.
    TwoBumps,
    /// `(1 - |x|)_+`.
    Tent,
    /// `slope . x`.
    Linear { slope: Vec<f64> },
    /// `scale (|x - center| - radius)`.
    Circle {
        #[serde(default)]
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "unit")]
        scale: f64,
    },
    /// `(1 - |x|^2) / 2`.
    Paraboloid,
    /// Node values in the snapshot CSV format, relative to the config file.
    File { path: PathBuf },
}

pub type InitialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

impl Initial {
    fn function(&self, dim: usize) -> Result<Option<InitialFn>, SchemaError> {
        let f: InitialFn = match self.clone() {
            Initial::TwoBumps => Arc::new(two_bump_u0),
            Initial::Tent => Arc::new(tent_u0),
            Initial::Linear { slope } => {
                if slope.len() != dim {
                    return Err(schema("initial.slope", format!("needs {dim} entries")));
                }
                Arc::new(move |x: &[f64]| slope.iter().zip(x).map(|(a, b)| a * b).sum())
            }
            Initial::Circle { center, radius, scale } => {
                let c = if center.is_empty() { vec![0.0; dim] } else { center };
                if c.len() != dim {
                    return Err(schema("initial.center", format!("needs {dim} entries")));
                }
                Arc::new(move |x: &[f64]| scale * (c.iter().zip(x).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt() - radius))
            }
            Initial::Paraboloid => Arc::new(|x: &[f64]| 0.5 * (1.0 - x.iter().map(|a| a * a).sum::<f64>())),
            Initial::File { .. } => return Ok(None),
        };
        Ok(Some(f))
    }
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectorConfig {
    /// Defaults to the grid spacing.
    #[serde(default)]
    pub eps0: Option<f64>,
    #[serde(default)]
    pub h_variant: HVariant,
    #[serde(default)]
    pub beta_kind: BetaKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    #[serde(default)]
    pub snap_every: usize,
    #[serde(default)]
    pub checkpoints: Vec<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            t_end: 1.0,
            snap_every: 0,
            checkpoints: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// Level-set solution of the two-bump data under unit speed.
    TwoBumpsW,
    /// Signed distance for the two-bump data under unit speed.
    TwoBumpsD,
    BoundedSpeedW,
    BoundedSpeedD,
    /// `max` of the initial datum over the ball of radius `t`; unit speed only.
    HopfLax,
}

pub fn parse(text: &str) -> Result<Config, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(&path, e.into_inner())
    })
}

/// Core objects built from a validated config.
pub struct Setup {
    pub grid: Grid,
    pub u0: Field,
    /// Closed form of the initial datum, absent for file data.
    pub u0_fn: Option<InitialFn>,
    pub corr: CorrectorSpec,
    pub opts: RunOptions,
}

impl Config {
    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(schema("name", "must be a non-empty plain file name"));
        }
        self.h1.validate().map_err(|e| schema("h1", e))?;
        self.cfl.validate().map_err(|e| schema("cfl", e))?;
        if !(self.time.t_end.is_finite() && self.time.t_end > 0.0) {
            return Err(schema("time.t_end", "must be positive"));
        }
        for (i, &c) in self.time.checkpoints.iter().enumerate() {
            if !(c > 0.0 && c < self.time.t_end) {
                return Err(schema(&format!("time.checkpoints[{i}]"), "must lie in (0, t_end)"));
            }
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(schema("fixed_dt", "must be positive"));
            }
        }
        if let Some(r) = self.error_radius {
            if !(r > 0.0) {
                return Err(schema("error_radius", "must be positive"));
            }
        }
        match &self.experiment {
            Experiment::Evolve { theta } | Experiment::Distance { theta } => check_theta("experiment.theta", *theta)?,
            Experiment::ThetaSweep { thetas } => {
                if thetas.is_empty() {
                    return Err(schema("experiment.thetas", "must not be empty"));
                }
                for (i, &t) in thetas.iter().enumerate() {
                    check_theta(&format!("experiment.thetas[{i}]"), t)?;
                }
            }
            Experiment::Reinit { tol, max_steps, band } => {
                if !(*tol > 0.0) {
                    return Err(schema("experiment.tol", "must be positive"));
                }
                if *max_steps == 0 {
                    return Err(schema("experiment.max_steps", "must be positive"));
                }
                if !(*band > 0.0) {
                    return Err(schema("experiment.band", "must be positive"));
                }
            }
            Experiment::Homogenize { k1, k2, eps } => {
                if eps.is_empty() {
                    return Err(schema("experiment.eps", "must not be empty"));
                }
                for (i, &e) in eps.iter().enumerate() {
                    Schedule::new(*k1, *k2, e / (k1 + k2) as f64).map_err(|m| schema(&format!("experiment.eps[{i}]"), m))?;
                }
            }
            Experiment::Continuity { points, .. } => {
                if points.is_empty() {
                    return Err(schema("experiment.points", "must not be empty"));
                }
            }
            Experiment::Cell { theta, samples, .. } => {
                if !(*theta > 0.0 && theta.is_finite()) {
                    return Err(schema("experiment.theta", "must be positive"));
                }
                if *samples < 2 {
                    return Err(schema("experiment.samples", "must be at least 2"));
                }
            }
        }
        if !matches!(self.experiment, Experiment::Cell { .. }) {
            if self.grid.is_none() {
                return Err(schema("grid", "required by this experiment"));
            }
            if self.initial.is_none() {
                return Err(schema("initial", "required by this experiment"));
            }
        }
        if self.reference == Some(Reference::HopfLax) && self.h1 != unit_speed() {
            return Err(schema("reference", "hopf-lax needs unit speed"));
        }
        Ok(())
    }

    /// Builds the grid, initial field, corrector and run options.
    pub fn setup(&self, base_dir: &Path) -> anyhow::Result<Setup> {
        let gc = self.grid.as_ref().ok_or_else(|| schema("grid", "required by this experiment"))?;
        if gc.lo.len() != gc.hi.len() || gc.lo.len() != gc.n.len() {
            return Err(schema("grid", "lo, hi and n must have the same length").into());
        }
        let grid = Grid::new(&gc.lo, &gc.hi, &gc.n).map_err(|e| schema("grid", e))?.with_ghost(gc.ghost);
        let dim = grid.dim();
        let initial = self.initial.as_ref().ok_or_else(|| schema("initial", "required by this experiment"))?;
        if matches!(initial, Initial::TwoBumps) && dim != 1 {
            return Err(schema("initial", "two-bumps is one-dimensional").into());
        }
        let u0_fn = initial.function(dim)?;
        let u0 = match (&u0_fn, initial) {
            (Some(f), _) => Field::sample(|x| f(&x[..dim]), &grid, 0.0),
            (None, Initial::File { path }) => {
                let full = base_dir.join(path);
                let file = std::fs::File::open(&full).with_context(|| format!("opening initial data {}", full.display()))?;
                Field::read_csv(std::io::BufReader::new(file), &grid)
            }
            (None, _) => unreachable!("only file data lacks a closed form"),
        }
        .map_err(|e| schema("initial", e))?;
        let c = &self.corrector;
        let corr = CorrectorSpec::new(c.eps0.unwrap_or(grid.min_dx()), c.h_variant, c.beta_kind).map_err(|e| schema("corrector.eps0", e))?;
        let mut opts = RunOptions::new(self.cfl, self.time.snap_every)
            .with_checkpoints(self.time.checkpoints.clone())
            .with_scheme(self.scheme);
        opts.fixed_dt = self.fixed_dt;
        Ok(Setup { grid, u0, u0_fn, corr, opts })
    }

    pub fn extinction(&self) -> ExtinctionParams {
        match &self.experiment {
            Experiment::Continuity { eps_ball, delta, tie_tol, .. } => ExtinctionParams {
                eps_ball: *eps_ball,
                delta: *delta,
                tie_tol: *tie_tol,
            },
            _ => ExtinctionParams::default(),
        }
    }
}

fn check_theta(path: &str, theta: f64) -> Result<(), SchemaError> {
    if theta.is_finite() && theta >= 0.0 {
        Ok(())
    } else {
        Err(schema(path, "must be finite and non-negative"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_field_reports_its_path() {
        let err = parse(r#"{"name":"a","experiment":{"type":"evolve"},"time":{"t_end":1,"bogus":2}}"#).unwrap_err();
        assert_eq!(err.path, "time.bogus");
        assert!(err.message.contains("bogus"), "{}", err.message);
    }

    #[test]
    fn wrong_type_reports_nested_path() {
        let err = parse(r#"{"name":"a","experiment":{"type":"evolve"},"grid":{"lo":[0],"hi":[1],"n":["x"]}}"#).unwrap_err();
        assert_eq!(err.path, "grid.n[0]");
    }

    #[test]
    fn validation_names_the_field() {
        let cfg = parse(r#"{"name":"a","experiment":{"type":"theta-sweep","thetas":[1,-2]},"grid":{"lo":[0],"hi":[1],"n":[11]},"initial":{"type":"tent"}}"#).unwrap();
        assert_eq!(cfg.validate().unwrap_err().path, "experiment.thetas[1]");
    }

    #[test]
    fn eps0_defaults_to_dx() {
        let cfg = parse(r#"{"name":"a","experiment":{"type":"evolve"},"grid":{"lo":[-1],"hi":[1],"n":[21]},"initial":{"type":"tent"}}"#).unwrap();
        cfg.validate().unwrap();
        let s = cfg.setup(Path::new(".")).unwrap();
        assert!((s.corr.eps0 - 0.1).abs() < 1e-15);
    }
}
