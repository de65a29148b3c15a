//! Flat `key = value` experiment configuration.
//!
//! Grammar: one `key = value` pair per line; `#` starts a comment that runs to
//! the end of the line; blank lines are ignored; keys may appear at most once.
//! Lists are comma separated.
//!
//! | key            | value                                                  |
//! |----------------|--------------------------------------------------------|
//! | `kind`         | `d2c_heat`, `bound_suite`, `resolvent_convergence`,    |
//! |                | `tlp_table`, `stacking_audit` or `p0_audit`            |
//! | `sizes`        | strictly increasing positive integers                  |
//! | `horizon`      | final time `T ≥ 0`                                     |
//! | `time_grid`    | number of sampled times, at least 1                    |
//! | `p`            | transport exponent, at least 1                         |
//! | `q`            | integrability exponent of the initial data, above `max(2, p)` |
//! | `tolerance`    | allowed negative slack and flow accuracy, positive     |
//! | `seed`         | 64-bit unsigned integer                                |
//! | `points`       | `equispaced` or `uniform` (seeded)                     |
//! | `output`       | path of the CSV file                                   |

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    D2cHeat,
    BoundSuite,
    ResolventConvergence,
    TlpTable,
    StackingAudit,
    P0Audit,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        Self::BoundSuite,
        Self::D2cHeat,
        Self::ResolventConvergence,
        Self::TlpTable,
        Self::StackingAudit,
        Self::P0Audit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::D2cHeat => "d2c_heat",
            Self::BoundSuite => "bound_suite",
            Self::ResolventConvergence => "resolvent_convergence",
            Self::TlpTable => "tlp_table",
            Self::StackingAudit => "stacking_audit",
            Self::P0Audit => "p0_audit",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown experiment kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointLayout {
    /// Midpoints `(i + ½)/n`.
    Equispaced,
    /// Sorted uniform samples drawn from the seed.
    SeededUniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub sizes: Vec<usize>,
    pub horizon: f64,
    pub time_grid: usize,
    pub p: f64,
    pub q: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub points: PointLayout,
    pub output: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = Self {
            kind,
            sizes: vec![8, 16, 32, 64],
            horizon: 0.25,
            time_grid: 11,
            p: 2.0,
            q: 4.0,
            tolerance: 1e-6,
            seed: DEFAULT_SEED,
            points: PointLayout::Equispaced,
            output: None,
        };
        match kind {
            ExperimentKind::D2cHeat => Self { tolerance: 1e-4, ..base },
            ExperimentKind::BoundSuite => Self { sizes: vec![4, 8, 16], horizon: 2.0, time_grid: 4, ..base },
            ExperimentKind::ResolventConvergence => Self { sizes: vec![8, 16, 32], horizon: 0.25, time_grid: 11, ..base },
            ExperimentKind::TlpTable => Self { sizes: vec![4, 8, 16, 32], tolerance: 1e-9, ..base },
            ExperimentKind::StackingAudit => Self { sizes: vec![8, 16, 32, 64], tolerance: 1e-9, ..base },
            ExperimentKind::P0Audit => Self { sizes: vec![3, 5, 8], tolerance: 1e-9, ..base },
        }
    }

    /// Parses a config file. `kind` supplies defaults when the file has no
    /// `kind` key and must agree with it otherwise.
    pub fn parse(text: &str, kind: Option<ExperimentKind>) -> Result<Self> {
        let mut pairs: Vec<(usize, String, String)> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::ConfigSyntax { line, message: "expected `key = value`".into() });
            };
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if key.is_empty() || value.is_empty() {
                return Err(CliError::ConfigSyntax { line, message: "empty key or value".into() });
            }
            if pairs.iter().any(|(_, k, _)| *k == key) {
                return Err(CliError::ConfigSyntax { line, message: format!("duplicate key `{key}`") });
            }
            pairs.push((line, key, value));
        }

        let file_kind = match pairs.iter().find(|(_, k, _)| k == "kind") {
            Some((_, _, v)) => Some(v.parse::<ExperimentKind>()?),
            None => None,
        };
        let kind = match (file_kind, kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::Config(format!("config is for `{a}` but the subcommand runs `{b}`")));
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(CliError::Config("missing `kind`".into())),
        };

        let mut cfg = Self::defaults(kind);
        for (line, key, value) in pairs {
            let bad = |what: &str| CliError::ConfigSyntax { line, message: format!("`{key}` expects {what}, got `{value}`") };
            match key.as_str() {
                "kind" => {}
                "sizes" => {
                    cfg.sizes = value
                        .split(',')
                        .map(|s| s.trim().parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("a comma-separated list of integers"))?;
                }
                "horizon" => cfg.horizon = value.parse().map_err(|_| bad("a real number"))?,
                "time_grid" => cfg.time_grid = value.parse().map_err(|_| bad("an integer"))?,
                "p" => cfg.p = value.parse().map_err(|_| bad("a real number"))?,
                "q" => cfg.q = value.parse().map_err(|_| bad("a real number"))?,
                "tolerance" => cfg.tolerance = value.parse().map_err(|_| bad("a real number"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("an unsigned 64-bit integer"))?,
                "points" => {
                    cfg.points = match value.as_str() {
                        "equispaced" => PointLayout::Equispaced,
                        "uniform" => PointLayout::SeededUniform,
                        _ => return Err(bad("`equispaced` or `uniform`")),
                    }
                }
                "output" => cfg.output = Some(PathBuf::from(value)),
                _ => return Err(CliError::ConfigSyntax { line, message: format!("unknown key `{key}`") }),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(CliError::Config(m));
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return err("sizes must be a nonempty list of positive integers".into());
        }
        if self.sizes.windows(2).any(|w| w[1] <= w[0]) {
            return err(format!("sizes must be strictly increasing, got {:?}", self.sizes));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return err(format!("horizon must be finite and nonnegative, got {}", self.horizon));
        }
        if self.time_grid == 0 {
            return err("time_grid must be at least 1".into());
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return err(format!("p must be finite and at least 1, got {}", self.p));
        }
        if !(self.q > self.p.max(2.0)) {
            return err(format!("q must exceed max(2, p), got {}", self.q));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return err(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if self.kind == ExperimentKind::D2cHeat && self.sizes[0] < 2 {
            return err("d2c_heat sizes must be at least 2".into());
        }
        Ok(())
    }

    /// `time_grid` equally spaced times from 0 to `horizon`; a single time
    /// means `horizon` alone.
    pub fn times(&self) -> Vec<f64> {
        if self.time_grid == 1 || self.horizon == 0.0 {
            return vec![self.horizon];
        }
        let m = (self.time_grid - 1) as f64;
        (0..self.time_grid).map(|k| self.horizon * k as f64 / m).collect()
    }
}
