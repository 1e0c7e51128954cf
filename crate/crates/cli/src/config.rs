use std::path::{Path, PathBuf};
use std::str::FromStr;

use kinspread::{Direction, ModelSpec, QuadOptions, SimConfig, VelocityModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Inclusive uniform grid written `start:stop:n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.start];
        }
        let span = self.stop - self.start;
        let last = (self.n - 1) as f64;
        (0..self.n)
            .map(|i| self.start + span * i as f64 / last)
            .collect()
    }

    fn validate(&self, what: &str) -> CliResult<()> {
        if self.n == 0 || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(CliError::Config(format!(
                "{what}: need finite bounds and n >= 1"
            )));
        }
        Ok(())
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(format!("expected start:stop:n, got {s:?}"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        Ok(Grid {
            start: num(a)?,
            stop: num(b)?,
            n: n.trim().parse().map_err(|e| format!("{n:?}: {e}"))?,
        })
    }
}

/// Parses `a,b,c` into a vector.
pub fn parse_vector(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    Preset(String),
    /// The parsed file is kept alongside its path so a summary reproduces
    /// the run even if the file changes.
    File {
        path: PathBuf,
        spec: ModelSpec,
    },
}

impl ModelSource {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let spec: ModelSpec = toml::from_str(&text).map_err(|source| CliError::ModelFile {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(ModelSource::File {
            path: path.to_path_buf(),
            spec,
        })
    }

    pub fn label(&self) -> String {
        match self {
            ModelSource::Preset(name) => name.clone(),
            ModelSource::File { path, .. } => path.display().to_string(),
        }
    }

    pub fn build(&self, opts: QuadOptions) -> CliResult<VelocityModel> {
        Ok(match self {
            ModelSource::Preset(name) => VelocityModel::preset(name, opts)?,
            ModelSource::File { spec, .. } => spec.build(opts)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CommandConfig {
    Hamiltonian {
        points: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<Grid>,
        direction: Direction,
    },
    Sing {
        points: Vec<Vec<f64>>,
        directions: Vec<Direction>,
    },
    SpeedCurve {
        direction: Direction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda_grid: Option<Grid>,
    },
    Spreading {
        directions: Vec<Direction>,
        times: Vec<f64>,
    },
    Simulate {
        sim: SimConfig,
    },
    Sweep {
        models: Vec<String>,
        r_values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        angles: usize,
    },
}

/// Everything needed to repeat a run; embedded in every JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSource,
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_level: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub command: CommandConfig,
}

fn positive(what: &str, x: f64) -> CliResult<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{what} must be positive and finite, got {x}"
        )))
    }
}

impl RunConfig {
    pub fn quad_options(&self) -> QuadOptions {
        let mut opts = QuadOptions::default();
        if let Some(level) = self.quad_level {
            opts.level = level;
        }
        opts
    }

    /// Checks everything that does not need the model.
    pub fn validate(&self) -> CliResult<()> {
        positive("r", self.r)?;
        if self.quad_level == Some(0) {
            return Err(CliError::Config("quad-level must be at least 1".into()));
        }
        match &self.command {
            CommandConfig::Hamiltonian { points, grid, .. } => {
                if let Some(g) = grid {
                    g.validate("p-grid")?;
                }
                if points.is_empty() && grid.is_none() {
                    return Err(CliError::Config("give --p or --p-grid".into()));
                }
            }
            CommandConfig::Sing { .. } => {}
            CommandConfig::SpeedCurve { lambda_grid, .. } => {
                if let Some(g) = lambda_grid {
                    g.validate("lambda-grid")?;
                    positive("lambda-grid start", g.start)?;
                    positive("lambda-grid stop", g.stop)?;
                }
            }
            CommandConfig::Spreading { directions, times } => {
                if directions.is_empty() || times.is_empty() {
                    return Err(CliError::Config(
                        "need at least one direction and one time".into(),
                    ));
                }
                for &t in times {
                    positive("time", t)?;
                }
            }
            CommandConfig::Simulate { sim } => sim.validate()?,
            CommandConfig::Sweep {
                r_values, angles, ..
            } => {
                if r_values.is_empty() || *angles == 0 {
                    return Err(CliError::Config(
                        "sweep needs r values and at least one angle".into(),
                    ));
                }
                for &r in r_values {
                    positive("r", r)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parses_and_includes_both_ends() {
        let g: Grid = "-3:3:61".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 61);
        assert_eq!((v[0], v[30], v[60]), (-3.0, 0.0, 3.0));
        assert!("1:2".parse::<Grid>().is_err());
        assert_eq!(parse_vector("0.6, 0").unwrap(), vec![0.6, 0.0]);
    }

    #[test]
    fn run_config_round_trips_through_json() {
        let cfg = RunConfig {
            model: ModelSource::Preset("quadratic-1d".into()),
            r: 1.0,
            quad_level: Some(3),
            out: None,
            command: CommandConfig::Simulate {
                sim: SimConfig::default(),
            },
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        back.validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut cfg = RunConfig {
            model: ModelSource::Preset("uniform-1d".into()),
            r: -1.0,
            quad_level: None,
            out: None,
            command: CommandConfig::Spreading {
                directions: vec![Direction::axis(1, 0)],
                times: vec![1.0],
            },
        };
        assert!(cfg.validate().is_err());
        cfg.r = 1.0;
        cfg.validate().unwrap();
        cfg.command = CommandConfig::Spreading {
            directions: vec![Direction::axis(1, 0)],
            times: vec![0.0],
        };
        assert!(cfg.validate().is_err());
    }
}
