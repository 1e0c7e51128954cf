//! `kinspread` command-line tool.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use kinspread::propagation::fibonacci_sphere;
use kinspread::{Direction, SimConfig, VelocityModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use config::{parse_vector, CommandConfig, Grid, ModelSource, RunConfig};
use error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(
    name = "kinspread",
    version,
    about = "Spreading speeds of kinetic reaction-transport equations"
)]
struct Cli {
    /// Preset model: uniform-1d, quadratic-1d, two-speed, cross-2d or
    /// uniform-ball:<n>.
    #[arg(long, global = true, conflicts_with = "model_file")]
    model: Option<String>,

    /// TOML file describing a custom model.
    #[arg(long, global = true)]
    model_file: Option<PathBuf>,

    /// Growth rate.
    #[arg(long, global = true, default_value_t = 1.0, allow_hyphen_values = true)]
    r: f64,

    /// Output directory. Without it, results go to standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Quadrature refinement level (Gauss-Legendre panels of 10 * level nodes).
    #[arg(long, global = true)]
    quad_level: Option<u32>,

    /// Worker threads for commands that evaluate independent cells.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone)]
struct Vector(Vec<f64>);

impl FromStr for Vector {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_vector(s).map(Vector)
    }
}

#[derive(Args, Debug)]
struct DirectionArgs {
    /// Direction as comma-separated components; normalised.
    #[arg(long, allow_hyphen_values = true)]
    direction: Option<Vector>,

    /// Direction angle in radians (two-dimensional models).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "direction")]
    angle: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate H(p) with the regular flag and Dirac weight.
    Hamiltonian {
        /// A point p, comma-separated. Repeatable.
        #[arg(long = "p", allow_hyphen_values = true)]
        p: Vec<Vector>,
        /// Grid start:stop:n of |p| along the chosen direction.
        #[arg(long, allow_hyphen_values = true)]
        p_grid: Option<Grid>,
        #[command(flatten)]
        dir: DirectionArgs,
    },
    /// Boundary of the singular set, or membership of given points.
    Sing {
        #[arg(long = "p", allow_hyphen_values = true)]
        p: Vec<Vector>,
        /// Number of sampled directions.
        #[arg(long, default_value_t = 8)]
        directions: usize,
    },
    /// Speed curve lambda -> c(lambda, e) with its minimum and case label.
    SpeedCurve {
        #[command(flatten)]
        dir: DirectionArgs,
        /// Explicit grid start:stop:n of lambda values.
        #[arg(long)]
        lambda_grid: Option<Grid>,
    },
    /// Minimal speeds c*, w* and Hopf-Lax null-set radii.
    Spreading {
        #[command(flatten)]
        dir: DirectionArgs,
        /// Number of evenly spread directions, used when none is given.
        #[arg(long)]
        directions: Option<usize>,
        /// Times at which null-set radii are reported, comma-separated.
        #[arg(long, default_value = "1")]
        times: Vector,
    },
    /// Run the kinetic equation from step data and fit the front speed.
    Simulate(SimulateArgs),
    /// Minimal speeds over models, growth rates and directions.
    Sweep {
        /// Preset names, comma-separated. Defaults to the global model.
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        /// Growth rates start:stop:n.
        #[arg(long)]
        r_grid: Option<Grid>,
        /// Draw this many growth rates uniformly from (0, r-max].
        #[arg(long, conflicts_with = "r_grid")]
        random_r: Option<usize>,
        #[arg(long, default_value_t = 3.0)]
        r_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directions per multi-dimensional model.
        #[arg(long, default_value_t = 8)]
        angles: usize,
    },
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    dir: DirectionArgs,
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    /// Level of rho that defines the front.
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    fit_fraction: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Velocity nodes per segment of the projected support.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    sample_interval: Option<f64>,
    #[arg(long)]
    front_anchor: Option<f64>,
}

fn direction(model: &VelocityModel, args: &DirectionArgs) -> CliResult<Direction> {
    let dim = model.dim();
    let e = match (&args.direction, args.angle) {
        (Some(v), _) => Direction::normalize(&v.0)?,
        (None, Some(a)) => {
            if dim != 2 {
                return Err(CliError::Config(
                    "--angle needs a two-dimensional model".into(),
                ));
            }
            Direction::from_angle(a)
        }
        (None, None) => Direction::axis(dim, 0),
    };
    if e.dim() != dim {
        return Err(kinspread::Error::DimensionMismatch {
            expected: dim,
            found: e.dim(),
        }
        .into());
    }
    Ok(e)
}

/// `n` directions spread over the sphere of the model's dimension.
pub fn spread_directions(dim: usize, n: usize) -> Vec<Direction> {
    match dim {
        1 if n <= 1 => vec![Direction::axis(1, 0)],
        1 => vec![Direction::axis(1, 0), -&Direction::axis(1, 0)],
        2 => (0..n)
            .map(|k| Direction::from_angle(std::f64::consts::TAU * k as f64 / n as f64))
            .collect(),
        _ => fibonacci_sphere(n),
    }
}

fn points(model: &VelocityModel, p: &[Vector]) -> CliResult<Vec<Vec<f64>>> {
    p.iter()
        .map(|v| {
            if v.0.len() != model.dim() {
                return Err(kinspread::Error::DimensionMismatch {
                    expected: model.dim(),
                    found: v.0.len(),
                }
                .into());
            }
            Ok(v.0.clone())
        })
        .collect()
}

fn build_config(cli: Cli) -> CliResult<RunConfig> {
    let model = match (&cli.model, &cli.model_file) {
        (_, Some(path)) => ModelSource::from_file(path)?,
        (Some(name), None) => ModelSource::Preset(name.clone()),
        (None, None) => ModelSource::Preset("uniform-1d".into()),
    };
    let mut run = RunConfig {
        model,
        r: cli.r,
        quad_level: cli.quad_level,
        out: cli.out,
        command: CommandConfig::Sing {
            points: Vec::new(),
            directions: Vec::new(),
        },
    };
    run.validate()?;
    let m = run.model.build(run.quad_options())?;
    run.command = match cli.command {
        Command::Hamiltonian { p, p_grid, dir } => CommandConfig::Hamiltonian {
            points: points(&m, &p)?,
            grid: p_grid,
            direction: direction(&m, &dir)?,
        },
        Command::Sing { p, directions } => CommandConfig::Sing {
            points: points(&m, &p)?,
            directions: if p.is_empty() {
                spread_directions(m.dim(), directions)
            } else {
                Vec::new()
            },
        },
        Command::SpeedCurve { dir, lambda_grid } => CommandConfig::SpeedCurve {
            direction: direction(&m, &dir)?,
            lambda_grid,
        },
        Command::Spreading {
            dir,
            directions,
            times,
        } => CommandConfig::Spreading {
            directions: match directions {
                Some(n) if dir.direction.is_none() && dir.angle.is_none() => {
                    spread_directions(m.dim(), n)
                }
                _ => vec![direction(&m, &dir)?],
            },
            times: times.0,
        },
        Command::Simulate(a) => {
            let mut sim = SimConfig {
                direction: Some(direction(&m, &a.dir)?),
                ..SimConfig::default()
            };
            let set = |dst: &mut f64, src: Option<f64>| {
                if let Some(v) = src {
                    *dst = v;
                }
            };
            set(&mut sim.dx, a.dx);
            set(&mut sim.length, a.length);
            set(&mut sim.t_end, a.t_end);
            set(&mut sim.cfl, a.cfl);
            set(&mut sim.level, a.level);
            set(&mut sim.fit_fraction, a.fit_fraction);
            set(&mut sim.gamma, a.gamma);
            set(&mut sim.sample_interval, a.sample_interval);
            set(&mut sim.front_anchor, a.front_anchor);
            if let Some(n) = a.nodes {
                sim.nodes_per_segment = n;
            }
            CommandConfig::Simulate { sim }
        }
        Command::Sweep {
            models,
            r_grid,
            random_r,
            r_max,
            seed,
            angles,
        } => {
            let (r_values, seed) = match (r_grid, random_r) {
                (Some(g), _) => (g.values(), None),
                (None, Some(n)) => {
                    if !(r_max > 0.0 && r_max.is_finite()) {
                        return Err(CliError::Config(format!(
                            "r-max must be positive, got {r_max}"
                        )));
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let rs = (0..n)
                        .map(|_| r_max * (1.0 - rng.random::<f64>()))
                        .collect();
                    (rs, Some(seed))
                }
                (None, None) => (vec![run.r], None),
            };
            CommandConfig::Sweep {
                models,
                r_values,
                seed,
                angles,
            }
        }
    };
    run.validate()?;
    Ok(run)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match build_config(cli).and_then(|run| commands::run(&run)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
