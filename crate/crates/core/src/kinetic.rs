//! Direct simulation of the kinetic reaction-transport equation
//! `f_t + v . grad f = M rho - f + r rho (M - f)` in planar-wave form.
//!
//! The state stores `g_j(x) = w_j f(x, v_j)` for a velocity quadrature
//! `(v_j, w_j)` whose equilibrium masses `M_j = w_j M(v_j)` sum to one, so
//! `rho = sum_j g_j` and `g_j = M_j` is an exact steady state.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::velocity::{Direction, VelocityModel};

/// Levels tracked besides the main threshold, for the sensitivity report.
pub const SENSITIVITY_LEVELS: [f64; 3] = [0.1, 0.5, 0.9];

/// Discretised distribution on a uniform window `x0 + i dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    x0: f64,
    dx: f64,
    n_x: usize,
    velocities: Vec<f64>,
    masses: Vec<f64>,
    // M(v_j) in density units, used to report f itself.
    node_density: Vec<f64>,
    // g[j * n_x + i]
    g: Vec<f64>,
    scratch: Vec<f64>,
    rho: Vec<f64>,
    r: f64,
    time: f64,
    clamp_count: u64,
    clamp_max: f64,
}

impl KineticState {
    /// Builds a state on `n_x` cells starting at `x0` with
    /// `f(x, v) = fraction(x) M(v)`, where `fraction` takes values in `[0, 1]`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: &VelocityModel,
        e: &Direction,
        r: f64,
        x0: f64,
        dx: f64,
        n_x: usize,
        nodes_per_segment: usize,
        fraction: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "growth rate r must be positive, got {r}"
            )));
        }
        if !(dx > 0.0 && dx.is_finite()) || n_x < 2 {
            return Err(Error::InvalidParameter(format!(
                "need dx > 0 and at least two cells, got dx = {dx}, n_x = {n_x}"
            )));
        }
        let nodes = model.velocity_nodes(e, nodes_per_segment)?;
        let velocities: Vec<f64> = nodes.iter().map(|n| n.0).collect();
        let masses: Vec<f64> = nodes.iter().map(|n| n.1).collect();
        let node_density = if model.atoms().is_some() {
            masses.clone()
        } else {
            velocities
                .iter()
                .map(|&s| model.projected_density(e, s))
                .collect()
        };
        let mut g = vec![0.0; velocities.len() * n_x];
        for i in 0..n_x {
            let phi = fraction(x0 + i as f64 * dx);
            if !(0.0..=1.0).contains(&phi) {
                return Err(Error::InvalidParameter(format!(
                    "initial fraction must lie in [0, 1], got {phi}"
                )));
            }
            for (j, m) in masses.iter().enumerate() {
                g[j * n_x + i] = phi * m;
            }
        }
        let mut state = KineticState {
            x0,
            dx,
            n_x,
            velocities,
            masses,
            node_density,
            scratch: vec![0.0; g.len()],
            g,
            rho: vec![0.0; n_x],
            r,
            time: 0.0,
            clamp_count: 0,
            clamp_max: 0.0,
        };
        state.update_rho();
        Ok(state)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.n_x
    }

    pub fn is_empty(&self) -> bool {
        self.n_x == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    /// Equilibrium masses `M_j`, summing to one.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// `g_j(x_i) = w_j f(x_i, v_j)`.
    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.g[j * self.n_x + i]
    }

    /// `f(x_i, v_j)` in the units of `M` (atom weights for discrete models).
    pub fn f(&self, i: usize, j: usize) -> f64 {
        self.mass(i, j) / self.masses[j] * self.node_density[j]
    }

    /// Number of values clamped back into `[0, M_j]` so far.
    pub fn clamp_count(&self) -> u64 {
        self.clamp_count
    }

    /// Largest amount clamped so far.
    pub fn clamp_max(&self) -> f64 {
        self.clamp_max
    }

    pub fn v_max(&self) -> f64 {
        self.velocities.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Largest stable step for a given CFL number.
    pub fn max_dt(&self, cfl: f64) -> f64 {
        cfl * self.dx / self.v_max()
    }

    fn update_rho(&mut self) {
        let n = self.n_x;
        self.rho.iter_mut().for_each(|x| *x = 0.0);
        for row in self.g.chunks_exact(n) {
            for (r, g) in self.rho.iter_mut().zip(row) {
                *r += g;
            }
        }
    }

    /// One Strang-split step: half transport, reaction, half transport.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let max_dt = self.max_dt(1.0);
        if dt.is_nan() || dt <= 0.0 || dt > max_dt {
            return Err(Error::CflViolation { dt, max_dt });
        }
        self.transport(0.5 * dt);
        self.react(dt);
        self.transport(0.5 * dt);
        self.clamp();
        self.update_rho();
        self.time += dt;
        Ok(())
    }

    /// First-order upwind with inflow `f = M` on the left and `f = 0` on the
    /// right.
    fn transport(&mut self, dt: f64) {
        let n = self.n_x;
        for (j, row) in self.g.chunks_exact_mut(n).enumerate() {
            let s = self.velocities[j];
            let nu = s.abs() * dt / self.dx;
            if nu == 0.0 {
                continue;
            }
            if s > 0.0 {
                for i in (1..n).rev() {
                    row[i] -= nu * (row[i] - row[i - 1]);
                }
                row[0] -= nu * (row[0] - self.masses[j]);
            } else {
                for i in 0..n - 1 {
                    row[i] -= nu * (row[i] - row[i + 1]);
                }
                row[n - 1] -= nu * row[n - 1];
            }
        }
    }

    /// Heun's method for `g' = (1 + r) M rho - (1 + r rho) g`, with `rho`
    /// frozen at each stage.
    fn react(&mut self, dt: f64) {
        let n = self.n_x;
        let r = self.r;
        self.update_rho();
        for (j, (row, tmp)) in self
            .g
            .chunks_exact(n)
            .zip(self.scratch.chunks_exact_mut(n))
            .enumerate()
        {
            let m = self.masses[j];
            for ((t, &g), &rho) in tmp.iter_mut().zip(row).zip(&self.rho) {
                *t = g + dt * ((1.0 + r) * m * rho - (1.0 + r * rho) * g);
            }
        }
        // rho at the predictor
        let mut rho1 = vec![0.0; n];
        for tmp in self.scratch.chunks_exact(n) {
            for (a, b) in rho1.iter_mut().zip(tmp) {
                *a += b;
            }
        }
        for (j, (row, tmp)) in self
            .g
            .chunks_exact_mut(n)
            .zip(self.scratch.chunks_exact(n))
            .enumerate()
        {
            let m = self.masses[j];
            for ((g, &g1), &rho) in row.iter_mut().zip(tmp).zip(&rho1) {
                let k2 = (1.0 + r) * m * rho - (1.0 + r * rho) * g1;
                *g = 0.5 * (*g + g1 + dt * k2);
            }
        }
    }

    fn clamp(&mut self) {
        let n = self.n_x;
        for (j, row) in self.g.chunks_exact_mut(n).enumerate() {
            let m = self.masses[j];
            for g in row.iter_mut() {
                let excess = if *g < 0.0 {
                    -*g
                } else if *g > m {
                    *g - m
                } else {
                    continue;
                };
                self.clamp_count += 1;
                self.clamp_max = self.clamp_max.max(excess);
                *g = g.clamp(0.0, m);
            }
        }
    }

    /// Moves the window `k` cells to the right, filling new cells with zero.
    pub fn shift(&mut self, k: usize) {
        let n = self.n_x;
        let k = k.min(n);
        for row in self.g.chunks_exact_mut(n) {
            row.copy_within(k.., 0);
            row[n - k..].iter_mut().for_each(|g| *g = 0.0);
        }
        self.x0 += k as f64 * self.dx;
        self.update_rho();
    }

    /// Leftmost position where `rho` drops below `level`, linearly
    /// interpolated. `None` when `rho` never drops below the level or is
    /// already below it at the left edge.
    pub fn front_position(&self, level: f64) -> Option<f64> {
        let i = self.rho.iter().position(|&r| r < level)?;
        if i == 0 {
            return None;
        }
        let (a, b) = (self.rho[i - 1], self.rho[i]);
        let frac = (a - level) / (a - b);
        Some(self.x(i - 1) + frac * self.dx)
    }

    /// Deviation from equilibrium at `x_probe`, linearly interpolated.
    pub fn behind_front_profile(&self, x_probe: f64) -> Result<BehindFront> {
        let u = (x_probe - self.x0) / self.dx;
        if !(u >= 0.0 && u <= (self.n_x - 1) as f64) {
            return Err(Error::Domain(format!(
                "probe {x_probe} outside the window [{}, {}]",
                self.x0,
                self.x(self.n_x - 1)
            )));
        }
        let i = (u.floor() as usize).min(self.n_x - 2);
        let w = u - i as f64;
        let lerp = |a: f64, b: f64| (1.0 - w) * a + w * b;
        let f_deviation = (0..self.velocities.len())
            .map(|j| (lerp(self.f(i, j), self.f(i + 1, j)) - self.node_density[j]).abs())
            .fold(0.0, f64::max);
        let rho = lerp(self.rho[i], self.rho[i + 1]);
        Ok(BehindFront {
            x: x_probe,
            f_deviation,
            rho_deviation: (rho - 1.0).abs(),
        })
    }
}

/// Distance to equilibrium at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehindFront {
    pub x: f64,
    /// `max_j |f(x, v_j) - M(v_j)|`
    pub f_deviation: f64,
    /// `|rho(x) - 1|`
    pub rho_deviation: f64,
}

/// Parameters of a front experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Propagation direction; the velocity set is projected onto it.
    pub direction: Option<Direction>,
    pub dx: f64,
    /// Width of the moving window.
    pub length: f64,
    pub t_end: f64,
    pub cfl: f64,
    /// Level of `rho` defining the front.
    pub level: f64,
    /// Fraction of the run, counted from the end, used for the speed fit.
    pub fit_fraction: f64,
    /// Initial data `gamma M 1_{x <= 0}`.
    pub gamma: f64,
    /// Gauss-Legendre velocity nodes per segment of the projected support.
    pub nodes_per_segment: usize,
    /// Time between recorded front positions.
    pub sample_interval: f64,
    /// Where the front is kept inside the window, as a fraction of `length`.
    /// The leading edge needs far more room than the saturated region behind.
    pub front_anchor: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            direction: None,
            dx: 0.005,
            length: 50.0,
            t_end: 120.0,
            cfl: 0.9,
            level: 0.5,
            fit_fraction: 0.5,
            gamma: 1.0,
            nodes_per_segment: 16,
            sample_interval: 0.1,
            front_anchor: 0.2,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad =
            |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} out of range: {v}")));
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return bad("dx", self.dx);
        }
        if !(self.length > 10.0 * self.dx && self.length.is_finite()) {
            return bad("length", self.length);
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end", self.t_end);
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl", self.cfl);
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad("level", self.level);
        }
        if !(self.fit_fraction > 0.0 && self.fit_fraction <= 1.0) {
            return bad("fit_fraction", self.fit_fraction);
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", self.gamma);
        }
        if self.nodes_per_segment == 0 {
            return bad("nodes_per_segment", 0.0);
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return bad("sample_interval", self.sample_interval);
        }
        if !(self.front_anchor > 0.0 && self.front_anchor < 1.0) {
            return bad("front_anchor", self.front_anchor);
        }
        Ok(())
    }
}

/// Tracked front positions and the fitted speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontTrace {
    pub level: f64,
    pub times: Vec<f64>,
    pub front_positions: Vec<f64>,
    pub fitted_speed: f64,
    pub fit_window: (f64, f64),
    /// Largest absolute deviation from the fitted line inside the window.
    pub residual: f64,
}

impl FrontTrace {
    fn fit(level: f64, times: Vec<f64>, front_positions: Vec<f64>, t_start: f64) -> Result<Self> {
        let pts: Vec<(f64, f64)> = times
            .iter()
            .zip(&front_positions)
            .filter(|(t, _)| **t >= t_start)
            .map(|(t, x)| (*t, *x))
            .collect();
        if pts.len() < 2 {
            return Err(Error::InvalidParameter(
                "fit window holds fewer than two samples".into(),
            ));
        }
        let (slope, intercept) = least_squares(&pts);
        let residual = pts
            .iter()
            .map(|(t, x)| (x - (intercept + slope * t)).abs())
            .fold(0.0, f64::max);
        let fit_window = (pts[0].0, pts[pts.len() - 1].0);
        Ok(FrontTrace {
            level,
            times,
            front_positions,
            fitted_speed: slope,
            fit_window,
            residual,
        })
    }
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mx = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mx)).sum();
    let slope = stx / stt;
    (slope, mx - slope * mt)
}

/// Result of [`run_front_experiment`].
#[derive(Debug, Clone)]
pub struct FrontExperiment {
    pub trace: FrontTrace,
    /// Fitted speeds for each of [`SENSITIVITY_LEVELS`].
    pub threshold_sensitivity: Vec<(f64, f64)>,
    pub state: KineticState,
    pub steps: usize,
}

/// Evolves `f_0 = gamma M 1_{x <= 0}` and fits the speed of the level set
/// `rho = level` over the last part of the run.
pub fn run_front_experiment(
    model: &VelocityModel,
    r: f64,
    config: &SimConfig,
) -> Result<FrontExperiment> {
    config.validate()?;
    let e = match &config.direction {
        Some(d) => d.clone(),
        None => Direction::axis(model.dim(), 0),
    };
    let n_x = (config.length / config.dx).round() as usize;
    let anchor = config.front_anchor * config.length;
    let gamma = config.gamma;
    let mut state = KineticState::new(
        model,
        &e,
        r,
        -anchor,
        config.dx,
        n_x,
        config.nodes_per_segment,
        |x| if x <= 0.0 { gamma } else { 0.0 },
    )?;
    let n_steps = (config.t_end / state.max_dt(config.cfl)).ceil() as usize;
    let dt = config.t_end / n_steps as f64;
    let sample_every = ((config.sample_interval / dt).round() as usize).max(1);

    let mut levels: Vec<f64> = SENSITIVITY_LEVELS.to_vec();
    if !levels.contains(&config.level) {
        levels.push(config.level);
    }
    let mut times = Vec::new();
    let mut fronts: Vec<Vec<f64>> = vec![Vec::new(); levels.len()];
    for step in 1..=n_steps {
        state.step(dt)?;
        if step % sample_every != 0 && step != n_steps {
            continue;
        }
        let mut here = Vec::with_capacity(levels.len());
        for &lv in &levels {
            match state.front_position(lv) {
                Some(x) if x < state.x(n_x - 2) => here.push(x),
                _ => return Err(Error::FrontLeftDomain { time: state.time() }),
            }
        }
        times.push(state.time());
        for (f, x) in fronts.iter_mut().zip(&here) {
            f.push(*x);
        }
        let main = here[levels
            .iter()
            .position(|&l| l == config.level)
            .expect("tracked")];
        let lag = main - state.x(0) - anchor;
        if lag > 1.0 {
            state.shift((lag / config.dx).floor() as usize);
        }
    }
    let t_start = config.t_end * (1.0 - config.fit_fraction);
    let mut threshold_sensitivity = Vec::new();
    let mut main_trace = None;
    for (lv, xs) in levels.iter().zip(fronts) {
        let trace = FrontTrace::fit(*lv, times.clone(), xs, t_start)?;
        if SENSITIVITY_LEVELS.contains(lv) {
            threshold_sensitivity.push((*lv, trace.fitted_speed));
        }
        if *lv == config.level {
            main_trace = Some(trace);
        }
    }
    Ok(FrontExperiment {
        trace: main_trace.expect("main level tracked"),
        threshold_sensitivity,
        state,
        steps: n_steps,
    })
}

/// Writes `t,front_x` rows.
pub fn write_trace_csv(trace: &FrontTrace, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "t,front_x")?;
    for (t, x) in trace.times.iter().zip(&trace.front_positions) {
        writeln!(out, "{t:.16e},{x:.16e}")?;
    }
    Ok(())
}

/// Writes `x,rho` followed by one `f` column per velocity node, headed
/// `f@<velocity>`.
pub fn write_snapshot_csv(state: &KineticState, mut out: impl Write) -> io::Result<()> {
    write!(out, "x,rho")?;
    for v in state.velocities() {
        write!(out, ",f@{v:.16e}")?;
    }
    writeln!(out)?;
    for i in 0..state.len() {
        write!(out, "{:.16e},{:.16e}", state.x(i), state.rho()[i])?;
        for j in 0..state.velocities().len() {
            write!(out, ",{:.16e}", state.f(i, j))?;
        }
        writeln!(out)?;
    }
    Ok(())
}
