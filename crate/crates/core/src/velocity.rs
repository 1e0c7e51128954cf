//! Velocity sets, equilibrium densities and integrals over them.
//!
//! Every quantity in the dispersion relation depends on the velocity `v`
//! only through `s = v . e` for a direction `e`. A [`VelocityModel`]
//! therefore carries, next to the full n-dimensional quadrature used by
//! [`VelocityModel::integrate`], the pushforward of `M` onto the line
//! spanned by `e` (a [`Projection`]). For intervals and radially symmetric
//! balls these projections are built once at construction.

use std::borrow::Cow;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, refine, GradedMeasure, QuadOptions, Rule};

const UNIT_TOL: f64 = 1e-12;
const VALIDATION_TOL: f64 = 1e-8;

/// A unit vector of `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Wraps `components`, which must already have unit norm.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        let norm = norm(&components);
        if components.is_empty() || (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnitVector { norm });
        }
        Ok(Direction(components))
    }

    /// Normalises a non-zero vector.
    pub fn normalize(v: &[f64]) -> Result<Self> {
        let n = norm(v);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::NotUnitVector { norm: n });
        }
        Ok(Direction(v.iter().map(|x| x / n).collect()))
    }

    /// The `i`-th canonical basis vector of `R^dim`.
    pub fn axis(dim: usize, i: usize) -> Self {
        let mut c = vec![0.0; dim];
        c[i] = 1.0;
        Direction(c)
    }

    /// `(cos theta, sin theta)`.
    pub fn from_angle(theta: f64) -> Self {
        Direction(vec![theta.cos(), theta.sin()])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        dot(&self.0, v)
    }

    pub fn scaled(&self, t: f64) -> Vec<f64> {
        self.0.iter().map(|x| t * x).collect()
    }
}

impl std::ops::Neg for &Direction {
    type Output = Direction;
    fn neg(self) -> Direction {
        Direction(self.0.iter().map(|x| -x).collect())
    }
}

impl TryFrom<Vec<f64>> for Direction {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Direction::new(v)
    }
}

impl From<Direction> for Vec<f64> {
    fn from(d: Direction) -> Vec<f64> {
        d.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Geometry of the velocity set `V`.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    /// `[lower, upper]`, one-dimensional.
    Interval { lower: f64, upper: f64 },
    /// Closed ball of the given radius centred at the origin.
    Ball { radius: f64 },
    /// Finitely many velocities; `weights` is the equilibrium distribution.
    Discrete {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
}

/// Radial profile of the equilibrium density, `M(v) = A phi(|v| / R)`
/// where `R` is the largest speed in the support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DensityShape {
    Uniform,
    /// `(1 - t)^exponent`
    Power {
        exponent: f64,
    },
    /// `1 + cos(pi t)`
    Cosine,
}

impl DensityShape {
    pub fn profile(&self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        self.profile_edge(1.0 - t)
    }

    /// The profile at `t = 1 - c`, accurate for small `c`.
    pub fn profile_edge(&self, c: f64) -> f64 {
        if !(0.0..=1.0).contains(&c) {
            return 0.0;
        }
        match *self {
            DensityShape::Uniform => 1.0,
            DensityShape::Power { exponent } => c.powf(exponent),
            DensityShape::Cosine => 2.0 * (0.5 * PI * c).sin().powi(2),
        }
    }
}

/// Pushforward of `M` by `v -> v . e`.
#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    /// `(s, weight)` pairs sorted by `s`, duplicates merged.
    Atoms {
        atoms: Vec<(f64, f64)>,
        top: f64,
    },
    Continuous(GradedMeasure),
}

impl Projection {
    /// `v_bar(e)`, the largest value of `v . e` over `V`.
    pub fn top(&self) -> f64 {
        match self {
            Projection::Atoms { top, .. } => *top,
            Projection::Continuous(m) => m.top(),
        }
    }

    /// Probability mass sitting exactly at `top`.
    pub fn mass_at_top(&self) -> f64 {
        match self {
            Projection::Atoms { atoms, top } => atoms
                .iter()
                .filter(|(s, _)| (s - top).abs() <= UNIT_TOL * top.abs().max(1.0))
                .map(|(_, w)| w)
                .sum(),
            Projection::Continuous(_) => 0.0,
        }
    }

    /// `int f(s, top - s) m(ds)` for `f` finite on the support.
    pub fn integrate_regular(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        match self {
            Projection::Atoms { atoms, top } => atoms
                .iter()
                .filter(|(_, w)| *w > 0.0)
                .map(|&(s, w)| w * f(s, top - s))
                .sum(),
            Projection::Continuous(m) => m.integrate_regular(f),
        }
    }

    /// `int f(s, top - s) m(ds)` for non-negative `f` that may blow up at
    /// `top`.
    pub fn integrate_singular(
        &self,
        f: impl Fn(f64, f64) -> f64,
        opts: &QuadOptions,
        what: &'static str,
    ) -> Result<f64> {
        match self {
            Projection::Atoms { .. } => {
                if self.mass_at_top() > 0.0 {
                    return Ok(f64::INFINITY);
                }
                Ok(self.integrate_regular(f))
            }
            Projection::Continuous(m) => m.integrate_singular(f, opts, what),
        }
    }
}

/// Symmetries used to skip direction scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// Every direction projects to the same measure.
    Rotational,
    /// `e` and `-e` project to mirror-image measures.
    Reflection,
    None,
}

/// The velocity set `V` with its equilibrium density `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityModel {
    dim: usize,
    support: Support,
    shape: Option<DensityShape>,
    amplitude: f64,
    opts: QuadOptions,
    // Interval: [e = +1, e = -1]; Ball: one marginal shared by all directions.
    projections: Vec<Projection>,
}

impl VelocityModel {
    /// Interval `[lower, upper]` with density `amplitude * shape(|v| / R)`.
    /// Without an explicit amplitude the shape is normalised.
    pub fn interval(
        lower: f64,
        upper: f64,
        shape: DensityShape,
        amplitude: Option<f64>,
        opts: QuadOptions,
    ) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::InvalidModel(format!(
                "interval bounds must be finite with lower < upper, got [{lower}, {upper}]"
            )));
        }
        check_shape(&shape)?;
        let support = Support::Interval { lower, upper };
        let amplitude = match amplitude {
            Some(a) => a,
            None => {
                let vmax = lower.abs().max(upper.abs());
                let rule = Rule::graded_with_breaks(lower, upper, &[0.0], 20, 30);
                1.0 / rule.sum(|v| shape.profile(v.abs() / vmax))
            }
        };
        Self::finish(1, support, Some(shape), amplitude, opts)
    }

    /// Centred ball of radius `radius` in `R^dim` (`dim <= 3`) with a radial
    /// density. In one dimension this is the interval `[-radius, radius]`.
    pub fn ball(
        dim: usize,
        radius: f64,
        shape: DensityShape,
        amplitude: Option<f64>,
        opts: QuadOptions,
    ) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidModel(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        match dim {
            1 => return Self::interval(-radius, radius, shape, amplitude, opts),
            2 | 3 => {}
            _ => {
                return Err(Error::InvalidModel(format!(
                    "ball models support dimensions 1 to 3, got {dim}"
                )))
            }
        }
        check_shape(&shape)?;
        let amplitude = match amplitude {
            Some(a) => a,
            None => {
                let rule = Rule::graded(0.0, radius, 20, 30);
                let sphere = unit_sphere_area(dim);
                let mass =
                    rule.sum(|r| sphere * r.powi(dim as i32 - 1) * shape.profile(r / radius));
                1.0 / mass
            }
        };
        Self::finish(dim, Support::Ball { radius }, Some(shape), amplitude, opts)
    }

    /// Finitely many velocities with probability weights.
    pub fn discrete(points: Vec<Vec<f64>>, weights: Vec<f64>, opts: QuadOptions) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if points.is_empty() || dim == 0 {
            return Err(Error::InvalidModel("discrete velocity set is empty".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidModel(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points
            .iter()
            .any(|p| p.len() != dim || p.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::InvalidModel(
                "discrete velocities must share one dimension and be finite".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidModel(
                "weights must be finite and non-negative".into(),
            ));
        }
        Self::finish(dim, Support::Discrete { points, weights }, None, 1.0, opts)
    }

    /// Named presets: `uniform-1d`, `quadratic-1d`, `uniform-ball:<n>`,
    /// `two-speed` and `cross-2d`.
    pub fn preset(name: &str, opts: QuadOptions) -> Result<Self> {
        match name {
            "uniform-1d" => Self::interval(-1.0, 1.0, DensityShape::Uniform, Some(0.5), opts),
            "quadratic-1d" => Self::interval(
                -1.0,
                1.0,
                DensityShape::Power { exponent: 2.0 },
                Some(1.5),
                opts,
            ),
            "two-speed" => Self::discrete(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5], opts),
            "cross-2d" => Self::discrete(
                vec![
                    vec![1.0, 0.0],
                    vec![0.0, 1.0],
                    vec![-1.0, 0.0],
                    vec![0.0, -1.0],
                ],
                vec![0.25; 4],
                opts,
            ),
            _ => {
                if let Some(n) = name.strip_prefix("uniform-ball:") {
                    let dim: usize = n.parse().map_err(|_| {
                        Error::InvalidModel(format!("bad ball dimension in preset {name:?}"))
                    })?;
                    let amp = 1.0 / unit_ball_volume(dim);
                    return Self::ball(dim, 1.0, DensityShape::Uniform, Some(amp), opts);
                }
                Err(Error::InvalidModel(format!(
                    "unknown model preset {name:?}"
                )))
            }
        }
    }

    fn finish(
        dim: usize,
        support: Support,
        shape: Option<DensityShape>,
        amplitude: f64,
        opts: QuadOptions,
    ) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::InvalidModel(format!(
                "density amplitude must be positive, got {amplitude}"
            )));
        }
        if opts.level == 0 || opts.grading_levels < 3 {
            return Err(Error::InvalidParameter(
                "quadrature level must be >= 1 with at least 3 grading levels".into(),
            ));
        }
        let mut model = VelocityModel {
            dim,
            support,
            shape,
            amplitude,
            opts,
            projections: Vec::new(),
        };
        model.validate()?;
        model.projections = match &model.support {
            Support::Interval { lower, upper } => {
                let (a, b) = (*lower, *upper);
                vec![
                    GradedMeasure::new(a, b, &[0.0], |s, t| model.interval_edge(s, t, b), &opts),
                    GradedMeasure::new(-b, -a, &[0.0], |s, t| model.interval_edge(s, t, -a), &opts),
                ]
                .into_iter()
                .map(Projection::Continuous)
                .collect()
            }
            Support::Ball { radius } => {
                let r = *radius;
                vec![Projection::Continuous(GradedMeasure::new(
                    -r,
                    r,
                    &[0.0],
                    |s, t| model.ball_marginal(s, t),
                    &opts,
                ))]
            }
            Support::Discrete { .. } => Vec::new(),
        };
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let mass = self.integrate(|_| 1.0)?;
        if (mass - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::InvalidModel(format!(
                "density must integrate to 1, got {mass}"
            )));
        }
        let scale = self.v_max().max(1.0);
        for i in 0..self.dim {
            let m = self.integrate(|v| v[i])?;
            if m.abs() > VALIDATION_TOL * scale {
                return Err(Error::InvalidModel(format!(
                    "mean velocity must vanish, component {i} is {m}"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn shape(&self) -> Option<DensityShape> {
        self.shape
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn quad_options(&self) -> &QuadOptions {
        &self.opts
    }

    pub fn symmetry(&self) -> Symmetry {
        match &self.support {
            Support::Ball { .. } => Symmetry::Rotational,
            Support::Interval { lower, upper } if *lower == -*upper => Symmetry::Reflection,
            _ => Symmetry::None,
        }
    }

    /// `v_max = sup |v|`.
    pub fn v_max(&self) -> f64 {
        match &self.support {
            Support::Interval { lower, upper } => lower.abs().max(upper.abs()),
            Support::Ball { radius } => *radius,
            Support::Discrete { points, .. } => points.iter().map(|p| norm(p)).fold(0.0, f64::max),
        }
    }

    /// Equilibrium density at `v`. Zero outside the support and for
    /// discrete models, whose mass is atomic (see [`VelocityModel::atoms`]).
    pub fn density(&self, v: &[f64]) -> f64 {
        match &self.support {
            Support::Interval { .. } => self.density_1d(v[0]),
            Support::Ball { radius } => {
                let r = norm(v);
                if r > *radius {
                    0.0
                } else {
                    self.amplitude * self.shape_or_uniform().profile(r / radius)
                }
            }
            Support::Discrete { .. } => 0.0,
        }
    }

    /// Velocities and weights of a discrete model.
    pub fn atoms(&self) -> Option<(&[Vec<f64>], &[f64])> {
        match &self.support {
            Support::Discrete { points, weights } => Some((points, weights)),
            _ => None,
        }
    }

    fn shape_or_uniform(&self) -> DensityShape {
        self.shape.unwrap_or(DensityShape::Uniform)
    }

    fn density_1d(&self, v: f64) -> f64 {
        match &self.support {
            Support::Interval { lower, upper } if v >= *lower && v <= *upper => {
                let vmax = lower.abs().max(upper.abs());
                self.amplitude * self.shape_or_uniform().profile(v.abs() / vmax)
            }
            _ => 0.0,
        }
    }

    /// Projected interval density at `s` with `t = top - s`. The profile is
    /// symmetric, so `v = s` and `v = -s` share it.
    fn interval_edge(&self, s: f64, t: f64, top: f64) -> f64 {
        let vmax = self.v_max();
        let c = if s >= 0.0 && top == vmax {
            t / vmax
        } else {
            1.0 - s.abs() / vmax
        };
        self.amplitude * self.shape_or_uniform().profile_edge(c)
    }

    /// Density of `s = v . e` for the ball, independent of `e`; `t` is the
    /// distance from `s` to the radius.
    fn ball_marginal(&self, s: f64, t: f64) -> f64 {
        let Support::Ball { radius } = self.support else {
            return 0.0;
        };
        let rho_max2 = if s >= 0.0 {
            t * (2.0 * radius - t)
        } else {
            radius * radius - s * s
        };
        if rho_max2 <= 0.0 {
            return 0.0;
        }
        let rho_max = rho_max2.sqrt();
        let shape = self.shape_or_uniform();
        if shape == DensityShape::Uniform {
            return self.amplitude
                * unit_ball_volume(self.dim - 1)
                * rho_max.powi(self.dim as i32 - 1);
        }
        // Integrate over the (dim-1)-dimensional slice in polar form.
        let slice_sphere = unit_sphere_area(self.dim - 1);
        let rule = Rule::graded_with_breaks(0.0, rho_max, &[s.abs()], 16, 12);
        let k = self.dim as i32 - 2;
        self.amplitude
            * slice_sphere
            * rule.sum(|rho| {
                let r = (s * s + rho * rho).sqrt();
                let c = (rho_max - rho) * (rho_max + rho) / (radius * (radius + r));
                rho.powi(k) * shape.profile_edge(c)
            })
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: len,
            });
        }
        Ok(())
    }

    /// The pushforward of `M` onto the line spanned by `e`.
    pub fn projection(&self, e: &Direction) -> Result<Cow<'_, Projection>> {
        self.check_dim(e.dim())?;
        Ok(match &self.support {
            Support::Interval { .. } => {
                let idx = if e.components()[0] > 0.0 { 0 } else { 1 };
                Cow::Borrowed(&self.projections[idx])
            }
            Support::Ball { .. } => Cow::Borrowed(&self.projections[0]),
            Support::Discrete { points, weights } => {
                let mut atoms: Vec<(f64, f64)> = points
                    .iter()
                    .zip(weights)
                    .map(|(p, &w)| (e.dot(p), w))
                    .collect();
                atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
                for (s, w) in atoms {
                    match merged.last_mut() {
                        Some(last) if (s - last.0).abs() <= UNIT_TOL * s.abs().max(1.0) => {
                            last.1 += w
                        }
                        _ => merged.push((s, w)),
                    }
                }
                let top = merged.last().map(|a| a.0).unwrap_or(0.0);
                Cow::Owned(Projection::Atoms { atoms: merged, top })
            }
        })
    }

    /// `v_bar(e) = max { v . e : v in V }`.
    pub fn support_max(&self, e: &Direction) -> Result<f64> {
        self.check_dim(e.dim())?;
        Ok(match &self.support {
            Support::Interval { lower, upper } => {
                let x = e.components()[0];
                (upper * x).max(lower * x)
            }
            Support::Ball { radius } => *radius,
            Support::Discrete { points, .. } => points
                .iter()
                .map(|p| e.dot(p))
                .fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// `mu(p) = |p| v_bar(p / |p|)`, zero at the origin.
    pub fn mu(&self, p: &[f64]) -> Result<f64> {
        self.check_dim(p.len())?;
        let n = norm(p);
        if n == 0.0 {
            return Ok(0.0);
        }
        Ok(n * self.support_max(&Direction::normalize(p)?)?)
    }

    /// Maximisers of `v . p` over `V`, sorted lexicographically. For discrete
    /// sets every point within `tol` of the maximum is returned.
    pub fn arg_mu(&self, p: &[f64], tol: f64) -> Result<Vec<Vec<f64>>> {
        self.check_dim(p.len())?;
        let e = Direction::normalize(p)?;
        Ok(match &self.support {
            Support::Interval { lower, upper } => {
                vec![vec![if p[0] > 0.0 { *upper } else { *lower }]]
            }
            Support::Ball { radius } => vec![e.scaled(*radius)],
            Support::Discrete { points, .. } => {
                let best = points
                    .iter()
                    .map(|q| dot(q, p))
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut out: Vec<Vec<f64>> = points
                    .iter()
                    .filter(|q| dot(q, p) >= best - tol)
                    .cloned()
                    .collect();
                out.sort_by(|a, b| {
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
                out.dedup();
                out
            }
        })
    }

    /// `l(e) = int M(v) / (v_bar(e) - v . e) dv`, possibly `+inf`.
    pub fn l_integral(&self, e: &Direction) -> Result<f64> {
        let proj = self.projection(e)?;
        proj.integrate_singular(|_, t| 1.0 / t, &self.opts, "l(e)")
    }

    /// `int M(v) / (v_bar(e) - v . e)^2 dv`, possibly `+inf`.
    pub fn j_integral(&self, e: &Direction) -> Result<f64> {
        let proj = self.projection(e)?;
        proj.integrate_singular(|_, t| t.powi(-2), &self.opts, "j(e)")
    }

    /// `int g(v) M(v) dv` with refinement until the relative change drops
    /// below the configured tolerance.
    pub fn integrate(&self, g: impl Fn(&[f64]) -> f64) -> Result<f64> {
        match &self.support {
            Support::Discrete { points, weights } => {
                Ok(points.iter().zip(weights).map(|(p, w)| w * g(p)).sum())
            }
            Support::Interval { lower, upper } => {
                let (a, b) = (*lower, *upper);
                refine(&self.opts, "integrate", |level| {
                    let order = 10 * level as usize;
                    let rule = Rule::graded_with_breaks(a, b, &[0.0], order, self.opts.end_levels);
                    let mut v = [0.0];
                    weighted_sums(rule.nodes.iter().zip(&rule.weights).map(|(&x, &w)| {
                        v[0] = x;
                        let gv = g(&v);
                        (w * self.density_1d(x), gv)
                    }))
                })
            }
            Support::Ball { radius } => {
                let r = *radius;
                refine(&self.opts, "integrate", |level| {
                    let order = 10 * level as usize;
                    self.ball_product_sum(r, order, &g)
                })
            }
        }
    }

    fn ball_product_sum(
        &self,
        radius: f64,
        order: usize,
        g: &impl Fn(&[f64]) -> f64,
    ) -> (f64, f64) {
        let radial = Rule::graded_with_breaks(0.0, radius, &[], order, 8);
        let shape = self.shape_or_uniform();
        match self.dim {
            2 => {
                let n_theta = 4 * order;
                let dtheta = 2.0 * PI / n_theta as f64;
                let mut v = [0.0; 2];
                let mut terms = Vec::with_capacity(radial.len() * n_theta);
                for (&r, &wr) in radial.nodes.iter().zip(&radial.weights) {
                    let m = self.amplitude * shape.profile(r / radius);
                    for k in 0..n_theta {
                        let th = k as f64 * dtheta;
                        v[0] = r * th.cos();
                        v[1] = r * th.sin();
                        terms.push((wr * r * dtheta * m, g(&v)));
                    }
                }
                weighted_sums(terms.into_iter())
            }
            _ => {
                let (u, wu) = gauss_legendre(order);
                let n_phi = 2 * order;
                let dphi = 2.0 * PI / n_phi as f64;
                let mut v = [0.0; 3];
                let mut terms = Vec::with_capacity(radial.len() * order * n_phi);
                for (&r, &wr) in radial.nodes.iter().zip(&radial.weights) {
                    let m = self.amplitude * shape.profile(r / radius);
                    for (&c, &wc) in u.iter().zip(&wu) {
                        let sn = (1.0 - c * c).sqrt();
                        for k in 0..n_phi {
                            let ph = k as f64 * dphi;
                            v[0] = r * sn * ph.cos();
                            v[1] = r * sn * ph.sin();
                            v[2] = r * c;
                            terms.push((wr * r * r * wc * dphi * m, g(&v)));
                        }
                    }
                }
                weighted_sums(terms.into_iter())
            }
        }
    }

    /// A small discrete velocity set along `e` for kinetic simulation:
    /// `(s, weight)` with weights summing to one. Continuous projections use
    /// `per_segment` Gauss-Legendre nodes on each side of the origin.
    pub fn velocity_nodes(&self, e: &Direction, per_segment: usize) -> Result<Vec<(f64, f64)>> {
        let proj = self.projection(e)?;
        let mut nodes: Vec<(f64, f64)> = match proj.as_ref() {
            Projection::Atoms { atoms, .. } => {
                atoms.iter().copied().filter(|(_, w)| *w > 0.0).collect()
            }
            Projection::Continuous(m) => {
                let (gx, gw) = gauss_legendre(per_segment.max(1));
                let (lo, hi) = (m.lo(), m.top());
                let mut cuts = vec![lo];
                if lo < 0.0 && hi > 0.0 {
                    cuts.push(0.0);
                }
                cuts.push(hi);
                let mut out = Vec::new();
                for w in cuts.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let half = 0.5 * (b - a);
                    for (x, wt) in gx.iter().zip(&gw) {
                        let s = 0.5 * (a + b) + half * x;
                        let dens = self.projected_density(e, s);
                        out.push((s, half * wt * dens));
                    }
                }
                out
            }
        };
        let total: f64 = nodes.iter().map(|n| n.1).sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::InvalidModel("velocity nodes carry no mass".into()));
        }
        for n in &mut nodes {
            n.1 /= total;
        }
        Ok(nodes)
    }

    /// Density of the projection of `M` onto `e`, evaluated at `s`.
    pub fn projected_density(&self, e: &Direction, s: f64) -> f64 {
        match &self.support {
            Support::Interval { .. } => {
                if e.components()[0] > 0.0 {
                    self.density_1d(s)
                } else {
                    self.density_1d(-s)
                }
            }
            Support::Ball { radius } => self.ball_marginal(s, radius - s),
            Support::Discrete { .. } => 0.0,
        }
    }
}

fn check_shape(shape: &DensityShape) -> Result<()> {
    if let DensityShape::Power { exponent } = shape {
        if !(exponent.is_finite() && *exponent >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "power exponent must be non-negative, got {exponent}"
            )));
        }
    }
    Ok(())
}

/// `(sum w g, sum w |g|)`.
fn weighted_sums(terms: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    terms.fold((0.0, 0.0), |(s, a), (w, g)| (s + w * g, a + (w * g).abs()))
}

/// Lebesgue measure of the unit ball of `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Surface measure of the unit sphere of `R^n` (`2` for `n = 1`).
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// Flat description of a model, as read from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// `interval`, `ball` or `discrete`.
    pub support: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// `uniform`, `power` or `cosine`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl ModelSpec {
    pub fn build(&self, opts: QuadOptions) -> Result<VelocityModel> {
        let missing = |key: &str| Error::InvalidModel(format!("missing key {key:?}"));
        let shape = || -> Result<DensityShape> {
            match self.density.as_deref().unwrap_or("uniform") {
                "uniform" => Ok(DensityShape::Uniform),
                "power" => Ok(DensityShape::Power {
                    exponent: self.exponent.ok_or_else(|| missing("exponent"))?,
                }),
                "cosine" => Ok(DensityShape::Cosine),
                other => Err(Error::InvalidModel(format!(
                    "unknown density family {other:?}"
                ))),
            }
        };
        match self.support.as_str() {
            "interval" => {
                if self.dim.is_some_and(|d| d != 1) {
                    return Err(Error::InvalidModel(
                        "interval models are one-dimensional".into(),
                    ));
                }
                VelocityModel::interval(
                    self.lower.ok_or_else(|| missing("lower"))?,
                    self.upper.ok_or_else(|| missing("upper"))?,
                    shape()?,
                    self.amplitude,
                    opts,
                )
            }
            "ball" => VelocityModel::ball(
                self.dim.ok_or_else(|| missing("dim"))?,
                self.radius.unwrap_or(1.0),
                shape()?,
                self.amplitude,
                opts,
            ),
            "discrete" => {
                let model = VelocityModel::discrete(
                    self.points.clone().ok_or_else(|| missing("points"))?,
                    self.weights.clone().ok_or_else(|| missing("weights"))?,
                    opts,
                )?;
                if self.dim.is_some_and(|d| d != model.dim()) {
                    return Err(Error::InvalidModel("dim does not match the points".into()));
                }
                Ok(model)
            }
            other => Err(Error::InvalidModel(format!("unknown support {other:?}"))),
        }
    }
}
