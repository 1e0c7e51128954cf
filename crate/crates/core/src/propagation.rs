//! Macroscopic propagation: the Lagrangian, Hopf-Lax solutions of the
//! limiting Hamilton-Jacobi problem and the spreading speeds they predict.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dispersion::Directional;
use crate::error::{Error, Result};
use crate::roots::{bisect_boundary, try_golden_min};
use crate::velocity::{dot, norm, Direction, Symmetry, VelocityModel};

/// Directions scanned for the Lagrangian of a planar (2-D) model.
pub const LAGRANGIAN_ANGLES: usize = 128;
/// Directions scanned on the half circle for the Freidlin-Gartner speed.
pub const HEMISPHERE_ANGLES: usize = 256;
/// Points of the Fibonacci sphere used for three-dimensional discrete sets.
pub const SPHERE_POINTS: usize = 2048;

const LAMBDA_WINDOW_MAX: f64 = 1e12;

/// Initial data of the Hamilton-Jacobi problem: the indicator of a half
/// space `{x . e0 <= 0}` or of a single point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialData {
    Planar(Direction),
    Point,
}

/// `sup_{lambda >= 0} (lambda a - g(lambda))` where `g = lambda c(lambda, e)`
/// is convex with `g(0) = r`.
fn conjugate_along(dir: &Directional<'_>, r: f64, a: f64) -> Result<f64> {
    let vb = dir.v_bar();
    if a > vb {
        return Ok(f64::INFINITY);
    }
    // h'(0) = a since the mean velocity vanishes, and h is concave.
    if a <= 0.0 {
        return Ok(-r);
    }
    let h = |lam: f64| -> Result<f64> { Ok(lam * a - dir.lambda_c(r, lam)?) };
    let lt = dir.lambda_tilde(r);
    let hi = if lt.is_finite() && a < vb {
        lt
    } else {
        let mut w = 1.0;
        while w < LAMBDA_WINDOW_MAX && h(2.0 * w)? > h(w)? {
            w *= 2.0;
        }
        2.0 * w
    };
    let (_, neg) = try_golden_min(|lam| Ok(-h(lam)?), 0.0, hi, 1e-12 * hi)?;
    Ok((-neg).max(-r))
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "growth rate r must be positive, got {r}"
        )));
    }
    Ok(())
}

/// `L(p) = sup_q (p . q - (1 + r) H(q / (1 + r)) - r)`, computed as
/// `sup_e sup_{lambda >= 0} (lambda p . e - lambda c(lambda, e))`.
pub fn lagrangian(model: &VelocityModel, r: f64, p: &[f64]) -> Result<f64> {
    check_r(r)?;
    if p.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: p.len(),
        });
    }
    let pn = norm(p);
    if pn == 0.0 {
        return Ok(-r);
    }
    let along = Direction::normalize(p)?;
    if model.dim() == 1 || model.symmetry() == Symmetry::Rotational {
        // The supremum over e is attained at e = p / |p|.
        let dir = Directional::new(model, &along)?;
        return conjugate_along(&dir, r, pn);
    }
    let value = |e: &Direction| -> Result<f64> {
        let a = e.dot(p);
        if a <= 0.0 {
            return Ok(-r);
        }
        conjugate_along(&Directional::new(model, e)?, r, a)
    };
    if model.dim() == 2 {
        let theta0 = p[1].atan2(p[0]);
        let step = 2.0 * PI / LAGRANGIAN_ANGLES as f64;
        let mut best = (f64::NEG_INFINITY, theta0);
        for k in 0..LAGRANGIAN_ANGLES {
            let th = theta0 + step * k as f64;
            let v = value(&Direction::from_angle(th))?;
            if v == f64::INFINITY {
                return Ok(v);
            }
            if v > best.0 {
                best = (v, th);
            }
        }
        let (_, neg) = try_golden_min(
            |th| Ok(-value(&Direction::from_angle(th))?),
            best.1 - step,
            best.1 + step,
            1e-10,
        )?;
        return Ok(best.0.max(-neg));
    }
    let mut best = f64::NEG_INFINITY;
    for e in fibonacci_sphere(SPHERE_POINTS) {
        best = best.max(value(&e)?);
        if best == f64::INFINITY {
            break;
        }
    }
    Ok(best)
}

/// The one-dimensional conjugate along `e0`,
/// `L_bar(xi) = sup_{lambda >= 0} (lambda xi - lambda c(lambda, e0))`.
pub fn planar_lagrangian(model: &VelocityModel, r: f64, e0: &Direction, xi: f64) -> Result<f64> {
    check_r(r)?;
    conjugate_along(&Directional::new(model, e0)?, r, xi)
}

/// Hopf-Lax value `phi(t, x) = max(t L(x / t), 0)` (point data) or
/// `max(t L_bar(x . e0 / t), 0)` (planar data).
pub fn hopf_lax_phi(
    model: &VelocityModel,
    r: f64,
    t: f64,
    x: &[f64],
    init: &InitialData,
) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "time must be positive, got {t}"
        )));
    }
    let l = match init {
        InitialData::Planar(e0) => {
            if x.len() != e0.dim() {
                return Err(Error::DimensionMismatch {
                    expected: e0.dim(),
                    found: x.len(),
                });
            }
            planar_lagrangian(model, r, e0, e0.dot(x) / t)?
        }
        InitialData::Point => {
            let q: Vec<f64> = x.iter().map(|xi| xi / t).collect();
            lagrangian(model, r, &q)?
        }
    };
    Ok((t * l).max(0.0))
}

/// `w*(e0) = min_{e . e0 > 0} c*(e) / (e . e0)`.
pub fn freidlin_gartner_speed(model: &VelocityModel, r: f64, e0: &Direction) -> Result<f64> {
    check_r(r)?;
    let c_star =
        |e: &Direction| -> Result<f64> { Ok(Directional::new(model, e)?.minimal_speed(r)?.c_star) };
    if model.dim() == 1 || model.symmetry() == Symmetry::Rotational {
        if e0.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                found: e0.dim(),
            });
        }
        return c_star(e0);
    }
    if model.dim() == 2 {
        let base = e0.components()[1].atan2(e0.components()[0]);
        let ratio = |phi: f64| -> Result<f64> {
            Ok(c_star(&Direction::from_angle(base + phi))? / phi.cos())
        };
        let step = PI / HEMISPHERE_ANGLES as f64;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..HEMISPHERE_ANGLES {
            let phi = -0.5 * PI + step * (i as f64 + 0.5);
            let v = ratio(phi)?;
            if v < best.0 {
                best = (v, phi);
            }
        }
        let lo = (best.1 - step).max(-0.5 * PI + 1e-9);
        let hi = (best.1 + step).min(0.5 * PI - 1e-9);
        let (_, v) = try_golden_min(ratio, lo, hi, 1e-10)?;
        return Ok(best.0.min(v));
    }
    let mut best = f64::INFINITY;
    for e in fibonacci_sphere(SPHERE_POINTS) {
        let cos = e.dot(e0.components());
        if cos > 0.0 {
            best = best.min(c_star(&e)? / cos);
        }
    }
    Ok(best)
}

/// Boundary of `{phi(t, .) = 0}` along the ray `rho * along`, `rho >= 0`,
/// located by bisection.
pub fn nullset_radius(
    model: &VelocityModel,
    r: f64,
    init: &InitialData,
    along: &Direction,
    t: f64,
) -> Result<f64> {
    let hi = t * model.v_max() * (1.0 + 1e-9);
    bisect_boundary(
        |rho| Ok(hopf_lax_phi(model, r, t, &along.scaled(rho), init)? == 0.0),
        0.0,
        hi,
        1e-10 * hi.max(1e-300),
    )
}

/// Roughly uniform points on the unit sphere of `R^3`.
pub fn fibonacci_sphere(n: usize) -> Vec<Direction> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rad = (1.0 - z * z).sqrt();
            let th = golden * i as f64;
            Direction::normalize(&[rad * th.cos(), rad * th.sin(), z]).expect("non-zero")
        })
        .collect()
}

/// A sampled Hopf-Lax solution along one ray.
#[derive(Debug, Clone)]
pub struct HJSolution<'a> {
    model: &'a VelocityModel,
    pub r: f64,
    pub init: InitialData,
    pub along: Direction,
    /// `(q, L(q along))`, or `(xi, L_bar(xi))` for planar data.
    pub lagrangian_samples: Vec<(f64, f64)>,
}

impl<'a> HJSolution<'a> {
    pub fn new(
        model: &'a VelocityModel,
        r: f64,
        init: InitialData,
        along: Direction,
        q_grid: &[f64],
    ) -> Result<Self> {
        let lagrangian_samples = q_grid
            .iter()
            .map(|&q| {
                let l = match &init {
                    InitialData::Planar(e0) => planar_lagrangian(
                        model,
                        r,
                        e0,
                        q * dot(e0.components(), along.components()),
                    )?,
                    InitialData::Point => lagrangian(model, r, &along.scaled(q))?,
                };
                Ok((q, l))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HJSolution {
            model,
            r,
            init,
            along,
            lagrangian_samples,
        })
    }

    pub fn phi(&self, t: f64, x: &[f64]) -> Result<f64> {
        hopf_lax_phi(self.model, self.r, t, x, &self.init)
    }

    pub fn nullset_radius(&self, t: f64) -> Result<f64> {
        nullset_radius(self.model, self.r, &self.init, &self.along, t)
    }
}
