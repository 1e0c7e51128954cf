//! The spectral problem in velocity space: Hamiltonian, singular set,
//! eigenprofiles and the speed curve `lambda -> c(lambda, e)`.
//!
//! Internally the eigenvalue is carried as the gap `delta = 1 + H - mu(p)`,
//! which is zero exactly on the singular set. Writing the integrands in
//! terms of `delta` and the distance `t = v_bar(e) - v . e` keeps full
//! relative precision close to the singular boundary.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{brent, try_golden_min};
use crate::velocity::{norm, Direction, Projection, VelocityModel};

/// Tolerance on `c'(lambda_tilde^-)` separating a flat minimum (case 3)
/// from a strictly decreasing curve (case 4).
pub const DERIV_TOL: f64 = 1e-6;
/// Number of log-spaced samples on the regular branch.
pub const GRID_POINTS: usize = 64;
/// Samples drawn on the singular branch `(lambda_tilde, 4 lambda_tilde]`.
pub const SINGULAR_SAMPLES: usize = 16;
/// Initial right end of the search window when `lambda_tilde` is infinite.
pub const LAMBDA_CAP: f64 = 1e3;
/// The window is widened tenfold up to this value if `c` still decreases.
pub const LAMBDA_CAP_MAX: f64 = 1e8;

const DELTA_FLOOR: f64 = 1e-14;

/// Solution of the spectral problem at `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionResult {
    pub p: Vec<f64>,
    /// The eigenvalue `H(p)`.
    pub h: f64,
    /// `false` on the singular set.
    pub regular: bool,
    /// Mass of the Dirac part of the eigen-measure.
    pub dirac_weight: f64,
    /// Where the Dirac mass sits (a maximiser of `v . p`), singular case only.
    pub dirac_location: Option<Vec<f64>>,
    /// `1 + H - mu(p)`.
    pub gap: f64,
}

impl DispersionResult {
    /// `m / (1 + H - v . p)`: the eigenprofile weight attached to velocity
    /// `v` carrying equilibrium mass (or density) `m`.
    pub fn eigen_weight(&self, m: f64, v: &[f64]) -> f64 {
        if m == 0.0 {
            return 0.0;
        }
        let pv: f64 = self.p.iter().zip(v).map(|(a, b)| a * b).sum();
        m / (1.0 + self.h - pv)
    }

    /// Absolutely continuous part of the eigen-measure at `v`.
    pub fn profile_density(&self, model: &VelocityModel, v: &[f64]) -> f64 {
        self.eigen_weight(model.density(v), v)
    }

    /// Total mass of the absolutely continuous (or, for discrete models,
    /// atomic) part of the eigen-measure.
    pub fn profile_mass(&self, model: &VelocityModel) -> Result<f64> {
        let pn = norm(&self.p);
        if pn == 0.0 {
            return Ok(1.0);
        }
        let e = Direction::normalize(&self.p)?;
        let proj = model.projection(&e)?;
        let delta = self.gap;
        if self.regular {
            Ok(proj.integrate_regular(|_, t| 1.0 / (delta + pn * t)))
        } else {
            proj.integrate_singular(|_, t| 1.0 / (pn * t), model.quad_options(), "profile mass")
        }
    }
}

/// Which piece of the speed curve a sample lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Regular,
    Singular,
}

/// Shape of `lambda -> c(lambda, e)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseLabel {
    /// `l(e)` infinite, no singular branch.
    Case1,
    /// Interior minimum before `lambda_tilde`.
    Case2,
    /// Minimum at `lambda_tilde` with zero left derivative.
    Case3,
    /// Minimum at `lambda_tilde` with negative left derivative.
    Case4,
}

impl std::fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Sampled speed curve in one direction with its minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedCurve {
    pub e: Direction,
    pub r: f64,
    pub v_bar: f64,
    pub lambda_grid: Vec<f64>,
    pub c_values: Vec<f64>,
    pub branch: Vec<Branch>,
    /// `(1 + r) l(e)`, infinite when `l(e)` is.
    pub lambda_tilde: f64,
    pub lambda_star: f64,
    pub c_star: f64,
    pub case_label: CaseLabel,
    pub left_derivative_at_tilde: Option<f64>,
    /// `false` when `c` keeps decreasing up to the largest window tried.
    /// Then `c_star` is the limit `v_bar` and `lambda_star` is infinite.
    pub minimum_attained: bool,
}

/// Travelling-wave profile `F(v) = (1 + r) M(v) / (1 + lambda (c - v . e))`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveProfile {
    pub e: Direction,
    pub r: f64,
    pub lambda: f64,
    pub c: f64,
    gap: f64,
}

impl WaveProfile {
    /// `(1 + r) m / (1 + lambda (c - v . e))` for equilibrium mass or
    /// density `m` at `v`.
    pub fn weight(&self, m: f64, v: &[f64]) -> f64 {
        if m == 0.0 {
            return 0.0;
        }
        (1.0 + self.r) * m / (1.0 + self.lambda * (self.c - self.e.dot(v)))
    }

    pub fn density(&self, model: &VelocityModel, v: &[f64]) -> f64 {
        self.weight(model.density(v), v)
    }

    /// `int F dv`, equal to one by the dispersion relation.
    pub fn mass(&self, model: &VelocityModel) -> Result<f64> {
        let proj = model.projection(&self.e)?;
        let (lam, k) = (self.lambda, (1.0 + self.r) * self.gap);
        let scale = 1.0 + self.r;
        if self.gap > 0.0 {
            Ok(scale * proj.integrate_regular(|_, t| 1.0 / (k + lam * t)))
        } else {
            Ok(scale
                * proj.integrate_singular(
                    |_, t| 1.0 / (lam * t),
                    model.quad_options(),
                    "wave mass",
                )?)
        }
    }
}

/// Dispersion data along a fixed direction: projection, `v_bar(e)` and `l(e)`.
pub struct Directional<'a> {
    model: &'a VelocityModel,
    e: Direction,
    proj: Cow<'a, Projection>,
    top: f64,
    l: f64,
}

impl<'a> Directional<'a> {
    pub fn new(model: &'a VelocityModel, e: &Direction) -> Result<Self> {
        let proj = model.projection(e)?;
        let top = proj.top();
        let l = proj.integrate_singular(|_, t| 1.0 / t, model.quad_options(), "l(e)")?;
        Ok(Directional {
            model,
            e: e.clone(),
            proj,
            top,
            l,
        })
    }

    pub fn direction(&self) -> &Direction {
        &self.e
    }

    pub fn v_bar(&self) -> f64 {
        self.top
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn lambda_tilde(&self, r: f64) -> f64 {
        (1.0 + r) * self.l
    }

    /// `I` as a function of the gap, at `|p| = pn`.
    fn implicit(&self, pn: f64, delta: f64) -> f64 {
        self.proj.integrate_regular(|_, t| 1.0 / (delta + pn * t))
    }

    /// Solves for the gap `1 + H - mu` at `p = pn e` (`pn > 0`).
    /// Returns `(gap, regular)`.
    pub fn gap(&self, pn: f64) -> Result<(f64, bool)> {
        if self.l <= pn {
            return Ok((0.0, false));
        }
        // I(1) <= 1 since every denominator is at least one.
        let hi = 1.0;
        if self.implicit(pn, hi) >= 1.0 {
            return Ok((hi, true));
        }
        // Below `floor` the gap no longer affects H in double precision.
        let floor = DELTA_FLOOR * (pn * self.top.abs()).max(1.0);
        let mut lo = (1e-3 * (1.0 + pn)).min(0.5);
        while self.implicit(pn, lo) <= 1.0 {
            if lo <= floor {
                if self.l.is_finite() && self.l / pn - 1.0 > 1e-6 {
                    return Err(Error::RootNotBracketed {
                        lo,
                        hi,
                        f_lo: self.implicit(pn, lo) - 1.0,
                        f_hi: self.implicit(pn, hi) - 1.0,
                    });
                }
                return Ok((0.5 * lo, true));
            }
            lo = (0.1 * lo).max(floor);
        }
        let delta = brent(|d| self.implicit(pn, d) - 1.0, lo, hi, 1e-15)?;
        Ok((delta, true))
    }

    /// `c(lambda, e)` together with the gap at `p = lambda e / (1 + r)`.
    pub fn speed_and_gap(&self, r: f64, lambda: f64) -> Result<(f64, f64)> {
        check_r_lambda(r, lambda)?;
        let (delta, _) = self.gap(lambda / (1.0 + r))?;
        Ok((self.top - 1.0 / lambda + (1.0 + r) * delta / lambda, delta))
    }

    pub fn speed(&self, r: f64, lambda: f64) -> Result<f64> {
        Ok(self.speed_and_gap(r, lambda)?.0)
    }

    /// `lambda c(lambda, e) = (1 + r) H(lambda e / (1 + r)) + r`, finite as
    /// `lambda -> 0` where it tends to `r`.
    pub fn lambda_c(&self, r: f64, lambda: f64) -> Result<f64> {
        if lambda == 0.0 {
            return Ok(r);
        }
        let (delta, _) = self.gap(lambda / (1.0 + r))?;
        Ok(lambda * self.top - 1.0 + (1.0 + r) * delta)
    }

    /// `c'(lambda^-, e) = (1 - 1 / ((1 + r) J)) / lambda^2` with
    /// `J = int M / (1 + lambda (c - v . e))^2`.
    pub fn speed_derivative_left(&self, r: f64, lambda: f64) -> Result<f64> {
        check_r_lambda(r, lambda)?;
        let (_, delta) = self.speed_and_gap(r, lambda)?;
        let k = (1.0 + r) * delta;
        let jcal = if delta > 0.0 {
            self.proj
                .integrate_regular(|_, t| (k + lambda * t).powi(-2))
        } else {
            self.proj.integrate_singular(
                |_, t| (lambda * t).powi(-2),
                self.model.quad_options(),
                "J(lambda, e)",
            )?
        };
        Ok((1.0 - 1.0 / ((1.0 + r) * jcal)) / (lambda * lambda))
    }

    /// The minimum of the speed curve with a sampled curve for output.
    pub fn minimal_speed(&self, r: f64) -> Result<SpeedCurve> {
        check_r_lambda(r, 1.0)?;
        let lt = self.lambda_tilde(r);
        let lo = 1e-3 * r.sqrt().min(1.0);

        let mut hi = if lt.is_finite() { lt } else { LAMBDA_CAP };
        let mut minimum_attained = true;
        if !lt.is_finite() {
            // c must be increasing at the right end of the window.
            while self.speed(r, hi)? <= self.speed(r, hi / 1.1)? {
                if hi >= LAMBDA_CAP_MAX {
                    minimum_attained = false;
                    break;
                }
                hi *= 10.0;
            }
        }

        let mut lambda_grid = log_grid(lo, hi, GRID_POINTS);
        let mut c_values = lambda_grid
            .iter()
            .map(|&lam| self.speed(r, lam))
            .collect::<Result<Vec<_>>>()?;
        let mut branch = vec![Branch::Regular; lambda_grid.len()];

        let (case_label, left_derivative) = if lt.is_finite() {
            let d = self.speed_derivative_left(r, lt)?;
            let label = if d > DERIV_TOL {
                CaseLabel::Case2
            } else if d.abs() <= DERIV_TOL {
                CaseLabel::Case3
            } else {
                CaseLabel::Case4
            };
            (label, Some(d))
        } else {
            (CaseLabel::Case1, None)
        };

        let (lambda_star, c_star) = match case_label {
            CaseLabel::Case3 | CaseLabel::Case4 => (lt, self.top - 1.0 / lt),
            // c decreases to its limit v_bar: report the infimum
            _ if !minimum_attained => (f64::INFINITY, self.top),
            _ => {
                let k = c_values
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .expect("non-empty grid");
                let a = if k == 0 {
                    lo * 1e-2
                } else {
                    lambda_grid[k - 1]
                };
                let b = lambda_grid[(k + 1).min(lambda_grid.len() - 1)];
                let (x, cx) = try_golden_min(|lam| self.speed(r, lam), a, b, 1e-10 * b)?;
                if cx <= c_values[k] {
                    (x, cx)
                } else {
                    (lambda_grid[k], c_values[k])
                }
            }
        };

        if lt.is_finite() {
            for lam in log_grid(lt, 4.0 * lt, SINGULAR_SAMPLES + 1)
                .into_iter()
                .skip(1)
            {
                lambda_grid.push(lam);
                c_values.push(self.top - 1.0 / lam);
                branch.push(Branch::Singular);
            }
        }

        Ok(SpeedCurve {
            e: self.e.clone(),
            r,
            v_bar: self.top,
            lambda_grid,
            c_values,
            branch,
            lambda_tilde: lt,
            lambda_star,
            c_star,
            case_label,
            left_derivative_at_tilde: left_derivative,
            minimum_attained,
        })
    }
}

fn check_r_lambda(r: f64, lambda: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "growth rate r must be positive, got {r}"
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(())
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// `true` iff `l(p / |p|) <= |p|`. The origin is never singular.
pub fn in_singular_set(model: &VelocityModel, p: &[f64]) -> Result<bool> {
    let pn = norm(p);
    if pn == 0.0 {
        return Ok(false);
    }
    let e = Direction::normalize(p)?;
    Ok(model.l_integral(&e)? <= pn)
}

/// Solves the spectral problem at `p`.
pub fn hamiltonian(model: &VelocityModel, p: &[f64]) -> Result<DispersionResult> {
    if p.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: p.len(),
        });
    }
    let pn = norm(p);
    if pn == 0.0 {
        return Ok(DispersionResult {
            p: p.to_vec(),
            h: 0.0,
            regular: true,
            dirac_weight: 0.0,
            dirac_location: None,
            gap: 1.0,
        });
    }
    let e = Direction::normalize(p)?;
    let dir = Directional::new(model, &e)?;
    let (gap, regular) = dir.gap(pn)?;
    let mu = pn * dir.v_bar();
    let (dirac_weight, dirac_location) = if regular {
        (0.0, None)
    } else {
        let w = (1.0 - dir.l() / pn).max(0.0);
        let loc = model
            .arg_mu(p, 1e-12 * mu.abs().max(1.0))?
            .into_iter()
            .next();
        (w, loc)
    };
    Ok(DispersionResult {
        p: p.to_vec(),
        h: mu - 1.0 + gap,
        regular,
        dirac_weight,
        dirac_location,
        gap,
    })
}

/// `c(lambda, e) = ((1 + r) H(lambda e / (1 + r)) + r) / lambda`.
pub fn speed(model: &VelocityModel, r: f64, e: &Direction, lambda: f64) -> Result<f64> {
    Directional::new(model, e)?.speed(r, lambda)
}

/// Left derivative of the speed curve.
pub fn speed_derivative_left(
    model: &VelocityModel,
    r: f64,
    e: &Direction,
    lambda: f64,
) -> Result<f64> {
    Directional::new(model, e)?.speed_derivative_left(r, lambda)
}

/// `c*(e) = inf_{lambda > 0} c(lambda, e)` with the sampled curve.
pub fn minimal_speed(model: &VelocityModel, r: f64, e: &Direction) -> Result<SpeedCurve> {
    Directional::new(model, e)?.minimal_speed(r)
}

/// Whether the minimum of the speed curve sits at `lambda_tilde`, decided by
/// `j(e) <= (1 + r) l(e)^2`. Always `false` when `l(e)` is infinite.
pub fn minimum_at_tilde(model: &VelocityModel, r: f64, e: &Direction) -> Result<bool> {
    let l = model.l_integral(e)?;
    if !l.is_finite() {
        return Ok(false);
    }
    let j = model.j_integral(e)?;
    Ok(j <= (1.0 + r) * l * l)
}

/// The travelling-wave profile for decay rate `lambda <= lambda_tilde(e)`.
pub fn wave_profile(
    model: &VelocityModel,
    r: f64,
    e: &Direction,
    lambda: f64,
) -> Result<WaveProfile> {
    let dir = Directional::new(model, e)?;
    let lt = dir.lambda_tilde(r);
    if lambda > lt * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "wave profile needs lambda <= {lt}, got {lambda}"
        )));
    }
    let (c, gap) = dir.speed_and_gap(r, lambda)?;
    Ok(WaveProfile {
        e: e.clone(),
        r,
        lambda,
        c,
        gap,
    })
}
