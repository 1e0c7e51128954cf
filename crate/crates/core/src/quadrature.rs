//! Gauss-Legendre rules and geometrically graded composite rules.
//!
//! Integrals over the velocity set are reduced to one-dimensional integrals
//! against a projected density on `[lo, top]`. The integrands of interest
//! (`1 / (top - s)`, `1 / (1 + h - |p| s)`, ...) blow up, or nearly blow up,
//! at the top end, so the top half of the last segment is cut into dyadic
//! panels `[top - w 2^-k, top - w 2^-(k+1)]`. Each panel is a "level"; the
//! sequence of per-level contributions tells us whether the integral
//! converges, and at which geometric rate, which lets us extrapolate the
//! part of the integral that sits closer to `top` than the finest panel.

use crate::error::{Error, Result};

/// Ratio of successive level contributions at or above which an integral is
/// declared divergent. Contributions of `(top - s)^a` decay like `2^-(a+1)`,
/// so this flags every exponent `a <= -0.971`.
pub const DIVERGENT_RATIO: f64 = 0.98;

/// Tuning knobs shared by every quadrature in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    /// Refinement level. Each Gauss-Legendre panel uses `10 * level` nodes.
    pub level: u32,
    /// Number of dyadic panels toward the singular end.
    pub grading_levels: usize,
    /// Number of dyadic panels toward the other segment ends.
    pub end_levels: usize,
    /// Relative tolerance of the refinement loop in [`refine`].
    pub rtol: f64,
    /// Partial sums above this value are treated as divergent.
    pub divergence_cap: f64,
    /// Maximum number of doublings in [`refine`].
    pub max_refinements: u32,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            level: 2,
            grading_levels: 64,
            end_levels: 30,
            rtol: 1e-10,
            divergence_cap: 1e8,
            max_refinements: 6,
        }
    }
}

impl QuadOptions {
    pub fn with_level(level: u32) -> Self {
        QuadOptions {
            level,
            ..Self::default()
        }
    }

    pub fn gauss_order(&self) -> usize {
        10 * self.level.max(1) as usize
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi's initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A plain list of nodes and weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn sum(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    fn push_panel(&mut self, a: f64, b: f64, gl: &(Vec<f64>, Vec<f64>)) {
        if b <= a {
            return;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in gl.0.iter().zip(&gl.1) {
            self.nodes.push(mid + half * x);
            self.weights.push(half * w);
        }
    }

    /// Composite Gauss-Legendre rule on `[a, b]` graded dyadically toward
    /// both ends, with `levels` panels per end.
    pub fn graded(a: f64, b: f64, order: usize, levels: usize) -> Rule {
        let gl = gauss_legendre(order);
        let mut rule = Rule::default();
        push_graded_segment(&mut rule, a, b, levels, levels, &gl);
        rule
    }

    /// Like [`Rule::graded`], split at interior breakpoints (kinks of the
    /// integrand). Breakpoints outside `(a, b)` are ignored.
    pub fn graded_with_breaks(a: f64, b: f64, breaks: &[f64], order: usize, levels: usize) -> Rule {
        let gl = gauss_legendre(order);
        let mut rule = Rule::default();
        for (lo, hi) in segments(a, b, breaks) {
            push_graded_segment(&mut rule, lo, hi, levels, levels, &gl);
        }
        rule
    }
}

fn segments(a: f64, b: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut lo = a;
    for c in cuts {
        out.push((lo, c));
        lo = c;
    }
    out.push((lo, b));
    out
}

fn push_graded_segment(
    rule: &mut Rule,
    a: f64,
    b: f64,
    levels_lo: usize,
    levels_hi: usize,
    gl: &(Vec<f64>, Vec<f64>),
) {
    let mid = 0.5 * (a + b);
    let half = mid - a;
    let mut w = half;
    for _ in 0..levels_lo {
        rule.push_panel(a + 0.5 * w, a + w, gl);
        w *= 0.5;
    }
    rule.push_panel(a, a + w, gl);
    let mut w = half;
    for _ in 0..levels_hi {
        rule.push_panel(b - w, b - 0.5 * w, gl);
        w *= 0.5;
    }
    rule.push_panel(b - w, b, gl);
}

/// Nodes `s` with their exact distances `t = top - s` to the upper end.
#[derive(Debug, Clone, Default, PartialEq)]
struct GapRule {
    s: Vec<f64>,
    t: Vec<f64>,
    w: Vec<f64>,
}

impl GapRule {
    fn from_rule(rule: Rule, top: f64) -> Self {
        let t = rule.nodes.iter().map(|s| top - s).collect();
        GapRule {
            s: rule.nodes,
            t,
            w: rule.weights,
        }
    }

    /// Panel `[top - hi, top - lo]` built in gap coordinates.
    fn gap_panel(top: f64, lo: f64, hi: f64, gl: &(Vec<f64>, Vec<f64>)) -> Self {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut r = GapRule::default();
        for (x, w) in gl.0.iter().zip(&gl.1) {
            let t = mid + half * x;
            r.s.push(top - t);
            r.t.push(t);
            r.w.push(half * w);
        }
        r
    }

    fn sum(&self, f: &impl Fn(f64, f64) -> f64) -> f64 {
        self.s
            .iter()
            .zip(&self.t)
            .zip(&self.w)
            .map(|((&s, &t), &w)| w * f(s, t))
            .sum()
    }
}

/// A finite measure on `[lo, top]` discretised with dyadic grading toward
/// `top`. Weights already include the density. Integrands receive both the
/// node `s` and its gap `t = top - s`, which is exact even when tiny.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedMeasure {
    lo: f64,
    top: f64,
    body: GapRule,
    levels: Vec<GapRule>,
    remainder: GapRule,
}

impl GradedMeasure {
    /// Discretise `density(s, top - s)` on `[lo, top]`, with kinks at `breaks`.
    pub fn new(
        lo: f64,
        top: f64,
        breaks: &[f64],
        density: impl Fn(f64, f64) -> f64,
        opts: &QuadOptions,
    ) -> Self {
        let gl = gauss_legendre(opts.gauss_order());
        let segs = segments(lo, top, breaks);
        let mut body = Rule::default();
        let (last_lo, last_hi) = *segs.last().expect("at least one segment");
        for &(a, b) in &segs[..segs.len() - 1] {
            push_graded_segment(&mut body, a, b, opts.end_levels, opts.end_levels, &gl);
        }
        // lower half of the last segment
        let half = 0.5 * (last_hi - last_lo);
        let mut w = half;
        for _ in 0..opts.end_levels {
            body.push_panel(last_lo + 0.5 * w, last_lo + w, &gl);
            w *= 0.5;
        }
        body.push_panel(last_lo, last_lo + w, &gl);
        let mut body = GapRule::from_rule(body, top);

        let mut levels = Vec::with_capacity(opts.grading_levels);
        let mut w = half;
        for _ in 0..opts.grading_levels {
            levels.push(GapRule::gap_panel(top, 0.5 * w, w, &gl));
            w *= 0.5;
        }
        let mut remainder = GapRule::gap_panel(top, 0.0, w, &gl);

        let weigh = |rule: &mut GapRule| {
            for ((s, t), w) in rule.s.iter().zip(&rule.t).zip(rule.w.iter_mut()) {
                *w *= density(*s, *t);
            }
        };
        weigh(&mut body);
        levels.iter_mut().for_each(weigh);
        weigh(&mut remainder);
        GradedMeasure {
            lo,
            top,
            body,
            levels,
            remainder,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn top(&self) -> f64 {
        self.top
    }

    /// Every node with its density-weighted weight.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        std::iter::once(&self.body)
            .chain(self.levels.iter())
            .chain(std::iter::once(&self.remainder))
            .flat_map(|r| r.s.iter().copied().zip(r.w.iter().copied()))
    }

    /// Integral of `f(s, top - s)` for `f` finite on `[lo, top]`. Near-singular
    /// behaviour at `top` is handled by geometric tail extrapolation when the
    /// level contributions decay at a stable rate.
    pub fn integrate_regular(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let (partial, d) = self.partial_sums(&f);
        let k = d.len();
        // Halving contributions mean f is already flat on the last panels,
        // so the remainder panel resolves it directly.
        if k >= 2 && d[k - 2] != 0.0 && (d[k - 1] / d[k - 2] - 0.5).abs() < 1e-3 {
            return partial + self.remainder.sum(&f);
        }
        match geometric_tail(&d) {
            Tail::Geometric(t) | Tail::Negligible(t) => partial + t,
            _ => partial + self.remainder.sum(&f),
        }
    }

    /// Integral of a non-negative `f(s, top - s)` that may be singular at
    /// `top`. Returns `f64::INFINITY` when the integral diverges.
    pub fn integrate_singular(
        &self,
        f: impl Fn(f64, f64) -> f64,
        opts: &QuadOptions,
        what: &'static str,
    ) -> Result<f64> {
        let (partial, d) = self.partial_sums(&f);
        if !partial.is_finite() || partial > opts.divergence_cap {
            return Ok(f64::INFINITY);
        }
        match geometric_tail(&d) {
            Tail::Geometric(t) | Tail::Negligible(t) => Ok(partial + t),
            Tail::Divergent => Ok(f64::INFINITY),
            Tail::Unstable => Err(Error::QuadratureNotConverged {
                what,
                levels: d.len(),
            }),
        }
    }

    fn partial_sums(&self, f: &impl Fn(f64, f64) -> f64) -> (f64, Vec<f64>) {
        let d: Vec<f64> = self.levels.iter().map(|r| r.sum(f)).collect();
        let partial = self.body.sum(f) + d.iter().sum::<f64>();
        (partial, d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tail {
    Negligible(f64),
    Geometric(f64),
    Divergent,
    Unstable,
}

fn geometric_tail(d: &[f64]) -> Tail {
    let k = d.len();
    if k < 3 {
        return Tail::Unstable;
    }
    let total: f64 = d.iter().map(|x| x.abs()).sum();
    let (d1, d2, d3) = (d[k - 1], d[k - 2], d[k - 3]);
    if d1.abs() <= 1e-15 * total.max(f64::MIN_POSITIVE) {
        return Tail::Negligible(0.0);
    }
    if d2 == 0.0 || d3 == 0.0 {
        return Tail::Unstable;
    }
    let q1 = d1 / d2;
    let q2 = d2 / d3;
    if q1 >= DIVERGENT_RATIO && q2 >= DIVERGENT_RATIO {
        return Tail::Divergent;
    }
    if q1 <= 0.0 || (q1 - q2).abs() > 1e-3 * q1.max(1e-3) {
        return Tail::Unstable;
    }
    if q1 >= DIVERGENT_RATIO {
        return Tail::Divergent;
    }
    Tail::Geometric(d1 * q1 / (1.0 - q1))
}

/// Repeats `eval(level)` with doubled levels until successive values agree
/// to `rtol` relative to `scale(level)`.
pub fn refine(
    opts: &QuadOptions,
    what: &'static str,
    mut eval: impl FnMut(u32) -> (f64, f64),
) -> Result<f64> {
    let mut level = opts.level.max(1);
    let (mut prev, _) = eval(level);
    for _ in 0..opts.max_refinements {
        level *= 2;
        let (next, scale) = eval(level);
        if (next - prev).abs() <= opts.rtol * scale.max(f64::MIN_POSITIVE) || next == prev {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNotConverged {
        what,
        levels: opts.max_refinements as usize,
    })
}
