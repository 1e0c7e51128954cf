//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any check fails that is not listed in `KNOWN_RED`.

use std::f64::consts::LN_2;
use std::process::ExitCode;
use std::time::Instant;

use kinspread::dispersion::Directional;
use kinspread::kinetic::FrontExperiment;
use kinspread::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Checks that cannot pass as stated. The required ball radius `(n-1)/n`
/// contradicts `Sing = {|p| >= l(e)}` with `l(e) = n/(n-1)`; the disk closed
/// form `H = |p|^2/4` for `|p| <= 2` confirms the boundary sits at `l(e)`.
const KNOWN_RED: &[&str] = &["2.radius"];

type Runs = Vec<(String, FrontExperiment)>;
type Criterion = Box<dyn FnOnce(&mut Runs) -> Vec<Check>>;

struct Check {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn check(id: &'static str, pass: bool, detail: String) -> Check {
    Check { id, pass, detail }
}

fn model(name: &str) -> VelocityModel {
    VelocityModel::preset(name, QuadOptions::default()).unwrap()
}

fn l_quadratic() -> f64 {
    3.0 * (2.0 * LN_2 - 1.0)
}

fn j_quadratic() -> f64 {
    6.0 * (1.0 - LN_2)
}

// ---------------------------------------------------------------------------
// independent closed forms

/// `int_0^1 (1-u)^2 / (a + b u) du`.
fn quad_piece(a: f64, b: f64) -> f64 {
    if b.abs() < 0.5 * a {
        let x = -b / a;
        let mut sum = 0.0;
        let mut pow = 1.0;
        for n in 0..200 {
            let k = n as f64;
            sum += pow * 2.0 / ((k + 1.0) * (k + 2.0) * (k + 3.0));
            pow *= x;
            if pow.abs() < 1e-20 {
                break;
            }
        }
        sum / a
    } else {
        let k = a + b;
        (k * k * (k / a).ln() - 2.0 * k * (k - a) + 0.5 * (k * k - a * a)) / (b * b * b)
    }
}

/// `int M / (1 + h - p v) dv` in closed form for the three reference models.
fn eigen_integral(name: &str, p: &[f64], h: f64) -> f64 {
    let a = 1.0 + h;
    let b = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    match name {
        "uniform-1d" => {
            if b == 0.0 {
                1.0 / a
            } else {
                ((a + b) / (a - b)).ln() / (2.0 * b)
            }
        }
        "quadratic-1d" => 1.5 * (quad_piece(a, -b) + quad_piece(a, b)),
        "uniform-ball:2" => 2.0 / (a + (a * a - b * b).max(0.0).sqrt()),
        _ => unreachable!(),
    }
}

/// `H(p)` for uniform-1d by bisection on `(1/2p) ln((1+H+p)/(1+H-p)) = 1`.
fn h_uniform_bisect(p: f64) -> f64 {
    let p = p.abs();
    if p == 0.0 {
        return 0.0;
    }
    let f = |h: f64| ((1.0 + h + p) / (1.0 + h - p)).ln() / (2.0 * p) - 1.0;
    let (mut lo, mut hi) = (p - 1.0, p + 1.0);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimal speed of uniform-1d from `H(p) = p coth p - 1`, by a golden search
/// that is independent of the library.
fn c_star_uniform(r: f64) -> f64 {
    let h = |p: f64| p / p.tanh() - 1.0;
    let c = |lam: f64| ((1.0 + r) * h(lam / (1.0 + r)) + r) / lam;
    let (mut a, mut b) = (1e-3, 50.0);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    while b - a > 1e-12 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if c(x1) <= c(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    c(0.5 * (a + b))
}

// ---------------------------------------------------------------------------
// criteria

fn closed_form_integrals() -> Vec<Check> {
    let t0 = Instant::now();
    let m = model("quadratic-1d");
    let e = Direction::axis(1, 0);
    let l = m.l_integral(&e).unwrap();
    let j = m.j_integral(&e).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    let (el, ej) = ((l - l_quadratic()).abs(), (j - j_quadratic()).abs());
    vec![
        check("1.l", el < 1e-8, format!("l err {el:.1e}")),
        check("1.j", ej < 1e-8, format!("j err {ej:.1e}")),
        check("1.time", dt < 1.0, format!("{dt:.3} s")),
    ]
}

fn ball_formula() -> Vec<Check> {
    let mut out = Vec::new();
    let mut l_err: f64 = 0.0;
    let mut radius_err: f64 = 0.0;
    let mut radii = Vec::new();
    for n in [2usize, 3] {
        let m = model(&format!("uniform-ball:{n}"));
        let nf = n as f64;
        let e = Direction::axis(n, 0);
        let l = m.l_integral(&e).unwrap();
        l_err = l_err.max((l - nf / (nf - 1.0)).abs());
        let mut lo = 0.0;
        let mut hi = 10.0;
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if in_singular_set(&m, &e.scaled(mid)).unwrap() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let rad = 0.5 * (lo + hi);
        radius_err = radius_err.max((rad - (nf - 1.0) / nf).abs());
        radii.push(format!(
            "n={n}: {rad:.9} (n/(n-1) = {:.9})",
            nf / (nf - 1.0)
        ));
    }
    out.push(check("2.l", l_err < 1e-6, format!("l err {l_err:.1e}")));
    out.push(check(
        "2.radius",
        radius_err < 1e-6,
        format!(
            "bisected boundary {}; off from (n-1)/n by {radius_err:.3}",
            radii.join(", ")
        ),
    ));
    out
}

fn hamiltonian_closed_form() -> Vec<Check> {
    let m = model("uniform-1d");
    let mut worst_closed: f64 = 0.0;
    let mut worst_bisect: f64 = 0.0;
    for i in 0..101 {
        let p = -5.0 + 0.1 * i as f64;
        let h = hamiltonian(&m, &[p]).unwrap().h;
        let closed = if p == 0.0 { 0.0 } else { p / p.tanh() - 1.0 };
        worst_closed = worst_closed.max((h - closed).abs());
        worst_bisect = worst_bisect.max((h - h_uniform_bisect(p)).abs());
    }
    vec![
        check(
            "3.closed",
            worst_closed < 1e-8,
            format!("vs p coth p - 1: {worst_closed:.1e}"),
        ),
        check(
            "3.bisect",
            worst_bisect < 1e-8,
            format!("vs log identity: {worst_bisect:.1e}"),
        ),
    ]
}

fn speed_curve_cases() -> Vec<Check> {
    let e = Direction::axis(1, 0);
    let quad = model("quadratic-1d");
    let l = quad.l_integral(&e).unwrap();
    let j = quad.j_integral(&e).unwrap();
    let r_crit = j / (l * l) - 1.0;
    let mut out = Vec::new();

    let c3 = minimal_speed(&quad, r_crit, &e).unwrap();
    let d3 = c3.left_derivative_at_tilde.unwrap_or(f64::NAN);
    out.push(check(
        "4.case3",
        c3.case_label == CaseLabel::Case3
            && d3.abs() < 1e-4
            && (c3.lambda_tilde - (1.0 + r_crit) * l).abs() < 1e-6
            && (c3.lambda_tilde - 1.5887).abs() < 1e-4
            && (c3.lambda_tilde - 1.58).abs() < 0.01,
        format!(
            "r={r_crit:.10} {} lambda~={:.7} c'={d3:.1e}",
            c3.case_label, c3.lambda_tilde
        ),
    ));

    let c4 = minimal_speed(&quad, 1.0, &e).unwrap();
    let d4 = c4.left_derivative_at_tilde.unwrap_or(f64::NAN);
    out.push(check(
        "4.case4",
        c4.case_label == CaseLabel::Case4
            && d4 < 0.0
            && (c4.lambda_tilde - 2.0 * l).abs() < 1e-6
            && (c4.lambda_tilde - 2.3178).abs() < 1e-4
            && (c4.lambda_tilde - 2.31).abs() < 0.01,
        format!(
            "{} lambda~={:.7} c'={d4:.4}",
            c4.case_label, c4.lambda_tilde
        ),
    ));

    let ball = model("uniform-ball:2");
    let e2 = Direction::axis(2, 0);
    let c2 = minimal_speed(&ball, 1.0, &e2).unwrap();
    let l2 = ball.l_integral(&e2).unwrap();
    out.push(check(
        "4.case2",
        c2.case_label == CaseLabel::Case2
            && (c2.lambda_tilde - 4.0).abs() < 1e-6
            && (c2.lambda_tilde - 2.0 * l2).abs() < 1e-6,
        format!("{} lambda~={:.9}", c2.case_label, c2.lambda_tilde),
    ));

    let c1 = minimal_speed(&model("uniform-1d"), 1.0, &e).unwrap();
    out.push(check(
        "4.case1",
        c1.case_label == CaseLabel::Case1 && c1.lambda_tilde == f64::INFINITY,
        format!("{} lambda~={}", c1.case_label, c1.lambda_tilde),
    ));
    out
}

fn classifier_equivalence() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut agree = 0;
    let mut total = 0;
    let mut label_agree = 0;
    for name in ["uniform-1d", "quadratic-1d", "uniform-ball:2", "two-speed"] {
        let m = model(name);
        let e = Direction::axis(m.dim(), 0);
        let dir = Directional::new(&m, &e).unwrap();
        for _ in 0..20 {
            let r = 3.0 * (1.0 - rng.random::<f64>());
            let lt = dir.lambda_tilde(r);
            let by_derivative = lt.is_finite() && dir.speed_derivative_left(r, lt).unwrap() <= 0.0;
            let by_inequality = minimum_at_tilde(&m, r, &e).unwrap();
            let label = minimal_speed(&m, r, &e).unwrap().case_label;
            total += 1;
            agree += (by_derivative == by_inequality) as usize;
            label_agree +=
                (matches!(label, CaseLabel::Case3 | CaseLabel::Case4) == by_inequality) as usize;
        }
    }
    vec![
        check("5.signs", agree == total, format!("{agree}/{total} agree")),
        check(
            "5.labels",
            label_agree == total,
            format!("case labels {label_agree}/{total}"),
        ),
    ]
}

fn hopf_lax_consistency() -> Vec<Check> {
    let t0 = Instant::now();
    let r = 1.0;
    let mut worst_planar: f64 = 0.0;
    let mut worst_point: f64 = 0.0;
    let cases = [
        ("quadratic-1d", Direction::axis(1, 0)),
        ("uniform-ball:2", Direction::from_angle(0.4)),
        ("cross-2d", Direction::from_angle(0.3)),
    ];
    for (name, e0) in cases {
        let m = model(name);
        let c = minimal_speed(&m, r, &e0).unwrap().c_star;
        let w = freidlin_gartner_speed(&m, r, &e0).unwrap();
        for t in [0.5, 1.0, 2.0, 4.0] {
            let planar = nullset_radius(&m, r, &InitialData::Planar(e0.clone()), &e0, t).unwrap();
            let point = nullset_radius(&m, r, &InitialData::Point, &e0, t).unwrap();
            worst_planar = worst_planar.max((planar / t - c).abs());
            worst_point = worst_point.max((point / t - w).abs());
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    vec![
        check(
            "6.planar",
            worst_planar < 1e-4,
            format!("planar {worst_planar:.1e}"),
        ),
        check(
            "6.point",
            worst_point < 1e-4,
            format!("point {worst_point:.1e}"),
        ),
        check("6.time", dt < 10.0, format!("{dt:.2} s")),
    ]
}

fn simulation(runs: &mut Runs) -> Vec<Check> {
    let config = SimConfig::default();
    let mut out = vec![check(
        "7.grid",
        config.dx == 0.005,
        format!("dx={}", config.dx),
    )];
    let predicted = [
        ("uniform-1d", "7.uniform", c_star_uniform(1.0)),
        (
            "quadratic-1d",
            "7.quadratic",
            1.0 - 1.0 / (2.0 * l_quadratic()),
        ),
        ("two-speed", "7.two-speed", 1.0),
    ];
    for (name, id, c_ref) in predicted {
        let m = model(name);
        let c_lib = minimal_speed(&m, 1.0, &Direction::axis(1, 0))
            .unwrap()
            .c_star;
        let t0 = Instant::now();
        let run = run_front_experiment(&m, 1.0, &config).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        let rel = run.trace.fitted_speed / c_ref - 1.0;
        out.push(check(
            id,
            rel.abs() < 0.03 && dt < 120.0 && (c_lib / c_ref - 1.0).abs() < 1e-6,
            format!(
                "{name}: fitted {:.5} vs {c_ref:.5} ({:+.2}%) in {dt:.1} s",
                run.trace.fitted_speed,
                100.0 * rel
            ),
        ));
        runs.push((name.to_string(), run));
    }
    out
}

fn diffusive_limit() -> Vec<Check> {
    let r = 1e-3;
    let c = minimal_speed(&model("uniform-1d"), r, &Direction::axis(1, 0))
        .unwrap()
        .c_star;
    let target = 2.0 * (r / 3.0).sqrt();
    let rel = c / target - 1.0;
    vec![check(
        "8",
        rel.abs() < 0.05,
        format!("c*={c:.6e} vs {target:.6e} ({:+.3}%)", 100.0 * rel),
    )]
}

fn property_suites(runs: &[(String, FrontExperiment)]) -> Vec<Check> {
    let mut out = Vec::new();
    let clamp = runs
        .iter()
        .map(|(_, r)| r.state.clamp_max())
        .fold(0.0, f64::max);
    out.push(check(
        "9.clamp",
        clamp < 1e-12 && !runs.is_empty(),
        format!("clamp {clamp:.1e}"),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(0xc0ffee);
    let mut sample = |dim: usize, radius: f64| -> Vec<f64> {
        loop {
            let p: Vec<f64> = (0..dim)
                .map(|_| rng.random_range(-radius..radius))
                .collect();
            if p.iter().map(|x| x * x).sum::<f64>() <= radius * radius {
                return p;
            }
        }
    };

    // midpoint convexity
    let mut violation: f64 = 0.0;
    let mut triples = 0;
    for (name, radius) in [
        ("uniform-1d", 5.0),
        ("quadratic-1d", 4.0),
        ("uniform-ball:2", 4.0),
        ("cross-2d", 4.0),
    ] {
        let m = model(name);
        for _ in 0..50 {
            let p = sample(m.dim(), radius);
            let q = sample(m.dim(), radius);
            let mid: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
            let h = |x: &[f64]| hamiltonian(&m, x).unwrap().h;
            let hp = h(&p);
            let hq = h(&q);
            let excess = h(&mid) - 0.5 * (hp + hq);
            violation = violation.max(excess / (1.0 + hp.abs() + hq.abs()));
            triples += 1;
        }
    }
    out.push(check(
        "9.convex",
        violation <= 1e-12 && triples == 200,
        format!("{triples} triples, worst excess {violation:.1e}"),
    ));

    // eigen identity against closed forms, regular p only
    let mut residual: f64 = 0.0;
    for (name, l) in [
        ("uniform-1d", f64::INFINITY),
        ("quadratic-1d", l_quadratic()),
        ("uniform-ball:2", 2.0),
    ] {
        let m = model(name);
        let radius = if l.is_finite() { 0.98 * l } else { 5.0 };
        for _ in 0..40 {
            let p = sample(m.dim(), radius);
            let res = hamiltonian(&m, &p).unwrap();
            assert!(res.regular);
            residual = residual.max((eigen_integral(name, &p, res.h) - 1.0).abs());
        }
    }
    out.push(check(
        "9.identity",
        residual < 1e-10,
        format!("residual {residual:.1e}"),
    ));

    // total mass, density part plus Dirac part
    let mut mass_err: f64 = 0.0;
    let mut dirac_err: f64 = 0.0;
    let mut singular = 0;
    for (name, l) in [("quadratic-1d", l_quadratic()), ("uniform-ball:2", 2.0)] {
        let m = model(name);
        for _ in 0..25 {
            let p = sample(m.dim(), 4.0);
            let res = hamiltonian(&m, &p).unwrap();
            let total = res.profile_mass(&m).unwrap() + res.dirac_weight;
            mass_err = mass_err.max((total - 1.0).abs());
            let pn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !res.regular {
                singular += 1;
                dirac_err = dirac_err.max((res.dirac_weight - (1.0 - l / pn)).abs());
            }
        }
    }
    out.push(check(
        "9.mass",
        mass_err < 1e-8 && dirac_err < 1e-8 && singular >= 10,
        format!(
            "50 samples ({singular} singular), mass err {mass_err:.1e}, Dirac err {dirac_err:.1e}"
        ),
    ));
    out
}

fn main() -> ExitCode {
    let mut runs = Vec::new();
    let criteria: Vec<(&str, &str, Criterion)> = vec![
        (
            "1",
            "closed-form l and j for quadratic-1d",
            Box::new(|_| closed_form_integrals()),
        ),
        (
            "2",
            "uniform-ball l(e) and singular-set radius",
            Box::new(|_| ball_formula()),
        ),
        (
            "3",
            "uniform-1d Hamiltonian closed form",
            Box::new(|_| hamiltonian_closed_form()),
        ),
        (
            "4",
            "speed-curve case reproduction",
            Box::new(|_| speed_curve_cases()),
        ),
        (
            "5",
            "classifier equivalence",
            Box::new(|_| classifier_equivalence()),
        ),
        (
            "6",
            "Hopf-Lax radii vs c* and w*",
            Box::new(|_| hopf_lax_consistency()),
        ),
        ("7", "simulated front speed vs c*", Box::new(simulation)),
        ("8", "diffusive limit", Box::new(|_| diffusive_limit())),
        (
            "9",
            "property suites",
            Box::new(|runs: &mut Vec<_>| property_suites(runs)),
        ),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let checks = run(&mut runs);
        let pass = checks.iter().all(|c| c.pass);
        println!("{} {id}: {name}", if pass { "PASS" } else { "FAIL" });
        for c in &checks {
            let known = KNOWN_RED.contains(&c.id);
            let tag = match (c.pass, known) {
                (true, _) => "ok",
                (false, true) => "known-red",
                (false, false) => "FAILED",
            };
            println!("    [{tag}] {}: {}", c.id, c.detail);
            if !c.pass && !known {
                unexpected.push(c.id);
            }
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {}", unexpected.join(", "));
        ExitCode::FAILURE
    }
}
