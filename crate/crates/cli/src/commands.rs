use kinspread::kinetic::{write_snapshot_csv, write_trace_csv};
use kinspread::{
    freidlin_gartner_speed, hamiltonian, in_singular_set, minimal_speed, nullset_radius,
    run_front_experiment, speed, Direction, InitialData, VelocityModel,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{CommandConfig, ModelSource, RunConfig};
use crate::error::CliResult;
use crate::output::{fmt, num, vector_header, Sink, Table};
use crate::spread_directions;

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let model = cfg.model.build(cfg.quad_options())?;
    let sink = Sink::new(cfg.out.as_deref())?;
    match &cfg.command {
        CommandConfig::Hamiltonian {
            points,
            grid,
            direction,
        } => {
            let mut ps = points.clone();
            if let Some(g) = grid {
                ps.extend(g.values().into_iter().map(|s| direction.scaled(s)));
            }
            hamiltonian_table(&model, &ps, &sink)
        }
        CommandConfig::Sing { points, directions } => sing(cfg, &model, points, directions, &sink),
        CommandConfig::SpeedCurve {
            direction,
            lambda_grid,
        } => speed_curve(
            cfg,
            &model,
            direction,
            lambda_grid.map(|g| g.values()),
            &sink,
        ),
        CommandConfig::Spreading { directions, times } => {
            spreading(cfg, &model, directions, times, &sink)
        }
        CommandConfig::Simulate { sim } => {
            let exp = run_front_experiment(&model, cfg.r, sim)?;
            let e = sim
                .direction
                .clone()
                .unwrap_or_else(|| Direction::axis(model.dim(), 0));
            let predicted = minimal_speed(&model, cfg.r, &e)?.c_star;
            let st = &exp.state;
            // probe five front widths behind the front, inside the window
            let behind = match (st.front_position(0.9), st.front_position(0.1)) {
                (Some(hi), Some(lo)) => {
                    Some(st.behind_front_profile((hi - 5.0 * (lo - hi)).max(st.x(0)))?)
                }
                _ => None,
            };
            sink.side_file("trace.csv", |w| write_trace_csv(&exp.trace, w))?;
            sink.side_file("snapshot.csv", |w| write_snapshot_csv(st, w))?;
            let sensitivity: Vec<Value> = exp
                .threshold_sensitivity
                .iter()
                .map(|&(level, c)| json!({"level": level, "fitted_speed": num(c)}))
                .collect();
            let summary = json!({
                "config": cfg,
                "fitted_speed": num(exp.trace.fitted_speed),
                "predicted_c_star": num(predicted),
                "relative_error": num(exp.trace.fitted_speed / predicted - 1.0),
                "threshold_sensitivity": sensitivity,
                "fit_window": [exp.trace.fit_window.0, exp.trace.fit_window.1],
                "fit_residual": num(exp.trace.residual),
                "steps": exp.steps,
                "clamp_count": st.clamp_count(),
                "clamp_max": num(st.clamp_max()),
                "behind_front": behind,
            });
            sink.summary("simulate.json", &summary)
        }
        CommandConfig::Sweep {
            models,
            r_values,
            angles,
            ..
        } => sweep(cfg, &model, models, r_values, *angles, &sink),
    }
}

fn cells(v: &[f64]) -> Vec<String> {
    v.iter().map(|&x| fmt(x)).collect()
}

fn hamiltonian_table(model: &VelocityModel, ps: &[Vec<f64>], sink: &Sink) -> CliResult<()> {
    let results = ps
        .par_iter()
        .map(|p| hamiltonian(model, p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut header = vector_header("p", model.dim());
    header.extend(["H", "regular", "dirac_weight"].map(String::from));
    let mut table = Table::new(&header);
    for res in results {
        let mut row = cells(&res.p);
        row.push(fmt(res.h));
        row.push(res.regular.to_string());
        row.push(fmt(res.dirac_weight));
        table.row(&row);
    }
    sink.primary_table("hamiltonian.csv", table)
}

fn sing(
    cfg: &RunConfig,
    model: &VelocityModel,
    points: &[Vec<f64>],
    directions: &[Direction],
    sink: &Sink,
) -> CliResult<()> {
    let dim = model.dim();
    if !points.is_empty() {
        let mut header = vector_header("p", dim);
        header.extend(["norm", "l", "singular"].map(String::from));
        let mut table = Table::new(&header);
        for p in points {
            let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            let l = if n > 0.0 {
                model.l_integral(&Direction::normalize(p)?)?
            } else {
                f64::INFINITY
            };
            let mut row = cells(p);
            row.extend([fmt(n), fmt(l), in_singular_set(model, p)?.to_string()]);
            table.row(&row);
        }
        return sink.primary_table("sing.csv", table);
    }
    // Along e the singular set starts at |p| = l(e).
    let rows = directions
        .par_iter()
        .map(|e| Ok((e, model.l_integral(e)?)))
        .collect::<kinspread::Result<Vec<_>>>()?;
    let mut header = vector_header("e", dim);
    header.extend(["boundary_radius", "lambda_tilde"].map(String::from));
    let mut table = Table::new(&header);
    for (e, l) in rows {
        let mut row = cells(e.components());
        row.extend([fmt(l), fmt((1.0 + cfg.r) * l)]);
        table.row(&row);
    }
    sink.primary_table("sing.csv", table)
}

fn speed_curve(
    cfg: &RunConfig,
    model: &VelocityModel,
    e: &Direction,
    grid: Option<Vec<f64>>,
    sink: &Sink,
) -> CliResult<()> {
    let curve = minimal_speed(model, cfg.r, e)?;
    let mut table = Table::new(&["lambda", "c", "branch"].map(String::from));
    match grid {
        Some(lams) => {
            let cs = lams
                .par_iter()
                .map(|&lam| speed(model, cfg.r, e, lam))
                .collect::<Result<Vec<_>, _>>()?;
            for (lam, c) in lams.iter().zip(cs) {
                let branch = if *lam <= curve.lambda_tilde {
                    "regular"
                } else {
                    "singular"
                };
                table.row(&[fmt(*lam), fmt(c), branch.into()]);
            }
        }
        None => {
            for ((lam, c), b) in curve
                .lambda_grid
                .iter()
                .zip(&curve.c_values)
                .zip(&curve.branch)
            {
                let branch = match b {
                    kinspread::Branch::Regular => "regular",
                    kinspread::Branch::Singular => "singular",
                };
                table.row(&[fmt(*lam), fmt(*c), branch.into()]);
            }
        }
    }
    sink.side_table("speed_curve.csv", table)?;
    let summary = json!({
        "config": cfg,
        "v_bar": num(curve.v_bar),
        "lambda_tilde": num(curve.lambda_tilde),
        "lambda_star": num(curve.lambda_star),
        "c_star": num(curve.c_star),
        "case_label": curve.case_label.to_string(),
        "left_derivative": curve.left_derivative_at_tilde.map(num),
        "minimum_attained": curve.minimum_attained,
    });
    sink.summary("speed_curve.json", &summary)
}

fn spreading(
    cfg: &RunConfig,
    model: &VelocityModel,
    directions: &[Direction],
    times: &[f64],
    sink: &Sink,
) -> CliResult<()> {
    let r = cfg.r;
    let rows = directions
        .par_iter()
        .map(|e0| -> kinspread::Result<Value> {
            let c_star = minimal_speed(model, r, e0)?.c_star;
            let w_star = freidlin_gartner_speed(model, r, e0)?;
            let mut planar = Vec::new();
            let mut point = Vec::new();
            for &t in times {
                let rp = nullset_radius(model, r, &InitialData::Planar(e0.clone()), e0, t)?;
                let rq = nullset_radius(model, r, &InitialData::Point, e0, t)?;
                planar.push(json!({"t": t, "radius": num(rp)}));
                point.push(json!({"t": t, "radius": num(rq)}));
            }
            Ok(json!({
                "e0": e0,
                "c_star": num(c_star),
                "w_star": num(w_star),
                "planar_radius": planar,
                "point_radius": point,
            }))
        })
        .collect::<kinspread::Result<Vec<_>>>()?;
    sink.summary(
        "spreading.json",
        &json!({"config": cfg, "directions": rows}),
    )
}

fn sweep(
    cfg: &RunConfig,
    model: &VelocityModel,
    names: &[String],
    r_values: &[f64],
    angles: usize,
    sink: &Sink,
) -> CliResult<()> {
    let mut models: Vec<(String, VelocityModel)> = Vec::new();
    if names.is_empty() {
        models.push((cfg.model.label(), model.clone()));
    } else {
        for name in names {
            let m = ModelSource::Preset(name.clone()).build(cfg.quad_options())?;
            models.push((name.clone(), m));
        }
    }
    let jobs: Vec<(usize, f64, Direction)> = models
        .iter()
        .enumerate()
        .flat_map(|(k, (_, m))| {
            let dirs = spread_directions(m.dim(), angles);
            r_values
                .iter()
                .flat_map(move |&r| dirs.clone().into_iter().map(move |e| (k, r, e)))
        })
        .collect();
    let curves = jobs
        .par_iter()
        .map(|(k, r, e)| minimal_speed(&models[*k].1, *r, e))
        .collect::<Result<Vec<_>, _>>()?;
    let header = [
        "model",
        "r",
        "e",
        "lambda_tilde",
        "lambda_star",
        "c_star",
        "case_label",
        "minimum_attained",
    ]
    .map(String::from);
    let mut table = Table::new(&header);
    for ((k, r, e), c) in jobs.iter().zip(curves) {
        let comps: Vec<String> = cells(e.components());
        table.row(&[
            models[*k].0.clone(),
            fmt(*r),
            comps.join(";"),
            fmt(c.lambda_tilde),
            fmt(c.lambda_star),
            fmt(c.c_star),
            c.case_label.to_string(),
            c.minimum_attained.to_string(),
        ]);
    }
    sink.primary_table("sweep.csv", table)
}
