use std::process::{Command, Output};

use serde_json::Value;

fn kinspread(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinspread"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = kinspread(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout(args)).unwrap()
}

fn table(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn f(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn hamiltonian_grid_has_requested_rows() {
    let csv = stdout(&[
        "hamiltonian",
        "--model",
        "uniform-1d",
        "--p-grid",
        "-3:3:61",
    ]);
    assert_eq!(csv.lines().next().unwrap(), "p,H,regular,dirac_weight");
    let rows = table(&csv);
    assert_eq!(rows.len(), 61);
    assert!(rows.iter().any(|r| f(&r[0]) == 0.0 && f(&r[1]) == 0.0));
    for r in &rows {
        let p = f(&r[0]);
        let closed = if p == 0.0 { 0.0 } else { p / p.tanh() - 1.0 };
        assert!((f(&r[1]) - closed).abs() < 1e-12);
    }
}

#[test]
fn hamiltonian_singular_point() {
    let csv = stdout(&["hamiltonian", "--model", "quadratic-1d", "--p", "2.0"]);
    let r = &table(&csv)[0];
    assert_eq!(r[2], "false");
    assert!((f(&r[1]) - 1.0).abs() < 1e-12);
    let l = 3.0 * (2.0 * 2f64.ln() - 1.0);
    assert!((f(&r[3]) - (1.0 - l / 2.0)).abs() < 1e-10);
}

#[test]
fn disk_singular_set_starts_at_radius_two() {
    // inside the disk boundary H = |p|^2 / 4
    let csv = stdout(&[
        "hamiltonian",
        "--model",
        "uniform-ball:2",
        "--p",
        "0.6,0",
        "--p",
        "2.1,0",
    ]);
    let rows = table(&csv);
    assert_eq!(rows[0][3], "true");
    assert!((f(&rows[0][2]) - 0.09).abs() < 1e-12);
    assert_eq!(rows[1][3], "false");
    assert!((f(&rows[1][2]) - 1.1).abs() < 1e-12);

    let csv = stdout(&[
        "sing",
        "--model",
        "uniform-ball:2",
        "--directions",
        "4",
        "--r",
        "1",
    ]);
    for r in table(&csv) {
        assert!((f(&r[2]) - 2.0).abs() < 1e-9);
        assert!((f(&r[3]) - 4.0).abs() < 1e-9);
    }
}

#[test]
fn speed_curve_cases() {
    let s = json(&["speed-curve", "--model", "quadratic-1d", "--r", "1"]);
    assert_eq!(s["case_label"], "Case4");
    assert!((s["lambda_tilde"].as_f64().unwrap() - 2.3178).abs() < 1e-4);
    assert!(s["left_derivative"].as_f64().unwrap() < 0.0);

    let s = json(&[
        "speed-curve",
        "--model",
        "quadratic-1d",
        "--r",
        "0.37088846",
    ]);
    assert_eq!(s["case_label"], "Case3");
    assert!((s["lambda_tilde"].as_f64().unwrap() - 1.5887).abs() < 1e-4);

    // rounded to four digits the rate sits just past the critical value
    let s = json(&["speed-curve", "--model", "quadratic-1d", "--r", "0.3709"]);
    assert!(s["left_derivative"].as_f64().unwrap().abs() < 1e-4);

    let s = json(&["speed-curve", "--model", "uniform-1d", "--r", "1"]);
    assert_eq!(s["case_label"], "Case1");
    assert_eq!(s["lambda_tilde"], "inf");

    let s = json(&["speed-curve", "--model", "two-speed", "--r", "2"]);
    assert_eq!(s["c_star"].as_f64().unwrap(), 1.0);
    assert_eq!(s["minimum_attained"], false);
}

#[test]
fn speed_curve_writes_table_with_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let s = json(&[
        "speed-curve",
        "--model",
        "quadratic-1d",
        "--lambda-grid",
        "0.5:4:8",
        "--out",
        out,
    ]);
    let lt = s["lambda_tilde"].as_f64().unwrap();
    let csv = std::fs::read_to_string(dir.path().join("speed_curve.csv")).unwrap();
    let rows = table(&csv);
    assert_eq!(rows.len(), 8);
    for r in rows {
        let lam = f(&r[0]);
        assert_eq!(r[2], if lam <= lt { "regular" } else { "singular" });
        if lam > lt {
            assert!((f(&r[1]) - (1.0 - 1.0 / lam)).abs() < 1e-12);
        }
    }
    assert!(dir.path().join("speed_curve.json").exists());
}

#[test]
fn spreading_summaries() {
    let s = json(&[
        "spreading",
        "--model",
        "uniform-ball:2",
        "--directions",
        "8",
        "--r",
        "1",
    ]);
    let dirs = s["directions"].as_array().unwrap();
    assert_eq!(dirs.len(), 8);
    let c0 = dirs[0]["c_star"].as_f64().unwrap();
    for d in dirs {
        assert!((d["c_star"].as_f64().unwrap() - c0).abs() < 1e-6);
    }

    let s = json(&["spreading", "--model", "quadratic-1d", "--times", "1,2"]);
    let d = &s["directions"][0];
    let c = d["c_star"].as_f64().unwrap();
    assert_eq!(d["w_star"].as_f64().unwrap(), c);
    let planar = d["planar_radius"][0]["radius"].as_f64().unwrap();
    assert!((planar - c).abs() < 1e-4);
    let point = d["point_radius"][1]["radius"].as_f64().unwrap();
    assert!((point - 2.0 * c).abs() < 1e-4);
}

#[test]
fn summaries_carry_their_config() {
    let s = json(&[
        "spreading",
        "--model",
        "uniform-1d",
        "--r",
        "0.5",
        "--quad-level",
        "3",
    ]);
    let cfg = &s["config"];
    assert_eq!(cfg["model"]["preset"], "uniform-1d");
    assert_eq!(cfg["r"], 0.5);
    assert_eq!(cfg["quad_level"], 3);
    assert_eq!(cfg["command"]["name"], "spreading");
}

#[test]
fn simulate_writes_files_deterministically() {
    let run = |dir: &std::path::Path| {
        json(&[
            "simulate",
            "--model",
            "uniform-1d",
            "--dx",
            "0.02",
            "--t-end",
            "30",
            "--length",
            "30",
            "--front-anchor",
            "0.6",
            "--out",
            dir.to_str().unwrap(),
        ])
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let s = run(a.path());
    run(b.path());
    for name in ["trace.csv", "snapshot.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs between identical runs");
    }
    assert!(s["relative_error"].as_f64().unwrap().abs() < 0.05);
    assert_eq!(s["threshold_sensitivity"].as_array().unwrap().len(), 3);
    assert_eq!(s["clamp_count"], 0);
    assert!(s["behind_front"]["rho_deviation"].as_f64().unwrap() < 1e-3);
    let trace = std::fs::read_to_string(a.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "t,front_x");
}

#[test]
fn sweep_is_reproducible_with_a_seed() {
    let args = [
        "sweep",
        "--models",
        "uniform-1d,quadratic-1d",
        "--random-r",
        "3",
        "--seed",
        "11",
    ];
    let a = stdout(&args);
    assert_eq!(a, stdout(&args));
    assert_eq!(table(&a).len(), 2 * 3 * 2);
}

#[test]
fn custom_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.toml");
    std::fs::write(
        &path,
        "support = \"interval\"\nlower = -1.0\nupper = 1.0\ndensity = \"power\"\nexponent = 2.0\n",
    )
    .unwrap();
    let s = json(&[
        "speed-curve",
        "--model-file",
        path.to_str().unwrap(),
        "--r",
        "1",
    ]);
    assert_eq!(s["case_label"], "Case4");
    assert!((s["lambda_tilde"].as_f64().unwrap() - 2.3178).abs() < 1e-4);
    assert!(s["config"]["model"]["file"]["spec"]["exponent"].as_f64() == Some(2.0));
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| kinspread(args).status.code().unwrap();
    assert_eq!(code(&["speed-curve", "--model", "no-such-model"]), 2);
    assert_eq!(code(&["speed-curve", "--r", "-1"]), 2);
    assert_eq!(code(&["hamiltonian", "--model", "uniform-1d"]), 2);
    assert_eq!(
        code(&["hamiltonian", "--model", "uniform-ball:2", "--p", "1"]),
        2
    );
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(
        code(&[
            "simulate",
            "--model",
            "uniform-1d",
            "--dx",
            "0.02",
            "--length",
            "0.5",
            "--t-end",
            "5",
        ]),
        4
    );
    let bad = kinspread(&["speed-curve", "--model", "no-such-model"]);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("no-such-model"));
}
