use std::process::Command;

use peakref_cli::commands;
use peakref_cli::config::Sweep;
use peakref_cli::output::{Cell, Table};
use peakref_cli::verify::{self, BoundaryRegime};
use peakref_cli::RunConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_peakref"))
}

fn write_config(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn nums(t: &Table, col: &str) -> Vec<f64> {
    t.column(col)
        .unwrap()
        .into_iter()
        .map(|c| match c {
            Cell::Num(v) => *v,
            other => panic!("{other:?} is not a number"),
        })
        .collect()
}

#[test]
fn validate_baseline_reports_bound() {
    let out = bin().arg("validate").output().unwrap();
    assert!(out.status.success());
    let s = String::from_utf8(out.stdout).unwrap();
    let bound: f64 = s
        .lines()
        .find_map(|l| l.strip_prefix("beta_bound,"))
        .unwrap()
        .parse()
        .unwrap();
    // Roots of eta^2 - eta - 2.5 give -r2/r1 = (sqrt(11) - 1)/(sqrt(11) + 1).
    let want = (11f64.sqrt() - 1.0) / (11f64.sqrt() + 1.0);
    assert!((bound - want).abs() < 1e-12);
    assert!((bound - 0.5367).abs() < 1e-4);
    assert!(s.contains("a1_holds,true"));
}

#[test]
fn validate_rejects_lambda_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(&dir, "c.json", r#"{"params": {"r": 0.05, "rho": 0.05, "mu": 0.1, "sigma": 0.25, "beta1": 0.2, "beta2": 0.3, "k": 1.5, "lambda": 1.0}}"#);
    let out = bin().arg("validate").arg("--config").arg(&p).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("RangeError"));
}

#[test]
fn validate_rejects_malformed_json() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(&dir, "c.json", r#"{"params": {"r": 0.05,"#);
    let out = bin().arg("validate").arg("--config").arg(&p).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ParseError"));
}

#[test]
fn validate_rejects_a1_violation() {
    let mut cfg = RunConfig::default();
    cfg.params.beta2 = 0.6;
    let e = commands::validate_cmd(&cfg).unwrap_err();
    assert!(e.to_string().contains("AssumptionA1Violated"), "{e}");
}

#[test]
fn boundaries_tag_reference_regimes() {
    for (p, want) in verify::regime_sets() {
        let cfg = RunConfig {
            params: p,
            ..RunConfig::default()
        };
        let t = commands::boundaries(&cfg).unwrap();
        assert_eq!(t.rows.len(), 200);
        for tag in t.column("regime").unwrap() {
            assert_eq!(tag, &Cell::Text(want.name().into()));
        }
        let zero = nums(&t, "x_zero");
        let aggr = nums(&t, "x_aggr");
        let lavs = nums(&t, "x_lavs");
        for i in 0..zero.len() {
            assert!(zero[i] <= aggr[i] && aggr[i] < lavs[i]);
        }
        if want == BoundaryRegime::Separated {
            assert!(zero.iter().zip(&aggr).all(|(a, b)| a < b));
        }
    }
}

#[test]
fn boundaries_csv_via_binary_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let st = bin().args(["boundaries", "--out"]).arg(&out).status().unwrap();
    assert!(st.success());
    let s = std::fs::read_to_string(&out).unwrap();
    assert!(s.starts_with("# schema_version: 1\n# command: boundaries\n# params: {"));
    assert!(s.contains("\nh,x_zero,x_aggr,x_lavs,coincident,regime\n"));
    assert_eq!(s.lines().filter(|l| l.ends_with(",separated")).count(), 200);
}

fn sweep(param: &str, values: &[f64]) -> Table {
    let cfg = RunConfig {
        sweep: Sweep {
            param: param.into(),
            values: values.to_vec(),
        },
        ..RunConfig::default()
    };
    commands::sensitivity(&cfg).unwrap()
}

/// Per-sweep-value boundaries and values, in sweep order.
fn by_sweep(t: &Table) -> Vec<(f64, f64, f64, Vec<f64>)> {
    let s = nums(t, "sweep_value");
    let (z, a, l, v) = (nums(t, "x_zero"), nums(t, "x_aggr"), nums(t, "x_lavs"), nums(t, "value"));
    let mut out: Vec<(f64, f64, f64, Vec<f64>)> = Vec::new();
    for i in 0..s.len() {
        if i == 0 || s[i] != s[i - 1] {
            out.push((z[i], a[i], l[i], Vec::new()));
        }
        out.last_mut().unwrap().3.push(v[i]);
    }
    out
}

#[test]
fn sensitivity_in_lambda() {
    let rows = by_sweep(&sweep("lambda", &[0.1, 0.3, 0.5, 0.7, 0.9]));
    assert_eq!(rows.len(), 5);
    for w in rows.windows(2) {
        assert!(w[1].0 > w[0].0, "x_zero not increasing");
        assert!(w[1].1 < w[0].1, "x_aggr not decreasing");
        assert!(w[1].2 < w[0].2, "x_lavs not decreasing");
    }
}

#[test]
fn sensitivity_in_mu() {
    let rows = by_sweep(&sweep("mu", &[0.06, 0.08, 0.1, 0.12, 0.14]));
    for (i, w) in rows.windows(2).enumerate() {
        assert!(w[1].0 < w[0].0, "x_zero not decreasing");
        assert!(w[1].2 > w[0].2, "x_lavs not increasing");
        assert!(w[0].3.iter().zip(&w[1].3).all(|(a, b)| b > a), "value not increasing");
        if i < 3 {
            assert!(w[1].1 < w[0].1, "x_aggr not decreasing");
        }
    }
    // Near the curvature bound (beta2 = 0.3 against -r2/r1 = 0.338 at mu = 0.14)
    // x_aggr turns back up: 15.71 at mu = 0.12, 16.17 at mu = 0.14.
    assert!(rows[4].1 > rows[3].1);
}

#[test]
fn sensitivity_rejects_other_parameters() {
    let cfg = RunConfig {
        sweep: Sweep {
            param: "sigma".into(),
            values: vec![0.2],
        },
        ..RunConfig::default()
    };
    assert!(commands::sensitivity(&cfg).is_err());
}

#[test]
fn policy_table_and_asymptotics_render() {
    let mut cfg = RunConfig::default();
    cfg.grid.h_points = 3;
    cfg.grid.x_points = 4;
    let t = commands::policy_table(&cfg).unwrap();
    assert_eq!(t.rows.len(), 12);
    let json: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
    assert_eq!(json["columns"][2], "region");
    assert_eq!(json["columns"][0], "x");
    let a = commands::asymptotics(&cfg).unwrap();
    let l1 = a.rows.iter().find(|r| r[0] == Cell::Text("L1".into())).unwrap();
    assert!(matches!(l1[2], Cell::Num(v) if (v - 0.0484495).abs() < 1e-6));
}

#[test]
fn simulate_small_run_is_deterministic() {
    let args = [
        "simulate", "--paths", "64", "--dt", "0.01", "--horizon", "5", "--seed", "9", "--format", "json",
    ];
    let a = bin().args(args).output().unwrap();
    let b = bin().args(args).output().unwrap();
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["meta"]["seed"], 9);
}
