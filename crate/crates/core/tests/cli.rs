use std::f64::consts::{PI, SQRT_2};
use std::path::PathBuf;

use qbm_core::cli::{run, EXIT_OK, EXIT_SINGULAR, EXIT_USAGE};
use serde_json::Value;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn qbm(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("qbm").chain(args.iter().copied()), &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn json(args: &[&str]) -> Value {
    let o = qbm(args);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    serde_json::from_str(&o.stdout).unwrap()
}

fn result<'a>(v: &'a Value, quantity: &str) -> &'a Value {
    v["results"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["quantity"] == quantity)
        .unwrap_or_else(|| panic!("no {quantity}"))
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn scratch_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("qbm-cli-test-{}-{name}", std::process::id()))
}

#[test]
fn eval_regular_point() {
    let v = json(&["eval", "--g", "1", "--m", "1", "--x", "1", "--tau", "1"]);
    let vel = result(&v, "velocity_dispersion");
    assert!((vel["value"].as_f64().unwrap() + 0.045786).abs() < 1e-6);
    assert_eq!(vel["regular"], true);
    assert_eq!(vel["label"], "subvacuum");
    assert_eq!(vel["provenance"], "closed-form");
    assert_eq!(v["params"]["tau"], 1.0);
    assert_eq!(v["report"]["command"][0], "eval");
}

#[test]
fn eval_round_trip_needs_permission() {
    let o = qbm(&["eval", "--tau", "2"]);
    assert_eq!(o.code, EXIT_SINGULAR);
    assert!(o.stdout.is_empty());

    let v = json(&[
        "eval",
        "--g",
        "1",
        "--m",
        "1",
        "--x",
        "1",
        "--tau",
        "2",
        "--allow-singular",
    ]);
    let vel = result(&v, "velocity_dispersion");
    assert_eq!(vel["regular"], false);
    assert!(vel["value"].is_null());
    let pos = result(&v, "position_dispersion")["value"].as_f64().unwrap();
    assert!((pos + 1.0 / PI).abs() < 1e-15);
}

#[test]
fn eval_zero_coupling() {
    let v = json(&[
        "eval", "--g", "0", "--m", "1", "--x", "1", "--tau", "5", "--sigma", "0.1",
    ]);
    for q in [
        "velocity_dispersion",
        "position_dispersion",
        "smeared_velocity_dispersion",
    ] {
        assert_eq!(result(&v, q)["value"], 0.0, "{q}");
    }
}

#[test]
fn eval_with_smearing() {
    let v = json(&["eval", "--tau", "2", "--allow-singular", "--sigma", "0.1,0.05"]);
    let smeared: Vec<&Value> = v["results"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["provenance"] == "smeared")
        .collect();
    assert_eq!(smeared.len(), 2);
    assert!((smeared[0]["value"].as_f64().unwrap() + 0.35582569502434835).abs() < 1e-9);
    assert_eq!(smeared[1]["sigma_over_x"], 0.05);
}

#[test]
fn usage_errors() {
    for args in [
        &["eval"][..],
        &["eval", "--tau", "-1"],
        &["eval", "--tau", "1", "--m", "0"],
        &["eval", "--tau", "1", "--x", "nan"],
        &["figure", "fig4"],
        &["figure", "fig3"],
        &["figure", "fig1", "--start", "3", "--stop", "1"],
        &["figure", "fig3", "--sigma", "0.1", "--start", "0"],
        &["compare-em", "--count", "1"],
        &["verify", "--grid", "0,1"],
        &["nonsense"],
    ] {
        assert_eq!(qbm(args).code, EXIT_USAGE, "{args:?}");
    }
    assert_eq!(qbm(&["--help"]).code, EXIT_OK);
}

#[test]
fn figures_are_deterministic() {
    for args in [
        &["figure", "fig1"][..],
        &["figure", "fig2", "--g", "0.1"],
        &["figure", "fig3", "--sigma", "0.2,0.1", "--count", "20"],
        &["figure", "fig1", "--format", "json"],
    ] {
        let a = qbm(args);
        let b = qbm(args);
        assert_eq!(a.code, EXIT_OK);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn fig1_crosses_zero_at_window_edge() {
    let o = qbm(&["figure", "fig1"]);
    let rows = csv_rows(&o.stdout);
    assert_eq!(rows.len(), 80);
    assert!(o.stdout.starts_with("tau_over_x,value\n"));
    let spacing = 3.95 / 79.0;
    let mut crossings = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for r in &rows {
        let t: f64 = r[0].parse().unwrap();
        if r[1].is_empty() {
            assert!((t - 2.0).abs() < 1e-12, "only the round trip is blank");
            prev = None;
            continue;
        }
        let v: f64 = r[1].parse().unwrap();
        if let Some((pt, pv)) = prev {
            if pv < 0.0 && v >= 0.0 {
                crossings.push((pt, t));
            }
        }
        prev = Some((t, v));
    }
    assert_eq!(crossings.len(), 1);
    let (lo, hi) = crossings[0];
    assert!(lo - spacing <= 2.0 * SQRT_2 && 2.0 * SQRT_2 <= hi + spacing);
}

#[test]
fn fig2_round_trip_value() {
    let o = qbm(&["figure", "fig2", "--g", "0.3", "--m", "1.5"]);
    let row = csv_rows(&o.stdout).into_iter().find(|r| r[0] == "2").unwrap();
    let v: f64 = row[1].parse().unwrap();
    assert!((v + 0.04 / PI).abs() < 1e-15);
}

#[test]
fn fig3_has_sigma_column() {
    let o = qbm(&["figure", "fig3", "--sigma", "0.2,0.1,0.05", "--count", "9"]);
    assert!(o.stdout.starts_with("tau_over_x,value,sigma_over_x\n"));
    let rows = csv_rows(&o.stdout);
    assert_eq!(rows.len(), 27);
    assert!(rows
        .iter()
        .all(|r| !r[1].is_empty() && r[1].parse::<f64>().unwrap().is_finite()));
    assert_eq!(rows[26][2], "0.05");
}

#[test]
fn compare_em_rows() {
    let o = qbm(&["compare-em"]);
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stdout.starts_with("tau_over_x,scalar_velocity,em_perp,em_parallel\n"));
    let rows = csv_rows(&o.stdout);
    assert_eq!(rows.len(), 81);
    assert_eq!(rows[0], ["0", "0", "0", "0"]);
    assert_eq!(rows[40], ["2", "", "", ""]);
    assert!(!o.stdout.contains("-0,"));

    let late = qbm(&[
        "compare-em",
        "--e",
        "2",
        "--start",
        "1000",
        "--stop",
        "10000",
        "--count",
        "2",
    ]);
    let last = csv_rows(&late.stdout).pop().unwrap();
    let perp: f64 = last[2].parse().unwrap();
    let par: f64 = last[3].parse().unwrap();
    assert!((perp / (4.0 / (4.0 * PI * PI)) - 1.0).abs() < 1e-3);
    assert!(par.abs() < 1e-3 * perp);
}

#[test]
fn output_file_and_config() {
    let cfg = scratch_path("recipe.cfg");
    let out = scratch_path("fig2.csv");
    std::fs::write(&cfg, "# fig2 recipe\ng = 0.1\nm = 1\nx = 2\n").unwrap();
    let o = qbm(&[
        "figure",
        "fig2",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert!(o.stdout.is_empty());
    let written = std::fs::read_to_string(&out).unwrap();
    let direct = qbm(&["figure", "fig2", "--g", "0.1", "--x", "2"]).stdout;
    assert_eq!(written, direct);

    // flags override the file
    let overridden = qbm(&["figure", "fig2", "--config", cfg.to_str().unwrap(), "--g", "1"]).stdout;
    assert_eq!(overridden, qbm(&["figure", "fig2", "--x", "2"]).stdout);

    std::fs::write(&cfg, r#"{"tau": 1, "sigma": [0.1], "format": "json"}"#).unwrap();
    let o = qbm(&["eval", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let v: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(result(&v, "smeared_velocity_dispersion")["sigma_over_x"], 0.1);

    std::fs::write(&cfg, "speed = 3\n").unwrap();
    assert_eq!(
        qbm(&["eval", "--tau", "1", "--config", cfg.to_str().unwrap()]).code,
        EXIT_USAGE
    );
    assert_eq!(
        qbm(&["eval", "--tau", "1", "--config", "/nonexistent/qbm.cfg"]).code,
        EXIT_USAGE
    );
    let _ = std::fs::remove_file(cfg);
    let _ = std::fs::remove_file(out);
}

#[test]
fn verify_fast_passes_and_canary_fails() {
    let o = qbm(&["verify", "--fast"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stdout);
    assert!(!o.stdout.contains("FAIL"));
    let o = qbm(&["verify", "--fast", "--inject-canary"]);
    assert_eq!(o.code, 1);
    assert!(o.stdout.contains("FAIL  oracle velocity"));
    let v = json(&["verify", "--fast", "--format", "json", "--grid", "0.5"]);
    assert_eq!(v["report"]["summary"]["failed"], 0);
    assert!(v["report"]["duration_ms"].is_number());
}
