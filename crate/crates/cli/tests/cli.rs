use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

/// Mean link distance giving contention constant `phi` at α = 4 and θ = 1 (φ = 2πR̄²).
fn distance_for(phi: f64) -> f64 {
    (phi / (2.0 * std::f64::consts::PI)).sqrt()
}

fn class(phi: f64, a: f64, p: f64) -> Value {
    json!({
        "lambda": 1.0,
        "power": 1.0,
        "mean_link_distance": distance_for(phi),
        "sir_threshold": 1.0,
        "arrival_rate": a,
        "access_prob": p,
    })
}

fn write_config(dir: &TempDir, name: &str, classes: Vec<Value>) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, json!({ "alpha": 4.0, "classes": classes }).to_string()).unwrap();
    path
}

fn aloha(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_aloha"));
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json_out(o: &Output) -> Value {
    serde_json::from_str(&stdout(o)).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn symmetric_pair_analysis() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "pair.json", vec![class(0.15, 0.7, 1.0), class(0.15, 0.7, 1.0)]);
    let o = aloha(&["--format", "json", "analyze"], Some(&cfg));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json_out(&o);
    for row in v["rows"].as_array().unwrap() {
        assert!((row["mean_delay"].as_f64().unwrap() - 10.0 / 3.0).abs() < 1e-9);
        assert!((row["channel_share"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }
    assert!((v["channel_share_sum"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(v["share_sum_residual"].as_f64().unwrap() < 1e-12);
}

#[test]
fn analyze_csv_header_and_facts_on_stderr() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "pair.json", vec![class(0.15, 0.7, 1.0), class(0.15, 0.5, 1.0)]);
    let o = aloha(&["analyze"], Some(&cfg));
    let out = stdout(&o);
    assert_eq!(
        out.lines().next(),
        Some("class,arrival_rate,success_prob,mean_delay,load,channel_share,stability_bound")
    );
    assert_eq!(out.lines().count(), 3);
    assert!(stderr(&o).contains("share_sum_residual"));
}

#[test]
fn unstable_network_exits_two_and_names_class() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "hot.json", vec![class(1.0, 0.6, 1.0)]);
    let o = aloha(&["analyze"], Some(&cfg));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("class 0"), "{}", stderr(&o));
    assert_eq!(aloha(&["stability"], Some(&cfg)).status.code(), Some(2));
}

#[test]
fn single_class_just_below_bound_is_stable() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "one.json", vec![class(1.0, 0.49, 1.0)]);
    let o = aloha(&["stability"], Some(&cfg));
    assert_eq!(o.status.code(), Some(0));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(row.starts_with("stable,"), "{row}");
}

#[test]
fn lone_class_reduces_to_single_class_result() {
    let dir = TempDir::new().unwrap();
    let full = write_config(&dir, "full.json", vec![class(1.0, 0.3, 1.0)]);
    let thinned = write_config(&dir, "thin.json", vec![class(1.0, 0.3, 0.6)]);
    let v = json_out(&aloha(&["--format", "json", "analyze"], Some(&full)));
    let row = &v["rows"][0];
    // p = 1, φλ = 1, a = 0.3: D = (1−a)/(1−2a), p_s = 1 − a
    assert!((row["mean_delay"].as_f64().unwrap() - 0.7 / 0.4).abs() < 1e-12);
    assert!((row["success_prob"].as_f64().unwrap() - 0.7).abs() < 1e-12);

    let v = json_out(&aloha(&["--format", "json", "analyze"], Some(&thinned)));
    let row = &v["rows"][0];
    // p = 0.6: D = (1−a)/(p − (1+φλp)a)
    assert!((row["mean_delay"].as_f64().unwrap() - 0.7 / (0.6 - 1.6 * 0.3)).abs() < 1e-12);
    assert!((row["stability_bound"].as_f64().unwrap() - 0.6 / 1.6).abs() < 1e-12);
}

#[test]
fn parse_errors_exit_one_with_field_name() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    let mut c = class(1.0, 0.1, 1.0);
    c["colour"] = json!(1);
    std::fs::write(&path, json!({ "alpha": 4.0, "classes": [c] }).to_string()).unwrap();
    let o = aloha(&["analyze"], Some(&path));
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("colour") && msg.contains("line"), "{msg}");

    std::fs::write(&path, "{\"alpha\": 4.0,\n \"classes\": [").unwrap();
    assert_eq!(aloha(&["analyze"], Some(&path)).status.code(), Some(1));
    assert_eq!(aloha(&["analyze"], None).status.code(), Some(1));
    assert_eq!(aloha(&["no-such-command"], None).status.code(), Some(1));
}

#[test]
fn corollary_ignores_powers_and_reports_infeasible() {
    let dir = TempDir::new().unwrap();
    let mut strong = class(0.15, 0.7, 1.0);
    strong["power"] = json!(1e6);
    let skewed = write_config(&dir, "skewed.json", vec![strong, class(0.15, 0.7, 1.0)]);
    // the region test fails for the drowned class, yet some power vector works
    assert_eq!(aloha(&["stability"], Some(&skewed)).status.code(), Some(2));
    assert_eq!(aloha(&["stability", "--method", "corollary"], Some(&skewed)).status.code(), Some(0));

    let hot = write_config(&dir, "hot.json", vec![class(1.0, 0.6, 1.0), class(1.0, 0.6, 1.0)]);
    assert_eq!(aloha(&["stability", "--method", "corollary"], Some(&hot)).status.code(), Some(3));
    assert_eq!(aloha(&["optimize"], Some(&hot)).status.code(), Some(3));
}

#[test]
fn permutation_method_prints_witness() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "pair.json", vec![class(0.15, 0.7, 1.0), class(0.15, 0.3, 1.0)]);
    let v = json_out(&aloha(&["--format", "json", "stability", "--method", "permutation"], Some(&cfg)));
    let w = v["rows"][0]["witness_permutation"].as_array().unwrap();
    assert_eq!(w.len(), 2);
}

#[test]
fn optimize_symmetric_and_verified() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "pair.json", vec![class(0.15, 0.7, 1.0), class(0.15, 0.7, 1.0)]);
    let v = json_out(&aloha(&["--format", "json", "optimize", "--verify"], Some(&cfg)));
    let rows = v["rows"].as_array().unwrap();
    assert!((rows[0]["power"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(rows[0]["power_rel_deviation"].as_f64().unwrap() < 1e-4);
    assert!(v["objective_gap"].as_f64().unwrap() <= 1e-9);

    // weights c_n = φλ·a/(1−a) equalize the delays at 1/(1 − Σ c_n)
    let c = [0.15 * 0.6 / 0.4, 0.15 * 0.3 / 0.7];
    let cfg = write_config(&dir, "skew.json", vec![class(0.15, 0.6, 1.0), class(0.15, 0.3, 1.0)]);
    let weights = format!("{},{}", c[0], c[1]);
    let v = json_out(&aloha(&["--format", "json", "optimize", "--weights", &weights], Some(&cfg)));
    let expect = 1.0 / (1.0 - c[0] - c[1]);
    for row in v["rows"].as_array().unwrap() {
        let d = row["mean_delay"].as_f64().unwrap();
        assert!((d - expect).abs() / expect < 1e-9, "{d} vs {expect}");
    }
}

#[test]
fn max_rate_and_saturated_cell() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "d2d.json", vec![class(1.0, 0.0, 1.0), class(1.0, 0.3, 1.0)]);
    let o = aloha(&["--format", "json", "max-rate", "--d1-max", "3", "--d2-max", "3"], Some(&cfg));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let a1 = json_out(&o)["rows"][0]["max_a1"].as_f64().unwrap();
    assert!(a1 > 0.0 && a1 < 1.0);

    let cfg = write_config(&dir, "full.json", vec![class(1.0, 0.0, 1.0), class(1.0, 0.6, 1.0)]);
    assert_eq!(aloha(&["max-rate", "--d1-max", "3", "--d2-max", "3"], Some(&cfg)).status.code(), Some(3));
}

#[test]
fn sweep_marks_unstable_points_and_rejects_bad_values() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "one.json", vec![class(1.0, 0.1, 1.0)]);
    let args = ["sweep", "--param", "classes[0].arrival_rate", "--grid", "0.25,0.6", "--outputs", "stable,mean_delay"];
    let o = aloha(&args, Some(&cfg));
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "value,stable,mean_delay_0");
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first[..2], ["0.25", "true"]);
    assert!((first[2].parse::<f64>().unwrap() - 1.5).abs() < 1e-12);
    assert_eq!(lines[2], "0.6,false,");

    let o = aloha(&["sweep", "--param", "classes[0].arrival_rate", "--grid", "0.5,1.5"], Some(&cfg));
    assert_eq!(o.status.code(), Some(1));
    let o = aloha(&["sweep", "--param", "classes[3].power", "--grid", "1"], Some(&cfg));
    assert_eq!(o.status.code(), Some(1));
}

fn sim_args<'a>(out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["--out", out, "--seed", "7", "simulate", "--slots", "3000", "--replications", "3", "--links", "60"];
    v.extend_from_slice(extra);
    v
}

#[test]
fn simulate_writes_files_deterministically() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "one.json", vec![class(1.0, 0.3, 1.0)]);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = aloha(&sim_args(out.to_str().unwrap(), &["--compare-analytic"]), Some(&cfg));
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["trajectory.csv", "summary.json", "classes.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let traj = std::fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next(), Some("slot,class,mean_queue_len,attempts,successes"));
    let classes = std::fs::read_to_string(a.join("classes.csv")).unwrap();
    assert!(classes.lines().next().unwrap().ends_with("analytic_mean_delay,delay_rel_error"));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["replications"], json!(3));
}

#[test]
fn simulate_flags_idle_and_overloaded_networks() {
    let dir = TempDir::new().unwrap();
    let idle = write_config(&dir, "idle.json", vec![class(1.0, 0.0, 1.0)]);
    let out = dir.path().join("idle");
    let o = aloha(&sim_args(out.to_str().unwrap(), &[]), Some(&idle));
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("no_data"));

    let hot = write_config(&dir, "hot.json", vec![class(1.0, 0.6, 1.0)]);
    let out = dir.path().join("hot");
    let o = aloha(&sim_args(out.to_str().unwrap(), &["--mode", "mean-field"]), Some(&hot));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn presets_write_expected_grids() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    for name in ["fig2-weights", "fig3-arrival", "fig4-envelope"] {
        let o = aloha(&["--out", out, "preset", name, "--gnuplot"], None);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(dir.path().join(format!("{name}.gp")).exists());
    }
    let fig4 = std::fs::read_to_string(dir.path().join("fig4-envelope.csv")).unwrap();
    assert_eq!(fig4.lines().count(), 1 + 3 * 35);
    let fig3 = std::fs::read_to_string(dir.path().join("fig3-arrival.csv")).unwrap();
    assert!(fig3.lines().skip(1).all(|l| l.starts_with("reconstructed,")));

    let o = aloha(
        &["--out", out, "preset", "fig1-delay", "--sim-slots", "2000", "--sim-replications", "2", "--sim-links", "60"],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let sim = std::fs::read_to_string(dir.path().join("fig1-delay-sim.csv")).unwrap();
    assert_eq!(sim.lines().count(), 1 + 12);
}

#[test]
fn unknown_preset_lists_the_known_ones() {
    let o = aloha(&["preset", "fig9"], None);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    for name in ["fig1-delay", "fig2-weights", "fig3-arrival", "fig4-envelope"] {
        assert!(msg.contains(name), "{msg}");
    }
}
