//! Runs the `epstar` binary end to end: exit codes, artifacts and
//! reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const N1: &str = "[eos]\nkind = \"polytrope\"\nc = 1.0\ngamma = 2.0\n";

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_epstar"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn steady_n1_reports_analytic_constants() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), N1, &["steady"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    let s = json(&out.join("steady.json"));
    let half_pi = (std::f64::consts::PI / 2.0).sqrt();
    assert!((s["header"]["E0"].as_f64().unwrap() + 1.0).abs() < 1e-10);
    assert!((s["header"]["R_support"].as_f64().unwrap() - half_pi).abs() < 1e-10);
    assert!((s["header"]["M"].as_f64().unwrap() - half_pi).abs() < 1e-10);
    assert!(s["Hr"].as_f64().unwrap() < 0.0);
    let csv = fs::read_to_string(out.join("profile.csv")).unwrap();
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "r,rho,V,z,m");
    assert!(csv.starts_with("# r [length]\n"));
    let prov = json(&out.join("provenance.json"));
    assert_eq!(prov["command"], "steady");
    assert_eq!(prov["exit_code"], 0);
    assert_eq!(prov["config"]["eos"]["gamma"], 2.0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("E0         -1.0000000000e0"));
}

#[test]
fn n5_polytrope_is_not_compact() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "[eos]\nkind = \"polytrope\"\nc = 1.0\ngamma = 1.2\n", &["steady"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("infinite-radius"), "{}", stderr(&o));
}

#[test]
fn missing_eos_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["steady", "minimize", "evolve"] {
        let o = run(dir.path(), "[steady]\nkappa = 1.0\n", &[cmd]);
        assert_eq!(o.status.code(), Some(2), "{cmd}: {}", stderr(&o));
        assert!(stderr(&o).contains("[eos]"));
    }
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "[eos\n", &["steady"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(dir.path(), &format!("{N1}[steady]\nkapa = 1.0\n"), &["steady"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(dir.path(), "[eos]\nkind = \"polytrope\"\nc = 1.0\ngamma = 1.0\n", &["steady"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn minimize_from_ball_reaches_the_steady_star() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), N1, &["minimize"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("Hr(final) ≤ Hr(shoot)+tol"));
    let s = json(&dir.path().join("out/minimize.json"));
    assert_eq!(s["monotone"], true);
    assert!(s["l1_distance_over_mass"].as_f64().unwrap() < 1e-2);
    assert!(fs::read_to_string(dir.path().join("out/trace.csv")).unwrap().contains("iter,Hr,mass,kkt_dev,step"));
}

#[test]
fn minimize_from_steady_star_stops_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &format!("{N1}[minimize]\ninit = \"steady\"\n"), &["minimize"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(&dir.path().join("out/minimize.json"));
    assert!(s["iterations"].as_u64().unwrap() <= 2);
    assert_eq!(s["status"], "converged");
}

#[test]
fn infeasible_mass_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &format!("{N1}[steady]\nmass = -1.0\n"), &["minimize"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

const SHORT_RUN: &str = "[evolve]\ncells = 128\ncrossings = 2.0\n";

#[test]
fn unperturbed_evolution_stays_on_the_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &format!("{N1}{SHORT_RUN}amplitude = 0.0\n"), &["evolve"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/metric.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let total: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert!(total <= 1e-8, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 21);
}

#[test]
fn perturbed_evolution_reports_metric_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &format!("{N1}{SHORT_RUN}"), &["evolve", "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let s = json(&dir.path().join("out/evolve.json"));
    let ratio = s["max_metric_ratio"].as_f64().unwrap();
    assert!((1.0..=10.0).contains(&ratio), "{ratio}");
    assert!(s["mass_drift"].as_f64().unwrap() < 1e-12);
}

#[test]
fn drift_beyond_the_bound_exits_with_the_conservation_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &format!("{N1}{SHORT_RUN}drift_bound = 1e-15\n"), &["evolve"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("conservation hypothesis violated"));
    assert!(dir.path().join("out/ledger.csv").exists());
}

#[test]
fn numeric_blow_up_dumps_the_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{N1}[evolve]\ncells = 64\nperturbation = \"velocity_kick\"\namplitude = 1e200\n");
    let o = run(dir.path(), &cfg, &["evolve"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let dump = dir.path().join("out/state_dump.csv");
    assert!(stderr(&o).contains(&dump.display().to_string()), "{}", stderr(&o));
    assert!(fs::read_to_string(dump).unwrap().contains("r,rho,u,momentum"));
}

#[test]
fn reduce_rejects_inadmissible_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "[reduce]\nk = 2.0\n", &["reduce"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("inadmissible"));
}

#[test]
fn reduce_step_function_checks_constants_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "[reduce]\nk = 0.0\n", &["reduce"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&dir.path().join("out/reduction.json"));
    for c in r["constants"].as_array().unwrap() {
        assert!(c["max_relative_error"].as_f64().unwrap() < 1e-6);
    }
    assert!(r["n_fitted"].is_null());
    assert!(!dir.path().join("out/f0.csv").exists());
}

#[test]
fn reduce_recovers_the_index() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[reduce]\nk = 1.0\nintervals = 512\ntrials = 4\nspeed_nodes = 16\n";
    let o = run(dir.path(), cfg, &["reduce"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&dir.path().join("out/reduction.json"));
    assert!((r["n_fitted"].as_f64().unwrap() - 2.5).abs() < 1e-3);
    assert!(r["min_trial_gap"].as_f64().unwrap() >= -1e-8);
    let f0 = fs::read_to_string(dir.path().join("out/f0.csv")).unwrap();
    assert!(f0.lines().any(|l| l == "r,s,f0"));
}

#[test]
fn identical_config_and_seed_give_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[reduce]\nk = 0.5\nintervals = 256\ntrials = 3\nspeed_nodes = 8\nlambda_points = 200\nrho_points = 100\n";
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let d = dir.path().join(sub);
        fs::create_dir(&d).unwrap();
        let o = run(&d, cfg, &["reduce", "--seed", "11"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let o = run(&d, &format!("{N1}{SHORT_RUN}"), &["evolve", "--seed", "11"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outputs.push(d.join("out"));
    }
    for name in ["reduction.json", "f0.csv", "ledger.csv", "metric.csv", "evolve.json"] {
        assert_eq!(fs::read(outputs[0].join(name)).unwrap(), fs::read(outputs[1].join(name)).unwrap(), "{name}");
    }
    assert_eq!(json(&outputs[0].join("provenance.json"))["seed"], 11);
}
