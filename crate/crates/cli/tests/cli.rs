use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sfc_core::io::{write_scenario, Scenario};
use sfc_core::trafficgen::{abilene, generate_n_flows, preset, rng_from_seed};

fn sfc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfc")).args(args).output().expect("binary runs")
}

fn example(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data/example")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn report_value(dir: &Path, key: &str) -> Option<String> {
    let text = fs::read_to_string(dir.join("report.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} ")).map(str::to_string))
}

#[test]
fn generate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = sfc(&["generate", "--preset", "1", "--seed", "17", "--out", s(d)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["topology.txt", "scenario.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn generate_preset_five_reports_half_hosting() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sfc(&["generate", "--preset", "5", "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("gamma=0.5 eligible=6/11"), "{}", stdout(&o));
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(sfc(&["generate", "--preset", "9", "--out", s(tmp.path())]).status.code(), Some(2));
    assert_eq!(sfc(&["run", "--algo", "magic"]).status.code(), Some(2));
    assert_eq!(sfc(&["run", "--algo", "nsf", "--out", s(tmp.path())]).status.code(), Some(2));
}

#[test]
fn missing_files_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("none.txt");
    let o = sfc(&["run", "--topology", s(&missing), "--scenario", s(&missing), "--algo", "nsf", "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn parse_errors_carry_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("scenario.txt");
    fs::write(&bad, "flow 1 1 2 0.3 inf 3,2\nflow 2 1 9 0.3 inf 2\n").unwrap();
    let o = sfc(&["run", "--topology", &example("topology.txt"), "--scenario", s(&bad), "--algo", "nsf", "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

fn three_flows(dir: &Path, rate: &str) -> PathBuf {
    let p = dir.join("three.txt");
    fs::write(
        &p,
        format!("flow 1 1 2 {rate} inf 3,2\nflow 2 2 5 0.2 inf 2\nflow 3 3 4 0.2 inf -\n"),
    )
    .unwrap();
    p
}

#[test]
fn exact_grr_objective_matches_recomputation() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = three_flows(tmp.path(), "0.3");
    let out = tmp.path().join("out");
    let o = sfc(&[
        "run", "--topology", &example("topology.txt"), "--scenario", s(&sc), "--algo", "exact-grr", "--alpha", "0",
        "--out", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report_value(&out, "status").as_deref(), Some("optimal"));
    let obj: f64 = report_value(&out, "objective").unwrap().parse().unwrap();
    let again: f64 = report_value(&out, "recomputed_objective").unwrap().parse().unwrap();
    assert_eq!(obj, again);
    assert_eq!(report_value(&out, "feasible").as_deref(), Some("yes"));
}

#[test]
fn exact_grr_rejects_unknown_rates() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = three_flows(tmp.path(), "?");
    let o = sfc(&[
        "run", "--topology", &example("topology.txt"), "--scenario", s(&sc), "--algo", "exact-grr",
        "--out", s(&tmp.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("known rates"));
}

#[test]
fn validate_worked_example_passes() {
    let o = sfc(&[
        "validate", "--topology", &example("topology.txt"), "--scenario", &example("scenario.txt"), "--solution",
        &example("solution.txt"), "--problem", "energy", "--mode", "short-term",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.starts_with("eqID,flow,i,j,x,status,slack\n"));
    assert!(!out.contains("fail"));
    for eq in ["eq2,", "eq12,", "eq19,", "eq25,"] {
        assert!(out.contains(eq), "{eq} missing");
    }
}

#[test]
fn validate_flags_tampered_assignment() {
    let tmp = tempfile::tempdir().unwrap();
    let dump = fs::read_to_string(example("solution.txt")).unwrap().replace("assign 2 4 4", "assign 2 5 3");
    let p = tmp.path().join("bad.txt");
    fs::write(&p, dump).unwrap();
    let o = sfc(&["validate", "--topology", &example("topology.txt"), "--scenario", &example("scenario.txt"), "--solution", s(&p)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("eq4,1,5,,2,fail"), "{}", stdout(&o));
}

#[test]
fn validate_empty_instance_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let (sc, sol) = (tmp.path().join("sc.txt"), tmp.path().join("sol.txt"));
    fs::write(&sc, "").unwrap();
    fs::write(&sol, "").unwrap();
    let o = sfc(&["validate", "--topology", &example("topology.txt"), "--scenario", s(&sc), "--solution", s(&sol)]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn run_output_validates_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    assert_eq!(sfc(&["generate", "--preset", "2", "--out", s(&gen)]).status.code(), Some(0));
    let (topo, sc) = (gen.join("topology.txt"), gen.join("scenario.txt"));
    let mut csvs = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        let o = sfc(&[
            "run", "--topology", s(&topo), "--scenario", s(&sc), "--algo", "3r", "--iterations", "3", "--seed", "4",
            "--out", s(&out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        csvs.push(fs::read_to_string(out.join("metrics.csv")).unwrap());
        let v = sfc(&[
            "validate", "--topology", s(&out.join("topology.txt")), "--scenario", s(&sc), "--solution",
            s(&out.join("solutions")), "--problem", "grr",
        ]);
        assert_eq!(v.status.code(), Some(0), "{}", stdout(&v));
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0].lines().count(), 4);
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "topology = {:?}\nscenario = {:?}\nalgo = \"nsf\"\niterations = 2\n",
            example("topology.txt"),
            example("scenario.txt")
        ),
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = sfc(&["run", "--config", s(&cfg), "--algo", "st-ensf", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report_value(&out, "algorithm").as_deref(), Some("st-ensf"));
    assert_eq!(report_value(&out, "iterations").as_deref(), Some("2"));
}

#[test]
fn export_lp_writes_a_model() {
    let tmp = tempfile::tempdir().unwrap();
    let lp = tmp.path().join("model.lp");
    let o = sfc(&[
        "export-lp", "--topology", &example("topology.txt"), "--scenario", &example("scenario.txt"), "--algo",
        "exact-sfra", "--out", s(&lp),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&lp).unwrap();
    assert!(text.lines().any(|l| l == "Minimize"));
    assert!(text.contains("Subject To") && text.trim_end().ends_with("End"));
    let o = sfc(&[
        "export-lp", "--topology", &example("topology.txt"), "--scenario", &example("scenario.txt"), "--algo", "nsf",
        "--out", s(&lp),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_writes_a_timeline() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    let o = sfc(&["simulate", "--preset", "1", "--iterations", "5", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = fs::read_to_string(out.join("iterations.csv")).unwrap();
    assert_eq!(rows.lines().count(), 6);
    let timeline = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(timeline.starts_with("t,event,algorithm,total_energy,reconf_overhead,"));
    assert!(out.join("events.log").exists());
}

#[test]
fn st_ensf_handles_two_thousand_flows() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    assert_eq!(sfc(&["generate", "--preset", "1", "--out", s(&gen)]).status.code(), Some(0));
    let flows = generate_n_flows(&abilene(), &preset(1).unwrap(), 2000, &mut rng_from_seed(3)).unwrap();
    let sc = tmp.path().join("big.txt");
    fs::write(&sc, write_scenario(&Scenario::new(flows))).unwrap();
    let o = sfc(&[
        "run", "--topology", s(&gen.join("topology.txt")), "--scenario", s(&sc), "--algo", "st-ensf", "--out",
        s(&tmp.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("2000 flows"));
    assert!(stdout(&o).contains(" s"));
}
