use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn simulate(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args(args)
        .current_dir(cwd)
        .env_remove("DFSIM_OUT")
        .output()
        .expect("binary runs")
}

fn summary_value(path: &Path, key: &str) -> f64 {
    let text = fs::read_to_string(path).unwrap();
    let line = text.lines().find(|l| l.starts_with(&format!("{key},"))).unwrap_or_else(|| panic!("{key} missing"));
    line.split(',').nth(1).unwrap().parse().unwrap()
}

#[test]
fn list_is_stable_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let first = simulate(&["list"], dir.path());
    let second = simulate(&["list"], dir.path());
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    let expected = [
        "prep-fig2a",
        "merit-fig2b",
        "rot-fig3a",
        "merit-fig3b",
        "table1",
        "table2",
        "readout",
        "cphase4",
        "cluster-growth",
    ];
    assert_eq!(names, expected);
}

#[test]
fn preparation_scenario_writes_trajectory_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(&["run", "prep-fig2a", "--out", "a"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = dir.path().join("a");
    for f in ["fig2a_trajectory.csv", "fig2a_summary.csv", "manifest.toml"] {
        assert!(a.join(f).exists(), "{f}");
    }
    let f = summary_value(&a.join("fig2a_summary.csv"), "fidelity");
    let t_pi = summary_value(&a.join("fig2a_summary.csv"), "t_pi");
    assert!((f - 0.988).abs() < 0.005, "{f}");
    assert!((t_pi / 0.987 - 1.0).abs() < 0.02, "{t_pi}");
    let header = fs::read_to_string(a.join("fig2a_trajectory.csv")).unwrap();
    assert!(header.starts_with("time,norm,pop_a,"));
    assert!(!header.contains('\r'));
}

#[test]
fn reruns_and_manifest_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(&["run", "prep-fig2a", "--out", "a"], dir.path()).status.success());
    assert!(simulate(&["run", "prep-fig2a", "--out", "b"], dir.path()).status.success());
    assert!(simulate(&["run", "a/manifest.toml", "--out", "c"], dir.path()).status.success());
    for f in ["fig2a_trajectory.csv", "fig2a_summary.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
        assert_eq!(a, fs::read(dir.path().join("c").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn malformed_config_fails_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "name = \"x\"\nkind = \"prepare\"\nbogus = 1\n").unwrap();
    let out = simulate(&["run", "bad.toml", "--out", "o"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("bogus"), "{err}");
    assert!(!dir.path().join("o").exists());

    fs::write(dir.path().join("syntax.toml"), "name = \n").unwrap();
    assert!(!simulate(&["run", "syntax.toml", "--out", "o"], dir.path()).status.success());
    assert!(!dir.path().join("o").exists());
}

#[test]
fn numeric_failures_leave_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let undriven = "name = \"dark\"\nkind = \"prepare\"\n[geometry]\nxi12 = 0.5\n[drive]\ne_mu = 0.0\nt_end = 2.0\n";
    fs::write(dir.path().join("dark.toml"), undriven).unwrap();
    let out = simulate(&["run", "dark.toml", "--out", "o"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dark"));
    assert!(!dir.path().join("o").exists());

    let nan = "name = \"x\"\nkind = \"prepare\"\n[geometry]\nxi12 = nan\n[drive]\ne_mu = 1.0\n";
    fs::write(dir.path().join("nan.toml"), nan).unwrap();
    let out = simulate(&["run", "nan.toml", "--out", "o"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("geometry.xi12"));
}

#[test]
fn seed_override_controls_cluster_growth() {
    let dir = tempfile::tempdir().unwrap();
    for (name, seed) in [("s1", "11"), ("s2", "11"), ("s3", "12")] {
        assert!(simulate(&["run", "cluster-growth", "--seed", seed, "--out", name], dir.path()).status.success());
    }
    let read = |d: &str| fs::read(dir.path().join(d).join("cluster-growth_growth.csv")).unwrap();
    assert_eq!(read("s1"), read("s2"));
    assert_ne!(read("s1"), read("s3"));
    let manifest = fs::read_to_string(dir.path().join("s1/manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 11"));
    assert!(manifest.contains("wall_time_seconds"));
    assert!(manifest.contains("version = "));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args(["run", "cphase4"])
        .current_dir(dir.path())
        .env("DFSIM_OUT", "from-env")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let phase = summary_value(&dir.path().join("from-env/cphase4_summary.csv"), "conditional_phase");
    assert!((phase.abs() - std::f64::consts::PI).abs() < 0.05, "{phase}");
}

#[test]
fn tolerance_flag_reaches_the_integrator() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(&["run", "prep-fig2a", "--tol", "1e-6", "--out", "t"], dir.path()).status.success());
    let manifest = fs::read_to_string(dir.path().join("t/manifest.toml")).unwrap();
    assert!(manifest.contains("rtol = 0.000001"), "{manifest}");
    assert!(!simulate(&["run", "prep-fig2a", "--tol", "-1", "--out", "u"], dir.path()).status.success());
}

#[test]
fn geometry_from_separation_and_wavelength() {
    let dir = tempfile::tempdir().unwrap();
    let lambda = 637.0;
    let r = 0.5 * lambda / std::f64::consts::TAU;
    let cfg = format!("name = \"nm\"\nkind = \"prepare\"\n[geometry]\nr = {r}\nlambda0 = {lambda}\n[drive]\ne_mu = 1.0\n");
    fs::write(dir.path().join("nm.toml"), cfg).unwrap();
    assert!(simulate(&["run", "nm.toml", "--out", "nm"], dir.path()).status.success());
    let f = summary_value(&dir.path().join("nm/nm_summary.csv"), "fidelity");
    assert!((f - 0.988).abs() < 0.005, "{f}");
}
