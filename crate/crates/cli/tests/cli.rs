use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn eitshape(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eitshape")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = eitshape(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    eitshape(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"{
  "truth": {"shape": {"samples": 256}, "mesh_elements": 8000},
  "model": {"mesh_elements": 3000, "pixels": 600, "boundary_samples": 256},
  "raster_resolution": 48
}"#;

/// Simulation and one reconstruction on a reduced discretization.
struct Run {
    dir: TempDir,
}

impl Run {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn run() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| {
        let r = Run { dir: tempfile::tempdir().unwrap() };
        std::fs::write(r.path("small.json"), SMALL).unwrap();
        let cfg = r.path("small.json");
        ok(&["simulate", "--config", s(&cfg), "--out", s(&r.path("sim"))]);
        let stdout = ok(&[
            "reconstruct",
            "--config",
            s(&cfg),
            "--measurements",
            s(&r.path("sim/measurements.json")),
            "--truth",
            s(&r.path("sim/truth_domain.json")),
            "--model",
            "circle:17.5@-0.145,0",
            "--out",
            s(&r.path("rec")),
        ]);
        std::fs::write(r.path("reconstruct.stdout"), stdout).unwrap();
        r
    })
}

fn read(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn simulate_writes_the_truth_bundle() {
    let r = run();
    let ms = read(&r.path("sim/measurements.json"));
    assert_eq!(ms["voltages"].as_array().unwrap().len(), 256);
    assert_eq!(ms["L"], 16);
    let truth = read(&r.path("sim/truth.json"));
    assert_eq!(truth["contrasts"]["heart"], 2.0);
    assert!((truth["contrasts"]["lungs"].as_f64().unwrap() - 1.0 / 1.55).abs() < 1e-15);
    assert!(r.path("sim/truth_domain.json").exists());
    assert!(r.path("sim/truth_conductivity.csv").exists());
}

#[test]
fn noiseless_simulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"noise_sigma": 0.0, "truth": {"shape": {"samples": 128}, "mesh_elements": 3000}}"#)
        .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["simulate", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["simulate", "--config", s(&cfg), "--out", s(&b)]);
    for f in ["measurements.json", "truth.json", "truth_domain.json", "truth_conductivity.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn displaced_simulation_writes_one_directory_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"truth": {"shape": {"samples": 128}, "mesh_elements": 3000}}"#).unwrap();
    ok(&["simulate", "--config", s(&cfg), "--out", s(dir.path()), "--displace", "0.25:1,2"]);
    let d1 = read(&dir.path().join("seed_1/truth_domain.json"));
    let d2 = read(&dir.path().join("seed_2/truth_domain.json"));
    assert_ne!(d1["electrodes"], d2["electrodes"]);
    assert_eq!(d1["electrodes"][0], d2["electrodes"][0]);
}

#[test]
fn reconstruct_reports_the_domain_error() {
    let r = run();
    let stdout = std::fs::read_to_string(r.path("reconstruct.stdout")).unwrap();
    assert!(stdout.contains("relative residual"), "{stdout}");
    assert!(stdout.contains("domain error:") && stdout.contains('%'), "{stdout}");
    for f in ["result.json", "model.json", "measurements.json", "omega_c.csv", "gamma_c.csv", "gamma_c_raster.csv"] {
        assert!(r.path("rec").join(f).exists(), "{f}");
    }
    assert_eq!(read(&r.path("rec/result.json"))["kind"], "full");
}

#[test]
fn metrics_prints_json() {
    let r = run();
    let out = ok(&["metrics", "--result", s(&r.path("rec")), "--truth", s(&r.path("sim/truth_domain.json"))]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let e = v["domain_error"].as_f64().unwrap();
    let em = v["model_domain_error"].as_f64().unwrap();
    assert!(e < em, "{e} {em}");
    assert_eq!(v["electrode_lengths"].as_array().unwrap().len(), 16);
}

#[test]
fn traditional_run_stays_in_the_model_domain() {
    let r = run();
    let out = r.path("trad");
    let stdout = ok(&[
        "reconstruct",
        "--config",
        s(&r.path("small.json")),
        "--measurements",
        s(&r.path("sim/measurements.json")),
        "--traditional",
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("relative residual"));
    assert!(out.join("gamma.csv").exists());
    assert!(!out.join("omega_c.csv").exists());
    assert_eq!(read(&out.join("result.json"))["kind"], "traditional");
}

#[test]
fn identical_inputs_give_zero_differences() {
    let r = run();
    let rec = r.path("rec");
    let out = r.path("cons");
    let stdout = ok(&["consistency", "--a", s(&rec), "--b", s(&rec), "--out", s(&out)]);
    assert!(stdout.starts_with("max 0.0000e0, mean 0.0000e0"), "{stdout}");
    let stats = read(&out.join("stats.json"));
    assert_eq!(stats["max"], 0.0);
    assert!(out.join("mapped_boundary.csv").exists());

    for (mode, against) in [("fixed", r.path("sim/measurements.json")), ("domains", rec.clone())] {
        let out = r.path(&format!("diff_{mode}"));
        let stdout = ok(&["diff", "--result", s(&rec), "--against", s(&against), "--mode", mode, "--out", s(&out)]);
        assert!(stdout.contains("max |diff|: 0.000000e0"), "{mode}: {stdout}");
        let csv = std::fs::read_to_string(out.join("diff.csv")).unwrap();
        assert!(csv.lines().skip(1).all(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap() == 0.0));
    }
}

#[test]
fn diff_mode_and_input_must_match() {
    let r = run();
    let rec = s(&r.path("rec")).to_owned();
    let out = r.path("bad_diff");
    assert_eq!(code(&["diff", "--result", &rec, "--against", &rec, "--mode", "fixed", "--out", s(&out)]), 1);
    let ms = r.path("sim/measurements.json");
    assert_eq!(code(&["diff", "--result", &rec, "--against", s(&ms), "--mode", "domains", "--out", s(&out)]), 1);
}

#[test]
fn mismatched_model_domains_exit_with_one() {
    let r = run();
    let other = r.path("rec_other");
    ok(&[
        "reconstruct",
        "--config",
        s(&r.path("small.json")),
        "--measurements",
        s(&r.path("sim/measurements.json")),
        "--model",
        "circle:16",
        "--out",
        s(&other),
    ]);
    let out = eitshape(&["consistency", "--a", s(&r.path("rec")), "--b", s(&other), "--out", s(&r.path("mismatch"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn bad_inputs_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"noise": 0.1}"#).unwrap();
    assert_eq!(code(&["simulate", "--config", s(&cfg), "--out", s(&out)]), 1);
    assert_eq!(code(&["simulate", "--config", "/nonexistent/cfg.json", "--out", s(&out)]), 3);
    assert_eq!(code(&["reconstruct", "--measurements", "/nonexistent/m.json", "--out", s(&out)]), 3);
    let r = run();
    let ms = s(&r.path("sim/measurements.json")).to_owned();
    assert_eq!(code(&["reconstruct", "--measurements", &ms, "--model", "square:3", "--out", s(&out)]), 1);
    assert_eq!(code(&["simulate", "--out", s(&out), "--displace", "2:1"]), 1);
}
