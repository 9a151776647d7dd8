use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const MINIMAL: &str = r#"
name = "mini"
t_end = 2.0
levels = [0.5]

[profile]
family = "exponential"
params = { alpha = 0.5 }

[solver]
observation_interval = 0.1

[solver.grid]
kind = "uniform"
x_left = -20.0
x_right = 40.0
n = 300

[[checks]]
kind = "fit"
law = "linear"
lambda = 0.5
window = [1.0, 2.0]
"#;

fn kpplab(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpplab"))
        .args(args)
        .env("KPPLAB_OUTPUT_ROOT", root)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn front_reports_speed_and_writes_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("front.csv");
    let o = kpplab(
        &["front", "--speed", "2.5", "-o", csv.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["c_star"], 2.0);
    assert!((v["alpha_c"].as_f64().unwrap() - 0.5).abs() < 1e-3);
    assert!(fs::read_to_string(csv).unwrap().starts_with("z,phi,dphi\n"));

    let slow = kpplab(&["front", "--speed", "1.5"], tmp.path());
    assert_eq!(slow.status.code(), Some(1));
}

#[test]
fn run_fit_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("mini.toml");
    fs::write(&cfg, MINIMAL).unwrap();

    // the run directory defaults to $KPPLAB_OUTPUT_ROOT/<name>
    let o = kpplab(&["run", "-c", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let dir = tmp.path().join("mini");
    assert!(dir.join("manifest.json").is_file());

    let traj = dir.join("trajectories.csv");
    let o = kpplab(
        &[
            "fit",
            "-i",
            traj.to_str().unwrap(),
            "--law",
            "linear",
            "--lambda",
            "0.5",
            "--window",
            "1",
            "2",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let fit: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(fit["law"], "linear");

    let o = kpplab(
        &[
            "fit",
            "-i",
            traj.to_str().unwrap(),
            "--law",
            "linear",
            "--lambda",
            "0.3",
            "--window",
            "1",
            "2",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));

    let md = tmp.path().join("report.md");
    let o = kpplab(
        &[
            "report",
            dir.to_str().unwrap(),
            "-o",
            md.to_str().unwrap(),
            "--plots",
            tmp.path().join("plots").to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(
        o.status.code() == Some(0) || o.status.code() == Some(2),
        "{o:?}"
    );
    assert!(fs::read_to_string(md).unwrap().contains("## exponential"));
    assert!(tmp.path().join("plots/mini_positions.csv").is_file());
}

#[test]
fn failing_check_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("fail.toml");
    let text = MINIMAL.to_string()
        + "\n[[checks]]\nkind = \"speed\"\nlambda = 0.5\nwindow = [1.0, 2.0]\nexpected = 100.0\ntolerance = 0.01\n";
    fs::write(&cfg, text).unwrap();
    let out = tmp.path().join("explicit");
    let o = kpplab(
        &[
            "run",
            "-c",
            cfg.to_str().unwrap(),
            "-o",
            out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{o:?}");
    assert!(out.join("checks.json").is_file());
}

#[test]
fn config_and_usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, MINIMAL.replace("levels = [0.5]", "levels = [1.5]")).unwrap();
    let o = kpplab(&["run", "-c", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!tmp.path().join("mini").exists());

    assert_eq!(kpplab(&["run"], tmp.path()).status.code(), Some(1));
    assert_eq!(kpplab(&["frobnicate"], tmp.path()).status.code(), Some(1));
    assert_eq!(kpplab(&["--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn check_kpp_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = kpplab(&["check-kpp", "--r", "2"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert!(stdout(&o).contains("kpp_"));

    // an exponential tail is not slowly decaying
    let cfg = tmp.path().join("mini.toml");
    fs::write(&cfg, MINIMAL).unwrap();
    let o = kpplab(&["check-kpp", "-c", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{o:?}");
    assert!(stdout(&o).contains("slow_decay"));
}

#[test]
fn sweep_writes_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let a = MINIMAL.to_string();
    let b = MINIMAL.replace("name = \"mini\"", "name = \"other\"");
    fs::write(tmp.path().join("a.toml"), a).unwrap();
    fs::write(tmp.path().join("b.toml"), b).unwrap();
    let sweep = tmp.path().join("sweep.toml");
    fs::write(&sweep, "include = [\"a.toml\", \"b.toml\"]\n").unwrap();
    let root = tmp.path().join("out");
    let o = kpplab(
        &[
            "sweep",
            "-c",
            sweep.to_str().unwrap(),
            "-o",
            root.to_str().unwrap(),
            "-w",
            "2",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let summary = fs::read_to_string(root.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.lines().nth(1).unwrap().starts_with("mini,"));
}

#[test]
fn example_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().unwrap() == "sweep.toml" {
            let (cfgs, _) = kpplab_core::harness::SweepConfig::load(&path).unwrap();
            assert_eq!(cfgs.len(), 6);
        } else if path.extension().is_some_and(|e| e == "toml") {
            kpplab_core::harness::ExperimentConfig::load(&path).unwrap();
            n += 1;
        }
    }
    assert_eq!(n, 6);
}
