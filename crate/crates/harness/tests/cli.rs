use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use noisy_slp::problems::synthetic_image;
use noisy_slp_cli::pgm::{self, Encoding};
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_noisy-slp"));
    cmd.env_remove(noisy_slp_cli::config::OUT_DIR_ENV);
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn noisy-slp")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

const STALLING_QUADRATIC: &str = r#"{
    "problem": {"name": "quadratic_l1"},
    "noise": {"variant": "BallUniform", "eps_f": 0.1, "eps_jac": 1e-5},
    "solver": {"max_iter": 50},
    "seeds": [3]
}"#;

#[test]
fn solve_matches_golden_output() {
    let tmp = TempDir::new().unwrap();
    let out = run(bin()
        .args(["solve", "--config"])
        .arg(golden("rosenbrock_short.json"))
        .arg("--out")
        .arg(tmp.path()));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for (produced, expected) in [
        ("records.csv", "rosenbrock_short.records.csv"),
        ("summary.json", "rosenbrock_short.summary.json"),
    ] {
        assert_eq!(
            fs::read_to_string(tmp.path().join(produced)).unwrap(),
            fs::read_to_string(golden(expected)).unwrap(),
            "{produced}"
        );
    }
}

#[test]
fn stalled_solve_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "stall.json", STALLING_QUADRATIC);
    let out = run(bin().args(["solve", "--config"]).arg(&config).arg("--out").arg(tmp.path().join("o")));
    assert_eq!(code(&out), 2);
    let records = fs::read_to_string(tmp.path().join("o/records.csv")).unwrap();
    assert!(records.trim_end().ends_with("Stalled"));
}

#[test]
fn bad_configs_exit_with_one() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("syntax.json", "{ not json"),
        ("unknown.json", r#"{"problem": {"name": "quadratic_l1"}, "bogus": 1}"#),
        ("problem.json", r#"{"problem": {"name": "no_such_problem"}}"#),
        ("axis.json", r#"{"problem": {"name": "quadratic_l1"}, "sweep": {"eps_f": [0.1]}}"#),
        ("solver.json", r#"{"problem": {"name": "quadratic_l1"}, "solver": {"rho_u": 2.0}}"#),
        ("seeds.json", r#"{"problem": {"name": "quadratic_l1"}, "seeds": []}"#),
        ("vartheta.json", r#"{"problem": {"name": "quadratic_l1"}, "solver": {"vartheta": -1}}"#),
    ];
    for (name, text) in cases {
        let config = write_config(tmp.path(), name, text);
        let out = run(bin().args(["solve", "--config"]).arg(&config).arg("--out").arg(tmp.path().join("o")));
        assert_eq!(code(&out), 1, "{name}");
        assert!(!out.stderr.is_empty(), "{name}");
    }
    let out = run(bin().args(["solve", "--config"]).arg(tmp.path().join("missing.json")));
    assert_eq!(code(&out), 1);
    let out = run(bin().args(["solve"]));
    assert_eq!(code(&out), 1);
    let out = run(bin().args(["--help"]));
    assert_eq!(code(&out), 0);
}

#[test]
fn missing_image_file_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        "tv.json",
        r#"{"problem": {"name": "tv_reconstruction", "image": "absent.pgm"}, "solver": {"max_iter": 1}}"#,
    );
    let out = run(bin().args(["solve", "--config"]).arg(&config).arg("--out").arg(tmp.path().join("o")));
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.pgm"));
}

#[test]
fn single_cell_sweep_agrees_with_solve() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        "sweep.json",
        r#"{
            "problem": {"name": "rosenbrock_l1"},
            "noise": {"variant": "BallUniform", "eps_f": 0.01, "eps_jac": 1e-5},
            "solver": {"max_iter": 20},
            "seeds": [4],
            "sweep": {"vartheta": [0.0]}
        }"#,
    );
    let out = run(bin().args(["sweep", "--config"]).arg(&config).arg("--out").arg(tmp.path().join("s")));
    assert_eq!(code(&out), 0);
    let out = run(bin().args(["solve", "--config"]).arg(&config).arg("--out").arg(tmp.path().join("o")));
    assert_eq!(code(&out), 0);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("o/summary.json")).unwrap()).unwrap();
    let mut runs = csv::Reader::from_path(tmp.path().join("s/runs.csv")).unwrap();
    let headers = runs.headers().unwrap().clone();
    let row = runs.records().next().unwrap().unwrap();
    let field = |name: &str| row[headers.iter().position(|h| h == name).unwrap()].to_string();
    assert_eq!(field("seed"), "4");
    assert_eq!(field("phi_true").parse::<f64>().unwrap(), summary["phi_true"].as_f64().unwrap());
    assert_eq!(field("iterations").parse::<u64>().unwrap(), summary["iterations"].as_u64().unwrap());
}

#[test]
fn sweep_output_does_not_depend_on_thread_count() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        "sweep.json",
        r#"{
            "problem": {"name": "quadratic_l1"},
            "noise": {"variant": "BallUniform", "eps_f": 0.1, "eps_jac": 1e-5},
            "solver": {"max_iter": 30},
            "seed_count": 6,
            "sweep": {"eps_f": [0.01, 0.1], "vartheta": [0.0, "required"]}
        }"#,
    );
    for (jobs, dir) in [("1", "a"), ("3", "b")] {
        let out = run(bin()
            .args(["sweep", "--jobs", jobs, "--config"])
            .arg(&config)
            .arg("--out")
            .arg(tmp.path().join(dir)));
        assert_eq!(code(&out), 0);
    }
    for file in ["runs.csv", "summary.csv", "summary.json"] {
        let a = fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let cells = csv::Reader::from_path(tmp.path().join("a/summary.csv")).unwrap().into_records().count();
    assert_eq!(cells, 4);
    let runs = csv::Reader::from_path(tmp.path().join("a/runs.csv")).unwrap().into_records().count();
    assert_eq!(runs, 24);
}

#[test]
fn output_directory_comes_from_the_environment() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "c.json", r#"{"problem": {"name": "quadratic_l1"}}"#);
    let target = tmp.path().join("from_env");
    let out = run(bin()
        .env(noisy_slp_cli::config::OUT_DIR_ENV, &target)
        .current_dir(tmp.path())
        .args(["solve", "--config"])
        .arg(&config));
    assert_eq!(code(&out), 0);
    assert!(target.join("records.csv").is_file());
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn verify_passes_and_reports_mutations() {
    let tmp = TempDir::new().unwrap();
    let out = run(bin().args(["verify", "--out"]).arg(tmp.path()));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 7);
    assert!(!tmp.path().join("verify_failures.json").exists());

    let out = run(bin().args(["verify", "--m2-scale", "0.5", "--out"]).arg(tmp.path()));
    assert_eq!(code(&out), 3);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("FAIL") && l.contains("model_error_bound")));
    let failures: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("verify_failures.json")).unwrap()).unwrap();
    assert_eq!(failures[0]["name"], "model_error_bound");
    assert!(failures[0]["counterexample"].is_object());
}

#[test]
fn synthetic_pgm_has_the_expected_layout() {
    let tmp = TempDir::new().unwrap();
    let binary = tmp.path().join("s.pgm");
    let plain = tmp.path().join("s_plain.pgm");
    assert_eq!(code(&run(bin().args(["pgm", "synthetic"]).arg(&binary))), 0);
    assert_eq!(code(&run(bin().args(["pgm", "synthetic", "--plain"]).arg(&plain))), 0);
    let bytes = fs::read(&binary).unwrap();
    assert!(bytes.starts_with(b"P5\n32 32\n255\n"));
    assert_eq!(bytes.len(), 13 + 32 * 32);
    assert_eq!(pgm::read_file(&binary).unwrap(), pgm::read_file(&plain).unwrap());
}

#[test]
fn pgm_round_trip_is_within_half_a_level() {
    let tmp = TempDir::new().unwrap();
    let image = synthetic_image(20, 28).map(|v| (v + 0.0013).min(1.0));
    for encoding in [Encoding::Binary, Encoding::Plain] {
        let path = tmp.path().join("img.pgm");
        pgm::write_file(&path, &image, encoding).unwrap();
        let back = pgm::read_file(&path).unwrap();
        assert_eq!(back.shape(), image.shape());
        assert!((&back - &image).amax() <= 1.0 / 510.0 + 1e-15);

        let copy = tmp.path().join("copy.pgm");
        let out = run(bin().args(["pgm", "convert"]).arg(&path).arg(&copy));
        assert_eq!(code(&out), 0);
        assert_eq!(pgm::read_file(&copy).unwrap(), back);
    }
}

#[test]
fn tv_config_reads_relative_images() {
    let tmp = TempDir::new().unwrap();
    pgm::write_file(&tmp.path().join("img.pgm"), &synthetic_image(8, 8), Encoding::Binary).unwrap();
    let config = write_config(
        tmp.path(),
        "tv.json",
        r#"{"problem": {"name": "tv_reconstruction", "image": "img.pgm"}, "solver": {"max_iter": 3}}"#,
    );
    let out = run(bin().args(["solve", "--config"]).arg(&config).arg("--out").arg(tmp.path().join("o")));
    assert!([0, 2].contains(&code(&out)), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["solver"]["step_mode"], "CauchyOnly");
    assert_eq!(summary["x_final"].as_array().unwrap().len(), 64);
}
