use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn paw(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paw")).args(args).env("PAW_OUTPUT_DIR", out).output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const MINIMAL: &str = r#"
name = "mini"
seed = 3

[universe]
constructor = "double_constrained_state"
d = 2
p0 = 0.0
period = 6.283185307179586
rod_mass = 2.0
sys_mass = 1.0

[[analysis]]
op = "conditional_prob_discrete"
name = "grid"
clock_points = 4
rod_points = 3
sys_points = 3
rod_index = 1
"#;

#[test]
fn run_writes_report_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = paw(&["run", example("sec3c.scenario").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let stdout = text(&o.stdout);
    assert!(stdout.contains("wall_time_s"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sec3c/report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["scenario"], "sec3c");
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(report["status"], "pass");
    let grid = report["analyses"].as_array().unwrap().iter().find(|a| a["name"] == "grid64").unwrap();
    assert!(grid["tags"].as_array().unwrap().iter().any(|t| t == "Eq56"));

    let csv = std::fs::read_to_string(dir.path().join("sec3c/grid64.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,delta,probability");
    assert_eq!(lines.len(), 1 + 64 * 64 + 1);
    let total = lines.last().unwrap();
    assert!(total.starts_with("total,,"), "{total}");
    let sum: f64 = total.rsplit(',').next().unwrap().parse().unwrap();
    // 64 clock readings, each a distribution over 64 system readings
    assert!((sum - 64.0).abs() < 1e-9, "{sum}");
    assert!(!report.to_string().contains("wall_time"));
}

#[test]
fn malformed_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.scenario", &MINIMAL.replace("seed = 3", "seed = 3\nsede = 4"));
    let o = paw(&["run", unknown.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = text(&o.stderr);
    assert!(err.contains("sede") && err.contains("line"), "{err}");

    let op = write(dir.path(), "o.scenario", &MINIMAL.replace("conditional_prob_discrete", "no_such_op"));
    assert_eq!(paw(&["run", op.to_str().unwrap()], dir.path()).status.code(), Some(2));

    let neg = write(dir.path(), "n.scenario", &MINIMAL.replace("rod_mass = 2.0", "rod_mass = -2.0"));
    assert_eq!(paw(&["run", neg.to_str().unwrap()], dir.path()).status.code(), Some(2));

    let missing = dir.path().join("absent.scenario");
    assert_eq!(paw(&["run", missing.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn sweep_reports_slope() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("heavy_reference.scenario");
    let o = paw(&["sweep", cfg.to_str().unwrap(), "--param", "mass_ratio", "--values", "10,100,1000"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("heavy_reference/sweep_mass_ratio.csv")).unwrap();
    assert!(csv.starts_with("value,analysis,metric\n"));
    let slope: f64 = csv.lines().find(|l| l.starts_with("slope,")).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((slope + 1.0).abs() < 0.1, "{slope}");

    let empty = paw(&["sweep", cfg.to_str().unwrap(), "--param", "mass_ratio", "--values", ""], dir.path());
    assert_eq!(empty.status.code(), Some(2));
    let bad = paw(&["sweep", cfg.to_str().unwrap(), "--param", "seed", "--values", "1,2"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn verify_filter_and_mutation() {
    let dir = tempfile::tempdir().unwrap();
    let o = paw(&["verify", "--filter", "measurements"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let stdout = text(&o.stdout);
    let checks: Vec<&str> = stdout.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL") || l.starts_with("SKIP")).collect();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|l| l.contains("measurements")), "{stdout}");

    let o = paw(&["verify", "--filter", "relational", "--mutate", "phase-sign"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(text(&o.stdout).contains("FAIL"));

    assert_eq!(paw(&["verify", "--filter", "nothing"], dir.path()).status.code(), Some(2));
}
