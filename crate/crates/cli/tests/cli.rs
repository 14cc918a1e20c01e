use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use passive_inverse::{BoundaryTrace, ModeSet, Profile};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn passive(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_passive"))
        .args(args)
        .env_remove("PASSIVE_OUT_ROOT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_trace(path: &Path) -> BoundaryTrace {
    BoundaryTrace::from_csv(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn forward_wave_matches_golden_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("forward_wave.toml");
    let out = passive(&["forward-wave", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let got = read_trace(&dir.path().join("trace.csv"));
    let golden = read_trace(&fixture("forward_wave_golden.csv"));
    assert_eq!(got.len(), golden.len());
    assert_eq!(got.dt(), golden.dt());
    for (a, b) in got.values().iter().zip(golden.values()) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    Profile::from_csv(&std::fs::read_to_string(dir.path().join("c.csv")).unwrap()).unwrap();
}

#[test]
fn empty_config_fails_with_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "empty.toml", "");
    let out = passive(&["forward-wave", "--config", &cfg]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
}

#[test]
fn typo_in_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("forward_wave.toml")).unwrap().replace("cfl =", "cfll =");
    let cfg = write_config(dir.path(), "typo.toml", &text);
    let out = passive(&["forward-wave", "--config", &cfg]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cfll"));
}

#[test]
fn subcommand_must_match_config_mode() {
    let cfg = fixture("forward_wave.toml");
    let out = passive(&["forward-heat", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
}

const NOISY_HEAT: &str = r#"
schema_version = 1
seed = 5

[grids]
heat_t1 = 0.01
heat_t2 = 0.5
heat_samples = 200
mode_count = 40

[noise]
amplitude = 1e-6

[extract]
equation = "heat"
count = 4

[profiles.b]
terms = [{ shape = "cosine", amplitude = 0.5, frequency = 2.0 }]

[profiles.g]
terms = [{ shape = "bump", amplitude = 1.0, left = 0.0, right = 0.3, power = 2 }]
"#;

#[test]
fn seeded_runs_are_bit_identical_and_reparse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "heat.toml", NOISY_HEAT);
    let run = |sub: &str, seed: &str| {
        let out_dir = dir.path().join(format!("{sub}-{seed}"));
        let out = passive(&[sub, "--config", &cfg, "--seed", seed, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let a = run("forward-heat", "5");
    let b = run("forward-heat", "5");
    let c = run("forward-heat", "6");
    let text = |d: &Path| std::fs::read(d.join("trace.csv")).unwrap();
    assert_eq!(text(&a), text(&b));
    assert_ne!(text(&a), text(&c));
    let e = run("extract", "5");
    let modes = ModeSet::from_csv(&std::fs::read_to_string(e.join("modes.csv")).unwrap()).unwrap();
    assert!(!modes.is_empty());
    let summary = std::fs::read_to_string(e.join("summary.toml")).unwrap();
    assert!(summary.parse::<toml::Table>().is_ok());
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("forward_wave.toml");
    let out = Command::new(env!("CARGO_BIN_EXE_passive"))
        .args(["forward-wave", "--config", cfg.to_str().unwrap()])
        .env("PASSIVE_OUT_ROOT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("forward_wave/trace.csv").exists());
}

fn compare_config(c2_amp: f64, f2_right: f64) -> String {
    format!(
        r#"
schema_version = 1
mode = "compare_pairs"

[grids]
wave_resolution = 512
t_max = 3.0

[profiles.c1]
base = 1.0
[profiles.f1]
terms = [{{ shape = "bump", amplitude = 1.0, left = 0.2, right = 0.7, power = 4 }}]
[profiles.c2]
base = 1.0
window = {{ left = 0.1, right = 0.9, ramp = 0.1 }}
terms = [{{ shape = "gaussian", amplitude = {c2_amp}, centre = 0.5, rate = 100.0 }}]
[profiles.f2]
terms = [{{ shape = "bump", amplitude = 1.0, left = 0.2, right = {f2_right}, power = 4 }}]
"#
    )
}

#[test]
fn compare_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, text: &str| {
        let cfg = write_config(dir.path(), name, text);
        let out = passive(&["compare", "--config", &cfg, "--out", dir.path().join(format!("{name}.out")).to_str().unwrap()]);
        (out.status.success(), String::from_utf8_lossy(&out.stdout).to_string(), String::from_utf8_lossy(&out.stderr).to_string())
    };
    let (ok, stdout, _) = run("same.toml", &compare_config(0.0, 0.7));
    assert!(ok && stdout.contains("verdict: indistinguishable_at_resolution"), "{stdout}");
    let (ok, stdout, _) = run("speed.toml", &compare_config(0.1, 0.7));
    assert!(ok && stdout.contains("verdict: distinguishable"), "{stdout}");
    let (ok, _, stderr) = run("support.toml", &compare_config(0.0, 1.2));
    assert!(!ok && stderr.contains("F_supp"), "{stderr}");
}

#[test]
fn heat_pairs_must_share_known_convection() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
schema_version = 1
mode = "compare_pairs"
[compare]
equation = "heat"
[profiles.b1]
base = 0.2
[profiles.g1]
terms = [{ shape = "bump", amplitude = 1.0, left = 0.0, right = 0.1, power = 2 }]
[profiles.b2]
base = 0.3
[profiles.g2]
terms = [{ shape = "bump", amplitude = 1.0, left = 0.0, right = 0.1, power = 2 }]
"#;
    let cfg = write_config(dir.path(), "heat.toml", text);
    let out = passive(&["compare", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("supp_cond"));
}

#[test]
fn selftest_passes() {
    let out = passive(&["selftest"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}
