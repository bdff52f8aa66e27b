use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blowup-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("BLOWUP_LAB_OUT")
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn unknown_subcommand_lists_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["bogus", "--dim", "5"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bogus") && err.contains("energy-check"), "{err}");
}

#[test]
fn critical_points_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["critical-points", "--dim", "5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let json = String::from_utf8(read(dir.path(), "critical-points.json")).unwrap();
    assert!(json.contains("\"schema_version\": 1"));
    assert!(json.contains("\"f1_t1\""));
    let csv = String::from_utf8(read(dir.path(), "critical-points-predicted_delta.csv")).unwrap();
    assert!(csv.starts_with("theorem,bubble,epsilon,delta\n"));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = Command::new(env!("CARGO_BIN_EXE_blowup-lab"))
            .args(["constants", "--dim", "5", "--seed", "11", "--samples", "2000", "--out", "unused"])
            .env("BLOWUP_LAB_OUT", dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    }
    for name in ["constants.json", "constants-gamma.csv", "constants-omega1.csv"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs");
    }
}

#[test]
fn invalid_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[domain]\ndim = 5\nepsilon = 1\n").unwrap();
    let out = lab(&["constants", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));

    fs::write(&cfg, "epsilon = [0.01, 0.02]\n[domain]\ndim = 5\n").unwrap();
    let out = lab(&["constants", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
}

#[test]
fn environment_overrides_output_directory() {
    let (flag, env) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let out = Command::new(env!("CARGO_BIN_EXE_blowup-lab"))
        .args(["critical-points", "--dim", "5", "--format", "json", "--out"])
        .arg(flag.path())
        .env("BLOWUP_LAB_OUT", env.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(env.path().join("critical-points.json").exists());
    assert!(!env.path().join("critical-points-predicted_delta.csv").exists());
    assert!(fs::read_dir(flag.path()).unwrap().next().is_none());
}


#[test]
fn shipped_configs_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "toml") {
            continue;
        }
        seen += 1;
        let dir = tempfile::tempdir().unwrap();
        let out = lab(&["critical-points", "--config", path.to_str().unwrap()], dir.path());
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
    assert!(seen >= 3);
}
