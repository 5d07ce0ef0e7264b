use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use sha2::{Digest, Sha256};

const CAVITY: &str = "[cavity]\nq = 10\nlambda_nm = 580\nn_medium = 1.44\ndelta_n = 0.11\n";

fn plscape(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_plscape"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn double_well(d: f64, h: f64) -> String {
    format!(
        "[scenario]\nkind = \"double_well\"\n\n{CAVITY}\n[geometry]\nd_um = {d}\nr_um = 0.6\nh_s_nm = {h}\n\n\
         [solver]\nk = 4\ndx_um = 0.1\nmargin_um = 1.5\n"
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let (code, stdout, stderr) = plscape(&["validate", s(&p)]);
            assert_eq!(code, 0, "{}: {stderr}", p.display());
            assert!(stdout.contains("valid"));
            n += 1;
        }
    }
    assert!(n >= 6);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dup = double_well(1.2, 600.0).replace("q = 10", "q = 10\nq = 10");
    let (code, _, err) = plscape(&["validate", s(&write_config(tmp.path(), "dup.toml", &dup))]);
    assert_eq!(code, 2);
    assert!(err.contains("line 6"), "{err}");

    let unknown = double_well(1.2, 600.0).replace("k = 4", "k = 4\nshift = 1");
    let (code, _, err) = plscape(&["validate", s(&write_config(tmp.path(), "unk.toml", &unknown))]);
    assert_eq!(code, 2);
    assert!(err.contains("shift"), "{err}");

    let no_kind = double_well(1.2, 600.0).replace("kind = \"double_well\"", "seed = 1");
    let (code, _, err) = plscape(&["validate", s(&write_config(tmp.path(), "nok.toml", &no_kind))]);
    assert_eq!(code, 2);
    assert!(err.contains("scenario.kind"), "{err}");

    let (code, _, _) = plscape(&["validate", s(&tmp.path().join("absent.toml"))]);
    assert_eq!(code, 4);
}

#[test]
fn solver_side_failures_keep_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    // 1 nm pillars are far too shallow to bind anything inside the window
    let cfg = write_config(tmp.path(), "flat.toml", &double_well(1.2, 1.0));
    let out = tmp.path().join("run");
    let (code, _, err) = plscape(&["simulate", s(&cfg), "--out", s(&out)]);
    assert_eq!(code, 3, "{err}");
    assert!(!out.exists());
    let partial = tmp.path().join("run.partial");
    assert!(partial.join("heightmap.hmap").is_file());
    assert!(!partial.join("manifest.json").exists());
}

#[test]
fn simulate_writes_hashed_manifest_and_repeats_bytewise() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "dw.toml", &double_well(1.2, 600.0));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let (code, _, err) = plscape(&["simulate", s(&cfg), "--out", s(out), "--seed", "7", "--threads", "2"]);
        assert_eq!(code, 0, "{err}");
    }
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["kind"], "double_well");
    let j = manifest["results"]["j_thz"].as_f64().unwrap();
    assert!(j > 0.5 && j < 3.0, "J = {j}");
    let files = manifest["files"].as_array().unwrap();
    let mut on_disk = 0;
    for entry in walk(&a) {
        if entry.file_name().unwrap() != "manifest.json" {
            on_disk += 1;
        }
    }
    assert_eq!(files.len(), on_disk);
    for f in files {
        let rel = f["path"].as_str().unwrap();
        let bytes = std::fs::read(a.join(rel)).unwrap();
        let hex: String = Sha256::digest(&bytes).iter().map(|x| format!("{x:02x}")).collect();
        assert_eq!(f["sha256"].as_str().unwrap(), hex, "{rel}");
        if rel.ends_with(".csv") {
            assert_eq!(bytes, std::fs::read(b.join(rel)).unwrap(), "{rel} differs between runs");
        }
    }
    for name in ["population.csv", "spectrum_position.csv", "spectrum_momentum.csv", "dispersion.csv", "modes/modes.csv"] {
        assert!(files.iter().any(|f| f["path"] == name), "{name} missing");
    }
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn output_directory_is_not_clobbered() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "dw.toml", &double_well(1.2, 600.0));
    let out = tmp.path().join("precious");
    std::fs::create_dir(&out).unwrap();
    std::fs::write(out.join("notes.txt"), "keep").unwrap();
    let (code, _, err) = plscape(&["simulate", s(&cfg), "--out", s(&out)]);
    assert_eq!(code, 2, "{err}");
    assert_eq!(std::fs::read_to_string(out.join("notes.txt")).unwrap(), "keep");
}

#[test]
fn distance_sweep_writes_coupling_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "dw.toml", &double_well(1.2, 600.0));
    let out = tmp.path().join("sweep");
    let (code, stdout, err) = plscape(&[
        "sweep", s(&cfg), "--param", "geometry.d", "--values", "1.0:1.6:0.3", "--out", s(&out),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("strictly decreasing: true"), "{stdout}");
    let curve = std::fs::read_to_string(out.join("coupling_curve.csv")).unwrap();
    let js: Vec<f64> = curve
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(js.len(), 3);
    assert!(js.windows(2).all(|w| w[1] < w[0]), "{js:?}");
    for i in 0..3 {
        assert!(out.join(format!("point_{i:03}/manifest.json")).is_file());
    }
    let (code, _, _) = plscape(&["sweep", s(&cfg), "--param", "geometry.d", "--values", "x", "--out", s(&out)]);
    assert_eq!(code, 2);
}
