use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn dgap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgap")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = dgap(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthesises `phases` snapshot dirs under `root/d` and returns their paths.
fn synth(root: &Path, amplitude: f64, phases: u64) -> Vec<PathBuf> {
    let cfg = root.join("synth.cfg");
    fs::write(
        &cfg,
        format!("levels=3:4,4:6\nsamples=120\ncycle_length=6\namplitude={amplitude}\nseed=7\nphases=0-{}\n", phases - 1),
    )
    .unwrap();
    let out = root.join("d");
    ok(&["synth", "--config", s(&cfg), "--out", s(&out)]);
    (0..phases).map(|t| out.join(format!("t{t:04}"))).collect()
}

#[test]
fn identical_dirs_have_zero_gap() {
    let tmp = TempDir::new().unwrap();
    let dirs = synth(tmp.path(), 1.0, 1);
    for metric in ["mmd", "swd", "dss", "dss-full"] {
        let out = tmp.path().join(format!("{metric}.json"));
        ok(&["gap", "--source", s(&dirs[0]), "--target", s(&dirs[0]), "--metric", metric, "--out", s(&out)]);
        assert_eq!(read_json(&out)["aggregate"], 0.0, "{metric}");
    }
}

#[test]
fn missing_manifest_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let dirs = synth(tmp.path(), 1.0, 1);
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = dgap(&["gap", "--source", s(&dirs[0]), "--target", s(&empty), "--out", s(&tmp.path().join("g.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest"));
}

#[test]
fn bad_inputs_are_validation_errors() {
    let tmp = TempDir::new().unwrap();
    let dirs = synth(tmp.path(), 1.0, 2);
    let g = tmp.path().join("g.json");
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "colour=blue\n").unwrap();
    let out = dgap(&["gap", "--source", s(&dirs[0]), "--target", s(&dirs[1]), "--config", s(&cfg), "--out", s(&g)]);
    assert_eq!(out.status.code(), Some(2));
    let out = dgap(&["gap", "--source", s(&dirs[0]), "--target", s(&dirs[1]), "--m", "0", "--out", s(&g)]);
    assert_eq!(out.status.code(), Some(2));

    let fset = dirs[1].join("level_3.fset");
    let bytes = fs::read(&fset).unwrap();
    fs::write(&fset, &bytes[..bytes.len() - 3]).unwrap();
    let out = dgap(&["gap", "--source", s(&dirs[0]), "--target", s(&dirs[1]), "--out", s(&g)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn extreme_thresholds() {
    let tmp = TempDir::new().unwrap();
    let dirs = synth(tmp.path(), 2.0, 5);
    let targets: Vec<&str> = dirs[1..].iter().map(|p| s(p)).collect();
    for (threshold, action) in [("0", "Adapt"), ("1e9", "Skip")] {
        let out = tmp.path().join("sim.json");
        let mut args = vec!["simulate", "--source", s(&dirs[0]), "--threshold", threshold, "--out", s(&out), "--targets"];
        args.extend(&targets);
        let stdout = ok(&args);
        let steps: Vec<&str> = stdout.lines().filter(|l| l.starts_with("step=")).collect();
        assert_eq!(steps.len(), 4);
        assert!(steps.iter().all(|l| l.contains(&format!("action={action}"))), "{stdout}");
        let log = read_json(&out);
        if action == "Skip" {
            assert_eq!(log["total_cost"], 0.0);
            assert_eq!(log["adapt_count"], 0);
        } else {
            assert_eq!(log["adapt_count"], 4);
        }
    }
}

#[test]
fn sweep_rows_match_thresholds_and_simulate() {
    let tmp = TempDir::new().unwrap();
    let dirs = synth(tmp.path(), 2.0, 5);
    let targets: Vec<&str> = dirs[1..].iter().map(|p| s(p)).collect();
    let sweep = tmp.path().join("sweep.json");
    let mut args = vec!["sweep", "--source", s(&dirs[0]), "--thresholds", "0,0.05,0.05,1e9", "--out", s(&sweep), "--metric", "swd", "--targets"];
    args.extend(&targets);
    ok(&args);
    let rows = read_json(&sweep);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1], rows[2]);
    for key in ["threshold", "adapt_count", "total_cost", "mean_gap"] {
        assert!(rows[0].get(key).is_some(), "{key}");
    }
    let table = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(table.starts_with("threshold,total_cost,adapt_count"));

    let sim = tmp.path().join("sim.json");
    let mut args = vec!["simulate", "--source", s(&dirs[0]), "--threshold", "0.05", "--metric", "swd", "--out", s(&sim), "--targets"];
    args.extend(&targets);
    ok(&args);
    let log = read_json(&sim);
    assert_eq!(rows[1]["adapt_count"], log["adapt_count"]);
    assert_eq!(rows[1]["total_cost"], log["total_cost"]);
}

#[test]
fn frozen_pool_flag_leaves_pool_untouched() {
    let tmp = TempDir::new().unwrap();
    let dirs = synth(tmp.path(), 2.0, 4);
    let out = tmp.path().join("sim.json");
    ok(&[
        "simulate", "--source", s(&dirs[0]), "--threshold", "0", "--frozen-pool", "true", "--out", s(&out),
        "--targets", s(&dirs[1]), s(&dirs[2]), s(&dirs[3]),
    ]);
    let log = read_json(&out);
    for d in log["decisions"].as_array().unwrap() {
        assert_eq!(d["pool_rows_before"], d["pool_rows_after"]);
    }
}

#[test]
fn zero_amplitude_gives_small_gaps() {
    let tmp = TempDir::new().unwrap();
    let flat = synth(tmp.path(), 0.0, 4);
    let out = tmp.path().join("g.json");
    for metric in ["mmd", "swd"] {
        ok(&["gap", "--source", s(&flat[0]), "--target", s(&flat[3]), "--metric", metric, "--out", s(&out)]);
        let g = read_json(&out)["aggregate"].as_f64().unwrap();
        assert!(g < 0.2, "{metric}: {g}");
    }
    // Same phase mod the cycle means same noise stream: identical domains.
    let tmp2 = TempDir::new().unwrap();
    let drift = synth(tmp2.path(), 3.0, 7);
    ok(&["gap", "--source", s(&drift[0]), "--target", s(&drift[6]), "--metric", "mmd", "--out", s(&out)]);
    assert_eq!(read_json(&out)["aggregate"], 0.0);
}

#[test]
fn correlate_profiles() {
    let tmp = TempDir::new().unwrap();
    let gaps = tmp.path().join("gaps.csv");
    let aps = tmp.path().join("aps.csv");
    let out = tmp.path().join("c.json");
    fs::write(&aps, "domain_id,ap\nsource,0.8\na,0.7\nb,0.5\nc,0.2\n").unwrap();
    fs::write(&gaps, "domain_id,gap\na,0.1\nb,0.3\nc,0.6\n").unwrap();
    ok(&["correlate", "--gaps", s(&gaps), "--aps", s(&aps), "--out", s(&out)]);
    let r = read_json(&out);
    assert!(r["kl"].as_f64().unwrap().abs() < 1e-9);
    assert_eq!(r["spearman"], 1.0);

    ok(&["correlate", "--gaps", s(&gaps), "--aps", s(&aps), "--kl-direction", "gap-ap", "--out", s(&out)]);
    assert_eq!(read_json(&out)["kl_direction"], "gap-ap");

    fs::write(&gaps, "domain_id,gap\na,0.1\nb,0.3\nz,0.6\n").unwrap();
    let bad = dgap(&["correlate", "--gaps", s(&gaps), "--aps", s(&aps), "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(2));
    let bad = dgap(&["correlate", "--gaps", s(&gaps), "--aps", s(&aps), "--source-id", "nope", "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let dirs = synth(tmp.path(), 2.0, 4);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "simulate", "--source", s(&dirs[0]), "--threshold", "0.05", "--seed", "9", "--out", s(&out),
            "--targets", s(&dirs[1]), s(&dirs[2]), s(&dirs[3]),
        ]);
        fs::read(out).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));

    let again = TempDir::new().unwrap();
    let twin = synth(again.path(), 2.0, 4);
    for (a, b) in dirs.iter().zip(&twin) {
        assert_eq!(fs::read(a.join("level_4.fset")).unwrap(), fs::read(b.join("level_4.fset")).unwrap());
    }
}
