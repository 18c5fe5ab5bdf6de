//! End-to-end checks of ingestion, outputs and the error contract.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tuckermc"))
}

fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path
}

fn stderr_line(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or("");
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr not JSON: {:?}", text))
}

/// 2x2x2 array with one missing cell, in long format.
fn small_csv() -> String {
    let mut s = String::from("idx1,idx2,idx3,value\n");
    for k in 1..=2 {
        for j in 1..=2 {
            for i in 1..=2 {
                if (i, j, k) == (1, 1, 1) {
                    s.push_str("1,1,1,NA\n");
                } else {
                    s.push_str(&format!("{},{},{},{}\n", i, j, k, i as f64 + 0.25 * j as f64));
                }
            }
        }
    }
    s
}

#[test]
fn ingest_export_round_trip_is_value_exact() {
    use tuckermc_cli::ingest::{read_long_csv, write_long_csv};
    let tmp = TempDir::new().unwrap();
    // awkward but exactly representable and shortest-printable values,
    // plus one masked cell
    let vals = [1.5, -0.25, 0.1, 3.0e-17, f64::NAN, 12345.678];
    let mask: Vec<bool> = vals.iter().map(|v| !v.is_nan()).collect();
    let t = tuckermc::DenseTensor::with_mask(vec![3, 2], vals.to_vec(), mask).unwrap();
    let path = tmp.path().join("t.csv");
    write_long_csv(&t, &path).unwrap();
    let back = read_long_csv(&path, &[3, 2]).unwrap();
    for i in 0..6 {
        if t.is_observed(i) {
            assert_eq!(t.values()[i].to_bits(), back.values()[i].to_bits());
        } else {
            assert!(!back.is_observed(i));
        }
    }
    // and once more through the file
    let path2 = tmp.path().join("t2.csv");
    write_long_csv(&back, &path2).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
}

#[test]
fn decompose_round_trips_values_and_writes_outputs() {
    let tmp = TempDir::new().unwrap();
    // fully observed 2x2 matrix in 4 rows
    let data = write_file(
        tmp.path(),
        "y.csv",
        "idx1,idx2,value\n1,1,1.5\n2,1,-0.25\n1,2,3.125\n2,2,0.0078125\n",
    );
    let out_dir = tmp.path().join("out");
    let status = bin()
        .args([
            "decompose",
            "--method",
            "hooi",
            "--data",
            data.to_str().unwrap(),
            "--dims",
            "2,2",
            "--ranks",
            "2,2",
            "--output-dir",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(status.status.success(), "{:?}", status);
    for f in ["mhat.csv", "eigenspectra.csv", "singular_vectors.csv", "tau.csv", "manifest.json"] {
        assert!(out_dir.join(f).exists(), "missing {}", f);
    }
    // the full-rank least-squares fit is the data array itself, so the
    // emitted values round-trip exactly
    let mhat = fs::read_to_string(out_dir.join("mhat.csv")).unwrap();
    for v in ["1.5", "-0.25", "3.125", "0.0078125"] {
        assert!(mhat.contains(v), "mhat.csv lost value {}: {}", v, mhat);
    }
    // eigenspectra sum to one per mode
    let spec = fs::read_to_string(out_dir.join("eigenspectra.csv")).unwrap();
    let mut sums = std::collections::BTreeMap::new();
    for line in spec.lines().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        *sums.entry(parts[0].to_string()).or_insert(0.0) += parts[2].parse::<f64>().unwrap();
    }
    for (_, s) in sums {
        assert!((s - 1.0).abs() < 1e-9);
    }
}

#[test]
fn ingest_masks_na_and_absent_cells() {
    let tmp = TempDir::new().unwrap();
    // drop one row entirely and mark another NA
    let mut content = small_csv();
    let keep: Vec<&str> = content.lines().filter(|l| !l.starts_with("2,2,2")).collect();
    content = keep.join("\n");
    let data = write_file(tmp.path(), "y.csv", &content);
    let out_dir = tmp.path().join("out");
    let status = bin()
        .args([
            "decompose",
            "--method",
            "hooi",
            "--data",
            data.to_str().unwrap(),
            "--dims",
            "2,2,2",
            "--ranks",
            "1,1,1",
            "--output-dir",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(status.status.success(), "{:?}", status);
    // the fitted array is complete
    let mhat = fs::read_to_string(out_dir.join("mhat.csv")).unwrap();
    assert_eq!(mhat.lines().count(), 9);
    assert!(!mhat.contains("NA"));
}

#[test]
fn duplicate_cells_rejected_with_both_line_numbers() {
    let tmp = TempDir::new().unwrap();
    let data = write_file(
        tmp.path(),
        "y.csv",
        "idx1,idx2,value\n1,1,1.0\n2,1,2.0\n1,1,3.0\n1,2,1.0\n2,2,1.0\n",
    );
    let out = bin()
        .args([
            "decompose",
            "--method",
            "hosvd",
            "--data",
            data.to_str().unwrap(),
            "--dims",
            "2,2",
            "--ranks",
            "1,1",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = stderr_line(&out);
    let msg = err["error"].as_str().unwrap();
    assert!(msg.contains("duplicate"), "{}", msg);
    assert!(msg.contains(":4"), "should name the duplicate line: {}", msg);
    assert!(msg.contains("line 2"), "should name the first line: {}", msg);
}

#[test]
fn index_out_of_range_and_malformed_rows_report_lines() {
    let tmp = TempDir::new().unwrap();
    let data = write_file(
        tmp.path(),
        "y.csv",
        "idx1,idx2,value\n1,1,1.0\n3,1,2.0\n",
    );
    let out = bin()
        .args([
            "decompose", "--method", "hosvd",
            "--data", data.to_str().unwrap(),
            "--dims", "2,2", "--ranks", "1,1",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let msg = stderr_line(&out)["error"].as_str().unwrap().to_string();
    assert!(msg.contains("out of range") && msg.contains(":3"), "{}", msg);

    let data = write_file(
        tmp.path(),
        "y2.csv",
        "idx1,idx2,value\n1,1,1.0\n2,oops,2.0\n",
    );
    let out = bin()
        .args([
            "decompose", "--method", "hosvd",
            "--data", data.to_str().unwrap(),
            "--dims", "2,2", "--ranks", "1,1",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let msg = stderr_line(&out)["error"].as_str().unwrap().to_string();
    assert!(msg.contains(":3"), "{}", msg);
}

#[test]
fn unknown_config_keys_rejected_and_missing_keys_reported_together() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_file(tmp.path(), "run.cfg", "bogus_key=1\n");
    let out = bin()
        .args(["fit-normal", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let msg = stderr_line(&out)["error"].as_str().unwrap().to_string();
    assert!(msg.contains("unknown configuration keys") && msg.contains("bogus_key"), "{}", msg);

    // no config at all: every missing required key named at once
    let out = bin().args(["fit-normal"]).output().unwrap();
    assert!(!out.status.success());
    let msg = stderr_line(&out)["error"].as_str().unwrap().to_string();
    for key in ["family", "data", "dims", "ranks"] {
        assert!(msg.contains(key), "missing key {} not reported: {}", key, msg);
    }
}

#[test]
fn fit_normal_default_schedule_and_manifest_reproduction() {
    let tmp = TempDir::new().unwrap();
    // small fully observed array
    let mut content = String::from("idx1,idx2,idx3,value\n");
    let mut v = 0.37f64;
    for k in 1..=2 {
        for j in 1..=3 {
            for i in 1..=3 {
                v = (v * 97.0 + 13.0) % 7.0 - 3.0;
                content.push_str(&format!("{},{},{},{}\n", i, j, k, v));
            }
        }
    }
    let data = write_file(tmp.path(), "y.csv", &content);
    let out_a = tmp.path().join("a");
    let run = |dir: &Path| {
        let out = bin()
            .args([
                "fit-normal",
                "--family",
                "het",
                "--data",
                data.to_str().unwrap(),
                "--dims",
                "3,3,2",
                "--ranks",
                "1,1,1",
                "--seed",
                "7",
                "--output-dir",
                dir.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{:?}", out);
    };
    run(&out_a);
    // default schedule: 11000 iterations, 1000 burn-in, thin 10
    let traces = fs::read_to_string(out_a.join("traces.csv")).unwrap();
    assert_eq!(traces.lines().count(), 1001, "1000 saved rows plus header");
    assert!(traces.starts_with("iteration,sigma_sq,tau_sq,lambda_1_1"));

    // the manifest's resolved config reproduces the run byte for byte
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("manifest.json")).unwrap()).unwrap();
    let mut cfg_text = String::new();
    for (k, val) in manifest["config"].as_object().unwrap() {
        if k == "output_dir" {
            continue;
        }
        cfg_text.push_str(&format!("{}={}\n", k, val.as_str().unwrap()));
    }
    let cfg = write_file(tmp.path(), "replay.cfg", &cfg_text);
    let out_b = tmp.path().join("b");
    let out = bin()
        .args([
            "fit-normal",
            "--config",
            cfg.to_str().unwrap(),
            "--output-dir",
            out_b.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{:?}", out);
    for f in ["traces.csv", "mhat.csv", "eigenspectra.csv", "singular_vectors.csv", "tau.csv"] {
        let a = fs::read(out_a.join(f)).unwrap();
        let b = fs::read(out_b.join(f)).unwrap();
        assert_eq!(a, b, "{} differs between identical runs", f);
    }
}

#[test]
fn fit_sftd_default_schedule_row_count() {
    let tmp = TempDir::new().unwrap();
    let mut content = String::from("idx1,idx2,idx3,value\n");
    let mut v = 1u64;
    for k in 1..=2 {
        for j in 1..=2 {
            for i in 1..=3 {
                v = v.wrapping_mul(6364136223846793005).wrapping_add(1);
                content.push_str(&format!("{},{},{},{}\n", i, j, k, v % 4));
            }
        }
    }
    let data = write_file(tmp.path(), "y.csv", &content);
    let out_dir = tmp.path().join("out");
    let out = bin()
        .args([
            "fit-sftd",
            "--data",
            data.to_str().unwrap(),
            "--dims",
            "3,2,2",
            "--ranks",
            "1,1,1",
            "--seed",
            "3",
            "--output-dir",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{:?}", out);
    // default schedule: 55000 iterations, 5000 burn-in, thin 10
    let traces = fs::read_to_string(out_dir.join("traces.csv")).unwrap();
    assert_eq!(traces.lines().count(), 5001);
    // the scale is pinned in the scale-free model, so no sigma column
    assert!(traces.starts_with("iteration,tau_sq"));
}

#[test]
fn summarize_recomputes_ess_and_flags_low_traces() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("run");
    fs::create_dir_all(&dir).unwrap();
    // one white-noise trace and one near-constant random walk
    let mut content = String::from("iteration,sigma_sq,tau_sq\n");
    let mut walk = 1.0f64;
    let mut state = 11u64;
    let mut unif = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for i in 0..1000 {
        walk += 0.001 * (unif() - 0.5);
        content.push_str(&format!("{},{},{}\n", i + 1, unif() + 0.5, walk));
    }
    fs::write(dir.join("traces.csv"), content).unwrap();
    let out = bin()
        .args(["summarize", "--dir", dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{:?}", out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("trace sigma_sq"), "{}", stdout);
    assert!(stdout.contains("BELOW 300"), "random walk should be flagged: {}", stdout);
    let ess = fs::read_to_string(dir.join("ess.csv")).unwrap();
    assert!(ess.starts_with("trace,ess,degenerate,flagged"));
    let lines: Vec<&str> = ess.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[2].ends_with("true"), "{}", ess);
    assert!(lines[1].ends_with("false"), "{}", ess);
}

#[test]
fn failures_exit_nonzero_with_machine_readable_line() {
    let out = bin()
        .args(["decompose", "--method", "hosvd", "--data", "/nonexistent.csv", "--dims", "2,2", "--ranks", "1,1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_line(&out);
    assert!(err["error"].is_string());
    assert_eq!(err["kind"], "run");

    // usage errors exit 2, also machine readable
    let out = bin().args(["simulate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_line(&out);
    assert_eq!(err["kind"], "usage");
}
