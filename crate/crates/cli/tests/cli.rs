use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use thermoacoustic::io::{read_field, read_trace, PgmImage};
use thermoacoustic_cli::manifest::{sha256_hex, OUTPUT_ROOT_ENV};

fn tat(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tat")).args(args).env(OUTPUT_ROOT_ENV, root).output().unwrap()
}

fn ok(root: &Path, args: &[&str]) -> String {
    let out = tat(root, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(format!("{name}.json"));
    std::fs::write(&p, body).unwrap();
    p
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn check_manifest(dir: &Path) -> Vec<String> {
    let m = json(&dir.join("manifest.json"));
    let mut names = Vec::new();
    for e in m["files"].as_array().unwrap() {
        let name = e["path"].as_str().unwrap();
        let data = std::fs::read(dir.join(name)).unwrap();
        assert_eq!(e["sha256"].as_str().unwrap(), sha256_hex(&data), "{name}");
        assert_eq!(e["bytes"].as_u64().unwrap(), data.len() as u64);
        names.push(name.to_string());
    }
    let mut on_disk: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    assert_eq!(names, on_disk, "manifest must list every produced file");
    names
}

#[test]
fn run_ns_config_populates_rel_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c1_ns",
        r#"{"speed": "c1", "phantom": "shepp_logan", "T_mult": 4, "method": "ns", "max_terms": 9, "grid": {"nx": 101}}"#,
    );
    let stdout = ok(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert!(stdout.contains("NS error"), "{stdout}");
    // default directory: <output root>/<config name>
    let dir = tmp.path().join("c1_ns");
    let report = json(&dir.join("report.json"));
    let e = report["rel_error"].as_f64().unwrap();
    assert!(e > 0.0 && e < 0.5, "rel_error {e}");
    assert_eq!(report["ns"]["rel_error"].as_f64().unwrap(), e);
    assert!((report["T"].as_f64().unwrap() - 4.0 * report["T0"].as_f64().unwrap()).abs() < 1e-12);
    let k = report["ns"]["k_used"].as_u64().unwrap() as usize;
    assert_eq!(report["iterates"].as_array().unwrap().len(), k + 1);
    let names = check_manifest(&dir);
    for needed in ["report.json", "trace.trc", "phantom.bin", "phantom.json", "ns.pgm", "slice_x.csv", "slice_y.csv"] {
        assert!(names.iter().any(|n| n == needed), "missing {needed}");
    }
    let trace = read_trace(&dir.join("trace.trc")).unwrap();
    assert_eq!(trace.n_t, report["n_t"].as_u64().unwrap() as usize);
    let slice = std::fs::read_to_string(dir.join("slice_x.csv")).unwrap();
    assert_eq!(slice.lines().next().unwrap(), "x,truth,ns");
    assert_eq!(slice.lines().count(), 102);
}

#[test]
fn run_tr_config_has_one_iterate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "tr",
        r#"{"speed": "c1", "phantom": "shepp_logan", "T_mult": 2, "method": "tr", "grid": {"nx": 81}, "output": {"dir": "custom"}}"#,
    );
    ok(tmp.path(), &["run", cfg.to_str().unwrap()]);
    let report = json(&tmp.path().join("custom/report.json"));
    assert_eq!(report["iterates"].as_array().unwrap().len(), 1);
    assert!(report["ns"].is_null());
    assert_eq!(report["rel_error"], report["tr"]["rel_error"]);
}

#[test]
fn invalid_config_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad", r#"{"speed": "c1", "phantom": "shepp_logan", "T_mult": 0}"#);
    let out = tat(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("T_mult"), "{err}");
    let cfg = write_config(tmp.path(), "typo", r#"{"speed": "c1", "phantom": "shepp_logan", "T": 2, "mehtod": "ns"}"#);
    assert!(!tat(tmp.path(), &["run", cfg.to_str().unwrap()]).status.success());
    assert!(!tat(tmp.path(), &["run", "/nonexistent/config.json"]).status.success());
}

#[test]
fn seeded_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "noisy",
        r#"{"speed": "c3", "phantom": "shepp_logan", "time": {"T_mult": 3}, "noise": {"level": 0.1, "seed": 11},
            "mask": {"sides": "NWE"}, "method": {"kind": "both", "max_terms": 4}, "grid": {"nx": 81}}"#,
    );
    ok(tmp.path(), &["run", cfg.to_str().unwrap(), "--out", "a"]);
    ok(tmp.path(), &["run", cfg.to_str().unwrap(), "--out", "b"]);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for name in check_manifest(&a) {
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name} differs");
    }
    assert_eq!(std::fs::read(a.join("manifest.json")).unwrap(), std::fs::read(b.join("manifest.json")).unwrap());
}

#[test]
fn eikonal_prints_t0_and_writes_the_map() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(tmp.path(), &["eikonal", "--speed", "c1", "--gamma", "all"]);
    let t0: f64 = stdout.lines().next().unwrap().trim_start_matches("T0 = ").parse().unwrap();
    assert!((t0 - 1.1767).abs() < 0.02 * 1.1767, "T0 {t0}");
    let dir = tmp.path().join("eikonal");
    let tt = read_field(&dir.join("traveltime.bin")).unwrap();
    assert!((tt.max() - t0).abs() < 1e-6);
    check_manifest(&dir);
    let partial = ok(tmp.path(), &["eikonal", "--speed", "c1", "--gamma", "NW", "--out", "nw"]);
    assert!(partial.starts_with("T0 = 2.4"), "{partial}");
}

#[test]
fn raytrace_reports_total_internal_reflection() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(tmp.path(), &["raytrace", "--speed", "c4", "--from", "0,0", "--dir", "0.7,0.7"]);
    assert!(stdout.lines().next().unwrap().starts_with("total_internal_reflection"), "{stdout}");
    let events = json(&tmp.path().join("raytrace/events.json"));
    assert_eq!(events[0]["kind"], "total_internal_reflection");
    let csv = std::fs::read_to_string(tmp.path().join("raytrace/rays.csv")).unwrap();
    assert!(csv.starts_with("branch,index,x,y\n") && csv.lines().count() > 10);
    assert!(!tat(tmp.path(), &["raytrace", "--from", "0", "--dir", "1,0"]).status.success());
}

#[test]
fn phantom_writes_field_and_pgm() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["phantom", "--kind", "shepp_logan", "--nx", "121"]);
    let dir = tmp.path().join("phantom");
    let f = read_field(&dir.join("phantom.bin")).unwrap();
    assert_eq!(f.grid.nx, 121);
    assert_eq!(f.max(), 1.0);
    let img = PgmImage::decode(&std::fs::read(dir.join("phantom.pgm")).unwrap()).unwrap();
    assert_eq!(img.maxval, 255);
    assert_eq!(img.data.iter().max(), Some(&255));
    assert_eq!(check_manifest(&dir), ["phantom.bin", "phantom.json", "phantom.pgm"]);
    // round trip through the image phantom reader
    ok(tmp.path(), &["phantom", "--kind", "image", "--input", dir.join("phantom.pgm").to_str().unwrap(), "--out", "img"]);
    let g = read_field(&tmp.path().join("img/phantom.bin")).unwrap();
    assert!(g.min() >= 0.0 && g.max() <= 1.0);
}

#[test]
fn forward_reconstruct_compare_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let r = tmp.path();
    let fwd = ok(r, &["forward", "--speed", "c1", "--nx", "81", "--T-mult", "4", "--noise", "0.05", "--seed", "3"]);
    assert!(fwd.contains("n_t = "), "{fwd}");
    let trace = r.join("forward/trace.trc");
    let truth = r.join("forward/phantom.bin");
    check_manifest(&r.join("forward"));
    let rec = ok(
        r,
        &[
            "reconstruct",
            "--trace",
            trace.to_str().unwrap(),
            "--nx",
            "81",
            "--method",
            "both",
            "--max-terms",
            "4",
            "--truth",
            truth.to_str().unwrap(),
        ],
    );
    let report: Value = serde_json::from_str(&rec).unwrap();
    let (tr, ns) = (report["tr_rel_error"].as_f64().unwrap(), report["ns"]["rel_error"].as_f64().unwrap());
    assert!(ns < tr, "NS {ns} vs TR {tr}");
    check_manifest(&r.join("reconstruct"));
    // a trace from another grid is rejected
    assert!(!tat(r, &["reconstruct", "--trace", trace.to_str().unwrap(), "--nx", "101"]).status.success());

    let table = ok(r, &["compare", r.join("reconstruct/report.json").to_str().unwrap()]);
    assert!(table.starts_with("| run | T | TR error | NS error | k | stop |"), "{table}");
    assert!(table.contains("| reconstruct |") && (table.contains("| tolerance |") || table.contains("| max_terms |")), "{table}");
    let csv = std::fs::read_to_string(r.join("compare/compare.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}
