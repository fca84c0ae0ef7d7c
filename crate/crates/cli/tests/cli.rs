use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn recipe(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../recipes").join(name)
}

fn stepchirp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stepchirp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

/// Writes a variant of a recipe with `edits` applied as plain substitutions.
fn variant(dir: &Path, name: &str, base: &str, edits: &[(&str, &str)]) -> PathBuf {
    let mut s = fs::read_to_string(recipe(base)).unwrap();
    for (from, to) in edits {
        assert!(s.contains(from), "{from} not in {base}");
        s = s.replacen(from, to, 1);
    }
    let p = dir.join(name);
    fs::write(&p, s).unwrap();
    p
}

#[test]
fn validate_reference_plan() {
    let out = stepchirp(&["validate", recipe("fig7.toml").to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert_eq!(
        text(&out.stdout).trim(),
        "valid, M=14, N_max=9, B_eq=18.2 GHz, R_theory=8.24 mm"
    );
}

#[test]
fn constraint_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(dir.path(), "bad.toml", "fig7.toml", &[("step_hz = 2e9", "step_hz = 2.3e9")]);
    let out = stepchirp(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(text(&out.stdout).contains("Δf < B_chirp"));
    let out = stepchirp(&["run", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(text(&out.stderr).contains("Δf < B_chirp"));
}

#[test]
fn parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = variant(dir.path(), "m.toml", "fig7.toml", &[("seed_width_s = 5e-6\n", "")]);
    let out = stepchirp(&["validate", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("seed_width_s"));

    let typo = variant(dir.path(), "t.toml", "fig7.toml", &[("separation_m", "separation_mm")]);
    let out = stepchirp(&["validate", typo.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("separation_mm"));

    let out = stepchirp(&["validate", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_resolution_writes_one_row_per_n() {
    let dir = tempfile::tempdir().unwrap();
    let out = stepchirp(&[
        "sweep-resolution",
        recipe("fig6.toml").to_str().unwrap(),
        "--n-min",
        "7",
        "--n-max",
        "9",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let table = fs::read_to_string(dir.path().join("resolution.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("n,equivalent_bandwidth_hz"));
    assert!(rows[3].starts_with("9,18200000000,"));
    for n in 7..=9 {
        assert!(dir.path().join(format!("profile_n{n}.csv")).exists());
    }
}

#[test]
fn every_file_is_listed_with_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let out = stepchirp(&["run", recipe("fig7.toml").to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let hash = report["config_sha256"].as_str().unwrap();
    let files = report["files"].as_array().unwrap();
    let listed: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    for f in files {
        assert_eq!(f["config_sha256"].as_str().unwrap(), hash);
        assert!(f.get("units").is_some() && f.get("axes").is_some());
    }
    for entry in fs::read_dir(dir.path()).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        assert!(listed.contains(&name.as_str()), "{name} missing from report");
    }
    let peaks = fs::read_to_string(dir.path().join("peaks.csv")).unwrap();
    assert_eq!(peaks.lines().filter(|l| l.starts_with("9,")).count(), 2);
    assert_eq!(peaks.lines().filter(|l| l.starts_with("3,")).count(), 1);
}

#[test]
fn raw_format_has_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let out = stepchirp(&[
        "run",
        recipe("fig7.toml").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--format",
        "raw",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let raw = fs::read(dir.path().join("profile_n9.f64")).unwrap();
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("profile_n9.f64.json")).unwrap()).unwrap();
    let bins = meta["axes"]["bins"].as_u64().unwrap() as usize;
    assert_eq!(raw.len(), bins * 16);
}

#[test]
fn gapfill_reports_sidelobes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(
        dir.path(),
        "g.toml",
        "fig7.toml",
        &[
            ("n_used = [3, 6, 9]", "n_used = [9]"),
            ("window = \"rect\"", "window = \"hann\""),
            ("[processing]", "[interference]\nindices = [3]\n\n[processing]"),
        ],
    );
    let out_dir = dir.path().join("out");
    let out = stepchirp(&["gapfill", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    let row = &report["sidelobes"][0];
    assert!(row["improvement_db"].as_f64().unwrap() > 15.0, "{row}");
    assert_eq!(report["masked_subpulses"], serde_json::json!([3]));
    assert!(out_dir.join("profile_n9_unfilled.csv").exists());

    let plain = variant(dir.path(), "p.toml", "fig7.toml", &[]);
    let out = stepchirp(&["gapfill", plain.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn impossible_reconstruction_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(
        dir.path(),
        "g.toml",
        "fig7.toml",
        &[
            ("n_used = [3, 6, 9]", "n_used = [9]"),
            ("[processing]", "[interference]\nindices = [3]\nar_order = 600\n\n[processing]"),
        ],
    );
    let out = stepchirp(&["run", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", text(&out.stderr));
}

#[test]
fn small_isar_run_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(
        dir.path(),
        "i.toml",
        "fig8.toml",
        &[("n_trains = 1528", "n_trains = 96"), ("n_used = [3, 6, 9]", "n_used = [9]")],
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (d, threads) in [(&a, "1"), (&b, "2")] {
        let out = stepchirp(&[
            "isar",
            cfg.to_str().unwrap(),
            "--out-dir",
            d.to_str().unwrap(),
            "--seed",
            "5",
            "--threads",
            threads,
        ]);
        assert!(out.status.success(), "{}", text(&out.stderr));
    }
    for name in ["image_n9.pgm", "image_n9_axes.csv", "report.json"] {
        assert!(fs::read(a.join(name)).unwrap() == fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    let pgm = fs::read(a.join("image_n9.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n"));
}
