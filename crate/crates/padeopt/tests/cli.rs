use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_padeopt"));
    c.current_dir(env!("CARGO_MANIFEST_DIR"));
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn golden() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../testdata/reference_tables")
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/presets")
}

#[test]
fn derive_explicit_spec_has_unit_delta_b() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"schemes":[{"d":2,"order":4,"mAL":2,"mAR":2,"mBL":0,"mBR":0}]}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["derive", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("OFD_2_2_0_0_4_d2.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        assert_eq!(r[2], if r[0] == 0.0 { 1.0 } else { 0.0 });
    }
    // central explicit 4th order: (-1, 16, -30, 16, -1)/12
    assert!((rows[0][1] + 1.0 / 12.0).abs() < 1e-14);
    assert!((rows[2][1] + 2.5).abs() < 1e-14);
    let report = fs::read_to_string(out.join("kkt_report.json")).unwrap();
    assert!(report.contains("\"optimal\": true"));
}

#[test]
fn rank_deficient_derivation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"schemes":[{"d":2,"order":4,"mAL":6,"mAR":6,"mBL":6,"mBR":6}]}"#,
    );
    let o = run(&["derive", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("rank deficient"));
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let bad_json = write(dir.path(), "bad.json", "{ not json");
    let bad_spec = write(
        dir.path(),
        "spec.json",
        r#"{"schemes":[{"d":0,"order":4,"mAL":1,"mAR":1,"mBL":1,"mBR":1}]}"#,
    );
    let bad_weight = write(
        dir.path(),
        "w.json",
        r#"{"schemes":[{"d":2,"order":4,"mAL":1,"mAR":1,"mBL":1,"mBR":1}],
            "weight":[{"lo":0.0,"hi":5.0,"form":"const","params":{"c":1.0}}]}"#,
    );
    for cfg in [&bad_json, &bad_spec, &bad_weight, &dir.path().join("missing.json")] {
        let o = run(&["derive", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 1, "{}: {}", cfg.display(), String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(code(&run(&["derive", "--out", out.to_str().unwrap()])), 1);
}

#[test]
fn existing_outputs_need_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let args = ["spectrum", "--figure", "fig:gammaEffect", "--samples", "11", "--out", out.to_str().unwrap()];
    assert_eq!(code(&run(&args)), 0);
    let o = run(&args);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&run(&forced)), 0);
}

#[test]
fn tables_report_mismatches_and_missing_golden() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["tables", "--golden", "/nonexistent", "--out", dir.path().join("a").to_str().unwrap()]);
    assert_eq!(code(&o), 1);

    // loose tolerance: the shipped tables reproduce
    let o = run(&[
        "tables",
        "--golden",
        golden().to_str().unwrap(),
        "--tolerance",
        "1e-6",
        "--out",
        dir.path().join("b").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    // a perturbed entry is caught
    let g = dir.path().join("golden");
    fs::create_dir(&g).unwrap();
    for e in fs::read_dir(golden()).unwrap() {
        let e = e.unwrap();
        fs::copy(e.path(), g.join(e.file_name())).unwrap();
    }
    let p = g.join("first_derivative_central.csv");
    let text = fs::read_to_string(&p).unwrap().replace("0.682194069313335", "0.682204069313335");
    fs::write(&p, text).unwrap();
    let o = run(&[
        "tables",
        "--golden",
        g.to_str().unwrap(),
        "--tolerance",
        "1e-6",
        "--out",
        dir.path().join("c").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("OFD(2,2,2,2)^4_d1 m=1 a"));
}

#[test]
fn stability_outputs_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig_rkStabRegion.json");
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let o = run(&[
            "stability",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--force",
            "--threads",
            "2",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(dir.path().join("spectrum_M4.csv")).unwrap());
        outputs.push(fs::read(dir.path().join("dt_max.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[2]);
    assert_eq!(outputs[1], outputs[3]);
    let dt = String::from_utf8(outputs[1].clone()).unwrap();
    assert!(dt.lines().any(|l| l.starts_with("M4,IRK3,,true")));
    assert_eq!(String::from_utf8(outputs[0].clone()).unwrap().lines().count(), 32);
}

#[test]
fn zero_field_solve_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"case":{"betas":[-0.1,0.2],"np":16,"amplitude":{"kind":"constant","a":0.0},"kmax":4,"seed":1,
             "step":{"dt":0.001},"horizon":{"steps":10},"snapshot_every":5},
            "schemes":[{"d":1,"order":4,"mAL":2,"mAR":2,"mBL":2,"mBR":2},
                       {"d":2,"order":4,"mAL":2,"mAR":2,"mBL":2,"mBR":2}],
            "tableau":"ERK4"}"#,
    );
    let out = dir.path().join("o");
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let snaps: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("snapshots.json")).unwrap()).unwrap();
    let snaps = snaps.as_array().unwrap();
    assert_eq!(snaps.len(), 3 * 16);
    assert!(snaps.iter().all(|r| r["f"].as_f64() == Some(0.0)));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["steps"], 10);
    assert_eq!(meta["tableau"], "ERK4");
    assert_eq!(meta["max_abs_error"].as_f64(), Some(0.0));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"case":{"betas":[0.0,0.2],"np":32,"amplitude":{"kind":"constant","a":1.0},"kmax":8,"seed":1,
             "step":{"cfl":{"d":2,"r":0.01}},"horizon":{"steps":3}},
            "schemes":[{"d":2,"order":4,"mAL":2,"mAR":2,"mBL":2,"mBR":2}]}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&run(&["solve", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()])), 0);
    assert_eq!(
        code(&run(&["solve", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed", "99"])),
        0
    );
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 99);
    assert_eq!(meta["tableau"], "ERK2");
    assert_ne!(fs::read(a.join("snapshots.csv")).unwrap(), fs::read(b.join("snapshots.csv")).unwrap());
}

#[test]
fn blowup_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"case":{"betas":[0.0,0.2],"np":32,"amplitude":{"kind":"constant","a":1.0},"kmax":15,"seed":1,
             "step":{"cfl":{"d":2,"r":2.0}},"horizon":{"steps":400}},
            "schemes":[{"d":2,"order":4,"mAL":2,"mAR":2,"mBL":2,"mBR":2}],"tableau":"FE"}"#,
    );
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&[
        "verify",
        "--config",
        configs().join("verify_single_mode.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(rep["passed"], true);
    let names: Vec<&str> = rep["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for n in ["coefficient_symmetry", "spectral_error_parity", "parity_spectrum_even", "convergence_order", "case_vs_exact"] {
        assert!(names.contains(&n), "{names:?}");
    }
}

#[test]
fn shipped_configs_parse() {
    for e in fs::read_dir(configs()).unwrap() {
        let p = e.unwrap().path();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        let ok = if v.get("case").is_some() {
            serde_json::from_value::<padeopt::commands::SolveConfig>(v).is_ok()
        } else if v.get("sets").is_some() {
            serde_json::from_value::<padeopt::commands::StabilityConfig>(v).is_ok()
        } else if v.get("figure").is_some() {
            serde_json::from_value::<padeopt::commands::SpectrumConfig>(v).is_ok()
        } else {
            serde_json::from_value::<padeopt::commands::DeriveConfig>(v).is_ok()
        };
        assert!(ok, "{}", p.display());
    }
}
