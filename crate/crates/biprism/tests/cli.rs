use std::path::Path;
use std::process::{Command, Output};

fn biprism(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biprism"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_exits_zero_everywhere() {
    assert_eq!(code(&biprism(&["--help"])), 0);
    assert_eq!(code(&biprism(&["--version"])), 0);
    for sub in ["whichpath", "fringes", "buildup", "fitz", "print-config", "alpha", "g2", "fit-peaks"] {
        let o = biprism(&[sub, "--help"]);
        assert_eq!(code(&o), 0, "{sub}");
        assert!(!o.stdout.is_empty());
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&biprism(&[])), 1);
    assert_eq!(code(&biprism(&["nope"])), 1);
    assert_eq!(code(&biprism(&["fringes", "--bogus"])), 1);
    assert_eq!(code(&biprism(&["fitz", "--z-min", "1"])), 1);
}

#[test]
fn ideal_emitter_gives_zero_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let o = biprism(&["whichpath", "--source", "emitter", "--background", "0", "--runs", "1", "--out", p(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let a = json(&dir.path().join("alpha.json"));
    assert_eq!(a["runs"][0]["n_coinc"], 0);
    assert_eq!(a["runs"][0]["alpha_exact"], 0.0);
    assert!(std::fs::read_to_string(dir.path().join("alpha.json")).unwrap().contains("\"alpha\": 0.000"));
    for f in ["timestamps.csv", "timestamps.meta", "delays.csv", "peaks.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let n1 = a["runs"][0]["n1"].as_u64().unwrap();
    let n2 = a["runs"][0]["n2"].as_u64().unwrap();
    assert!(n1 + n2 <= 100_000 && n1 + n2 > 80_000);
}

#[test]
fn gate_longer_than_period_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = biprism(&["whichpath", "--gate-ns", "500", "--out", p(dir.path())]);
    assert_eq!(code(&o), 1);
    let e = stderr(&o);
    assert!(e.contains("gate.ns") && e.contains("exceeds"), "{e}");
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "gate.ns = 90\nprism.angle = 3\n").unwrap();
    let o = biprism(&["print-config", "--config", p(&cfg)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("prism.angle"));
    let o = biprism(&["print-config", "--set", "beam.fwhm_mm=-1"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("beam.fwhm_mm"));
}

#[test]
fn print_config_round_trips_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let o = biprism(&["print-config"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for key in ["source.lifetime_ns = 44.6", "source.rep_period_ns = 436", "gate.ns = 100", "beam.fwhm_mm = 1.25"] {
        assert!(text.contains(key), "{key}");
    }
    let cfg = dir.path().join("all.cfg");
    std::fs::write(&cfg, text.replace("gate.ns = 100", "gate.ns = 80")).unwrap();
    let o = biprism(&["print-config", "--config", p(&cfg)]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("gate.ns = 80"));
    let o = biprism(&["print-config", "--config", p(&cfg), "--set", "gate.ns=70"]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("gate.ns = 70"));
}

#[test]
fn whichpath_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = biprism(&["whichpath", "--source", "laser", "--runs", "2", "--detections-per-run", "20000", "--seed", "5", "--out", p(d.path())]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["timestamps_run000.csv", "timestamps_run001.csv", "alpha.json", "delays.csv", "peaks.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn analysis_subcommands_read_written_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    let o = biprism(&["whichpath", "--source", "laser", "--detections-per-run", "50000", "--out", out]);
    assert_eq!(code(&o), 0);
    let ts = dir.path().join("timestamps.csv");
    let o = biprism(&["alpha", "--timestamps", p(&ts), "--gate-ns", "100"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let direct: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let written = json(&dir.path().join("alpha.json"));
    assert_eq!(direct["runs"][0]["n_coinc"], written["runs"][0]["n_coinc"]);
    assert_eq!(direct["runs"][0]["n_triggers"], written["runs"][0]["n_triggers"]);

    let g2 = dir.path().join("g2");
    let o = biprism(&["g2", "--timestamps", p(&ts), "--bin-ns", "2", "--window-periods", "5", "--out", p(&g2)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        std::fs::read(g2.join("delays.csv")).unwrap(),
        std::fs::read(dir.path().join("delays.csv")).unwrap()
    );
    let o = biprism(&["fit-peaks", "--histogram", p(&g2.join("delays.csv")), "--rep-period-ns", "436"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let peaks: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(peaks["peaks"].as_array().unwrap().len(), 11);
}

#[test]
fn fringes_writes_pattern_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let o = biprism(&["fringes", "--z-mm", "98", "--out", p(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = json(&dir.path().join("metrics.json"));
    assert!(m["resolvable_fringes"].as_u64().unwrap() >= 10);
    let v = m["central_visibility_exact"].as_f64().unwrap();
    assert!(v > 0.85 && v < 1.0);
    let pgm = std::fs::read(dir.path().join("pattern.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n8192 64\n65535\n"));
    assert_eq!(pgm.len(), "P5\n8192 64\n65535\n".len() + 8192 * 64 * 2);
}

#[test]
fn fringes_without_deviation_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = biprism(&["fringes", "--set", "prism.deviation_mrad=0", "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no fringes"));
}

#[test]
fn buildup_frames_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = biprism(&["buildup", "--snapshots", "200", "--stride", "20", "--seed", "3", "--out", p(d.path())]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let frames = std::fs::read_dir(a.path().join("frames")).unwrap().count();
    assert_eq!(frames, 11);
    for entry in std::fs::read_dir(a.path().join("frames")).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            std::fs::read(a.path().join("frames").join(&name)).unwrap(),
            std::fs::read(b.path().join("frames").join(&name)).unwrap()
        );
    }
    for f in ["totals.csv", "impacts.csv", "profile.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
    let index = std::fs::read_to_string(a.path().join("frames/frames.csv")).unwrap();
    assert!(index.starts_with("frame_index,cumulative_counts\n0,"));
}

#[test]
fn buildup_with_full_stride_writes_one_frame() {
    let dir = tempfile::tempdir().unwrap();
    let o = biprism(&["buildup", "--snapshots", "2000", "--stride", "2000", "--out", p(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let pgms: Vec<_> = std::fs::read_dir(dir.path().join("frames"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "pgm"))
        .collect();
    assert_eq!(pgms.len(), 1);
    assert_eq!(pgms[0].file_name(), "frame_02000.pgm");
}

#[test]
fn fitz_recovers_a_self_generated_profile() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    let o = biprism(&["fringes", "--z-mm", "11", "--out", p(&src)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fit = dir.path().join("fit");
    let profile = src.join("pattern.csv");
    let o = biprism(&["fitz", "--profile", p(&profile), "--z-min", "1", "--z-max", "150", "--out", p(&fit)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&fit.join("fit.json"));
    let z = r["z_best_mm"].as_f64().unwrap();
    assert!((z - 11.0).abs() <= 0.1, "{z}");
    assert!(fit.join("overlay.csv").exists());

    let o = biprism(&["fitz", "--profile", p(&profile), "--z-min", "30", "--z-max", "30", "--out", p(&fit)]);
    assert_eq!(code(&o), 0);
    let r = json(&fit.join("fit.json"));
    assert_eq!(r["z_best_mm"].as_f64().unwrap(), 30.0);
    assert!(r["sse"].as_f64().unwrap() > 0.0);
}

#[test]
fn fitz_rejects_an_empty_profile() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let o = biprism(&["fitz", "--profile", p(&empty), "--z-min", "1", "--z-max", "2", "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("empty"));
}
