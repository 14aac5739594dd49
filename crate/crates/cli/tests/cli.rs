use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sps"))
        .args(args)
        .env_remove("SPS_OUT")
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, n_pulses: u64, extra: &str) -> PathBuf {
    let text = format!(
        r#"seed = 11

[emitter]
t1_free = 680.0
purcell_factor = 12.6
gamma_inhom = 6.198
alpha = 3.0
e_phonon = 1.0
temperature = 4.0
slow_fraction = 0.16
tau_slow = 400.0

[train]
n_pulses = {n_pulses}

[detector]
irf_sigma = 10.0
efficiency = 0.6

[analysis]
b_factor = 2.0
{extra}"#
    );
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_then_analyze_hbt() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 50_000, "");
    let out = dir.path().join("sim");
    let r = sps(&["simulate", "--config", s(&cfg), "--out", s(&out), "--truth"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["ch1.ptt", "ch2.ptt", "truth.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let res = dir.path().join("res");
    let r = sps(&[
        "analyze",
        "--config",
        s(&cfg),
        "--a",
        s(&out.join("ch1.ptt")),
        "--b",
        s(&out.join("ch2.ptt")),
        "--out",
        s(&res),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(res.join("hbt.json")).unwrap()).unwrap();
    let g2 = doc["result"]["g2"]["value"].as_f64().unwrap();
    assert!((0.0..0.15).contains(&g2), "g2 = {g2}");
    assert_eq!(doc["provenance"]["seed"], 11);
    let csv = fs::read_to_string(res.join("hbt_histogram.csv")).unwrap();
    assert!(csv.starts_with("# tool: sps"));
    assert!(csv.contains("bin_center_ps,counts"));
}

#[test]
fn output_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 20_000, "");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(
        sps(&["simulate", "--config", s(&cfg), "--out", s(&a), "--truth"])
            .status
            .success()
    );
    assert!(sps(&[
        "--threads",
        "3",
        "simulate",
        "--config",
        s(&cfg),
        "--out",
        s(&b),
        "--truth"
    ])
    .status
    .success());
    for f in ["ch1.ptt", "ch2.ptt", "truth.csv", "manifest.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 5_000, "");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(sps(&["simulate", "--config", s(&cfg), "--out", s(&a)])
        .status
        .success());
    assert!(sps(&[
        "simulate",
        "--config",
        s(&cfg),
        "--out",
        s(&b),
        "--seed",
        "12"
    ])
    .status
    .success());
    assert_ne!(
        fs::read(a.join("ch1.ptt")).unwrap(),
        fs::read(b.join("ch1.ptt")).unwrap()
    );
    let m = fs::read_to_string(b.join("manifest.json")).unwrap();
    assert!(m.contains("\"seed\": 12"));
}

#[test]
fn out_flag_beats_env_beats_config() {
    let dir = tempfile::tempdir().unwrap();
    let from_cfg = dir.path().join("cfgdir");
    let cfg = config(dir.path(), 2_000, "");
    let text = fs::read_to_string(&cfg).unwrap();
    fs::write(&cfg, format!("output_dir = {:?}\n{text}", s(&from_cfg))).unwrap();

    let env_dir = dir.path().join("envdir");
    let flag_dir = dir.path().join("flagdir");
    let run = |flag: Option<&Path>, env: Option<&Path>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_sps"));
        c.args(["simulate", "--config", s(&cfg)])
            .env_remove("SPS_OUT");
        if let Some(f) = flag {
            c.args(["--out", s(f)]);
        }
        if let Some(e) = env {
            c.env("SPS_OUT", e);
        }
        assert!(c.output().unwrap().status.success());
    };
    run(None, None);
    assert!(from_cfg.join("manifest.json").exists());
    run(None, Some(&env_dir));
    assert!(env_dir.join("manifest.json").exists());
    run(Some(&flag_dir), Some(&env_dir));
    assert!(flag_dir.join("manifest.json").exists());
}

#[test]
fn hom_at_sixteen_times_rate_resolves_delay_to_period() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 20_000, "\n[bench]\ntopology = \"hom\"\n");
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("n_pulses = 20000", "n_pulses = 20000\nmultiplier = 16");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("co");
    let r = sps(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(doc["result"]["resolved_delay_ps"].as_f64(), Some(781.25));
    assert_eq!(doc["result"]["topology"], "hom");
}

#[test]
fn hom_analysis_without_cross_files_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 1_000, "");
    let out = dir.path().join("sim");
    assert!(sps(&["simulate", "--config", s(&cfg), "--out", s(&out)])
        .status
        .success());
    let a = out.join("ch1.ptt");
    let b = out.join("ch2.ptt");
    let r = sps(&[
        "analyze",
        "--mode",
        "hom",
        "--config",
        s(&cfg),
        "--a",
        s(&a),
        "--b",
        s(&b),
        "--cross-a",
        s(&a),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("--cross-b"));
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 1_000, "");
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("purcell_factor = 12.6", "purcell_factor = -3.0");
    fs::write(&cfg, text).unwrap();
    let r = sps(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("emitter.purcell_factor"));

    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("purcell_factor = -3.0", "purcell_factor = 12.6\nwobble = 1");
    fs::write(&cfg, text).unwrap();
    let r = sps(&["simulate", "--config", s(&cfg)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("emitter.wobble"));
}

#[test]
fn corrupt_timetag_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ptt");
    fs::write(&bad, b"not a timetag file at all").unwrap();
    let r = sps(&["correlate", s(&bad), s(&bad), "--out", s(dir.path())]);
    assert_eq!(r.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&r.stderr).contains("bad.ptt"));
}

#[test]
fn correlate_writes_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 10_000, "");
    let out = dir.path().join("sim");
    assert!(sps(&["simulate", "--config", s(&cfg), "--out", s(&out)])
        .status
        .success());
    let r = sps(&[
        "correlate",
        s(&out.join("ch1.ptt")),
        s(&out.join("ch2.ptt")),
        "--bin-width",
        "10",
        "--range",
        "40000",
        "--out",
        s(&out),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(out.join("correlation.csv")).unwrap();
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, 8000);
}

#[test]
fn sweep_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 5_000, "");
    let out = dir.path().join("sw");
    let r = sps(&[
        "sweep",
        "--config",
        s(&cfg),
        "--multipliers",
        "2,4",
        "--out",
        s(&out),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let data: Vec<&str> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect();
    assert_eq!(data.len(), 2);
    assert!(data[0].starts_with("2,160,"));
    assert!(out.join("sweep.json").exists());
}

#[test]
fn reproduce_rejects_unknown_preset() {
    let r = sps(&["reproduce", "fig9z"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn reproduce_fig2e_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let r = sps(&["reproduce", "fig2e", "--out", s(dir.path())]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(names.iter().any(|n| n == "fig2e.json"), "{names:?}");
    assert!(names
        .iter()
        .any(|n| n.starts_with("fig2e_") && n.ends_with(".csv")));
}
