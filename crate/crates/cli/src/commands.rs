use std::path::{Path, PathBuf};

use serde::Serialize;

use sps_core::config::RunConfig;
use sps_core::correlate::{cross_correlate, g2_zero, hom_visibility, Measured};
use sps_core::detector::DetectionLog;
use sps_core::fit::{fit_decay, t2_from_dip, DecayCurve, DecayModel, FitResult};
use sps_core::interferometer::Topology;
use sps_core::pipeline::simulate;
use sps_core::presets::{run_preset, PRESET_NAMES};
use sps_core::report::{histogram_csv, json_document, write_text, Provenance, Table};
use sps_core::sweep::rate_sweep;
use sps_core::timetag::{write_truth_csv, TimeTagStream};
use sps_core::{Error, Result, VisibilityReport};

use crate::Common;

/// Loads the configuration and applies `--seed` and `--out`.
fn resolve(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = with_path(&common.config, RunConfig::load(&common.config))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    cfg.output_dir = out.clone();
    Ok((cfg, out))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        e => e,
    })
}

fn load_stream(path: &Path) -> Result<TimeTagStream> {
    with_path(path, TimeTagStream::load(path))
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

#[derive(Serialize)]
struct SimulateManifest {
    topology: Topology,
    n_pulses: u64,
    photons_emitted: usize,
    /// Arm imbalance used by the HOM bench [ps].
    resolved_delay_ps: Option<f64>,
    files: Vec<String>,
    routed: [u64; 2],
    interfering_pairs: u64,
    logs: [DetectionLog; 2],
    warnings: Vec<String>,
}

pub fn simulate_cmd(common: &Common, truth: bool) -> Result<()> {
    let (cfg, out) = resolve(common)?;
    let sim = simulate(&cfg)?;
    let mut files = Vec::new();
    let mut paths = Vec::new();
    std::fs::create_dir_all(&out)?;
    for s in &sim.bench.outputs {
        let name = format!("ch{}.ptt", s.channel);
        let p = out.join(&name);
        s.save(&p)?;
        files.push(name);
        paths.push(p);
    }
    if truth {
        let p = out.join("truth.csv");
        write_truth_csv(&sim.photons, std::fs::File::create(&p)?)?;
        files.push("truth.csv".into());
        paths.push(p);
    }
    for w in &sim.bench.warnings {
        eprintln!("warning: {w}");
    }
    let manifest = SimulateManifest {
        topology: cfg.bench.topology,
        n_pulses: cfg.train.n_pulses,
        photons_emitted: sim.photons.len(),
        resolved_delay_ps: (cfg.bench.topology == Topology::Hom)
            .then(|| cfg.bench.resolved_delay(&cfg.train)),
        files,
        routed: sim.bench.routed,
        interfering_pairs: sim.bench.interfering_pairs,
        logs: sim.bench.logs,
        warnings: sim.bench.warnings.clone(),
    };
    let p = out.join("manifest.json");
    write_text(
        &p,
        &json_document(&manifest, &Provenance::new(cfg.hash(), cfg.seed)),
    )?;
    paths.push(p);
    announce(&paths);
    Ok(())
}

pub fn correlate(a: &Path, b: &Path, bin_width: u64, range: u64, out: &Path) -> Result<()> {
    let sa = load_stream(a)?;
    let sb = load_stream(b)?;
    let hist = cross_correlate(&sa, &sb, bin_width, range)?;
    let prov = Provenance::new(sa.meta.config_hash, sa.meta.seed);
    let p = out.join("correlation.csv");
    write_text(&p, &histogram_csv(&hist, &prov))?;
    announce(&[p]);
    Ok(())
}

#[derive(Serialize)]
struct HbtAnalysis {
    g2: Measured,
    detected: [usize; 2],
    decay_fit: Option<FitResult>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct HomAnalysis {
    visibility: VisibilityReport,
    dip_fit: Option<FitResult>,
    warnings: Vec<String>,
}

fn decay_fit(cfg: &RunConfig, stream: &TimeTagStream) -> Result<FitResult> {
    let period = cfg.train.period_ps();
    let span = (15.0 * cfg.emitter.t1() + 150.0).min(period);
    let curve = DecayCurve::from_tags(&stream.tags, period, 2.0, -100.0, span)?;
    if cfg.detector.irf_sigma > 0.0 {
        fit_decay(&curve, DecayModel::ExpIrf, Some(cfg.detector.irf_sigma))
    } else {
        fit_decay(&curve, DecayModel::Exp, None)
    }
}

pub fn analyze(
    common: &Common,
    a: &Path,
    b: &Path,
    cross: Option<&(PathBuf, PathBuf)>,
    g2: f64,
) -> Result<()> {
    let (cfg, out) = resolve(common)?;
    let period = cfg.train.period_ps();
    let bin = cfg.analysis.bin_width;
    let range = cfg.analysis.range_ps(&cfg.train);
    let prov = Provenance::new(cfg.hash(), cfg.seed);
    let sa = load_stream(a)?;
    let sb = load_stream(b)?;
    let co = cross_correlate(&sa, &sb, bin, range)?;
    let mut warnings = Vec::new();
    let mut paths = Vec::new();

    match cross {
        None => {
            let g2 = g2_zero(&co, period)?;
            let decay_fit = match decay_fit(&cfg, &sa) {
                Ok(f) => Some(f),
                Err(e) => {
                    warnings.push(format!("decay fit skipped: {e}"));
                    None
                }
            };
            let p = out.join("hbt_histogram.csv");
            write_text(&p, &histogram_csv(&co, &prov))?;
            paths.push(p);
            let result = HbtAnalysis {
                g2,
                detected: [sa.len(), sb.len()],
                decay_fit,
                warnings,
            };
            let p = out.join("hbt.json");
            write_text(&p, &json_document(&result, &prov))?;
            paths.push(p);
        }
        Some((ca, cb)) => {
            let xa = load_stream(ca)?;
            let xb = load_stream(cb)?;
            let xc = cross_correlate(&xa, &xb, bin, range)?;
            let visibility = hom_visibility(&co, &xc, period, g2, cfg.analysis.b_factor)?;
            let dip_fit = match t2_from_dip(&co, period) {
                Ok(f) => Some(f),
                Err(e) => {
                    warnings.push(format!("dip fit skipped: {e}"));
                    None
                }
            };
            for (name, h) in [("hom_co.csv", &co), ("hom_cross.csv", &xc)] {
                let p = out.join(name);
                write_text(&p, &histogram_csv(h, &prov))?;
                paths.push(p);
            }
            let result = HomAnalysis {
                visibility,
                dip_fit,
                warnings,
            };
            let p = out.join("hom.json");
            write_text(&p, &json_document(&result, &prov))?;
            paths.push(p);
        }
    }
    announce(&paths);
    Ok(())
}

pub fn sweep(common: &Common, multipliers: &[u32], hom: bool) -> Result<()> {
    let (cfg, out) = resolve(common)?;
    let rows = rate_sweep(&cfg, multipliers, hom)?;
    let mut table = Table::new(
        "sweep",
        &[
            "multiplier",
            "rate_mhz",
            "expected_ratio",
            "normalized_rate",
            "normalized_rate_err",
            "g2",
            "g2_err",
            "v_raw",
            "v_raw_err",
            "v_corrected",
        ],
    );
    for r in &rows {
        let (g, ge) = r.g2.map_or((f64::NAN, f64::NAN), |m| (m.value, m.err));
        let (v, ve, vc) = r.visibility.map_or((f64::NAN, f64::NAN, f64::NAN), |v| {
            (v.v_raw, v.v_raw_err, v.v_corrected)
        });
        table.push(vec![
            r.multiplier as f64,
            r.rate_mhz,
            r.expected_ratio,
            r.normalized_rate.value,
            r.normalized_rate.err,
            g,
            ge,
            v,
            ve,
            vc,
        ]);
    }
    let prov = Provenance::new(cfg.hash(), cfg.seed);
    let csv = out.join("sweep.csv");
    write_text(&csv, &table.to_csv(&prov))?;
    let json = out.join("sweep.json");
    write_text(&json, &json_document(&rows, &prov))?;
    announce(&[csv, json]);
    Ok(())
}

pub fn reproduce(preset: &str, seed: Option<u64>, out: &Path) -> Result<()> {
    let names: Vec<&str> = if preset == "all" {
        PRESET_NAMES.to_vec()
    } else if PRESET_NAMES.contains(&preset) {
        vec![preset]
    } else {
        return Err(Error::Config {
            field: "preset".into(),
            reason: format!(
                "unknown preset '{preset}', expected one of {} or all",
                PRESET_NAMES.join(", ")
            ),
        });
    };
    let mut failed = Vec::new();
    for name in names {
        let result = run_preset(name, seed)?;
        announce(&result.write(out)?);
        for c in &result.checks {
            let tag = if c.passed { "ok" } else { "FAILED" };
            eprintln!(
                "{name}: {} = {} (target {}) {tag}",
                c.name, c.value, c.target
            );
            if !c.passed {
                failed.push(format!("{name}:{}", c.name));
            }
        }
    }
    if !failed.is_empty() {
        eprintln!(
            "warning: {} check(s) outside target: {}",
            failed.len(),
            failed.join(", ")
        );
    }
    Ok(())
}
