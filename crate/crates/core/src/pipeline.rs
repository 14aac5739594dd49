//! End-to-end runs: emission, bench, detection, correlation and peak analysis.

use serde::Serialize;

use crate::config::RunConfig;
use crate::correlate::{cross_correlate, g2_zero, hom_visibility, CorrelationHistogram, Measured};
use crate::detector::Acquisition;
use crate::error::Result;
use crate::interferometer::{
    route_hbt, route_hom, BenchConfig, BenchOutput, PolarizationMode, Topology,
};
use crate::physics::{pure_dephasing_time, VisibilityReport};
use crate::rng::derive_seed;
use crate::source::{simulate_emission, PhotonRecord};

/// Seed salts separating the independent measurements of one configuration.
pub const SALT_HOM_CO: u64 = 1;
pub const SALT_HOM_CROSS: u64 = 2;
pub const SALT_HBT: u64 = 3;

pub struct Simulation {
    pub photons: Vec<PhotonRecord>,
    pub bench: BenchOutput,
}

fn acquisition(cfg: &RunConfig, seed: u64) -> Acquisition {
    Acquisition {
        channel: 1,
        duration_ps: cfg.train.duration_ps().ceil() as u64,
        seed,
        config_hash: cfg.hash(),
    }
}

/// Simulates `cfg` through `bench` with `seed`.
///
/// When the bench leaves `t2_pure_dephasing` unset it is derived from the emitter's
/// phonon dephasing at its temperature.
pub fn simulate_with(cfg: &RunConfig, bench: &BenchConfig, seed: u64) -> Result<Simulation> {
    cfg.validate()?;
    let mut bench = bench.clone();
    if bench.t2_pure_dephasing.is_none() {
        bench.t2_pure_dephasing = pure_dephasing_time(&cfg.emitter)?;
    }
    let bench = &bench;
    let photons = simulate_emission(&cfg.emitter, &cfg.train, seed)?;
    let detectors = [cfg.detector.clone(), cfg.detector.clone()];
    let acq = acquisition(cfg, seed);
    let out = match bench.topology {
        Topology::Hbt => route_hbt(&photons, bench, &detectors, &acq)?,
        Topology::Hom => route_hom(&photons, bench, &cfg.train, &detectors, &acq)?,
    };
    Ok(Simulation {
        photons,
        bench: out,
    })
}

/// Simulates `cfg` with its own bench and seed.
pub fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    simulate_with(cfg, &cfg.bench, cfg.seed)
}

/// Output-1 vs output-2 histogram with the configured binning.
pub fn correlate_outputs(cfg: &RunConfig, out: &BenchOutput) -> Result<CorrelationHistogram> {
    cross_correlate(
        &out.outputs[0],
        &out.outputs[1],
        cfg.analysis.bin_width,
        cfg.analysis.range_ps(&cfg.train),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct G2Measurement {
    pub g2: Measured,
    pub detected: [u64; 2],
    pub histogram: CorrelationHistogram,
}

/// HBT measurement of g²(0).
pub fn measure_g2(cfg: &RunConfig) -> Result<G2Measurement> {
    let bench = BenchConfig {
        topology: Topology::Hbt,
        ..cfg.bench.clone()
    };
    let sim = simulate_with(cfg, &bench, derive_seed(cfg.seed, SALT_HBT))?;
    let histogram = correlate_outputs(cfg, &sim.bench)?;
    let g2 = g2_zero(&histogram, cfg.train.period_ps())?;
    Ok(G2Measurement {
        g2,
        detected: [
            sim.bench.outputs[0].len() as u64,
            sim.bench.outputs[1].len() as u64,
        ],
        histogram,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HomMeasurement {
    pub report: VisibilityReport,
    pub pairs_co: u64,
    pub pairs_cross: u64,
    pub co: CorrelationHistogram,
    pub cross: CorrelationHistogram,
    pub warnings: Vec<String>,
}

/// Co- and cross-polarised HOM runs; `g2` feeds the multi-photon correction.
pub fn measure_hom(cfg: &RunConfig, g2: f64) -> Result<HomMeasurement> {
    let mut hists = Vec::with_capacity(2);
    let mut pairs = [0u64; 2];
    let mut warnings = Vec::new();
    for (k, (mode, salt)) in [
        (PolarizationMode::Co, SALT_HOM_CO),
        (PolarizationMode::Cross, SALT_HOM_CROSS),
    ]
    .into_iter()
    .enumerate()
    {
        let bench = BenchConfig {
            topology: Topology::Hom,
            polarization_mode: mode,
            ..cfg.bench.clone()
        };
        let sim = simulate_with(cfg, &bench, derive_seed(cfg.seed, salt))?;
        pairs[k] = sim.bench.interfering_pairs;
        warnings.extend(sim.bench.warnings.iter().cloned());
        hists.push(correlate_outputs(cfg, &sim.bench)?);
    }
    let cross = hists.pop().unwrap();
    let co = hists.pop().unwrap();
    let report = hom_visibility(
        &co,
        &cross,
        cfg.train.period_ps(),
        g2,
        cfg.analysis.b_factor,
    )?;
    Ok(HomMeasurement {
        report,
        pairs_co: pairs[0],
        pairs_cross: pairs[1],
        co,
        cross,
        warnings,
    })
}
