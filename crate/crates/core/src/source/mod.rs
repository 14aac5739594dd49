//! Monte Carlo generation of truth-level photon records for a pulsed emitter.

mod multiphoton;
mod reservoir;

pub use multiphoton::{multiphoton_g2, tune_multiphoton, MultiphotonSplit};
pub use reservoir::{
    calibrate_reservoir, reservoir_yield_ratio, steady_state_yield, ReservoirCalibration,
    SHAPE_LADDER,
};

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::LEAD_IN_PS;
use crate::error::{Error, Result};
use crate::physics::EmitterConfig;
use crate::rng::{Domain, StreamKey};
use crate::special::erlang_cdf;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Largest supported number of pulses per base period.
pub const MAX_MULTIPLIER: u32 = 16;

/// Excitation pulse train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseTrain {
    /// Base laser repetition rate [MHz].
    #[serde(default = "default_base_rate")]
    pub base_rate: f64,
    /// Pulses per base period, 1..=16.
    #[serde(default = "default_multiplier")]
    pub multiplier: u32,
    /// Laser pulse FWHM [ps].
    #[serde(default = "default_pulse_fwhm")]
    pub pulse_fwhm: f64,
    /// Pulse area in units of π; excitation probability is sin²(π·area/2).
    #[serde(default = "default_area")]
    pub pulse_area: f64,
    pub n_pulses: u64,
}

fn default_base_rate() -> f64 {
    80.0
}
fn default_multiplier() -> u32 {
    1
}
fn default_pulse_fwhm() -> f64 {
    2.0
}
fn default_area() -> f64 {
    1.0
}

impl PulseTrain {
    pub fn new(n_pulses: u64) -> Self {
        PulseTrain {
            base_rate: 80.0,
            multiplier: 1,
            pulse_fwhm: 2.0,
            pulse_area: 1.0,
            n_pulses,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_rate > 0.0) {
            return Err(Error::config("train.base_rate", "must be > 0"));
        }
        if !(1..=MAX_MULTIPLIER).contains(&self.multiplier) {
            return Err(Error::config("train.multiplier", "must lie in 1..=16"));
        }
        if self.pulse_fwhm < 0.0 {
            return Err(Error::config("train.pulse_fwhm", "must be >= 0"));
        }
        if !(self.pulse_area >= 0.0) {
            return Err(Error::config("train.pulse_area", "must be >= 0"));
        }
        if self.n_pulses == 0 {
            return Err(Error::config("train.n_pulses", "must be >= 1"));
        }
        Ok(())
    }

    /// Effective repetition rate [MHz].
    pub fn rate_mhz(&self) -> f64 {
        self.base_rate * self.multiplier as f64
    }

    /// Pulse-to-pulse spacing [ps].
    pub fn period_ps(&self) -> f64 {
        1e6 / self.rate_mhz()
    }

    pub fn pulse_time(&self, index: u64) -> f64 {
        LEAD_IN_PS + index as f64 * self.period_ps()
    }

    /// End of the last pulse window [ps].
    pub fn duration_ps(&self) -> f64 {
        LEAD_IN_PS + self.n_pulses as f64 * self.period_ps()
    }

    pub fn pulse_sigma(&self) -> f64 {
        self.pulse_fwhm / FWHM_PER_SIGMA
    }

    pub fn excitation_probability(&self) -> f64 {
        (std::f64::consts::FRAC_PI_2 * self.pulse_area)
            .sin()
            .powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    Co,
    Cross,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Emitter,
    Leak,
    Dark,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Emitter => "emitter",
            Origin::Leak => "leak",
            Origin::Dark => "dark",
        }
    }
}

/// One emitted photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonRecord {
    /// Emission time [ps].
    pub emission_time: f64,
    pub pulse_index: u64,
    /// Spectral-diffusion detuning [GHz].
    pub frequency_offset: f64,
    pub polarization: Polarization,
    pub origin: Origin,
    /// Time at which the wavepacket amplitude starts [ps].
    pub wavepacket_start: f64,
    /// Intensity decay time of the wavepacket [ps]; zero for laser photons.
    pub decay_time: f64,
}

fn validate_mixture(emitter: &EmitterConfig) -> Result<()> {
    if !(0.0..=1.0).contains(&emitter.slow_fraction) || !emitter.slow_fraction.is_finite() {
        return Err(Error::domain(format!(
            "slow_fraction must lie in [0, 1], got {}",
            emitter.slow_fraction
        )));
    }
    Ok(())
}

/// Sequential reservoir scan: which pulses find the trion ground state available.
fn occupation_scan(emitter: &EmitterConfig, train: &PulseTrain, seed: u64) -> Vec<bool> {
    let p_exc = train.excitation_probability();
    let period = train.period_ps();
    let mut rng = StreamKey::new(seed, Domain::Reservoir).at(0);
    // Δt since the last occupied pulse is always an integer number of periods.
    let mut cache: Vec<f64> = Vec::new();
    let mut p_occ = |gap: u64| -> f64 {
        if emitter.reservoir_tau <= 0.0 {
            return 1.0;
        }
        let j = gap as usize;
        while cache.len() <= j {
            let n = cache.len();
            let p = if n == 0 {
                0.0
            } else {
                erlang_cdf(
                    n as f64 * period,
                    emitter.reservoir_shape,
                    emitter.reservoir_tau,
                )
            };
            cache.push(p);
            if p >= 1.0 - 1e-16 {
                break;
            }
        }
        *cache.get(j).unwrap_or(&1.0)
    };
    let mut since_last: Option<u64> = None;
    let mut out = Vec::with_capacity(train.n_pulses as usize);
    for _ in 0..train.n_pulses {
        let gap = since_last.map(|g| g + 1);
        let available = match gap {
            None => 1.0,
            Some(g) => p_occ(g),
        };
        let u: f64 = rng.random();
        let occupied = u < available * p_exc;
        out.push(occupied);
        since_last = if occupied { Some(0) } else { gap };
    }
    out
}

const CHUNK: usize = 4096;

/// Simulates emitted photons for every pulse of `train`, sorted by emission time.
pub fn simulate_emission(
    emitter: &EmitterConfig,
    train: &PulseTrain,
    seed: u64,
) -> Result<Vec<PhotonRecord>> {
    validate_mixture(emitter)?;
    emitter.validate()?;
    train.validate()?;
    let occupied = occupation_scan(emitter, train, seed);
    let key = StreamKey::new(seed, Domain::Emission);
    let t1 = emitter.t1();
    let fast = Exp::new(1.0 / t1).map_err(|e| Error::domain(e.to_string()))?;
    let slow = if emitter.slow_fraction > 0.0 {
        Some(Exp::new(1.0 / emitter.tau_slow).map_err(|e| Error::domain(e.to_string()))?)
    } else {
        None
    };
    let freq = Normal::new(0.0, emitter.gamma_inhom / FWHM_PER_SIGMA)
        .map_err(|e| Error::domain(e.to_string()))?;
    let shape = Normal::new(0.0, train.pulse_sigma()).map_err(|e| Error::domain(e.to_string()))?;
    let leak = if emitter.leak_rate > 0.0 {
        Some(Poisson::new(emitter.leak_rate).map_err(|e| Error::domain(e.to_string()))?)
    } else {
        None
    };

    let chunks: Vec<Vec<PhotonRecord>> = occupied
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, occ)| {
            let mut out = Vec::with_capacity(occ.len() + occ.len() / 4);
            for (i, &is_occ) in occ.iter().enumerate() {
                let k = (c * CHUNK + i) as u64;
                let mut rng = key.at(k);
                let t_pulse = train.pulse_time(k);
                let f = freq.sample(&mut rng);
                let branch: f64 = rng.random();
                let u_re: f64 = rng.random();
                if is_occ {
                    let (decay, delay) = match &slow {
                        Some(s) if branch < emitter.slow_fraction => {
                            (emitter.tau_slow, s.sample(&mut rng))
                        }
                        _ => (t1, fast.sample(&mut rng)),
                    };
                    out.push(PhotonRecord {
                        emission_time: t_pulse + delay,
                        pulse_index: k,
                        frequency_offset: f,
                        polarization: Polarization::Co,
                        origin: Origin::Emitter,
                        wavepacket_start: t_pulse,
                        decay_time: decay,
                    });
                    if u_re < emitter.reexcite_prob {
                        let start = t_pulse + shape.sample(&mut rng).abs();
                        out.push(PhotonRecord {
                            emission_time: start + fast.sample(&mut rng),
                            pulse_index: k,
                            frequency_offset: f,
                            polarization: Polarization::Co,
                            origin: Origin::Emitter,
                            wavepacket_start: start,
                            decay_time: t1,
                        });
                    }
                }
                if let Some(p) = &leak {
                    let n = p.sample(&mut rng) as u64;
                    for _ in 0..n {
                        let t = t_pulse + shape.sample(&mut rng);
                        out.push(laser_photon(t, k));
                    }
                }
            }
            out
        })
        .collect();
    Ok(merge_sorted(chunks))
}

fn laser_photon(t: f64, k: u64) -> PhotonRecord {
    PhotonRecord {
        emission_time: t,
        pulse_index: k,
        frequency_offset: 0.0,
        polarization: Polarization::Co,
        origin: Origin::Leak,
        wavepacket_start: t,
        decay_time: 0.0,
    }
}

fn merge_sorted(chunks: Vec<Vec<PhotonRecord>>) -> Vec<PhotonRecord> {
    let mut all: Vec<PhotonRecord> = chunks.into_iter().flatten().collect();
    all.sort_by(|a, b| a.emission_time.total_cmp(&b.emission_time));
    all
}

/// Attenuated-laser reference: Poisson(`mean_photons`) photons per pulse.
pub fn simulate_coherent_reference(
    train: &PulseTrain,
    mean_photons: f64,
    seed: u64,
) -> Result<Vec<PhotonRecord>> {
    train.validate()?;
    let poisson = Poisson::new(mean_photons).map_err(|e| Error::domain(e.to_string()))?;
    let shape = Normal::new(0.0, train.pulse_sigma()).map_err(|e| Error::domain(e.to_string()))?;
    let key = StreamKey::new(seed, Domain::Reference);
    let n = train.n_pulses as usize;
    let chunks: Vec<Vec<PhotonRecord>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut out = Vec::new();
            for k in (c * CHUNK)..((c + 1) * CHUNK).min(n) {
                let mut rng = key.at(k as u64);
                let m = poisson.sample(&mut rng) as u64;
                for _ in 0..m {
                    out.push(laser_photon(
                        train.pulse_time(k as u64) + shape.sample(&mut rng),
                        k as u64,
                    ));
                }
            }
            out
        })
        .collect();
    Ok(merge_sorted(chunks))
}
