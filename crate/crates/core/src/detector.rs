//! Detector model: efficiency thinning, timing jitter, dark counts and dead time.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Domain, StreamKey};
use crate::source::PhotonRecord;
use crate::timetag::{StreamMeta, TimeTagStream};

/// Dark counts are generated in independent blocks of this length [ps].
const DARK_BLOCK_PS: u64 = 1_000_000_000;
const CHUNK: usize = 8192;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    /// Gaussian timing jitter [ps].
    #[serde(default)]
    pub irf_sigma: f64,
    #[serde(default = "default_efficiency")]
    pub efficiency: f64,
    /// Dark-count rate [Hz].
    #[serde(default)]
    pub dark_rate: f64,
    /// Dead time [ps].
    #[serde(default)]
    pub dead_time: f64,
}

fn default_efficiency() -> f64 {
    1.0
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            irf_sigma: 0.0,
            efficiency: 1.0,
            dark_rate: 0.0,
            dead_time: 0.0,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.irf_sigma >= 0.0) {
            return Err(Error::config("detector.irf_sigma", "must be >= 0"));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::config("detector.efficiency", "must lie in (0, 1]"));
        }
        if !(self.dark_rate >= 0.0) {
            return Err(Error::config("detector.dark_rate", "must be >= 0"));
        }
        if !(self.dead_time >= 0.0) {
            return Err(Error::config("detector.dead_time", "must be >= 0"));
        }
        Ok(())
    }
}

/// Accounting of what happened to every input photon and dark count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DetectionLog {
    pub photons_in: u64,
    pub thinned: u64,
    pub dead_time_dropped: u64,
    pub detected: u64,
    pub dark_generated: u64,
    pub dark_dropped: u64,
    pub dark_detected: u64,
}

impl DetectionLog {
    pub fn is_conserved(&self) -> bool {
        self.photons_in == self.detected + self.thinned + self.dead_time_dropped
            && self.dark_generated == self.dark_detected + self.dark_dropped
    }
}

/// Where and how a stream is recorded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acquisition {
    pub channel: u16,
    /// Acquisition length [ps]; dark counts fill `[0, duration_ps)`.
    pub duration_ps: u64,
    pub seed: u64,
    pub config_hash: [u8; 32],
}

/// Converts emitted photons into a detector timetag stream.
pub fn detect(
    photons: &[PhotonRecord],
    detector: &DetectorModel,
    acq: &Acquisition,
) -> Result<(TimeTagStream, DetectionLog)> {
    detector.validate()?;
    let seed = derive_seed(acq.seed, acq.channel as u64 + 1);
    let key = StreamKey::new(seed, Domain::Detection);
    let jitter = Normal::new(0.0, detector.irf_sigma).map_err(|e| Error::domain(e.to_string()))?;

    // (time, is_dark)
    let mut events: Vec<(u64, bool)> = photons
        .par_chunks(CHUNK)
        .enumerate()
        .flat_map_iter(|(c, chunk)| {
            let key = &key;
            let jitter = &jitter;
            chunk.iter().enumerate().filter_map(move |(i, p)| {
                let mut rng = key.at((c * CHUNK + i) as u64);
                let u: f64 = rng.random();
                if u >= detector.efficiency {
                    return None;
                }
                let t = p.emission_time + jitter.sample(&mut rng);
                Some((t.round().max(0.0) as u64, false))
            })
        })
        .collect();
    let mut log = DetectionLog {
        photons_in: photons.len() as u64,
        ..DetectionLog::default()
    };
    log.thinned = log.photons_in - events.len() as u64;

    if detector.dark_rate > 0.0 && acq.duration_ps > 0 {
        let dark = dark_counts(detector.dark_rate, acq.duration_ps, seed)?;
        log.dark_generated = dark.len() as u64;
        events.extend(dark.into_iter().map(|t| (t, true)));
    }
    events.par_sort_unstable();

    let dead = detector.dead_time.max(1.0);
    let mut tags = Vec::with_capacity(events.len());
    let mut last: Option<u64> = None;
    for (t, is_dark) in events {
        let keep = match last {
            None => true,
            Some(l) => (t - l) as f64 >= dead,
        };
        if keep {
            tags.push(t);
            last = Some(t);
            if is_dark {
                log.dark_detected += 1;
            } else {
                log.detected += 1;
            }
        } else if is_dark {
            log.dark_dropped += 1;
        } else {
            log.dead_time_dropped += 1;
        }
    }
    let stream = TimeTagStream::new(
        acq.channel,
        tags,
        StreamMeta {
            seed: acq.seed,
            config_hash: acq.config_hash,
            duration_ps: acq.duration_ps,
        },
    )?;
    Ok((stream, log))
}

/// Homogeneous Poisson process of rate `rate_hz` on `[0, duration_ps)`, sorted.
pub fn dark_counts(rate_hz: f64, duration_ps: u64, seed: u64) -> Result<Vec<u64>> {
    let key = StreamKey::new(seed, Domain::DarkCounts);
    let blocks = duration_ps.div_ceil(DARK_BLOCK_PS);
    let per_ps = rate_hz * 1e-12;
    let out: Vec<Vec<u64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * DARK_BLOCK_PS;
            let len = DARK_BLOCK_PS.min(duration_ps - start);
            let mut rng = key.at(b);
            let mean = per_ps * len as f64;
            let n = if mean > 0.0 {
                Poisson::new(mean)
                    .map(|p| p.sample(&mut rng) as u64)
                    .unwrap_or(0)
            } else {
                0
            };
            let mut v: Vec<u64> = (0..n).map(|_| start + rng.random_range(0..len)).collect();
            v.sort_unstable();
            v
        })
        .collect();
    Ok(out.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::EmitterConfig;
    use crate::source::{simulate_emission, PulseTrain};

    fn acq(duration_ps: u64) -> Acquisition {
        Acquisition {
            channel: 1,
            duration_ps,
            seed: 9,
            config_hash: [0; 32],
        }
    }

    fn photons(n: u64) -> Vec<PhotonRecord> {
        let e = EmitterConfig {
            t1_free: 54.0,
            ..EmitterConfig::default()
        };
        simulate_emission(&e, &PulseTrain::new(n), 4).unwrap()
    }

    #[test]
    fn identity_channel() {
        let ph = photons(1000);
        let (s, log) = detect(&ph, &DetectorModel::default(), &acq(0)).unwrap();
        let expect: Vec<u64> = ph.iter().map(|p| p.emission_time.round() as u64).collect();
        assert_eq!(s.tags, expect);
        assert!(log.is_conserved());
        assert_eq!(log.detected, 1000);
    }

    #[test]
    fn conservation_with_losses() {
        let ph = photons(50_000);
        let d = DetectorModel {
            irf_sigma: 10.0,
            efficiency: 0.6,
            dark_rate: 1e5,
            dead_time: 20_000.0,
        };
        let train = PulseTrain::new(50_000);
        let (s, log) = detect(&ph, &d, &acq(train.duration_ps() as u64)).unwrap();
        assert!(log.is_conserved(), "{log:?}");
        assert!(log.dead_time_dropped > 0);
        assert!(s.tags.windows(2).all(|w| w[1] - w[0] >= 20_000));
    }

    #[test]
    fn dark_count_mean() {
        let duration = 5_000_000_000_000u64; // 5 s
        let n = dark_counts(2000.0, duration, 1).unwrap();
        let expect = 2000.0 * 5.0;
        assert!((n.len() as f64 - expect).abs() < 3.0 * expect.sqrt());
        assert!(n.windows(2).all(|w| w[0] <= w[1]));
        assert!(n.iter().all(|&t| t < duration));
    }

    #[test]
    fn detection_is_thread_count_independent() {
        let ph = photons(30_000);
        let d = DetectorModel {
            irf_sigma: 15.0,
            efficiency: 0.5,
            dark_rate: 1e4,
            dead_time: 0.0,
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| detect(&ph, &d, &acq(400_000_000)).unwrap().0.tags)
        };
        assert_eq!(run(1), run(4));
    }
}
