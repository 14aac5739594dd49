//! Optical bench: HBT splitting and delay-matched HOM interference of consecutive photons.

mod oracle;

pub use oracle::pair_visibility_oracle;

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{detect, Acquisition, DetectionLog, DetectorModel};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Domain, StreamKey};
use crate::source::{Origin, PhotonRecord, PulseTrain};
use crate::timetag::TimeTagStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Hbt,
    Hom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizationMode {
    Co,
    Cross,
}

impl PolarizationMode {
    fn chi(self) -> f64 {
        match self {
            PolarizationMode::Co => 1.0,
            PolarizationMode::Cross => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub topology: Topology,
    /// Arm imbalance [ps]; defaults to the pulse period when unset.
    #[serde(default)]
    pub delay: Option<f64>,
    #[serde(default = "default_pol")]
    pub polarization_mode: PolarizationMode,
    /// Probability that a photon entering the first input leaves through the second output.
    #[serde(default = "default_ratio")]
    pub splitter_ratio: f64,
    /// Pure-dephasing time T₂* [ps] damping the interference term as exp(−2|t₁−t₂|/T₂*).
    #[serde(default)]
    pub t2_pure_dephasing: Option<f64>,
}

fn default_pol() -> PolarizationMode {
    PolarizationMode::Co
}
fn default_ratio() -> f64 {
    0.5
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            topology: Topology::Hbt,
            delay: None,
            polarization_mode: PolarizationMode::Co,
            splitter_ratio: 0.5,
            t2_pure_dephasing: None,
        }
    }
}

impl BenchConfig {
    pub fn hom(polarization_mode: PolarizationMode) -> Self {
        BenchConfig {
            topology: Topology::Hom,
            polarization_mode,
            ..BenchConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.splitter_ratio > 0.0 && self.splitter_ratio < 1.0) {
            return Err(Error::config("bench.splitter_ratio", "must lie in (0, 1)"));
        }
        if let Some(d) = self.delay {
            if self.topology == Topology::Hom && !(d > 0.0) {
                return Err(Error::config("bench.delay", "HOM requires delay > 0"));
            }
        }
        if let Some(t2) = self.t2_pure_dephasing {
            if !(t2 > 0.0) {
                return Err(Error::config("bench.t2_pure_dephasing", "must be > 0"));
            }
        }
        Ok(())
    }

    /// Arm imbalance actually used for `train`.
    pub fn resolved_delay(&self, train: &PulseTrain) -> f64 {
        self.delay.unwrap_or_else(|| train.period_ps())
    }
}

/// Two output streams of a bench run with bookkeeping.
#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub outputs: [TimeTagStream; 2],
    pub logs: [DetectionLog; 2],
    /// Photons leaving each output before detection.
    pub routed: [u64; 2],
    pub interfering_pairs: u64,
    pub warnings: Vec<String>,
}

fn detect_outputs(
    mut arms: [Vec<PhotonRecord>; 2],
    detectors: &[DetectorModel; 2],
    acq: &Acquisition,
) -> Result<([TimeTagStream; 2], [DetectionLog; 2], [u64; 2])> {
    let routed = [arms[0].len() as u64, arms[1].len() as u64];
    for arm in arms.iter_mut() {
        arm.par_sort_by(|a, b| a.emission_time.total_cmp(&b.emission_time));
    }
    let acq_for = |k: usize| Acquisition {
        channel: acq.channel + k as u16,
        ..*acq
    };
    let (s0, l0) = detect(&arms[0], &detectors[0], &acq_for(0))?;
    let (s1, l1) = detect(&arms[1], &detectors[1], &acq_for(1))?;
    Ok(([s0, s1], [l0, l1], routed))
}

/// HBT: every photon independently leaves through output 2 with probability `splitter_ratio`.
///
/// Output channels are `acq.channel` and `acq.channel + 1`.
pub fn route_hbt(
    photons: &[PhotonRecord],
    bench: &BenchConfig,
    detectors: &[DetectorModel; 2],
    acq: &Acquisition,
) -> Result<BenchOutput> {
    bench.validate()?;
    let key = StreamKey::new(derive_seed(acq.seed, 0x0048_4254), Domain::Routing);
    let side: Vec<bool> = photons
        .par_iter()
        .enumerate()
        .map(|(i, _)| key.at(i as u64).random::<f64>() < bench.splitter_ratio)
        .collect();
    let mut arms: [Vec<PhotonRecord>; 2] = [Vec::new(), Vec::new()];
    for (p, &second) in photons.iter().zip(&side) {
        arms[second as usize].push(*p);
    }
    let (outputs, logs, routed) = detect_outputs(arms, detectors, acq)?;
    Ok(BenchOutput {
        outputs,
        logs,
        routed,
        interfering_pairs: 0,
        warnings: Vec::new(),
    })
}

/// One photon at the output splitter.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Arrival {
    time: f64,
    start: f64,
    decay: f64,
    freq: f64,
}

impl Arrival {
    fn shifted(p: &PhotonRecord, delay: f64) -> Self {
        Arrival {
            time: p.emission_time + delay,
            start: p.wavepacket_start + delay,
            decay: p.decay_time,
            freq: p.frequency_offset,
        }
    }

    /// Complex amplitude √(1/τ)·e^{−(t−s)/2τ}·e^{−i2πf(t−s)} as (modulus, phase).
    fn amplitude(&self, t: f64) -> (f64, f64) {
        if t < self.start {
            return (0.0, 0.0);
        }
        let dt = t - self.start;
        (
            (-dt / (2.0 * self.decay)).exp() / self.decay.sqrt(),
            -2.0 * PI * self.freq * 1e-3 * dt,
        )
    }
}

/// Probabilities of the four output assignments of an interfering pair.
///
/// Photon `a` enters input 1 and was sampled at time `p`, photon `b` enters input 2 at `q`.
/// Returned order: (out1←p & out2←q, out1←q & out2←p, both out1, both out2).
pub(crate) fn pair_outcome_probabilities(
    a: &Arrival,
    b: &Arrival,
    ratio: f64,
    chi: f64,
    t2_star: Option<f64>,
) -> [f64; 4] {
    let (p, q) = (a.time, b.time);
    let (ap, php_a) = a.amplitude(p);
    let (aq, phq_a) = a.amplitude(q);
    let (bp, php_b) = b.amplitude(p);
    let (bq, phq_b) = b.amplitude(q);
    let direct = (ap * bq).powi(2);
    let exchange = (aq * bp).powi(2);
    let envelope = direct + exchange;
    // Re{ξa(q)ξb(p)ξa*(p)ξb*(q)}
    let interference = aq * bp * ap * bq * (phq_a + php_b - php_a - phq_b).cos();
    let damping = t2_star.map_or(1.0, |t2| (-2.0 * (p - q).abs() / t2).exp());
    let x = chi * interference * damping;
    let (r, t) = (ratio, 1.0 - ratio);
    let probs = [
        (r * r * exchange + t * t * direct - 2.0 * r * t * x) / envelope,
        (r * r * direct + t * t * exchange - 2.0 * r * t * x) / envelope,
        t * r * (envelope + 2.0 * x) / envelope,
        t * r * (envelope + 2.0 * x) / envelope,
    ];
    debug_assert!(
        probs.iter().all(|&v| v > -1e-12),
        "negative pair density {probs:?}"
    );
    probs.map(|v| v.max(0.0))
}

/// Greedy arrival-order pairing of short-arm and long-arm emitter photons whose
/// output-referenced wavepacket starts lie within 3·τ of each other.
fn pair_up(short: &[Arrival], long: &[Arrival]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < short.len() && j < long.len() {
        let (s, l) = (&short[i], &long[j]);
        let window = 3.0 * s.decay.min(l.decay);
        if (s.start - l.start).abs() <= window {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if s.start < l.start {
            i += 1;
        } else {
            j += 1;
        }
    }
    pairs
}

fn arrival_record(a: &Arrival, time: f64, template: &PhotonRecord) -> PhotonRecord {
    PhotonRecord {
        emission_time: time,
        wavepacket_start: a.start,
        ..*template
    }
}

/// HOM: unbalanced Mach–Zehnder whose long arm delays photons by the bench delay.
///
/// Output channels are `acq.channel` and `acq.channel + 1`.
pub fn route_hom(
    photons: &[PhotonRecord],
    bench: &BenchConfig,
    train: &PulseTrain,
    detectors: &[DetectorModel; 2],
    acq: &Acquisition,
) -> Result<BenchOutput> {
    bench.validate()?;
    if bench.topology != Topology::Hom {
        return Err(Error::config(
            "bench.topology",
            "route_hom requires topology = \"hom\"",
        ));
    }
    let delay = bench.resolved_delay(train);
    let mut warnings = Vec::new();
    let periods = delay / train.period_ps();
    if (periods - periods.round()).abs() > 1e-6 || periods.round() < 1.0 {
        warnings.push(format!(
            "delay {delay} ps is not an integer number of pulse periods ({} ps); pairs never meet",
            train.period_ps()
        ));
    }
    let (r, t) = (bench.splitter_ratio, 1.0 - bench.splitter_ratio);
    let chi = bench.polarization_mode.chi();
    let route_key = StreamKey::new(derive_seed(acq.seed, 0x0048_4f4d), Domain::Routing);
    let pair_key = StreamKey::new(derive_seed(acq.seed, 0x0048_4f4d), Domain::PairOutcome);

    // First splitter: (long arm?, classical output draw)
    let draws: Vec<(bool, f64)> = (0..photons.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = route_key.at(i as u64);
            (rng.random::<f64>() < 0.5, rng.random::<f64>())
        })
        .collect();

    let mut short_idx = Vec::new();
    let mut long_idx = Vec::new();
    for (i, p) in photons.iter().enumerate() {
        if p.origin == Origin::Emitter && p.decay_time > 0.0 {
            if draws[i].0 {
                long_idx.push(i);
            } else {
                short_idx.push(i);
            }
        }
    }
    let arrival = |i: usize| Arrival::shifted(&photons[i], if draws[i].0 { delay } else { 0.0 });
    let mut short: Vec<(Arrival, usize)> = short_idx.iter().map(|&i| (arrival(i), i)).collect();
    let mut long: Vec<(Arrival, usize)> = long_idx.iter().map(|&i| (arrival(i), i)).collect();
    short.sort_by(|x, y| x.0.start.total_cmp(&y.0.start).then(x.1.cmp(&y.1)));
    long.sort_by(|x, y| x.0.start.total_cmp(&y.0.start).then(x.1.cmp(&y.1)));
    let s_arr: Vec<Arrival> = short.iter().map(|x| x.0).collect();
    let l_arr: Vec<Arrival> = long.iter().map(|x| x.0).collect();
    let pairs = pair_up(&s_arr, &l_arr);

    let mut paired = vec![false; photons.len()];
    for &(i, j) in &pairs {
        paired[short[i].1] = true;
        paired[long[j].1] = true;
    }

    let mut arms: [Vec<PhotonRecord>; 2] = [Vec::new(), Vec::new()];
    // Classical routing: input 1 (short arm) reaches output 1 with probability T, input 2 with R.
    for (i, p) in photons.iter().enumerate() {
        if paired[i] {
            continue;
        }
        let (long_arm, u) = draws[i];
        let a = Arrival::shifted(p, if long_arm { delay } else { 0.0 });
        let to_first = if long_arm { u < r } else { u < t };
        arms[!to_first as usize].push(arrival_record(&a, a.time, p));
    }

    let t2 = bench.t2_pure_dephasing;
    let outcomes: Vec<[(usize, PhotonRecord); 2]> = pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let (a, ia) = short[i];
            let (b, ib) = long[j];
            let probs = pair_outcome_probabilities(&a, &b, r, chi, t2);
            let mut u: f64 = pair_key.at(k as u64).random();
            let mut choice = 3;
            for (n, &pr) in probs.iter().enumerate() {
                if u < pr {
                    choice = n;
                    break;
                }
                u -= pr;
            }
            let rec_p = arrival_record(&a, a.time, &photons[ia]);
            let rec_q = arrival_record(&b, b.time, &photons[ib]);
            match choice {
                0 => [(0, rec_p), (1, rec_q)],
                1 => [(1, rec_p), (0, rec_q)],
                2 => [(0, rec_p), (0, rec_q)],
                _ => [(1, rec_p), (1, rec_q)],
            }
        })
        .collect();
    for pair in outcomes {
        for (arm, rec) in pair {
            arms[arm].push(rec);
        }
    }

    let (outputs, logs, routed) = detect_outputs(arms, detectors, acq)?;
    Ok(BenchOutput {
        outputs,
        logs,
        routed,
        interfering_pairs: pairs.len() as u64,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::EmitterConfig;
    use crate::source::simulate_emission;
    use proptest::prelude::*;

    fn acq() -> Acquisition {
        Acquisition {
            channel: 1,
            duration_ps: 0,
            seed: 21,
            config_hash: [0; 32],
        }
    }

    fn arrival(time: f64, start: f64, decay: f64, freq: f64) -> Arrival {
        Arrival {
            time,
            start,
            decay,
            freq,
        }
    }

    #[test]
    fn identical_wavepackets_never_split() {
        let a = arrival(30.0, 0.0, 50.0, 0.0);
        let b = arrival(80.0, 0.0, 50.0, 0.0);
        let p = pair_outcome_probabilities(&a, &b, 0.5, 1.0, None);
        assert!(p[0].abs() < 1e-12 && p[1].abs() < 1e-12);
        assert!((p[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn distinguishable_pairs_are_classical() {
        let a = arrival(30.0, 0.0, 50.0, 1.0);
        let b = arrival(80.0, 5.0, 50.0, -2.0);
        let p = pair_outcome_probabilities(&a, &b, 0.5, 0.0, None);
        assert!((p[0] + p[1] - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn outcome_probabilities_are_a_distribution(
            tp in 0.0f64..500.0, tq in 0.0f64..500.0, sa in 0.0f64..20.0, sb in 0.0f64..20.0,
            fa in -10.0f64..10.0, fb in -10.0f64..10.0, ratio in 0.05f64..0.95, chi in 0.0f64..=1.0,
            t2 in proptest::option::of(5.0f64..1000.0),
        ) {
            let a = arrival(tp.max(sa), sa, 40.0, fa);
            let b = arrival(tq.max(sb), sb, 60.0, fb);
            let p = pair_outcome_probabilities(&a, &b, ratio, chi, t2);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn hbt_split_is_binomial() {
        let e = EmitterConfig {
            t1_free: 54.0,
            ..EmitterConfig::default()
        };
        let ph = simulate_emission(&e, &PulseTrain::new(400_000), 2).unwrap();
        let out = route_hbt(&ph, &BenchConfig::default(), &Default::default(), &acq()).unwrap();
        let n = ph.len() as f64;
        assert_eq!(out.routed[0] + out.routed[1], ph.len() as u64);
        assert!((out.routed[0] as f64 - n / 2.0).abs() < 3.0 * (n / 4.0).sqrt());
        assert_eq!(out.outputs[0].channel, 1);
        assert_eq!(out.outputs[1].channel, 2);
    }

    #[test]
    fn hom_conserves_photons_and_warns_on_mismatched_delay() {
        let e = EmitterConfig {
            t1_free: 54.0,
            leak_rate: 0.05,
            ..EmitterConfig::default()
        };
        let train = PulseTrain::new(20_000);
        let ph = simulate_emission(&e, &train, 2).unwrap();
        let bench = BenchConfig::hom(PolarizationMode::Co);
        let out = route_hom(&ph, &bench, &train, &Default::default(), &acq()).unwrap();
        assert_eq!(out.routed[0] + out.routed[1], ph.len() as u64);
        assert!(out.warnings.is_empty());
        // about half of the emitter photons pair up: P(short)·P(next long) per pulse
        let frac = out.interfering_pairs as f64 / 20_000.0;
        assert!((frac - 0.25).abs() < 0.03, "{frac}");
        let odd = BenchConfig {
            delay: Some(5000.0),
            ..bench
        };
        let out = route_hom(&ph, &odd, &train, &Default::default(), &acq()).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.interfering_pairs, 0);
    }
}
