//! Shared inputs for the benchmarks.

use sps_core::detector::dark_counts;
use sps_core::timetag::{StreamMeta, TimeTagStream};

/// Strictly increasing Poisson tags at `rate_hz` over `duration_ps`.
pub fn poisson_stream(channel: u16, rate_hz: f64, duration_ps: u64, seed: u64) -> TimeTagStream {
    let mut tags = dark_counts(rate_hz, duration_ps, seed).expect("valid rate");
    tags.dedup();
    TimeTagStream::new(channel, tags, StreamMeta::default()).expect("sorted")
}

/// Photon arrival delays for an ideal decay of time constant `t1` behind a Gaussian IRF,
/// folded onto `period` and returned as absolute tags.
pub fn decay_tags(t1: f64, irf_sigma: f64, n_pulses: u64, period: f64) -> Vec<u64> {
    // deterministic quantiles avoid pulling an RNG into the bench crate
    let lead = sps_core::constants::LEAD_IN_PS;
    let mut tags: Vec<u64> = (0..n_pulses)
        .map(|k| {
            let u = ((k as f64 * 0.618_033_988_749_895).fract()).max(1e-12);
            let v = ((k as f64 * 0.754_877_666_246_693).fract()).clamp(1e-12, 1.0 - 1e-12);
            let w = ((k as f64 * 0.569_840_290_998_053).fract()).max(1e-12);
            let jitter = irf_sigma * (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos();
            let delay = (-t1 * w.ln() + jitter + 200.0).max(0.0);
            (lead + k as f64 * period + delay).round() as u64
        })
        .collect();
    tags.dedup();
    tags
}
