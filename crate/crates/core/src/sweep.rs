//! Repetition-rate sweeps.

use serde::Serialize;

use crate::config::RunConfig;
use crate::correlate::Measured;
use crate::error::{Error, Result};
use crate::physics::VisibilityReport;
use crate::pipeline::{measure_g2, measure_hom};
use crate::rng::derive_seed;
use crate::source::steady_state_yield;

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub multiplier: u32,
    /// Effective excitation rate [MHz].
    pub rate_mhz: f64,
    /// Closed-form per-pulse yield relative to multiplier 1.
    pub expected_ratio: f64,
    /// Detected counts per pulse relative to multiplier 1.
    pub normalized_rate: Measured,
    pub g2: Option<Measured>,
    pub visibility: Option<VisibilityReport>,
}

/// Runs the HBT pipeline (and HOM when `with_hom`) for each multiplier with the
/// same number of pulses, normalising count rates by the multiplier-1 result.
pub fn rate_sweep(base: &RunConfig, multipliers: &[u32], with_hom: bool) -> Result<Vec<SweepRow>> {
    if multipliers.is_empty() {
        return Err(Error::domain("no multipliers given"));
    }
    let mut all: Vec<u32> = multipliers.to_vec();
    if !all.contains(&1) {
        all.insert(0, 1);
    }
    let base_period = 1e6 / base.train.base_rate;
    let p_exc = base.train.excitation_probability();
    let yield1 = steady_state_yield(
        base_period,
        base.emitter.reservoir_tau,
        base.emitter.reservoir_shape,
        p_exc,
    );

    let mut raw = Vec::with_capacity(all.len());
    for &m in &all {
        let mut cfg = base.clone();
        cfg.train.multiplier = m;
        cfg.bench.delay = None;
        cfg.seed = derive_seed(base.seed, 0x5357_0000 + m as u64);
        let g2 = measure_g2(&cfg)?;
        let counts = (g2.detected[0] + g2.detected[1]) as f64;
        let per_pulse = counts / cfg.train.n_pulses as f64;
        let visibility = if with_hom {
            Some(measure_hom(&cfg, g2.g2.value)?.report)
        } else {
            None
        };
        let expected = steady_state_yield(
            cfg.train.period_ps(),
            cfg.emitter.reservoir_tau,
            cfg.emitter.reservoir_shape,
            p_exc,
        ) / yield1;
        raw.push((
            m,
            cfg.train.rate_mhz(),
            expected,
            per_pulse,
            counts,
            g2.g2,
            visibility,
        ));
    }
    let (_, _, _, ref_rate, ref_counts, _, _) = raw[all.iter().position(|&m| m == 1).unwrap()];
    if ref_rate <= 0.0 {
        return Err(Error::Undefined("no counts at multiplier 1".into()));
    }
    Ok(raw
        .into_iter()
        .filter(|r| multipliers.contains(&r.0))
        .map(|(m, rate, expected, per_pulse, counts, g2, visibility)| {
            let value = per_pulse / ref_rate;
            SweepRow {
                multiplier: m,
                rate_mhz: rate,
                expected_ratio: expected,
                normalized_rate: Measured {
                    value,
                    err: value * (1.0 / counts.max(1.0) + 1.0 / ref_counts).sqrt(),
                },
                g2: Some(g2),
                visibility,
            }
        })
        .collect())
}
