//! Charge-reservoir saturation: steady-state yield and calibration of the refill time.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::{bisect, erlang_cdf};

/// Erlang shapes tried, in order, by [`calibrate_reservoir`].
pub const SHAPE_LADDER: [u32; 9] = [1, 2, 4, 8, 16, 32, 64, 128, 256];

/// Maximum deviation from linear scaling allowed for multipliers up to 4.
const ONSET_FLOOR: f64 = 0.90;
const ONSET_MULTIPLIER: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReservoirCalibration {
    /// Refill scale [ps].
    pub tau: f64,
    pub shape: u32,
    /// Yield ratio relative to multiplier 1, for multipliers 1..=target multiplier.
    pub ratios: Vec<(u32, f64)>,
}

/// Steady-state probability that a pulse produces an emission.
///
/// Occupations form a renewal process whose inter-occupation gap `J` (in pulses) satisfies
/// `P(J > n) = Π_{j=1..n} (1 − p_exc·F(j·period))`; the yield is `1 / E[J]`.
pub fn steady_state_yield(period: f64, tau: f64, shape: u32, p_exc: f64) -> f64 {
    if p_exc <= 0.0 {
        return 0.0;
    }
    if tau <= 0.0 {
        return p_exc;
    }
    // Gaps shorter than `j0` periods essentially never refill; each contributes exactly 1.
    let negligible = |j: u64| p_exc * erlang_cdf(j as f64 * period, shape, tau) < 1e-17;
    let mut j0 = 1u64;
    if negligible(1) {
        let mut hi = 2u64;
        while negligible(hi) {
            hi *= 2;
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if negligible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        j0 = hi;
    }
    let mut expected_gap = j0 as f64;
    let mut survival = 1.0;
    for j in j0..u64::MAX {
        survival *= 1.0 - p_exc * erlang_cdf(j as f64 * period, shape, tau);
        expected_gap += survival;
        if survival < 1e-16 {
            break;
        }
    }
    1.0 / expected_gap
}

/// Per-pulse yield at `multiplier` divided by the yield at multiplier 1.
pub fn reservoir_yield_ratio(base_period: f64, multiplier: u32, tau: f64, shape: u32) -> f64 {
    let y1 = steady_state_yield(base_period, tau, shape, 1.0);
    let ym = steady_state_yield(base_period / multiplier as f64, tau, shape, 1.0);
    ym / y1
}

/// Finds refill parameters whose yield ratio at `multiplier` equals `target_ratio`.
pub fn calibrate_reservoir(
    target_ratio: f64,
    multiplier: u32,
    base_period: f64,
) -> Result<ReservoirCalibration> {
    if !(target_ratio > 0.0 && target_ratio <= 1.0) {
        return Err(Error::domain(format!(
            "target_ratio must lie in (0, 1], got {target_ratio}"
        )));
    }
    if multiplier == 0 || !(base_period > 0.0) {
        return Err(Error::domain("multiplier and base_period must be positive"));
    }
    let table = |tau: f64, shape: u32| {
        (1..=multiplier)
            .map(|m| (m, reservoir_yield_ratio(base_period, m, tau, shape)))
            .collect::<Vec<_>>()
    };
    if target_ratio == 1.0 {
        return Ok(ReservoirCalibration {
            tau: 0.0,
            shape: 1,
            ratios: table(0.0, 1),
        });
    }
    if multiplier == 1 {
        return Err(Error::Calibration(
            "a ratio below 1 is unreachable at multiplier 1".into(),
        ));
    }
    let mut closest: Option<(u32, f64)> = None;
    for &shape in &SHAPE_LADDER {
        let g = |ln_tau: f64| {
            reservoir_yield_ratio(base_period, multiplier, ln_tau.exp(), shape) - target_ratio
        };
        let lo = (1e-4 * base_period / shape as f64).ln();
        let hi = (1e3 * base_period / shape as f64).ln();
        let Some(ln_tau) = bisect(g, lo, hi, 1e-10) else {
            continue;
        };
        let tau = ln_tau.exp();
        let onset = (2..=ONSET_MULTIPLIER.min(multiplier - 1))
            .map(|m| reservoir_yield_ratio(base_period, m, tau, shape))
            .fold(1.0, f64::min);
        if onset >= ONSET_FLOOR {
            return Ok(ReservoirCalibration {
                tau,
                shape,
                ratios: table(tau, shape),
            });
        }
        closest = Some((shape, onset));
    }
    Err(Error::Calibration(match closest {
        Some((shape, onset)) => format!(
            "target {target_ratio} at x{multiplier} reachable only with onset ratio {onset:.3} < {ONSET_FLOOR} (shape {shape})"
        ),
        None => format!("target {target_ratio} at x{multiplier} unreachable for every refill shape"),
    }))
}
