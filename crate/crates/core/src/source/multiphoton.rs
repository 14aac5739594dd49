//! Multi-photon emission statistics per pulse.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::bisect;

/// Zero-delay second-order correlation of `N = O·(1 + Y) + Z` with `O ~ Bern(q)`,
/// `Y ~ Bern(p)` and `Z ~ Poisson(λ)`, all independent.
pub fn multiphoton_g2(q: f64, p: f64, lambda: f64) -> f64 {
    let mean = q * (1.0 + p) + lambda;
    let second = 2.0 * q * p + 2.0 * q * lambda * (1.0 + p) + lambda * lambda;
    second / (mean * mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiphotonSplit {
    pub reexcite_prob: f64,
    pub leak_rate: f64,
}

/// Chooses re-excitation probability and leak rate reproducing `target_g2`.
///
/// `leak_share` in [0, 1] fixes the split: `λ = s·κ`, `p = (1 − s)·κ`.
pub fn tune_multiphoton(
    target_g2: f64,
    leak_share: f64,
    occupation: f64,
) -> Result<MultiphotonSplit> {
    if !(0.0..=1.0).contains(&leak_share) || !(occupation > 0.0 && occupation <= 1.0) {
        return Err(Error::domain(
            "leak_share must lie in [0, 1] and occupation in (0, 1]",
        ));
    }
    if target_g2 <= 0.0 {
        return Ok(MultiphotonSplit {
            reexcite_prob: 0.0,
            leak_rate: 0.0,
        });
    }
    let split = |k: f64| ((1.0 - leak_share) * k, leak_share * k);
    let k_max = if leak_share < 1.0 {
        1.0 / (1.0 - leak_share)
    } else {
        10.0
    };
    let k = bisect(
        |k| {
            let (p, l) = split(k);
            multiphoton_g2(occupation, p, l) - target_g2
        },
        0.0,
        k_max.min(10.0),
        1e-14,
    )
    .ok_or_else(|| {
        Error::Calibration(format!(
            "g2 = {target_g2} unreachable with leak share {leak_share}"
        ))
    })?;
    let (reexcite_prob, leak_rate) = split(k);
    Ok(MultiphotonSplit {
        reexcite_prob,
        leak_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_photon_limits() {
        assert_eq!(multiphoton_g2(1.0, 0.0, 0.0), 0.0);
        assert!((multiphoton_g2(1e-9, 0.0, 0.4) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn g2_formula_matches_enumeration() {
        // brute-force moments over the joint distribution
        let (q, p, l) = (0.8, 0.05, 0.03_f64);
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for o in 0..=1u32 {
            for y in 0..=1u32 {
                let mut pois = (-l).exp();
                for z in 0..40u32 {
                    if z > 0 {
                        pois *= l / z as f64;
                    }
                    let w = (if o == 1 { q } else { 1.0 - q })
                        * (if y == 1 { p } else { 1.0 - p })
                        * pois;
                    let n = (o * (1 + y) + z) as f64;
                    m1 += w * n;
                    m2 += w * n * (n - 1.0);
                }
            }
        }
        assert!((multiphoton_g2(q, p, l) - m2 / (m1 * m1)).abs() < 1e-12);
    }

    #[test]
    fn tuning_round_trip() {
        for share in [0.0, 0.3, 1.0] {
            let s = tune_multiphoton(0.086, share, 1.0).unwrap();
            assert!((multiphoton_g2(1.0, s.reexcite_prob, s.leak_rate) - 0.086).abs() < 1e-10);
        }
    }
}
