//! Physical constants (CODATA 2018) in the unit system used throughout the crate.
//!
//! Times are picoseconds, energies micro- or milli-electronvolts, frequencies GHz.

use serde::Serialize;

/// Reduced Planck constant in µeV·ps.
pub const HBAR_UEV_PS: f64 = 658.211_956_9;

/// Boltzmann constant in meV/K.
pub const K_B_MEV_PER_K: f64 = 0.086_173_3;

/// Planck constant in µeV/GHz.
pub const H_UEV_PER_GHZ: f64 = 4.135_667_696;

/// Fixed lead-in before the first excitation pulse so jittered tags never go negative.
pub const LEAD_IN_PS: f64 = 10_000.0;

/// Timetag grid resolution.
pub const RESOLUTION_PS: u32 = 1;

/// Constants block stamped into every result document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantsBlock {
    pub hbar_uev_ps: f64,
    pub k_b_mev_per_k: f64,
    pub h_uev_per_ghz: f64,
    pub resolution_ps: u32,
}

impl ConstantsBlock {
    pub const fn current() -> Self {
        ConstantsBlock {
            hbar_uev_ps: HBAR_UEV_PS,
            k_b_mev_per_k: K_B_MEV_PER_K,
            h_uev_per_ghz: H_UEV_PER_GHZ,
            resolution_ps: RESOLUTION_PS,
        }
    }
}

/// Energy in µeV to frequency in GHz.
pub fn uev_to_ghz(e: f64) -> f64 {
    e / H_UEV_PER_GHZ
}

/// Frequency in GHz to energy in µeV.
pub fn ghz_to_uev(f: f64) -> f64 {
    f * H_UEV_PER_GHZ
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn energy_frequency_round_trip(e in 1e-6f64..1e6) {
            let back = ghz_to_uev(uev_to_ghz(e));
            prop_assert!(((back - e) / e).abs() < 1e-12);
        }
    }
}
