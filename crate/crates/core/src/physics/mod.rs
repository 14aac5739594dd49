//! Closed-form emitter and cavity physics: Purcell scaling, cavity parametrics,
//! two-photon visibilities under spectral diffusion and phonon dephasing.

mod calibrate;

pub use calibrate::{calibrate_gamma_inhom, AnchorCalibration};

use serde::{Deserialize, Serialize};

use crate::constants::{HBAR_UEV_PS, K_B_MEV_PER_K};
use crate::error::{Error, Result};
use crate::special::erfcx;

/// Physical parameters of the emitting transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterConfig {
    /// Lifetime without cavity enhancement [ps].
    pub t1_free: f64,
    /// Purcell factor relative to `t1_free`.
    pub purcell_factor: f64,
    /// Gaussian spectral-diffusion FWHM [GHz].
    pub gamma_inhom: f64,
    /// Phonon coupling prefactor [µeV].
    pub alpha: f64,
    /// Effective phonon energy [meV].
    pub e_phonon: f64,
    /// Lattice temperature [K].
    pub temperature: f64,
    /// Fraction of photons emitted through the slow (metastable) branch.
    #[serde(default)]
    pub slow_fraction: f64,
    /// Slow-branch decay time [ps].
    #[serde(default)]
    pub tau_slow: f64,
    /// Hole-refill time constant [ps]; zero disables reservoir saturation.
    #[serde(default)]
    pub reservoir_tau: f64,
    /// Erlang shape of the refill delay; 1 is a memoryless exponential refill.
    #[serde(default = "default_shape")]
    pub reservoir_shape: u32,
    /// Probability of a second, re-excited photon within the same pulse.
    #[serde(default)]
    pub reexcite_prob: f64,
    /// Mean number of leaked laser photons per pulse.
    #[serde(default)]
    pub leak_rate: f64,
}

fn default_shape() -> u32 {
    1
}

impl Default for EmitterConfig {
    fn default() -> Self {
        EmitterConfig {
            t1_free: 680.0,
            purcell_factor: 1.0,
            gamma_inhom: 0.0,
            alpha: 3.0,
            e_phonon: 1.0,
            temperature: 4.0,
            slow_fraction: 0.0,
            tau_slow: 0.0,
            reservoir_tau: 0.0,
            reservoir_shape: 1,
            reexcite_prob: 0.0,
            leak_rate: 0.0,
        }
    }
}

impl EmitterConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("emitter.{field}"), reason))
            }
        };
        check(
            self.t1_free > 0.0 && self.t1_free.is_finite(),
            "t1_free",
            "must be > 0",
        )?;
        check(self.purcell_factor > 0.0, "purcell_factor", "must be > 0")?;
        check(self.gamma_inhom >= 0.0, "gamma_inhom", "must be >= 0")?;
        check(self.alpha >= 0.0, "alpha", "must be >= 0")?;
        check(self.e_phonon > 0.0, "e_phonon", "must be > 0")?;
        check(self.temperature >= 0.0, "temperature", "must be >= 0")?;
        check(
            (0.0..=1.0).contains(&self.slow_fraction),
            "slow_fraction",
            "must lie in [0, 1]",
        )?;
        if self.slow_fraction > 0.0 {
            check(
                self.tau_slow > self.t1(),
                "tau_slow",
                "must exceed the enhanced lifetime when slow_fraction > 0",
            )?;
        }
        check(self.reservoir_tau >= 0.0, "reservoir_tau", "must be >= 0")?;
        check(self.reservoir_shape >= 1, "reservoir_shape", "must be >= 1")?;
        check(
            (0.0..=1.0).contains(&self.reexcite_prob),
            "reexcite_prob",
            "must lie in [0, 1]",
        )?;
        check(self.leak_rate >= 0.0, "leak_rate", "must be >= 0")?;
        Ok(())
    }

    /// Purcell-enhanced lifetime [ps].
    pub fn t1(&self) -> f64 {
        self.t1_free / self.purcell_factor
    }
}

/// Parametric model of the circular-Bragg-grating cavity mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityModel {
    /// Mode wavelength at zero disc-radius offset [nm].
    pub lambda_c0: f64,
    /// Disc-radius offset [nm].
    #[serde(default)]
    pub delta_r: f64,
    /// Mode shift per nm of radius offset [nm/nm].
    #[serde(default = "default_tuning_slope")]
    pub tuning_slope: f64,
    pub q_factor: f64,
    /// Purcell factor on resonance.
    pub fp_max: f64,
    /// H/V mode splitting [nm]; stored only.
    #[serde(default)]
    pub mode_splitting: f64,
    /// Scalar spatial-mismatch derating of the Purcell excess, in (0, 1].
    #[serde(default = "default_derating")]
    pub spatial_derating: f64,
}

fn default_tuning_slope() -> f64 {
    1.3
}

fn default_derating() -> f64 {
    1.0
}

impl Default for CavityModel {
    fn default() -> Self {
        CavityModel {
            lambda_c0: 920.0,
            delta_r: 0.0,
            tuning_slope: 1.3,
            q_factor: 250.0,
            fp_max: 30.0,
            mode_splitting: 0.0,
            spatial_derating: 1.0,
        }
    }
}

impl CavityModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_factor > 0.0) {
            return Err(Error::config("cavity.q_factor", "must be > 0"));
        }
        if !(self.fp_max >= 1.0) {
            return Err(Error::config("cavity.fp_max", "must be >= 1"));
        }
        if !(self.tuning_slope > 0.0) {
            return Err(Error::config("cavity.tuning_slope", "must be > 0"));
        }
        if self.mode_splitting < 0.0 {
            return Err(Error::config("cavity.mode_splitting", "must be >= 0"));
        }
        if !(self.spatial_derating > 0.0 && self.spatial_derating <= 1.0) {
            return Err(Error::config(
                "cavity.spatial_derating",
                "must lie in (0, 1]",
            ));
        }
        Ok(())
    }
}

/// Raw and multi-photon-corrected HOM visibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisibilityReport {
    pub v_raw: f64,
    /// 1σ counting uncertainty of `v_raw`; zero when not measured.
    pub v_raw_err: f64,
    pub g2_zero: f64,
    pub b_factor: f64,
    pub v_corrected: f64,
}

/// Convention for the Fourier-limited coherence line drawn against measured T₂.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FourierLimit {
    /// T₂ = 2·T₁.
    #[default]
    CoherenceTwiceLifetime,
    /// 2·T₂ = T₁.
    CoherenceHalfLifetime,
}

impl FourierLimit {
    pub fn t2_limit(self, t1: f64) -> f64 {
        match self {
            FourierLimit::CoherenceTwiceLifetime => 2.0 * t1,
            FourierLimit::CoherenceHalfLifetime => 0.5 * t1,
        }
    }
}

/// Bose–Einstein occupancy of a phonon mode of energy `e` [meV] at `temperature` [K].
pub fn bose_einstein(e: f64, temperature: f64) -> Result<f64> {
    if !(e > 0.0) {
        return Err(Error::domain(format!("phonon energy must be > 0, got {e}")));
    }
    if temperature < 0.0 {
        return Err(Error::domain(format!(
            "temperature must be >= 0, got {temperature}"
        )));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (e / (K_B_MEV_PER_K * temperature)).exp_m1())
}

/// Phonon-induced pure dephasing γ*(T) = α·n(E)·(n(E)+1) [µeV].
pub fn phonon_dephasing_rate(config: &EmitterConfig) -> Result<f64> {
    let n = bose_einstein(config.e_phonon, config.temperature)?;
    Ok(config.alpha * n * (n + 1.0))
}

/// Fourier-limited linewidth γ = ħ/T₁ [µeV].
pub fn fourier_linewidth(t1: f64) -> Result<f64> {
    if !(t1 > 0.0) {
        return Err(Error::domain(format!("lifetime must be > 0, got {t1}")));
    }
    Ok(HBAR_UEV_PS / t1)
}

/// Enhanced lifetime for a given Purcell factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurcellLifetime {
    pub t1: f64,
    /// Set when `fp < 1`: the cavity suppresses rather than enhances emission.
    pub suppressed: bool,
}

pub fn purcell_lifetime(t1_free: f64, fp: f64) -> Result<PurcellLifetime> {
    if !(t1_free > 0.0) {
        return Err(Error::domain(format!("t1_free must be > 0, got {t1_free}")));
    }
    if !(fp > 0.0) {
        return Err(Error::domain(format!(
            "Purcell factor must be > 0, got {fp}"
        )));
    }
    Ok(PurcellLifetime {
        t1: t1_free / fp,
        suppressed: fp < 1.0,
    })
}

/// Cavity mode wavelength λ_C = λ_C0 + slope·δR [nm].
pub fn cavity_mode_wavelength(cavity: &CavityModel) -> f64 {
    cavity.lambda_c0 + cavity.tuning_slope * cavity.delta_r
}

/// Lorentzian Purcell response versus emitter–mode detuning [nm]; tends to 1 off resonance.
pub fn purcell_vs_detuning(cavity: &CavityModel, detuning: f64) -> f64 {
    let lambda_c = cavity_mode_wavelength(cavity);
    let eps = 2.0 * cavity.q_factor * detuning / lambda_c;
    1.0 + cavity.spatial_derating * (cavity.fp_max - 1.0) / (1.0 + eps * eps)
}

/// Dimensionless argument `x = A/T₁` with `A = √ln2 / (√2·π·Γ)`.
fn inhomogeneous_x(t1: f64, gamma_inhom_ghz: f64) -> f64 {
    let gamma_per_ps = gamma_inhom_ghz * 1e-3;
    std::f64::consts::LN_2.sqrt()
        / (std::f64::consts::SQRT_2 * std::f64::consts::PI * gamma_per_ps * t1)
}

/// HOM visibility of lifetime-limited photons under Gaussian spectral diffusion:
/// `V = √π·x·exp(x²)·erfc(x)`.
pub fn visibility_inhomogeneous(t1: f64, gamma_inhom: f64) -> Result<f64> {
    if !(t1 > 0.0) {
        return Err(Error::domain(format!("lifetime must be > 0, got {t1}")));
    }
    if gamma_inhom < 0.0 {
        return Err(Error::domain(format!(
            "linewidth must be >= 0, got {gamma_inhom}"
        )));
    }
    if gamma_inhom == 0.0 {
        return Ok(1.0);
    }
    let x = inhomogeneous_x(t1, gamma_inhom);
    if !x.is_finite() {
        return Ok(1.0);
    }
    let v = std::f64::consts::PI.sqrt() * x * erfcx(x);
    Ok(v.clamp(0.0, 1.0))
}

/// Markovian phonon factor γ/(γ + γ*(T)).
pub fn thermal_factor(config: &EmitterConfig) -> Result<f64> {
    let gamma = fourier_linewidth(config.t1())?;
    let gamma_star = phonon_dephasing_rate(config)?;
    Ok(gamma / (gamma + gamma_star))
}

/// Temperature-dependent visibility: inhomogeneous term times the Markovian phonon factor.
pub fn visibility_temperature(config: &EmitterConfig) -> Result<f64> {
    let t1 = purcell_lifetime(config.t1_free, config.purcell_factor)?.t1;
    Ok(visibility_inhomogeneous(t1, config.gamma_inhom)? * thermal_factor(config)?)
}

/// Pure-dephasing time T₂* [ps] whose interference damping reproduces the Markovian factor
/// for exponential wavepackets: `2/T₂* = γ*/ħ`.
pub fn pure_dephasing_time(config: &EmitterConfig) -> Result<Option<f64>> {
    let gamma_star = phonon_dephasing_rate(config)?;
    if gamma_star <= 0.0 {
        return Ok(None);
    }
    Ok(Some(2.0 * HBAR_UEV_PS / gamma_star))
}

/// Adds `B·g²(0)` to a raw visibility, clamping at unity.
pub fn correct_visibility(v_raw: f64, g2_zero: f64, b_factor: f64) -> Result<VisibilityReport> {
    if !(1.0..=2.0).contains(&b_factor) {
        return Err(Error::domain(format!(
            "B factor must lie in [1, 2], got {b_factor}"
        )));
    }
    if !(g2_zero >= 0.0) {
        return Err(Error::domain(format!("g2(0) must be >= 0, got {g2_zero}")));
    }
    Ok(VisibilityReport {
        v_raw,
        v_raw_err: 0.0,
        g2_zero,
        b_factor,
        v_corrected: (v_raw + b_factor * g2_zero).min(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn bose_einstein_examples() {
        assert_eq!(bose_einstein(1.0, 0.0).unwrap(), 0.0);
        // 1/(exp(1/(0.0861733*30)) - 1), evaluated independently
        assert!(close(
            bose_einstein(1.0, 30.0).unwrap(),
            2.117_353_683,
            1e-8
        ));
        assert!(bose_einstein(0.0, 4.0).is_err());
        assert!(bose_einstein(-1.0, 4.0).is_err());
        let grid: Vec<f64> = (1..60)
            .map(|t| bose_einstein(1.0, t as f64).unwrap())
            .collect();
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn dephasing_examples() {
        let mut cfg = EmitterConfig {
            temperature: 0.0,
            ..EmitterConfig::default()
        };
        assert_eq!(phonon_dephasing_rate(&cfg).unwrap(), 0.0);
        cfg.temperature = 30.0;
        // 3 * 2.1173537 * 3.1173537
        assert!(close(phonon_dephasing_rate(&cfg).unwrap(), 19.801_62, 1e-4));
        let g20 = phonon_dephasing_rate(&EmitterConfig {
            temperature: 20.0,
            ..cfg.clone()
        })
        .unwrap();
        assert!(phonon_dephasing_rate(&cfg).unwrap() > g20);
    }

    #[test]
    fn fourier_linewidth_examples() {
        assert!(close(fourier_linewidth(26.9).unwrap(), 24.469, 1e-3));
        assert!(close(fourier_linewidth(HBAR_UEV_PS).unwrap(), 1.0, 1e-12));
        assert!(close(fourier_linewidth(680.0).unwrap(), 0.967_959, 1e-6));
        assert!(fourier_linewidth(0.0).is_err());
        assert!(fourier_linewidth(-3.0).is_err());
    }

    #[test]
    fn purcell_lifetime_examples() {
        assert!(close(
            purcell_lifetime(680.0, 25.28).unwrap().t1,
            26.9,
            0.01
        ));
        assert_eq!(purcell_lifetime(680.0, 1.0).unwrap().t1, 680.0);
        assert!(close(purcell_lifetime(680.0, 12.6).unwrap().t1, 54.0, 0.05));
        let weak = purcell_lifetime(680.0, 0.5).unwrap();
        assert!(weak.suppressed);
        assert_eq!(weak.t1, 1360.0);
    }

    #[test]
    fn cavity_tuning() {
        let mut c = CavityModel::default();
        assert_eq!(cavity_mode_wavelength(&c), 920.0);
        c.delta_r = 10.0;
        assert!(close(cavity_mode_wavelength(&c), 933.0, 1e-12));
        c.delta_r = -20.0;
        let lo = cavity_mode_wavelength(&c);
        c.delta_r = 30.0;
        let hi = cavity_mode_wavelength(&c);
        assert!(close(hi - lo, 65.0, 1e-9));
    }

    #[test]
    fn purcell_detuning_examples() {
        let c = CavityModel {
            fp_max: 30.0,
            q_factor: 250.0,
            ..CavityModel::default()
        };
        assert_eq!(purcell_vs_detuning(&c, 0.0), 30.0);
        let half = 920.0 / (2.0 * 250.0);
        assert!(close(purcell_vs_detuning(&c, half), 15.5, 1e-12));
        // 1 + 29/(1 + (2*250*2/920)^2) = 1 + 29/(1 + 1.0869565^2)
        let eps: f64 = 1000.0 / 920.0;
        let expected = 1.0 + 29.0 / (1.0 + eps * eps);
        assert!(close(purcell_vs_detuning(&c, 2.0), expected, 1e-12));
        assert!(close(purcell_vs_detuning(&c, 2.0), 14.293_761, 1e-6));
    }

    #[test]
    fn visibility_limits() {
        assert_eq!(visibility_inhomogeneous(30.0, 0.0).unwrap(), 1.0);
        assert!(visibility_inhomogeneous(1e9, 5.0).unwrap() < 1e-3);
        assert!(visibility_inhomogeneous(1e-6, 5.0).unwrap() > 0.999);
        assert!(visibility_inhomogeneous(0.0, 5.0).is_err());
    }

    #[test]
    fn temperature_zero_matches_inhomogeneous() {
        let cfg = EmitterConfig {
            purcell_factor: 25.0,
            gamma_inhom: 4.0,
            temperature: 0.0,
            ..EmitterConfig::default()
        };
        let vt = visibility_temperature(&cfg).unwrap();
        let vi = visibility_inhomogeneous(cfg.t1(), 4.0).unwrap();
        assert_eq!(vt, vi);
    }

    #[test]
    fn visibility_grows_with_purcell_factor() {
        let vs: Vec<f64> = [1.7, 12.6, 25.0]
            .iter()
            .map(|&fp| {
                visibility_temperature(&EmitterConfig {
                    purcell_factor: fp,
                    gamma_inhom: 4.0,
                    temperature: 20.0,
                    ..EmitterConfig::default()
                })
                .unwrap()
            })
            .collect();
        assert!(vs[0] < vs[1] && vs[1] < vs[2]);
    }

    #[test]
    fn correction_examples() {
        let r = correct_visibility(0.43, 0.039, 2.0).unwrap();
        assert!(close(r.v_corrected, 0.508, 1e-12));
        let r = correct_visibility(0.88, 0.086, 1.0).unwrap();
        assert!(close(r.v_corrected, 0.966, 1e-12));
        assert!(r.v_corrected >= 0.96);
        assert_eq!(correct_visibility(1.0, 0.1, 2.0).unwrap().v_corrected, 1.0);
        assert!(correct_visibility(0.5, 0.1, 2.5).is_err());
        assert!(correct_visibility(0.5, 0.1, 0.9).is_err());
    }

    #[test]
    fn visibility_monotone_on_grid() {
        let t1s: Vec<f64> = (0..20).map(|i| 10.0 * 1.3f64.powi(i)).collect();
        let gs: Vec<f64> = (0..20).map(|i| 0.1 * 1.35f64.powi(i)).collect();
        for &g in &gs {
            let row: Vec<f64> = t1s
                .iter()
                .map(|&t| visibility_inhomogeneous(t, g).unwrap())
                .collect();
            assert!(row.windows(2).all(|w| w[1] <= w[0]));
            assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        for &t in &t1s {
            let col: Vec<f64> = gs
                .iter()
                .map(|&g| visibility_inhomogeneous(t, g).unwrap())
                .collect();
            assert!(col.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    proptest! {
        #[test]
        fn detuning_response_even_and_bounded(d in -50.0f64..50.0, fp in 1.0f64..60.0, q in 10.0f64..2000.0) {
            let c = CavityModel { fp_max: fp, q_factor: q, ..CavityModel::default() };
            let a = purcell_vs_detuning(&c, d);
            let b = purcell_vs_detuning(&c, -d);
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a >= 1.0 && a <= fp);
        }

        #[test]
        fn thermal_factor_bounded_and_monotone(t in 0.0f64..80.0, dt in 0.01f64..20.0, fp in 1.0f64..40.0) {
            let cfg = EmitterConfig { purcell_factor: fp, temperature: t, ..EmitterConfig::default() };
            let hot = EmitterConfig { temperature: t + dt, ..cfg.clone() };
            let a = thermal_factor(&cfg).unwrap();
            let b = thermal_factor(&hot).unwrap();
            prop_assert!(a > 0.0 && a <= 1.0);
            prop_assert!(b <= a);
        }

        #[test]
        fn correction_never_exceeds_one(v in -1.0f64..1.0, g in 0.0f64..1.0, b in 1.0f64..2.0) {
            let r = correct_visibility(v, g, b).unwrap();
            prop_assert!(r.v_corrected <= 1.0);
            let r0 = correct_visibility(v, 0.0, b).unwrap();
            prop_assert_eq!(r0.v_corrected, v.min(1.0));
        }
    }
}
