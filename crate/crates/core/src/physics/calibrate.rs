use serde::Serialize;

use super::visibility_inhomogeneous;
use crate::error::{Error, Result};
use crate::special::bisect;

/// Result of fitting Γ to a single (T₁, V) anchor point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AnchorCalibration {
    pub t1: f64,
    pub v_target: f64,
    pub gamma_inhom: f64,
}

/// Finds the spectral-diffusion FWHM Γ [GHz] for which `visibility_inhomogeneous(t1, Γ) = v_target`.
pub fn calibrate_gamma_inhom(t1: f64, v_target: f64) -> Result<AnchorCalibration> {
    if !(v_target > 0.0 && v_target < 1.0) {
        return Err(Error::domain(format!(
            "target visibility must lie in (0, 1), got {v_target}"
        )));
    }
    let f = |g: f64| {
        visibility_inhomogeneous(t1, g)
            .map(|v| v - v_target)
            .unwrap_or(f64::NAN)
    };
    let gamma = bisect(f, 1e-9, 1e6, 1e-14).ok_or_else(|| {
        Error::Calibration(format!(
            "no linewidth reaches V = {v_target} at T1 = {t1} ps"
        ))
    })?;
    Ok(AnchorCalibration {
        t1,
        v_target,
        gamma_inhom: gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchor_calibration_reproduces_target() {
        let cal = calibrate_gamma_inhom(30.0, 0.76).unwrap();
        let v = visibility_inhomogeneous(30.0, cal.gamma_inhom).unwrap();
        assert!((v - 0.76).abs() < 1e-10);
    }

    #[test]
    fn rejects_unreachable_targets() {
        assert!(calibrate_gamma_inhom(30.0, 1.0).is_err());
        assert!(calibrate_gamma_inhom(30.0, 0.0).is_err());
    }
}
