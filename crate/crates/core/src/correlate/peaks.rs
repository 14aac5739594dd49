//! Peak-area integration: g²(0) and HOM visibility.

use serde::Serialize;

use super::CorrelationHistogram;
use crate::error::{Error, Result};
use crate::physics::{correct_visibility, VisibilityReport};

/// A derived quantity with its 1σ Poisson counting uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measured {
    pub value: f64,
    pub err: f64,
}

/// Areas of the peak windows centered at multiples of the period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakIntegration {
    /// Window width [ps], equal to the period.
    pub window: f64,
    pub center_area: u64,
    /// Areas at delays −n·P … −P, +P … +n·P.
    pub side_areas: Vec<u64>,
    pub n_side: usize,
}

/// Sums bins into windows of width `period` centered at `k·period`; a bin belongs to
/// the window containing its center. Only windows fully inside the range are kept.
pub fn integrate_peaks(hist: &CorrelationHistogram, period: f64) -> Result<PeakIntegration> {
    if !(period > 0.0) {
        return Err(Error::domain("period must be > 0"));
    }
    let range = hist.range as f64;
    let n_side = ((range - period / 2.0) / period).floor().max(0.0) as usize;
    let mut areas = vec![0u64; 2 * n_side + 1];
    for (i, &c) in hist.counts.iter().enumerate() {
        let k = (hist.bin_center(i) / period).round();
        if k.abs() <= n_side as f64 {
            areas[(k as i64 + n_side as i64) as usize] += c;
        }
    }
    let center_area = areas[n_side];
    let side_areas = areas[..n_side]
        .iter()
        .chain(&areas[n_side + 1..])
        .copied()
        .collect();
    Ok(PeakIntegration {
        window: period,
        center_area,
        side_areas,
        n_side,
    })
}

/// g²(0) as the center area over the mean side area.
pub fn g2_zero(hist: &CorrelationHistogram, period: f64) -> Result<Measured> {
    if (hist.range as f64) < 3.0 * period {
        return Err(Error::domain(format!(
            "range {} ps must cover at least three periods ({} ps)",
            hist.range,
            3.0 * period
        )));
    }
    let peaks = integrate_peaks(hist, period)?;
    let sides: u64 = peaks.side_areas.iter().sum();
    if sides == 0 {
        return Err(Error::Undefined("side peaks are empty".into()));
    }
    let n = peaks.side_areas.len() as f64;
    let c = peaks.center_area as f64;
    let value = n * c / sides as f64;
    // σ_C = √C, with √1 standing in for an empty center peak
    let err = n * (c.max(1.0) + c * c / sides as f64).sqrt() / sides as f64;
    Ok(Measured { value, err })
}

/// Raw HOM visibility `1 − A_co/A_cross` over the center window, corrected for
/// multi-photon events with `g2_zero` and `b_factor`.
pub fn hom_visibility(
    co: &CorrelationHistogram,
    cross: &CorrelationHistogram,
    window: f64,
    g2_zero: f64,
    b_factor: f64,
) -> Result<VisibilityReport> {
    if !co.same_binning(cross) {
        return Err(Error::BinningMismatch(format!(
            "co ({} ps, ±{} ps) vs cross ({} ps, ±{} ps)",
            co.bin_width, co.range, cross.bin_width, cross.range
        )));
    }
    let a_co = integrate_peaks(co, window)?.center_area as f64;
    let a_cross = integrate_peaks(cross, window)?.center_area as f64;
    if a_cross == 0.0 {
        return Err(Error::Undefined(
            "cross-polarised center area is zero".into(),
        ));
    }
    let ratio = a_co / a_cross;
    let v_raw = 1.0 - ratio;
    let v_raw_err = ratio * (1.0 / a_co.max(1.0) + 1.0 / a_cross).sqrt();
    let mut report = correct_visibility(v_raw, g2_zero, b_factor)?;
    report.v_raw_err = v_raw_err;
    Ok(report)
}
