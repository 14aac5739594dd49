//! Coherence time from the central dip of a co-polarised HOM histogram.

use super::lm::{multistart, Model, Problem};
use super::{poisson_sigma, FitModel, FitResult, POISSON_WEIGHTING};
use crate::correlate::CorrelationHistogram;
use crate::error::{Error, Result};

/// Center counts at or above this fraction of the shoulder mean the dip is masked.
pub const RESOLVABLE_FRACTION: f64 = 0.8;

/// `S·e^{−|t|/T_env}·(1 − V·e^{−2|t|/T₂}) + bg`; params `[S, T_env, V, T₂, bg]`.
struct Dip;

impl Model for Dip {
    fn n_params(&self) -> usize {
        5
    }
    fn eval(&self, p: &[f64], t: f64) -> f64 {
        let a = t.abs();
        p[0] * (-a / p[1]).exp() * (1.0 - p[2] * (-2.0 * a / p[3]).exp()) + p[4]
    }
    fn grad(&self, p: &[f64], t: f64, g: &mut [f64]) {
        let a = t.abs();
        let env = (-a / p[1]).exp();
        let e2 = (-2.0 * a / p[3]).exp();
        let shape = 1.0 - p[2] * e2;
        g[0] = env * shape;
        g[1] = p[0] * env * shape * a / (p[1] * p[1]);
        g[2] = -p[0] * env * e2;
        g[3] = -p[0] * env * p[2] * e2 * 2.0 * a / (p[3] * p[3]);
        g[4] = 1.0;
    }
}

/// Fits the center peak of `co` within `|t| < period/2` and reports `t2`.
pub fn t2_from_dip(co: &CorrelationHistogram, period: f64) -> Result<FitResult> {
    if !(period > 0.0) {
        return Err(Error::domain("period must be > 0"));
    }
    let half = 0.5 * period;
    let (t, y): (Vec<f64>, Vec<f64>) = (0..co.n_bins())
        .map(|i| (co.bin_center(i), co.counts[i] as f64))
        .filter(|(t, _)| t.abs() < half)
        .unzip();
    if t.len() < 8 {
        return Err(Error::DipNotResolvable(
            "fewer than 8 bins around zero delay".into(),
        ));
    }
    let bw = co.bin_width as f64;
    let center: Vec<f64> = t
        .iter()
        .zip(&y)
        .filter(|(t, _)| t.abs() <= 0.5 * bw + 1e-9)
        .map(|(_, &c)| c)
        .collect();
    let center = center.iter().sum::<f64>() / center.len().max(1) as f64;
    let smoothed: Vec<f64> = y.windows(3).map(|w| w.iter().sum::<f64>() / 3.0).collect();
    let (shoulder_idx, shoulder) =
        smoothed.iter().enumerate().fold(
            (0, 0.0),
            |acc, (i, &v)| if v > acc.1 { (i + 1, v) } else { acc },
        );
    if shoulder <= 0.0 || center >= RESOLVABLE_FRACTION * shoulder {
        return Err(Error::DipNotResolvable(format!(
            "center {center:.1} counts vs shoulder {shoulder:.1} (needs < {:.0}%)",
            100.0 * RESOLVABLE_FRACTION
        )));
    }
    let t_shoulder = t[shoulder_idx].abs().max(bw);
    let edge: Vec<f64> = t
        .iter()
        .zip(&y)
        .filter(|(t, _)| t.abs() > 0.8 * half)
        .map(|(_, &c)| c)
        .collect();
    let bg0 = edge.iter().sum::<f64>() / edge.len().max(1) as f64;
    let te0 = (0..y.len())
        .filter(|&i| t[i].abs() > t_shoulder && y[i] < bg0 + (shoulder - bg0) / std::f64::consts::E)
        .map(|i| t[i].abs())
        .fold(f64::INFINITY, f64::min);
    let te0 = if te0.is_finite() {
        te0
    } else {
        2.0 * t_shoulder
    };
    let v0 = (1.0 - center / shoulder).clamp(0.1, 0.99);
    let sigma = poisson_sigma(&y);
    let lower = [0.0, 1e-3, 0.0, 1e-3, 0.0];
    let upper = [f64::INFINITY, period, 1.0, period, shoulder];
    let prob = Problem {
        x: &t,
        y: &y,
        sigma: &sigma,
        lower: &lower,
        upper: &upper,
    };
    let mut best: Option<super::lm::Outcome> = None;
    for scale in [0.5, 1.0, 2.0] {
        let p0 = [
            2.0 * (shoulder - bg0),
            te0,
            v0,
            scale * t_shoulder,
            bg0.max(1e-3),
        ];
        let out = multistart(&Dip, &prob, &p0);
        if best.as_ref().map_or(true, |b| {
            (out.converged && !b.converged) || (out.converged == b.converged && out.chi2 < b.chi2)
        }) {
            best = Some(out);
        }
    }
    let out = best.unwrap();
    Ok(FitResult::from_outcome(
        FitModel::DipExp,
        &["amplitude", "t_envelope", "visibility", "t2", "background"],
        &out,
        t.len(),
        POISSON_WEIGHTING,
    ))
}
