//! Lifetime fits: single and double exponential tails, and IRF reconvolution.

use std::f64::consts::{PI, SQRT_2};

use serde::Serialize;

use super::lm::{multistart, LogSpace, Model, Problem};
use super::{poisson_sigma, FitModel, FitResult, POISSON_WEIGHTING};
use crate::constants::LEAD_IN_PS;
use crate::error::{Error, Result};
use crate::special::{erfc, erfcx};

const MIN_SIGNAL_BINS: usize = 30;

/// Photon arrival-time histogram relative to the excitation pulse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCurve {
    /// Bin centers [ps].
    pub t: Vec<f64>,
    pub counts: Vec<f64>,
}

impl DecayCurve {
    /// Folds `tags` onto the pulse period; delays are mapped into `[start, start + period)`.
    pub fn from_tags(
        tags: &[u64],
        period: f64,
        bin_width: f64,
        start: f64,
        span: f64,
    ) -> Result<Self> {
        if !(bin_width > 0.0 && span > 0.0 && period > 0.0) || span > period {
            return Err(Error::domain("need 0 < bin_width, 0 < span <= period"));
        }
        let n = (span / bin_width).ceil() as usize;
        let mut counts = vec![0.0; n];
        for &t in tags {
            let rel = (t as f64 - LEAD_IN_PS - start).rem_euclid(period);
            let idx = (rel / bin_width) as usize;
            if idx < n {
                counts[idx] += 1.0;
            }
        }
        let t = (0..n)
            .map(|i| start + (i as f64 + 0.5) * bin_width)
            .collect();
        Ok(DecayCurve { t, counts })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    Exp,
    Biexp,
    ExpIrf,
}

/// `A·e^{−(t−t0)/τ} + bg` with `t0` fixed; params `[A, τ, bg]`.
struct SingleExp {
    t0: f64,
}

impl Model for SingleExp {
    fn n_params(&self) -> usize {
        3
    }
    fn eval(&self, p: &[f64], t: f64) -> f64 {
        p[0] * (-(t - self.t0) / p[1]).exp() + p[2]
    }
    fn grad(&self, p: &[f64], t: f64, g: &mut [f64]) {
        let e = (-(t - self.t0) / p[1]).exp();
        g[0] = e;
        g[1] = p[0] * e * (t - self.t0) / (p[1] * p[1]);
        g[2] = 1.0;
    }
}

/// `a1·e^{−(t−t0)/τ1} + a2·e^{−(t−t0)/τ2} + bg`; params `[a1, τ1, a2, τ2, bg]`.
struct DoubleExp {
    t0: f64,
}

impl Model for DoubleExp {
    fn n_params(&self) -> usize {
        5
    }
    fn eval(&self, p: &[f64], t: f64) -> f64 {
        let d = t - self.t0;
        p[0] * (-d / p[1]).exp() + p[2] * (-d / p[3]).exp() + p[4]
    }
    fn grad(&self, p: &[f64], t: f64, g: &mut [f64]) {
        let d = t - self.t0;
        let e1 = (-d / p[1]).exp();
        let e2 = (-d / p[3]).exp();
        g[0] = e1;
        g[1] = p[0] * e1 * d / (p[1] * p[1]);
        g[2] = e2;
        g[3] = p[2] * e2 * d / (p[3] * p[3]);
        g[4] = 1.0;
    }
}

fn normal_pdf(u: f64, sigma: f64) -> f64 {
    (-0.5 * (u / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Exponentially modified Gaussian: a unit-area exponential of decay `tau` starting at
/// `mu`, convolved with a Gaussian of width `sigma`.
pub fn emg_density(t: f64, mu: f64, sigma: f64, tau: f64) -> f64 {
    let u = t - mu;
    let z = (sigma / tau - u / sigma) / SQRT_2;
    if z > 0.0 {
        (-0.5 * (u / sigma).powi(2)).exp() * erfcx(z) / (2.0 * tau)
    } else {
        (0.5 * (sigma / tau).powi(2) - u / tau).exp() * erfc(z) / (2.0 * tau)
    }
}

/// `A·EMG(t; μ, σ, τ) + bg`; params `[A, μ, τ, bg]` plus `σ` when it is free.
struct Reconvolution {
    sigma: Option<f64>,
}

impl Reconvolution {
    fn sigma(&self, p: &[f64]) -> f64 {
        self.sigma.unwrap_or_else(|| p[4])
    }
}

impl Model for Reconvolution {
    fn n_params(&self) -> usize {
        if self.sigma.is_some() {
            4
        } else {
            5
        }
    }
    fn eval(&self, p: &[f64], t: f64) -> f64 {
        p[0] * emg_density(t, p[1], self.sigma(p), p[2]) + p[3]
    }
    fn grad(&self, p: &[f64], t: f64, g: &mut [f64]) {
        let (a, mu, tau) = (p[0], p[1], p[2]);
        let s = self.sigma(p);
        let u = t - mu;
        let dens = emg_density(t, mu, s, tau);
        let phi = normal_pdf(u, s);
        g[0] = dens;
        g[1] = a * (dens - phi) / tau;
        g[2] = a
            * (dens * (u / (tau * tau) - 1.0 / tau - s * s / tau.powi(3))
                + s * s / tau.powi(3) * phi);
        g[3] = 1.0;
        if self.sigma.is_none() {
            g[4] = a * (dens * s / (tau * tau) - phi * (s / (tau * tau) + u / (s * tau)));
        }
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    if s.is_empty() {
        0.0
    } else {
        s[s.len() / 2]
    }
}

/// First delay after `from` at which the counts fall below `level`.
fn crossing(curve: &DecayCurve, from: usize, level: f64) -> Option<f64> {
    (from..curve.t.len())
        .find(|&i| curve.counts[i] < level)
        .map(|i| curve.t[i])
}

/// Fits a lifetime model to an arrival-time histogram.
///
/// `Exp` and `Biexp` are fitted in log space on the tail after the maximum;
/// `ExpIrf` fits the whole curve with a Gaussian IRF of width `irf_sigma`
/// (fitted as well when `None`).
pub fn fit_decay(
    curve: &DecayCurve,
    model: DecayModel,
    irf_sigma: Option<f64>,
) -> Result<FitResult> {
    if curve.t.len() != curve.counts.len() {
        return Err(Error::domain("t and counts differ in length"));
    }
    let fit_model = match model {
        DecayModel::Exp => FitModel::Exp,
        DecayModel::Biexp => FitModel::Biexp,
        DecayModel::ExpIrf => FitModel::ExpIrf,
    };
    let n = curve.counts.len();
    let floor = median(&curve.counts);
    let threshold = floor + 3.0 * floor.max(1.0).sqrt();
    let signal_bins = curve.counts.iter().filter(|&&c| c > threshold).count();
    if signal_bins < MIN_SIGNAL_BINS {
        return Ok(FitResult::failed(
            fit_model,
            n,
            POISSON_WEIGHTING,
            format!("only {signal_bins} bins above the noise floor (need {MIN_SIGNAL_BINS})"),
        ));
    }
    let peak = (0..n)
        .max_by(|&a, &b| curve.counts[a].total_cmp(&curve.counts[b]))
        .unwrap();
    let peak_counts = curve.counts[peak];
    let late = &curve.counts[n - (n / 10).max(1)..];
    let bg0 = late.iter().sum::<f64>() / late.len() as f64;
    let tau0 = crossing(curve, peak, bg0 + (peak_counts - bg0) / std::f64::consts::E)
        .map_or((curve.t[n - 1] - curve.t[peak]) / 5.0, |t| {
            t - curve.t[peak]
        })
        .max(1e-2);
    let span = curve.t[n - 1] - curve.t[0];

    let mut result = match model {
        DecayModel::Exp | DecayModel::Biexp => {
            let t0 = curve.t[peak];
            let (x, y): (Vec<f64>, Vec<f64>) = (peak..n)
                .filter(|&i| curve.counts[i] > 0.0)
                .map(|i| (curve.t[i], curve.counts[i]))
                .unzip();
            // σ_ln y = σ_y / y
            let sigma: Vec<f64> = poisson_sigma(&y)
                .iter()
                .zip(&y)
                .map(|(s, y)| s / y)
                .collect();
            let ln_y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
            if model == DecayModel::Exp {
                let m = SingleExp { t0 };
                let lower = [0.0, 1e-3, 0.0];
                let upper = [f64::INFINITY, 1e3 * span, peak_counts];
                let prob = Problem {
                    x: &x,
                    y: &ln_y,
                    sigma: &sigma,
                    lower: &lower,
                    upper: &upper,
                };
                let out = multistart(
                    &LogSpace(&m),
                    &prob,
                    &[peak_counts - bg0, tau0, bg0.max(1e-3)],
                );
                FitResult::from_outcome(
                    fit_model,
                    &["amplitude", "t1", "background"],
                    &out,
                    x.len(),
                    POISSON_WEIGHTING,
                )
            } else {
                let m = DoubleExp { t0 };
                let lower = [0.0, 1e-3, 0.0, 1e-3, 0.0];
                let upper = [
                    f64::INFINITY,
                    1e3 * span,
                    f64::INFINITY,
                    1e3 * span,
                    peak_counts,
                ];
                let prob = Problem {
                    x: &x,
                    y: &ln_y,
                    sigma: &sigma,
                    lower: &lower,
                    upper: &upper,
                };
                let a0 = peak_counts - bg0;
                let p0 = [0.8 * a0, tau0, 0.05 * a0, 8.0 * tau0, bg0.max(1e-3)];
                let out = multistart(&LogSpace(&m), &prob, &p0);
                let mut r = FitResult::from_outcome(
                    fit_model,
                    &[
                        "amplitude_fast",
                        "t1",
                        "amplitude_slow",
                        "tau_slow",
                        "background",
                    ],
                    &out,
                    x.len(),
                    POISSON_WEIGHTING,
                );
                biexp_derived(&mut r);
                r
            }
        }
        DecayModel::ExpIrf => {
            let m = Reconvolution { sigma: irf_sigma };
            let total: f64 = curve.counts.iter().map(|c| c - bg0.min(floor)).sum();
            let bw = curve.t[1] - curve.t[0];
            let early = &curve.counts[..(n / 20).max(1)];
            let bg_early = early.iter().sum::<f64>() / early.len() as f64;
            let half_rise = (0..=peak)
                .find(|&i| curve.counts[i] >= 0.5 * peak_counts)
                .map_or(curve.t[peak], |i| curve.t[i]);
            let mut p0 = vec![total * bw, half_rise, tau0, bg_early.max(1e-3)];
            let mut lower = vec![0.0, curve.t[0], 1e-3, 0.0];
            let mut upper = vec![f64::INFINITY, curve.t[n - 1], 1e3 * span, peak_counts];
            if irf_sigma.is_none() {
                p0.push((curve.t[peak] - half_rise).max(bw));
                lower.push(1e-3);
                upper.push(span);
            }
            let sigma = poisson_sigma(&curve.counts);
            let prob = Problem {
                x: &curve.t,
                y: &curve.counts,
                sigma: &sigma,
                lower: &lower,
                upper: &upper,
            };
            let out = multistart(&m, &prob, &p0);
            let names: &[&'static str] = if irf_sigma.is_some() {
                &["amplitude", "t0", "t1", "background"]
            } else {
                &["amplitude", "t0", "t1", "background", "irf_sigma"]
            };
            FitResult::from_outcome(fit_model, names, &out, n, POISSON_WEIGHTING)
        }
    };
    if result.converged {
        let t1 = result.get("t1").copied();
        if let Some(p) = t1 {
            if !(p.error.is_finite() && p.error < 0.5 * p.value) {
                result.flag_unreliable(format!(
                    "lifetime not determined (t1 = {} ± {})",
                    p.value, p.error
                ));
            }
        }
    }
    Ok(result)
}

fn biexp_derived(r: &mut FitResult) {
    let (a1, t1, a2, t2) = (
        r.value("amplitude_fast"),
        r.value("t1"),
        r.value("amplitude_slow"),
        r.value("tau_slow"),
    );
    if t2 < t1 {
        // keep `t1` as the fast component
        for p in r.params.iter_mut() {
            p.name = match p.name {
                "amplitude_fast" => "amplitude_slow",
                "amplitude_slow" => "amplitude_fast",
                "t1" => "tau_slow",
                "tau_slow" => "t1",
                other => other,
            };
        }
    }
    let (fast, slow) = if t2 < t1 {
        (a2 * t2, a1 * t1)
    } else {
        (a1 * t1, a2 * t2)
    };
    r.params.push(super::FitParam {
        name: "slow_fraction",
        value: slow / (fast + slow),
        error: f64::NAN,
    });
}

#[cfg(test)]
mod tests {
    use super::super::lm::tests::max_jacobian_error;
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Poisson};

    fn synth(f: impl Fn(f64) -> f64, bw: f64, n: usize, start: f64, noisy: bool) -> DecayCurve {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let t: Vec<f64> = (0..n).map(|i| start + (i as f64 + 0.5) * bw).collect();
        let counts = t
            .iter()
            .map(|&x| {
                let m = f(x);
                if noisy {
                    Poisson::new(m.max(1e-12)).unwrap().sample(&mut rng)
                } else {
                    m
                }
            })
            .collect();
        DecayCurve { t, counts }
    }

    #[test]
    fn noiseless_exp_is_exact() {
        let c = synth(|t| 1e4 * (-t / 26.9).exp() + 5.0, 1.0, 400, 0.0, false);
        let r = fit_decay(&c, DecayModel::Exp, None).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value("t1") - 26.9).abs() / 26.9 < 1e-6);
        assert!((r.value("background") - 5.0).abs() < 1e-4);
    }

    #[test]
    fn noiseless_reconvolution_is_exact() {
        let c = synth(
            |t| 5e5 * emg_density(t, 0.0, 10.0, 54.0) + 2.0,
            2.0,
            300,
            -100.0,
            false,
        );
        let r = fit_decay(&c, DecayModel::ExpIrf, Some(10.0)).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value("t1") - 54.0).abs() / 54.0 < 1e-6);
        let free = fit_decay(&c, DecayModel::ExpIrf, None).unwrap();
        assert!((free.value("irf_sigma") - 10.0).abs() < 1e-4);
    }

    #[test]
    fn biexp_round_trip() {
        let (t1, t2, frac) = (54.0, 400.0, 0.2);
        let n_photons = 2e6;
        let a1 = n_photons * (1.0 - frac) / t1;
        let a2 = n_photons * frac / t2;
        let c = synth(
            |t| a1 * (-t / t1).exp() + a2 * (-t / t2).exp() + 1.0,
            1.0,
            4000,
            0.0,
            true,
        );
        let r = fit_decay(&c, DecayModel::Biexp, None).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value("t1") - t1).abs() / t1 < 0.1);
        assert!((r.value("tau_slow") - t2).abs() / t2 < 0.1);
        assert!((r.value("slow_fraction") - frac).abs() < 0.05);
    }

    #[test]
    fn pure_noise_does_not_converge() {
        let c = synth(|_| 50.0, 4.0, 500, 0.0, true);
        for m in [DecayModel::Exp, DecayModel::Biexp, DecayModel::ExpIrf] {
            let r = fit_decay(&c, m, Some(10.0)).unwrap();
            assert!(!r.converged && !r.reliable);
        }
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let xs: Vec<f64> = (0..60).map(|i| -40.0 + 5.0 * i as f64).collect();
        let tail: Vec<f64> = xs.iter().map(|x| x + 45.0).collect();
        assert!(max_jacobian_error(&SingleExp { t0: 3.0 }, &[1e3, 26.9, 4.0], &tail) < 1e-5);
        assert!(
            max_jacobian_error(
                &DoubleExp { t0: 0.0 },
                &[1e3, 54.0, 50.0, 400.0, 2.0],
                &tail
            ) < 1e-5
        );
        assert!(
            max_jacobian_error(
                &Reconvolution { sigma: Some(10.0) },
                &[1e4, 1.0, 26.9, 3.0],
                &xs
            ) < 1e-5
        );
        assert!(
            max_jacobian_error(
                &Reconvolution { sigma: None },
                &[1e4, 1.0, 26.9, 3.0, 10.0],
                &xs
            ) < 1e-5
        );
    }

    #[test]
    fn emg_reduces_to_exponential_far_from_onset() {
        let (s, tau, t) = (5.0f64, 50.0f64, 200.0f64);
        let direct = (0.5 * (s / tau).powi(2) - t / tau).exp() / tau;
        assert!((emg_density(t, 0.0, s, tau) - direct).abs() / direct < 1e-9);
        // unit area
        let area: f64 = (0..20_000)
            .map(|i| emg_density(-100.0 + 0.1 * i as f64, 0.0, s, tau) * 0.1)
            .sum();
        assert!((area - 1.0).abs() < 1e-3);
    }
}
