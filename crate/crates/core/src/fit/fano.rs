//! Fano line-shape fits of cavity reflectance spectra.

use super::lm::{multistart, Model, Outcome, Problem};
use super::{FitModel, FitParam, FitResult, UNIFORM_WEIGHTING};
use crate::error::{Error, Result};

const MIN_SAMPLES: usize = 50;

/// `C·(q + ε)²/(1 + ε²) + offset` with `ε = 2(λ − λ_C)/w`.
pub fn fano_curve(lambda: f64, lambda_c: f64, width: f64, q: f64, c: f64, offset: f64) -> f64 {
    let e = 2.0 * (lambda - lambda_c) / width;
    c * (q + e).powi(2) / (1.0 + e * e) + offset
}

/// params `[C, q, λ_C, w, offset]`
struct Fano;

impl Model for Fano {
    fn n_params(&self) -> usize {
        5
    }
    fn eval(&self, p: &[f64], x: f64) -> f64 {
        fano_curve(x, p[2], p[3], p[1], p[0], p[4])
    }
    fn grad(&self, p: &[f64], x: f64, g: &mut [f64]) {
        let (c, q, lc, w) = (p[0], p[1], p[2], p[3]);
        let e = 2.0 * (x - lc) / w;
        let d = 1.0 + e * e;
        let de = 2.0 * c * (q + e) * (1.0 - q * e) / (d * d);
        g[0] = (q + e).powi(2) / d;
        g[1] = 2.0 * c * (q + e) / d;
        g[2] = de * (-2.0 / w);
        g[3] = de * (-e / w);
        g[4] = 1.0;
    }
}

/// Symmetric limit: params `[A, λ_C, w, offset]`.
struct Lorentzian;

impl Model for Lorentzian {
    fn n_params(&self) -> usize {
        4
    }
    fn eval(&self, p: &[f64], x: f64) -> f64 {
        let e = 2.0 * (x - p[1]) / p[2];
        p[0] / (1.0 + e * e) + p[3]
    }
    fn grad(&self, p: &[f64], x: f64, g: &mut [f64]) {
        let e = 2.0 * (x - p[1]) / p[2];
        let d = 1.0 + e * e;
        let de = -2.0 * p[0] * e / (d * d);
        g[0] = 1.0 / d;
        g[1] = de * (-2.0 / p[2]);
        g[2] = de * (-e / p[2]);
        g[3] = 1.0;
    }
}

fn aic(out: &Outcome, n: usize, k: usize) -> f64 {
    n as f64 * (out.chi2.max(1e-300) / n as f64).ln() + 2.0 * k as f64
}

/// Fits a Fano resonance to `(wavelength [nm], reflectance)` samples.
///
/// A pure Lorentzian is fitted alongside; the model with the lower Akaike
/// information criterion is reported. Reports `lambda_c`, `q_factor = λ_C/w` and,
/// for the Fano model, the asymmetry `q`.
pub fn fit_fano(wavelength: &[f64], reflectance: &[f64]) -> Result<FitResult> {
    let n = wavelength.len();
    if n != reflectance.len() {
        return Err(Error::domain("wavelength and reflectance differ in length"));
    }
    if n < MIN_SAMPLES {
        return Err(Error::domain(format!(
            "need at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    let (lo, hi) = wavelength
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let span = hi - lo;
    let mut sorted = reflectance.to_vec();
    sorted.sort_by(f64::total_cmp);
    let base = sorted[n / 2];
    let (ymin, ymax) = (sorted[0], sorted[n - 1]);
    let extreme = (0..n)
        .max_by(|&a, &b| {
            (reflectance[a] - base)
                .abs()
                .total_cmp(&(reflectance[b] - base).abs())
        })
        .unwrap();
    let depth = reflectance[extreme] - base;
    let spacing = span / (n - 1) as f64;
    let w0 = (reflectance
        .iter()
        .filter(|&&y| (y - base).abs() > 0.5 * depth.abs())
        .count() as f64
        * spacing)
        .max(2.0 * spacing);
    let sigma = vec![1.0; n];

    let lower_l = [
        f64::NEG_INFINITY,
        lo - span,
        1e-3 * spacing,
        f64::NEG_INFINITY,
    ];
    let upper_l = [f64::INFINITY, hi + span, 10.0 * span, f64::INFINITY];
    let prob_l = Problem {
        x: wavelength,
        y: reflectance,
        sigma: &sigma,
        lower: &lower_l,
        upper: &upper_l,
    };
    let lor = multistart(
        &Lorentzian,
        &prob_l,
        &[depth, wavelength[extreme], w0, base],
    );

    let lower_f = [0.0, -1e3, lo - span, 1e-3 * spacing, f64::NEG_INFINITY];
    let upper_f = [f64::INFINITY, 1e3, hi + span, 10.0 * span, f64::INFINITY];
    let prob_f = Problem {
        lower: &lower_f,
        upper: &upper_f,
        ..prob_l
    };
    let mut fano: Option<Outcome> = None;
    for q0 in [-3.0, -1.0, 0.0, 1.0, 3.0] {
        for center in [
            wavelength[extreme],
            wavelength[extreme] - 0.5 * w0,
            wavelength[extreme] + 0.5 * w0,
        ] {
            let c0 = ((ymax - ymin) / (1.0 + q0 * q0)).max(1e-12);
            let off0 = if q0 == 0.0 { ymin } else { base - c0 };
            let out = multistart(&Fano, &prob_f, &[c0, q0, center, w0, off0]);
            if out.converged && fano.as_ref().map_or(true, |b| out.chi2 < b.chi2) {
                fano = Some(out);
            }
        }
    }

    let use_fano = match &fano {
        Some(f) => !lor.converged || aic(f, n, 5) < aic(&lor, n, 4),
        None => false,
    };
    let mut result = if use_fano {
        let f = fano.as_ref().unwrap();
        let mut r = FitResult::from_outcome(
            FitModel::Fano,
            &["amplitude", "q", "lambda_c", "width", "offset"],
            f,
            n,
            UNIFORM_WEIGHTING,
        );
        r.notes.push("fano model selected by AIC".into());
        r
    } else {
        let mut r = FitResult::from_outcome(
            FitModel::Fano,
            &["amplitude", "lambda_c", "width", "offset"],
            &lor,
            n,
            UNIFORM_WEIGHTING,
        );
        r.notes.push("lorentzian submodel selected by AIC".into());
        r
    };
    let lc = result.get("lambda_c").copied();
    let w = result.get("width").copied();
    if let (Some(lc), Some(w)) = (lc, w) {
        let q = lc.value / w.value;
        let err = q * ((lc.error / lc.value).powi(2) + (w.error / w.value).powi(2)).sqrt();
        result.params.push(FitParam {
            name: "q_factor",
            value: q,
            error: err,
        });
        if !(lo..=hi).contains(&lc.value) {
            result.flag_unreliable(format!(
                "resonance {:.3} nm outside the sampled span [{lo:.3}, {hi:.3}]",
                lc.value
            ));
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::super::lm::tests::max_jacobian_error;
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn spectrum(lc: f64, q_factor: f64, q: f64, noise: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let w = lc / q_factor;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(0.0, noise).unwrap();
        let x: Vec<f64> = (0..200).map(|i| lc - 20.0 + 0.2 * i as f64).collect();
        let y = x
            .iter()
            .map(|&l| {
                fano_curve(l, lc, w, q, 0.4, 0.1)
                    + if noise > 0.0 {
                        nd.sample(&mut rng)
                    } else {
                        0.0
                    }
            })
            .collect();
        (x, y)
    }

    #[test]
    fn recovers_asymmetric_resonance() {
        // 1% of the full signal swing
        let (x, y) = spectrum(920.0, 250.0, 1.0, 0.008, 1);
        let r = fit_fano(&x, &y).unwrap();
        assert!(r.converged, "{r:?}");
        assert!(
            (r.value("lambda_c") - 920.0).abs() < 0.05,
            "{}",
            r.value("lambda_c")
        );
        assert!((r.value("q_factor") - 250.0).abs() / 250.0 < 0.05);
        assert!((r.value("q") - 1.0).abs() < 0.1);
    }

    #[test]
    fn symmetric_dip_center_is_minimum() {
        let x: Vec<f64> = (0..120).map(|i| 900.0 + 0.25 * i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&l| 0.9 - 0.5 / (1.0 + (2.0 * (l - 913.3) / 2.0).powi(2)))
            .collect();
        let r = fit_fano(&x, &y).unwrap();
        assert!(r.converged);
        assert!((r.value("lambda_c") - 913.3).abs() < 1e-6);
    }

    #[test]
    fn resonance_outside_span_does_not_converge() {
        let x: Vec<f64> = (0..100).map(|i| 900.0 + 0.1 * i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&l| fano_curve(l, 930.0, 3.0, 1.0, 0.4, 0.1))
            .collect();
        let r = fit_fano(&x, &y).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(fit_fano(&[1.0; 10], &[1.0; 10]).is_err());
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let xs: Vec<f64> = (0..50).map(|i| 910.0 + 0.4 * i as f64).collect();
        assert!(max_jacobian_error(&Fano, &[0.4, 1.0, 920.0, 3.68, 0.1], &xs) < 1e-5);
        assert!(max_jacobian_error(&Lorentzian, &[-0.4, 920.0, 3.68, 0.9], &xs) < 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn shift_equivariant(shift in -50.0f64..50.0) {
            let (x, y) = spectrum(920.0, 250.0, 1.0, 0.008, 3);
            let base = fit_fano(&x, &y).unwrap();
            let xs: Vec<f64> = x.iter().map(|v| v + shift).collect();
            let moved = fit_fano(&xs, &y).unwrap();
            prop_assert!((moved.value("lambda_c") - base.value("lambda_c") - shift).abs() < 1e-6);
        }
    }
}
