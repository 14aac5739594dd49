//! Curve fitting: lifetimes, Fano cavity modes and HOM dips.

mod decay;
mod dip;
mod fano;
pub mod lm;

pub use decay::{emg_density, fit_decay, DecayCurve, DecayModel};
pub use dip::t2_from_dip;
pub use fano::{fano_curve, fit_fano};

use serde::Serialize;

/// Fixed floor below which counts are treated as equally uncertain.
pub const WEIGHT_FLOOR_COUNTS: f64 = 10.0;
pub const POISSON_WEIGHTING: &str = "poisson: sigma = sqrt(max(counts, 10))";
pub const UNIFORM_WEIGHTING: &str = "uniform: sigma = 1, covariance scaled by reduced chi2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Exp,
    Biexp,
    ExpIrf,
    Fano,
    DipExp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitParam {
    pub name: &'static str,
    pub value: f64,
    /// 1σ uncertainty.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<FitParam>,
    /// √χ² at the optimum.
    pub residual_norm: f64,
    pub reduced_chi2: f64,
    pub converged: bool,
    /// Parameters of a non-converged fit are not to be trusted.
    pub reliable: bool,
    pub iterations: usize,
    pub n_points: usize,
    pub weighting: &'static str,
    pub notes: Vec<String>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Value of parameter `name`; NaN if absent.
    pub fn value(&self, name: &str) -> f64 {
        self.get(name).map_or(f64::NAN, |p| p.value)
    }

    pub(crate) fn failed(
        model: FitModel,
        n_points: usize,
        weighting: &'static str,
        note: impl Into<String>,
    ) -> Self {
        FitResult {
            model,
            params: Vec::new(),
            residual_norm: f64::NAN,
            reduced_chi2: f64::NAN,
            converged: false,
            reliable: false,
            iterations: 0,
            n_points,
            weighting,
            notes: vec![note.into()],
        }
    }

    pub(crate) fn from_outcome(
        model: FitModel,
        names: &[&'static str],
        out: &lm::Outcome,
        n_points: usize,
        weighting: &'static str,
    ) -> Self {
        let errors: Vec<f64> = (0..names.len())
            .map(|i| {
                out.covariance
                    .as_ref()
                    .map_or(f64::NAN, |c| c[(i, i)].max(0.0).sqrt())
            })
            .collect();
        let dof = n_points.saturating_sub(names.len()).max(1);
        FitResult {
            model,
            params: names
                .iter()
                .zip(&out.params)
                .zip(&errors)
                .map(|((&name, &value), &error)| FitParam { name, value, error })
                .collect(),
            residual_norm: out.chi2.sqrt(),
            reduced_chi2: out.chi2 / dof as f64,
            converged: out.converged,
            reliable: out.converged,
            iterations: out.iterations,
            n_points,
            weighting,
            notes: vec![format!("termination: {}", out.reason)],
        }
    }

    pub(crate) fn flag_unreliable(&mut self, note: impl Into<String>) {
        self.converged = false;
        self.reliable = false;
        self.notes.push(note.into());
    }
}

pub(crate) fn poisson_sigma(counts: &[f64]) -> Vec<f64> {
    counts
        .iter()
        .map(|&c| c.max(WEIGHT_FLOOR_COUNTS).sqrt())
        .collect()
}
