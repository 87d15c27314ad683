//! Closed-form linear classifiers and regressors.

mod lssvm;
mod svr;

pub use lssvm::{gamma_grid, train_lssvm, train_lssvm_with, train_one_vs_rest, LssvmModel, Solver};
pub use svr::{svr_objective, train_svr, SvrModel};

/// Per-class affine correction applied before [`softmax_scores`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub scale: f64,
    pub offset: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration { scale: 1.0, offset: 0.0 }
    }
}

/// Softmax across classes with max-subtraction.
pub fn softmax_scores(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

pub fn softmax_calibrated(scores: &[f64], calibration: &[Calibration]) -> Vec<f64> {
    let adjusted: Vec<f64> = scores
        .iter()
        .zip(calibration.iter().chain(std::iter::repeat(&Calibration::default())))
        .map(|(s, c)| c.scale * s + c.offset)
        .collect();
    softmax_scores(&adjusted)
}
