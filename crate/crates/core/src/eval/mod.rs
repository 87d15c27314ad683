//! Ranking metrics, the oracle-pruning study and end-to-end experiments.

mod ap;
mod experiment;
mod pruning;
mod report;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{softmax_scores, train_lssvm, train_one_vs_rest, LssvmModel};

pub use ap::{average_precision, eval_ap_at_k, mean_average_precision, ranking, PrCurve};
pub use experiment::{
    leave_one_out_study, nonaction_eval, prepare_features, run_experiment, AlphaChoice, Encoding, EvalReport,
    ExperimentConfig, LooResult, NonActionReport, Weighting, select_alpha, select_gamma,
};
pub use pruning::{pruned_fv, pruning_sweep, simulate_pruning, PruningOptions, SweepResult};
pub use report::{pr_curve_svg, sweep_svg};

/// Video features for recognition: one matrix shared by all classes, or one per class.
pub(crate) enum ClassFeatures<'a> {
    Shared(&'a [Vec<f64>]),
    PerClass(&'a [Vec<Vec<f64>>]),
}

impl ClassFeatures<'_> {
    fn rows(&self, class: usize) -> &[Vec<f64>] {
        match self {
            ClassFeatures::Shared(f) => f,
            ClassFeatures::PerClass(f) => &f[class],
        }
    }
}

pub(crate) fn stack(rows: &[Vec<f64>], idx: &[usize]) -> DMatrix<f64> {
    let d = idx.first().map_or(0, |&i| rows[i].len());
    DMatrix::from_fn(idx.len(), d, |r, c| rows[idx[r]][c])
}

/// Class scores of each `test` video from one-vs-rest classifiers trained on `train`.
pub(crate) fn recognition_scores(
    features: &ClassFeatures<'_>,
    labels: &[usize],
    train: &[usize],
    test: &[usize],
    n_classes: usize,
    gamma: f64,
    softmax: bool,
) -> Result<Vec<Vec<f64>>> {
    let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let models: Vec<LssvmModel> = match features {
        ClassFeatures::Shared(rows) => train_one_vs_rest(&stack(rows, train), &train_labels, n_classes, gamma)?,
        ClassFeatures::PerClass(per) => (0..n_classes)
            .into_par_iter()
            .map(|c| {
                let y: Vec<f64> = train_labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
                train_lssvm(&stack(&per[c], train), &y, gamma)
            })
            .collect::<Result<_>>()?,
    };
    class_scores(&models, |c, v| &features.rows(c)[v], test, softmax)
}

fn class_scores<'a>(
    models: &[LssvmModel],
    row: impl Fn(usize, usize) -> &'a [f64],
    test: &[usize],
    softmax: bool,
) -> Result<Vec<Vec<f64>>> {
    test.iter()
        .map(|&v| {
            let raw: Vec<f64> = models
                .iter()
                .enumerate()
                .map(|(c, m)| m.predict(row(c, v)))
                .collect::<Result<_>>()?;
            Ok(if softmax { softmax_scores(&raw) } else { raw })
        })
        .collect()
}

fn per_class_ap(scores: &[Vec<f64>], labels: &[usize], test: &[usize], n_classes: usize) -> Result<Vec<PrCurve>> {
    (0..n_classes)
        .map(|c| {
            let s: Vec<f64> = scores.iter().map(|row| row[c]).collect();
            let l: Vec<bool> = test.iter().map(|&v| labels[v] == c).collect();
            average_precision(&s, &l)
        })
        .collect()
}

/// Per-class AP of one-vs-rest classifiers trained on `train` and scored on `test`.
pub(crate) fn recognition_ap(
    features: &ClassFeatures<'_>,
    labels: &[usize],
    train: &[usize],
    test: &[usize],
    n_classes: usize,
    gamma: f64,
    softmax: bool,
) -> Result<Vec<PrCurve>> {
    let scores = recognition_scores(features, labels, train, test, n_classes, gamma, softmax)?;
    per_class_ap(&scores, labels, test, n_classes)
}

/// Per-class AP of already trained one-vs-rest classifiers on the `test` videos.
pub fn classifier_ap(
    models: &[LssvmModel],
    features: &[Vec<f64>],
    labels: &[usize],
    test: &[usize],
    softmax: bool,
) -> Result<Vec<PrCurve>> {
    let scores = class_scores(models, |_, v| &features[v], test, softmax)?;
    per_class_ap(&scores, labels, test, models.len())
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("pruning probability must lie in [0, 1], got {p}")))
    }
}
