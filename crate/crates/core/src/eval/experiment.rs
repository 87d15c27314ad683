use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    average_precision, eval_ap_at_k, mean_average_precision, recognition_ap, recognition_scores, ClassFeatures, PrCurve,
};
use crate::darwin::{darwin_video_feature, DarwinParams, DarwinVariant, DEFAULT_LAMBDA};
use crate::dataset::{DatasetManifest, FrameSet, Split};
use crate::encoding::EncodedVideo;
use crate::error::{Error, Result};
use crate::models::{train_lssvm, LssvmModel};
use crate::nonaction::{build_training_set, group_by_video, score_shots, train_nonaction, TrainingMode, TrainingSet};
use crate::pooling::{pool_segments, segment_video, PoolingParams, Segment, ALPHA_GRID, DEFAULT_WINDOW};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Whole-video features, no segment weighting.
    None,
    Generic,
    Specific,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Pooling,
    /// Rank pooling; plain without weighting, weighted with generic weighting.
    Darwin,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaChoice {
    Fixed(f64),
    /// Chosen from [`ALPHA_GRID`] by cross-validated mAP on the training videos.
    Tuned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub weighting: Weighting,
    pub encoding: Encoding,
    pub fuse_dense: bool,
    pub alpha: AlphaChoice,
    pub nonaction_gamma: f64,
    pub action_gamma: f64,
    pub lambda: f64,
    pub window: u32,
    pub stride: u32,
    pub per_second: bool,
    pub softmax: bool,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            weighting: Weighting::Generic,
            encoding: Encoding::Pooling,
            fuse_dense: false,
            alpha: AlphaChoice::Fixed(1.0),
            nonaction_gamma: 1.0,
            action_gamma: 1.0,
            lambda: DEFAULT_LAMBDA,
            window: DEFAULT_WINDOW,
            stride: DEFAULT_WINDOW,
            per_second: false,
            softmax: true,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.encoding == Encoding::Darwin {
            if self.weighting == Weighting::Specific {
                return Err(Error::invalid("rank pooling is only weighted by the generic classifier"));
            }
            if self.fuse_dense {
                return Err(Error::invalid("rank pooling does not fuse dense channels"));
            }
        }
        if let AlphaChoice::Fixed(a) = self.alpha {
            if a.is_nan() || a < 0.0 {
                return Err(Error::invalid(format!("alpha must be non-negative, got {a}")));
            }
        }
        for (name, v) in [("nonaction_gamma", self.nonaction_gamma), ("action_gamma", self.action_gamma), ("lambda", self.lambda)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn pooling(&self, alpha: f64) -> PoolingParams {
        PoolingParams {
            window: self.window,
            stride: self.stride,
            alpha,
            fuse_dense: self.fuse_dense,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ExperimentConfig,
    pub classes: Vec<String>,
    pub per_class_ap: Vec<f64>,
    pub map: f64,
    /// Pooling temperature actually used, when weighting applies.
    pub alpha: Option<f64>,
    pub curves: Vec<PrCurve>,
}

/// Folds used for out-of-fold scoring and for choosing `alpha`.
const FOLDS: usize = 4;

/// Non-action classifiers for one labelling: the first scores test videos,
/// the others score the training videos of one fold each, having not seen them.
struct Scorer {
    models: Vec<LssvmModel>,
}

impl Scorer {
    fn for_video(&self, fold: Option<usize>) -> &LssvmModel {
        &self.models[fold.map_or(0, |f| f + 1)]
    }
}

enum Source {
    Whole(Vec<Vec<f64>>),
    /// Scored windows of every video, one set per scorer.
    Segments(Vec<Vec<Vec<Segment>>>),
    Darwin(Option<Scorer>),
}

struct Prepared {
    source: Source,
    /// Fold of each training video, `None` for test videos.
    folds: Vec<Option<usize>>,
}

fn train_split(manifest: &DatasetManifest) -> (Vec<usize>, Vec<usize>) {
    (0..manifest.videos.len()).partition(|&i| manifest.videos[i].split == Split::Train)
}

/// Class-stratified fold assignment of the training videos.
fn assign_folds(manifest: &DatasetManifest, seed: u64) -> Vec<Option<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![None; manifest.videos.len()];
    let mut next = 0usize;
    for c in 0..manifest.classes.len() {
        let mut members: Vec<usize> = (0..manifest.videos.len())
            .filter(|&i| manifest.videos[i].split == Split::Train && manifest.videos[i].action_label == c)
            .collect();
        members.shuffle(&mut rng);
        for v in members {
            folds[v] = Some(next % FOLDS);
            next += 1;
        }
    }
    folds
}

fn train_scorer(
    base: &TrainingSet,
    manifest: &DatasetManifest,
    mode: TrainingMode,
    gamma: f64,
    folds: &[Option<usize>],
) -> Result<Scorer> {
    let set = base.for_mode(manifest, mode)?;
    let mut models = vec![train_lssvm(&set.x, &set.y, gamma)?];
    for f in 0..FOLDS {
        let part = set.subset(|r| folds[r.video] != Some(f));
        models.push(train_lssvm(&part.x, &part.y, gamma)?);
    }
    Ok(Scorer { models })
}

fn prepare(manifest: &DatasetManifest, encoded: &[EncodedVideo], config: &ExperimentConfig) -> Result<Prepared> {
    let n_classes = manifest.classes.len();
    let folds = assign_folds(manifest, config.seed);
    let modes: Vec<TrainingMode> = match config.weighting {
        Weighting::None => Vec::new(),
        Weighting::Generic => vec![TrainingMode::Generic],
        Weighting::Specific => (0..n_classes).map(TrainingMode::Specific).collect(),
    };
    let scorers: Vec<Scorer> = if modes.is_empty() {
        Vec::new()
    } else {
        let base = build_training_set(manifest, encoded, TrainingMode::Generic, Split::Train)?;
        modes
            .par_iter()
            .map(|&m| train_scorer(&base, manifest, m, config.nonaction_gamma, &folds))
            .collect::<Result<_>>()?
    };
    let source = match (config.encoding, config.weighting) {
        (Encoding::Darwin, _) => Source::Darwin(scorers.into_iter().next()),
        (Encoding::Pooling, Weighting::None) => Source::Whole(
            encoded
                .par_iter()
                .map(|v| v.set_feature(&FrameSet::all(v.n_frames), config.fuse_dense))
                .collect(),
        ),
        (Encoding::Pooling, _) => {
            let params = config.pooling(0.0);
            Source::Segments(
                scorers
                    .iter()
                    .map(|s| {
                        encoded
                            .par_iter()
                            .zip(&folds)
                            .map(|(v, &f)| segment_video(v, s.for_video(f), &params))
                            .collect::<Result<_>>()
                    })
                    .collect::<Result<_>>()?,
            )
        }
    };
    Ok(Prepared { source, folds })
}

/// Per-video recognition features of `prepared` at temperature `alpha`.
fn features_at(
    prepared: &Prepared,
    encoded: &[EncodedVideo],
    config: &ExperimentConfig,
    alpha: f64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    match &prepared.source {
        Source::Whole(f) => Ok(vec![f.clone()]),
        Source::Segments(sets) => sets
            .iter()
            .map(|segs| segs.par_iter().map(|s| Ok(pool_segments(s, alpha)?.values)).collect())
            .collect(),
        Source::Darwin(scorer) => {
            let params = DarwinParams {
                variant: if scorer.is_some() { DarwinVariant::Weighted } else { DarwinVariant::Plain },
                lambda: config.lambda,
                pooling: config.pooling(alpha),
                per_second: config.per_second,
            };
            let rows = encoded
                .par_iter()
                .zip(&prepared.folds)
                .map(|(v, &f)| Ok(darwin_video_feature(v, scorer.as_ref().map(|s| s.for_video(f)), &params)?.normalized()))
                .collect::<Result<_>>()?;
            Ok(vec![rows])
        }
    }
}

fn class_features(sets: &[Vec<Vec<f64>>]) -> ClassFeatures<'_> {
    if sets.len() == 1 {
        ClassFeatures::Shared(&sets[0])
    } else {
        ClassFeatures::PerClass(sets)
    }
}

fn weighted(prepared: &Prepared) -> bool {
    matches!(prepared.source, Source::Segments(_) | Source::Darwin(Some(_)))
}

/// Mean per-class AP over the held-out folds of the training videos.
fn cv_map(
    manifest: &DatasetManifest,
    folds: &[Option<usize>],
    features: &ClassFeatures<'_>,
    gamma: f64,
    softmax: bool,
) -> Result<f64> {
    let labels: Vec<usize> = manifest.videos.iter().map(|v| v.action_label).collect();
    let n_classes = manifest.classes.len();
    let mut aps = Vec::new();
    for f in 0..FOLDS {
        let fit: Vec<usize> = (0..labels.len()).filter(|&i| folds[i].is_some_and(|g| g != f)).collect();
        let val: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] == Some(f)).collect();
        if val.is_empty() || fit.is_empty() {
            continue;
        }
        let scores = recognition_scores(features, &labels, &fit, &val, n_classes, gamma, softmax)?;
        for c in 0..n_classes {
            let l: Vec<bool> = val.iter().map(|&v| labels[v] == c).collect();
            if l.contains(&true) {
                let s: Vec<f64> = scores.iter().map(|row| row[c]).collect();
                aps.push(average_precision(&s, &l)?.ap);
            }
        }
    }
    if aps.is_empty() {
        return Err(Error::invalid("too few training videos to cross-validate"));
    }
    Ok(mean_average_precision(&aps))
}

/// First grid value with the highest score.
fn best_of(grid: &[f64], mut score: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut best = (f64::NEG_INFINITY, grid[0]);
    for &value in grid {
        let s = score(value)?;
        if s > best.0 {
            best = (s, value);
        }
    }
    Ok(best.1)
}

fn tune_alpha(
    manifest: &DatasetManifest,
    encoded: &[EncodedVideo],
    prepared: &Prepared,
    config: &ExperimentConfig,
) -> Result<f64> {
    best_of(&ALPHA_GRID, |alpha| {
        let sets = features_at(prepared, encoded, config, alpha)?;
        cv_map(manifest, &prepared.folds, &class_features(&sets), config.action_gamma, config.softmax)
    })
}

/// Picks the pooling temperature for already scored windows by cross-validated
/// recognition mAP over the training videos; the smallest on ties.
pub fn select_alpha(
    manifest: &DatasetManifest,
    segments: &[Vec<Segment>],
    action_gamma: f64,
    softmax: bool,
    seed: u64,
) -> Result<f64> {
    let folds = assign_folds(manifest, seed);
    best_of(&ALPHA_GRID, |alpha| {
        let rows: Vec<Vec<f64>> = segments
            .par_iter()
            .map(|s| Ok(pool_segments(s, alpha)?.values))
            .collect::<Result<_>>()?;
        cv_map(manifest, &folds, &ClassFeatures::Shared(&rows), action_gamma, softmax)
    })
}

/// Picks the action-classifier regulariser from `grid` by cross-validated mAP.
pub fn select_gamma(manifest: &DatasetManifest, features: &[Vec<f64>], grid: &[f64], softmax: bool, seed: u64) -> Result<f64> {
    let folds = assign_folds(manifest, seed);
    best_of(grid, |gamma| cv_map(manifest, &folds, &ClassFeatures::Shared(features), gamma, softmax))
}

/// Recognition features of every video for `config`, with the temperature used.
pub fn prepare_features(
    manifest: &DatasetManifest,
    encoded: &[EncodedVideo],
    config: &ExperimentConfig,
) -> Result<(Vec<Vec<Vec<f64>>>, Option<f64>)> {
    config.validate()?;
    if encoded.len() != manifest.videos.len() {
        return Err(Error::DimensionMismatch {
            expected: manifest.videos.len(),
            got: encoded.len(),
        });
    }
    let prepared = prepare(manifest, encoded, config)?;
    let alpha = if weighted(&prepared) {
        Some(match config.alpha {
            AlphaChoice::Fixed(a) => a,
            AlphaChoice::Tuned => tune_alpha(manifest, encoded, &prepared, config)?,
        })
    } else {
        None
    };
    Ok((features_at(&prepared, encoded, config, alpha.unwrap_or(0.0))?, alpha))
}

/// Trains the recognition pipeline described by `config` on the training split
/// and reports per-class AP on the test split.
pub fn run_experiment(
    manifest: &DatasetManifest,
    encoded: &[EncodedVideo],
    config: &ExperimentConfig,
) -> Result<EvalReport> {
    let (sets, alpha) = prepare_features(manifest, encoded, config)?;
    let labels: Vec<usize> = manifest.videos.iter().map(|v| v.action_label).collect();
    let (train, test) = train_split(manifest);
    let curves = recognition_ap(
        &class_features(&sets),
        &labels,
        &train,
        &test,
        manifest.classes.len(),
        config.action_gamma,
        config.softmax,
    )?;
    let per_class_ap: Vec<f64> = curves.iter().map(|c| c.ap).collect();
    Ok(EvalReport {
        config: config.clone(),
        classes: manifest.classes.clone(),
        map: mean_average_precision(&per_class_ap),
        per_class_ap,
        alpha,
        curves,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LooResult {
    pub class: String,
    pub full_ap: f64,
    pub loo_ap: f64,
}

/// Non-action AP on the test videos of each class, for the classifier trained on
/// all classes and for the one trained without that class.
pub fn leave_one_out_study(
    manifest: &DatasetManifest,
    encoded: &[EncodedVideo],
    gamma: f64,
    seed: u64,
) -> Result<Vec<LooResult>> {
    let full = train_nonaction(manifest, encoded, TrainingMode::Generic, Some(gamma), seed)?;
    (0..manifest.classes.len())
        .into_par_iter()
        .map(|c| {
            let loo = train_nonaction(manifest, encoded, TrainingMode::LeaveOneOut(c), Some(gamma), seed)?;
            let on_class = |m: &LssvmModel| -> Result<f64> {
                let scores = score_shots(m, manifest, encoded, |v| v.split == Split::Test && v.action_label == c)?;
                eval_ap_at_k(&group_by_video(manifest, &scores), None)
            };
            Ok(LooResult {
                class: manifest.classes[c].clone(),
                full_ap: on_class(&full)?,
                loo_ap: on_class(&loo)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonActionReport {
    /// `(k, AP@k)`; `None` keeps every shot.
    pub ap_at_k: Vec<(Option<usize>, f64)>,
    pub curve: PrCurve,
}

/// Shot-level non-action detection quality of `classifier` on the test split.
pub fn nonaction_eval(
    manifest: &DatasetManifest,
    encoded: &[EncodedVideo],
    classifier: &LssvmModel,
    ks: &[Option<usize>],
) -> Result<NonActionReport> {
    let scores = score_shots(classifier, manifest, encoded, |v| v.split == Split::Test)?;
    let groups = group_by_video(manifest, &scores);
    let ap_at_k = ks
        .iter()
        .map(|&k| Ok((k, eval_ap_at_k(&groups, k)?)))
        .collect::<Result<_>>()?;
    let (s, l): (Vec<f64>, Vec<bool>) = groups.iter().flatten().copied().unzip();
    Ok(NonActionReport {
        ap_at_k,
        curve: average_precision(&s, &l)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticSpec};
    use crate::encoding::{encode_dataset, EncodingParams};

    fn small() -> (DatasetManifest, Vec<EncodedVideo>) {
        let spec = SyntheticSpec { n_videos: 30, n_classes: 3, ..SyntheticSpec::default() };
        let ds = generate_synthetic(&spec).unwrap();
        let params = EncodingParams { k: 3, sample: 4000, ..EncodingParams::default() };
        let (_, encoded) = encode_dataset(&ds.manifest, &ds.streams, &params).unwrap();
        (ds.manifest, encoded)
    }

    #[test]
    fn rejected_combinations() {
        let bad = ExperimentConfig { encoding: Encoding::Darwin, weighting: Weighting::Specific, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { encoding: Encoding::Darwin, fuse_dense: true, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { alpha: AlphaChoice::Fixed(-1.0), ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn every_mode_runs() {
        let (manifest, encoded) = small();
        for weighting in [Weighting::None, Weighting::Generic, Weighting::Specific] {
            let config = ExperimentConfig { weighting, ..Default::default() };
            let report = run_experiment(&manifest, &encoded, &config).unwrap();
            assert_eq!(report.per_class_ap.len(), 3);
            assert!((0.0..=1.0).contains(&report.map));
            assert_eq!(report.alpha.is_some(), weighting != Weighting::None);
        }
        for weighting in [Weighting::None, Weighting::Generic] {
            let config = ExperimentConfig {
                weighting,
                encoding: Encoding::Darwin,
                alpha: AlphaChoice::Tuned,
                ..Default::default()
            };
            let report = run_experiment(&manifest, &encoded, &config).unwrap();
            assert!(report.map.is_finite());
        }
    }

    #[test]
    fn zero_alpha_single_window_is_whole_video() {
        let (manifest, encoded) = small();
        let config = ExperimentConfig { alpha: AlphaChoice::Fixed(0.0), window: 10_000, stride: 10_000, ..Default::default() };
        let (weighted, _) = prepare_features(&manifest, &encoded, &config).unwrap();
        let (whole, _) =
            prepare_features(&manifest, &encoded, &ExperimentConfig { weighting: Weighting::None, ..config }).unwrap();
        for (a, b) in weighted[0].iter().zip(&whole[0]) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn leave_one_out_and_nonaction_reports() {
        let (manifest, encoded) = small();
        let loo = leave_one_out_study(&manifest, &encoded, 1.0, 0).unwrap();
        assert_eq!(loo.len(), 3);
        let clf = train_nonaction(&manifest, &encoded, TrainingMode::Generic, Some(1.0), 0).unwrap();
        let r = nonaction_eval(&manifest, &encoded, &clf, &[Some(1), None]).unwrap();
        assert_eq!(r.ap_at_k[1].1, r.curve.ap);
    }
}
