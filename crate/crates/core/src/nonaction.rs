//! Shot representation `[f_in, f_out, f_all]`, training-set assembly for the
//! generic, action-specific and leave-one-class-out non-action classifiers,
//! and shot scoring. Non-action is the positive class throughout.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{DatasetManifest, FrameSet, ShotLabel, Split, VideoRecord};
use crate::encoding::EncodedVideo;
use crate::error::{Error, Result};
use crate::eval::{average_precision, eval_ap_at_k};
use crate::models::{train_lssvm, LssvmModel};

/// Feature of a frame set inside its video: the set itself, its complement and
/// the whole video, each with every local and dense channel.
pub fn shot_feature(video: &EncodedVideo, frames: &FrameSet) -> Vec<f64> {
    let all = FrameSet::all(video.n_frames);
    let mut out = video.set_feature(frames, true);
    out.extend(video.set_feature(&frames.complement(video.n_frames), true));
    out.extend(video.set_feature(&all, true));
    out
}

/// [`shot_feature`] of shot `shot` of `record`.
pub fn shot_feature_for(record: &VideoRecord, video: &EncodedVideo, shot: usize) -> Result<Vec<f64>> {
    let s = record
        .shots
        .get(shot)
        .ok_or_else(|| Error::invalid(format!("video {} has no shot {shot}", record.video_id)))?;
    if s.end_frame > video.n_frames || s.start_frame == 0 {
        return Err(Error::invalid(format!(
            "shot [{}, {}] outside video {} of {} frames",
            s.start_frame, s.end_frame, record.video_id, video.n_frames
        )));
    }
    Ok(shot_feature(video, &s.frames()))
}

/// Which shots count as non-action, and which videos take part.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainingMode {
    Generic,
    /// Non-action means "does not contain this action class".
    Specific(usize),
    /// Generic labels with every video of this class removed.
    LeaveOneOut(usize),
}

/// A [`TrainingMode`] whose class is still a name, as written on a command line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TrainingModeSpec {
    Generic,
    Specific(String),
    LeaveOneOut(String),
}

impl FromStr for TrainingModeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('=') {
            None if s == "generic" => Ok(TrainingModeSpec::Generic),
            Some(("specific", c)) if !c.is_empty() => Ok(TrainingModeSpec::Specific(c.to_string())),
            Some(("loo", c)) if !c.is_empty() => Ok(TrainingModeSpec::LeaveOneOut(c.to_string())),
            _ => Err(Error::invalid(format!(
                "mode must be generic, specific=<class> or loo=<class>, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for TrainingModeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainingModeSpec::Generic => write!(f, "generic"),
            TrainingModeSpec::Specific(c) => write!(f, "specific={c}"),
            TrainingModeSpec::LeaveOneOut(c) => write!(f, "loo={c}"),
        }
    }
}

impl TrainingModeSpec {
    pub fn resolve(&self, manifest: &DatasetManifest) -> Result<TrainingMode> {
        Ok(match self {
            TrainingModeSpec::Generic => TrainingMode::Generic,
            TrainingModeSpec::Specific(c) => TrainingMode::Specific(manifest.class_index(c)?),
            TrainingModeSpec::LeaveOneOut(c) => TrainingMode::LeaveOneOut(manifest.class_index(c)?),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ShotRef {
    pub video: usize,
    pub shot: usize,
}

fn check_mode(manifest: &DatasetManifest, mode: TrainingMode) -> Result<()> {
    if let TrainingMode::Specific(c) | TrainingMode::LeaveOneOut(c) = mode {
        if c >= manifest.classes.len() {
            return Err(Error::UnknownClass(c.to_string()));
        }
    }
    Ok(())
}

/// Target of one shot under `mode`: `+1` non-action, `-1` otherwise, `None` when excluded.
fn shot_target(manifest: &DatasetManifest, r: ShotRef, mode: TrainingMode) -> Result<Option<f64>> {
    let video = &manifest.videos[r.video];
    if mode == TrainingMode::LeaveOneOut(video.action_label) {
        return Ok(None);
    }
    let non_action = match video.shots[r.shot].resolved_label {
        ShotLabel::Unresolved => {
            return Err(Error::UnresolvedLabel {
                video_id: video.video_id.clone(),
                shot: r.shot,
            })
        }
        ShotLabel::NonAction => true,
        ShotLabel::Action => matches!(mode, TrainingMode::Specific(c) if c != video.action_label),
    };
    Ok(Some(if non_action { 1.0 } else { -1.0 }))
}

/// Selects the shots of `split` used by `mode`, with `+1` for non-action and `-1` otherwise.
pub fn training_shots(manifest: &DatasetManifest, mode: TrainingMode, split: Split) -> Result<Vec<(ShotRef, f64)>> {
    check_mode(manifest, mode)?;
    let mut out = Vec::new();
    for (vi, video) in manifest.videos.iter().enumerate() {
        if video.split != split {
            continue;
        }
        for si in 0..video.shots.len() {
            let r = ShotRef { video: vi, shot: si };
            if let Some(y) = shot_target(manifest, r, mode)? {
                out.push((r, y));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct TrainingSet {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub shots: Vec<ShotRef>,
}

impl TrainingSet {
    /// Rows whose shot satisfies `keep`.
    pub fn subset(&self, keep: impl Fn(ShotRef) -> bool) -> TrainingSet {
        let idx: Vec<usize> = (0..self.shots.len()).filter(|&i| keep(self.shots[i])).collect();
        TrainingSet {
            x: self.x.select_rows(&idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            shots: idx.iter().map(|&i| self.shots[i]).collect(),
        }
    }

    /// The same shots relabelled, and filtered, for another mode.
    pub fn for_mode(&self, manifest: &DatasetManifest, mode: TrainingMode) -> Result<TrainingSet> {
        check_mode(manifest, mode)?;
        let mut idx = Vec::with_capacity(self.shots.len());
        let mut y = Vec::with_capacity(self.shots.len());
        for (i, &r) in self.shots.iter().enumerate() {
            if let Some(t) = shot_target(manifest, r, mode)? {
                idx.push(i);
                y.push(t);
            }
        }
        Ok(TrainingSet {
            x: self.x.select_rows(&idx),
            y,
            shots: idx.iter().map(|&i| self.shots[i]).collect(),
        })
    }
}

/// Shot features and labels for `mode` over the videos of `split`.
pub fn build_training_set(
    manifest: &DatasetManifest,
    encoded: &[EncodedVideo],
    mode: TrainingMode,
    split: Split,
) -> Result<TrainingSet> {
    let selected = training_shots(manifest, mode, split)?;
    let features: Vec<Vec<f64>> = selected
        .par_iter()
        .map(|(r, _)| shot_feature_for(&manifest.videos[r.video], &encoded[r.video], r.shot))
        .collect::<Result<_>>()?;
    let dim = features.first().map_or(0, Vec::len);
    Ok(TrainingSet {
        x: DMatrix::from_fn(features.len(), dim, |i, j| features[i][j]),
        y: selected.iter().map(|s| s.1).collect(),
        shots: selected.into_iter().map(|s| s.0).collect(),
    })
}

/// Trains the non-action classifier; `gamma = None` picks it on a held-out quarter
/// of the training videos from [`crate::models::gamma_grid`].
pub fn train_nonaction(
    manifest: &DatasetManifest,
    encoded: &[EncodedVideo],
    mode: TrainingMode,
    gamma: Option<f64>,
    seed: u64,
) -> Result<LssvmModel> {
    let set = build_training_set(manifest, encoded, mode, Split::Train)?;
    let gamma = match gamma {
        Some(g) => g,
        None => tune_gamma(&set, &crate::models::gamma_grid(), seed)?,
    };
    train_lssvm(&set.x, &set.y, gamma)
}

/// Validation-AP selection of `gamma`, splitting by video so shots of one video
/// never straddle the split.
pub fn tune_gamma(set: &TrainingSet, grid: &[f64], seed: u64) -> Result<f64> {
    let mut videos: Vec<usize> = set.shots.iter().map(|s| s.video).collect();
    videos.sort_unstable();
    videos.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    videos.shuffle(&mut rng);
    let held: std::collections::HashSet<usize> = videos[..videos.len().div_ceil(4)].iter().copied().collect();
    let (fit, val): (Vec<usize>, Vec<usize>) = (0..set.shots.len()).partition(|&i| !held.contains(&set.shots[i].video));
    let rows = |idx: &[usize]| DMatrix::from_fn(idx.len(), set.x.ncols(), |i, j| set.x[(idx[i], j)]);
    let (x_fit, x_val) = (rows(&fit), rows(&val));
    let y_fit: Vec<f64> = fit.iter().map(|&i| set.y[i]).collect();
    let y_val: Vec<bool> = val.iter().map(|&i| set.y[i] > 0.0).collect();
    let mut best = (f64::NEG_INFINITY, grid[0]);
    for &g in grid {
        let model = train_lssvm(&x_fit, &y_fit, g)?;
        let scores: Vec<f64> = (0..x_val.nrows())
            .map(|i| model.predict(&x_val.row(i).iter().copied().collect::<Vec<_>>()))
            .collect::<Result<_>>()?;
        let ap = average_precision(&scores, &y_val)?.ap;
        if ap > best.0 {
            best = (ap, g);
        }
    }
    Ok(best.1)
}

/// Raw decision value of a shot; higher means more likely non-action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonActionScore {
    pub shot: ShotRef,
    pub score: f64,
}

/// Scores every shot of the videos selected by `filter`.
pub fn score_shots(
    classifier: &LssvmModel,
    manifest: &DatasetManifest,
    encoded: &[EncodedVideo],
    filter: impl Fn(&VideoRecord) -> bool + Sync,
) -> Result<Vec<NonActionScore>> {
    let per_video: Vec<Vec<NonActionScore>> = manifest
        .videos
        .par_iter()
        .enumerate()
        .filter(|(_, v)| filter(v))
        .map(|(vi, video)| {
            (0..video.shots.len())
                .map(|si| {
                    let f = shot_feature_for(video, &encoded[vi], si)?;
                    Ok(NonActionScore {
                        shot: ShotRef { video: vi, shot: si },
                        score: classifier.predict(&f)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_video.into_iter().flatten().collect())
}

/// Groups scores by video with their ground-truth non-action flag, for [`eval_ap_at_k`].
pub fn group_by_video(manifest: &DatasetManifest, scores: &[NonActionScore]) -> Vec<Vec<(f64, bool)>> {
    let mut groups: Vec<Vec<(f64, bool)>> = Vec::new();
    let mut current = None;
    for s in scores {
        if current != Some(s.shot.video) {
            groups.push(Vec::new());
            current = Some(s.shot.video);
        }
        let non_action = manifest.videos[s.shot.video].shots[s.shot.shot].is_non_action();
        groups.last_mut().expect("pushed above").push((s.score, non_action));
    }
    groups
}

/// Shot-level non-action AP of `scores`, optionally limited to `k` shots per video.
pub fn nonaction_ap(manifest: &DatasetManifest, scores: &[NonActionScore], k: Option<usize>) -> Result<f64> {
    eval_ap_at_k(&group_by_video(manifest, scores), k)
}
