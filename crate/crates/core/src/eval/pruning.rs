use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_probability, mean_average_precision, recognition_ap, ClassFeatures};
use crate::dataset::{DatasetManifest, FrameSet, Split, VideoRecord};
use crate::encoding::{mean_pool, normalize, EncodedVideo, UnnormalizedFv};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruningOptions {
    pub repeats: usize,
    pub seed: u64,
    pub gamma: f64,
    pub include_dense: bool,
    /// Retrain the action classifiers on the pruned training videos of each repeat.
    pub retrain: bool,
    pub softmax: bool,
}

impl Default for PruningOptions {
    fn default() -> Self {
        PruningOptions {
            repeats: 20,
            seed: 0,
            gamma: 1.0,
            include_dense: false,
            retrain: true,
            softmax: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub p: f64,
    pub repeats: usize,
    pub map_mean: f64,
    /// Sample standard deviation over repeats.
    pub map_std: f64,
    pub maps: Vec<f64>,
}

/// Whole-video unnormalized vectors with the shots in `dropped` subtracted.
pub fn pruned_fv(video: &EncodedVideo, record: &VideoRecord, dropped: &[usize]) -> Result<Vec<UnnormalizedFv>> {
    let mut out = video.aggregate(&FrameSet::all(video.n_frames));
    for &s in dropped {
        let shot = record
            .shots
            .get(s)
            .ok_or_else(|| Error::invalid(format!("video {} has no shot {s}", record.video_id)))?;
        for (acc, part) in out.iter_mut().zip(video.aggregate(&shot.frames())) {
            acc.sub_assign(&part)?;
        }
    }
    Ok(out)
}

/// Uniform draws, one per shot of every video, for one repeat.
fn repeat_draws(manifest: &DatasetManifest, seed: u64, repeat: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(repeat as u64);
    manifest
        .videos
        .iter()
        .map(|v| v.shots.iter().map(|_| rng.random::<f64>()).collect())
        .collect()
}

fn video_feature(
    video: &EncodedVideo,
    record: &VideoRecord,
    draws: &[f64],
    p: f64,
    include_dense: bool,
) -> Result<Vec<f64>> {
    let dropped: Vec<usize> = record
        .shots
        .iter()
        .enumerate()
        .filter(|(i, s)| s.is_non_action() && draws[*i] < p)
        .map(|(i, _)| i)
        .collect();
    let mut out = Vec::with_capacity(video.feature_dim(include_dense));
    for fv in pruned_fv(video, record, &dropped)? {
        out.extend(normalize(&fv).values);
    }
    if include_dense {
        let kept = FrameSet::from_ranges(dropped.iter().map(|&i| {
            let s = &record.shots[i];
            (s.start_frame, s.end_frame)
        }))
        .complement(video.n_frames);
        for stream in &video.dense {
            out.extend(mean_pool(stream, &kept));
        }
    }
    Ok(out)
}

fn repeat_map(
    manifest: &DatasetManifest,
    encoded: &[EncodedVideo],
    p: f64,
    draws: &[Vec<f64>],
    opts: &PruningOptions,
) -> Result<f64> {
    let features: Vec<Vec<f64>> = manifest
        .videos
        .par_iter()
        .zip(encoded)
        .zip(draws)
        .map(|((record, video), d)| video_feature(video, record, d, p, opts.include_dense))
        .collect::<Result<_>>()?;
    let features = if opts.retrain {
        features
    } else {
        // Training videos keep all their shots; only the test videos are pruned.
        manifest
            .videos
            .iter()
            .zip(encoded)
            .zip(features)
            .map(|((record, video), f)| match record.split {
                Split::Train => video_feature(video, record, &[], 0.0, opts.include_dense),
                Split::Test => Ok(f),
            })
            .collect::<Result<_>>()?
    };
    let labels: Vec<usize> = manifest.videos.iter().map(|v| v.action_label).collect();
    let (train, test): (Vec<usize>, Vec<usize>) =
        (0..manifest.videos.len()).partition(|&i| manifest.videos[i].split == Split::Train);
    let aps = recognition_ap(
        &ClassFeatures::Shared(&features),
        &labels,
        &train,
        &test,
        manifest.classes.len(),
        opts.gamma,
        opts.softmax,
    )?;
    Ok(mean_average_precision(&aps.iter().map(|c| c.ap).collect::<Vec<_>>()))
}

/// Oracle pruning: each non-action shot is removed with probability `p`, video
/// vectors are rebuilt by subtraction and recognition mAP is measured.
///
/// Repeat `r` draws from the same random stream for every `p`, so the shots
/// removed at a smaller `p` are also removed at a larger one.
pub fn simulate_pruning(
    manifest: &DatasetManifest,
    encoded: &[EncodedVideo],
    p: f64,
    opts: &PruningOptions,
) -> Result<SweepResult> {
    check_probability(p)?;
    if opts.repeats == 0 {
        return Err(Error::invalid("repeats must be at least 1"));
    }
    if encoded.len() != manifest.videos.len() {
        return Err(Error::DimensionMismatch {
            expected: manifest.videos.len(),
            got: encoded.len(),
        });
    }
    let maps: Vec<f64> = (0..opts.repeats)
        .into_par_iter()
        .map(|r| repeat_map(manifest, encoded, p, &repeat_draws(manifest, opts.seed, r), opts))
        .collect::<Result<_>>()?;
    let mean = maps.iter().sum::<f64>() / maps.len() as f64;
    let std = if maps.len() > 1 {
        (maps.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (maps.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(SweepResult {
        p,
        repeats: opts.repeats,
        map_mean: mean,
        map_std: std,
        maps,
    })
}

pub fn pruning_sweep(
    manifest: &DatasetManifest,
    encoded: &[EncodedVideo],
    grid: &[f64],
    opts: &PruningOptions,
) -> Result<Vec<SweepResult>> {
    grid.iter().map(|&p| simulate_pruning(manifest, encoded, p, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticSpec};
    use crate::encoding::{encode_dataset, EncodingParams};

    fn small() -> (DatasetManifest, Vec<EncodedVideo>) {
        let spec = SyntheticSpec {
            n_videos: 36,
            n_classes: 3,
            dense_channels: 0,
            ..SyntheticSpec::default()
        };
        let ds = generate_synthetic(&spec).unwrap();
        let params = EncodingParams { k: 3, sample: 4000, ..EncodingParams::default() };
        let (_, encoded) = encode_dataset(&ds.manifest, &ds.streams, &params).unwrap();
        (ds.manifest, encoded)
    }

    #[test]
    fn subtraction_matches_reencoding() {
        let (manifest, encoded) = small();
        for (record, video) in manifest.videos.iter().zip(&encoded).take(10) {
            let dropped: Vec<usize> = (0..record.shots.len()).filter(|&i| record.shots[i].is_non_action()).collect();
            let pruned = pruned_fv(video, record, &dropped).unwrap();
            let kept = FrameSet::from_ranges(dropped.iter().map(|&i| (record.shots[i].start_frame, record.shots[i].end_frame)))
                .complement(video.n_frames);
            for (a, b) in pruned.iter().zip(video.aggregate(&kept)) {
                for (x, y) in a.values.iter().zip(&b.values) {
                    assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn zero_probability_has_no_spread_and_is_deterministic() {
        let (manifest, encoded) = small();
        let opts = PruningOptions { repeats: 3, ..PruningOptions::default() };
        let r = simulate_pruning(&manifest, &encoded, 0.0, &opts).unwrap();
        assert_eq!(r.map_std, 0.0);
        assert!(r.maps.iter().all(|&m| m == r.maps[0]));
        let a = simulate_pruning(&manifest, &encoded, 0.5, &opts).unwrap();
        let b = simulate_pruning(&manifest, &encoded, 0.5, &opts).unwrap();
        assert_eq!(a, b);
        assert!(simulate_pruning(&manifest, &encoded, 1.5, &opts).is_err());
        assert!(simulate_pruning(&manifest, &encoded, -0.1, &opts).is_err());
    }

    #[test]
    fn draws_are_shared_across_probabilities() {
        let (manifest, _) = small();
        assert_eq!(repeat_draws(&manifest, 4, 2), repeat_draws(&manifest, 4, 2));
        assert_ne!(repeat_draws(&manifest, 4, 2), repeat_draws(&manifest, 4, 3));
    }
}
