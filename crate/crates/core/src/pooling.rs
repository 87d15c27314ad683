//! Sliding-window segments and softmax-weighted pooling of segment features.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FrameSet;
use crate::encoding::EncodedVideo;
use crate::error::{Error, Result};
use crate::models::LssvmModel;
use crate::nonaction::shot_feature;

pub const DEFAULT_WINDOW: u32 = 25;
/// Candidate values searched when the pooling temperature is tuned.
pub const ALPHA_GRID: [f64; 6] = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolingParams {
    pub window: u32,
    pub stride: u32,
    pub alpha: f64,
    pub fuse_dense: bool,
}

impl Default for PoolingParams {
    fn default() -> Self {
        PoolingParams {
            window: DEFAULT_WINDOW,
            stride: DEFAULT_WINDOW,
            alpha: 1.0,
            fuse_dense: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub start_frame: u32,
    pub end_frame: u32,
    pub features: Vec<f64>,
    /// Non-action score; higher means more likely non-action.
    pub score: f64,
}

impl Segment {
    pub fn frames(&self) -> FrameSet {
        FrameSet::range(self.start_frame, self.end_frame)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PooledFeature {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Frame ranges of the sliding windows over `[1, n_frames]`.
///
/// A trailing window shorter than half of `window` is merged into the one before it.
///
/// ```
/// use segment_purify::pooling::make_segments;
/// assert_eq!(make_segments(60, 25, 25).unwrap(), vec![(1, 25), (26, 60)]);
/// assert_eq!(make_segments(10, 25, 25).unwrap(), vec![(1, 10)]);
/// ```
pub fn make_segments(n_frames: u32, window: u32, stride: u32) -> Result<Vec<(u32, u32)>> {
    if n_frames == 0 {
        return Err(Error::invalid("video has no frames"));
    }
    if window == 0 || stride == 0 {
        return Err(Error::invalid("window and stride must be at least 1"));
    }
    if stride > window {
        return Err(Error::invalid(format!(
            "stride {stride} larger than window {window} leaves frames uncovered"
        )));
    }
    let mut out: Vec<(u32, u32)> = Vec::new();
    let mut start = 1u32;
    while start + window - 1 <= n_frames {
        out.push((start, start + window - 1));
        start += stride;
    }
    let covered = out.last().map_or(0, |s| s.1);
    if covered < n_frames {
        let len = n_frames - start + 1;
        match out.last_mut() {
            Some(last) if 2 * len < window => last.1 = n_frames,
            _ => out.push((start, n_frames)),
        }
    }
    Ok(out)
}

/// Softmax weights `exp(-alpha s_i) / sum_j exp(-alpha s_j)`.
///
/// `alpha = inf` puts all weight on the lowest score, the earliest one on ties.
pub fn softmax_weights(scores: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let mut w = unnormalized_weights(scores, alpha)?;
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// Softmax numerators shifted so the lowest score gets exactly 1.
pub(crate) fn unnormalized_weights(scores: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::invalid("no segments to weight"));
    }
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::invalid(format!("alpha must be non-negative, got {alpha}")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("segment scores must be finite"));
    }
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    if alpha.is_infinite() {
        let first = scores.iter().position(|&s| s == min).expect("min is attained");
        return Ok((0..scores.len()).map(|i| if i == first { 1.0 } else { 0.0 }).collect());
    }
    Ok(scores.iter().map(|&s| (-alpha * (s - min)).exp()).collect())
}

/// Convex combination of segment features under [`softmax_weights`].
pub fn weighted_pool(features: &[Vec<f64>], scores: &[f64], alpha: f64) -> Result<PooledFeature> {
    if features.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: scores.len(),
        });
    }
    let weights = softmax_weights(scores, alpha)?;
    let dim = features[0].len();
    let mut values = vec![0.0; dim];
    for (f, &w) in features.iter().zip(&weights) {
        if f.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: f.len() });
        }
        if w == 0.0 {
            continue;
        }
        values.iter_mut().zip(f).for_each(|(v, x)| *v += w * x);
    }
    Ok(PooledFeature { values, weights })
}

/// Splits a video into windows, each with its pooled feature and non-action score.
pub fn segment_video(
    video: &EncodedVideo,
    classifier: &LssvmModel,
    params: &PoolingParams,
) -> Result<Vec<Segment>> {
    make_segments(video.n_frames, params.window, params.stride)?
        .into_iter()
        .map(|(start, end)| {
            let frames = FrameSet::range(start, end);
            Ok(Segment {
                start_frame: start,
                end_frame: end,
                features: video.set_feature(&frames, params.fuse_dense),
                score: classifier.predict(&shot_feature(video, &frames))?,
            })
        })
        .collect()
}

/// Pools already scored segments.
pub fn pool_segments(segments: &[Segment], alpha: f64) -> Result<PooledFeature> {
    let features: Vec<Vec<f64>> = segments.iter().map(|s| s.features.clone()).collect();
    let scores: Vec<f64> = segments.iter().map(|s| s.score).collect();
    weighted_pool(&features, &scores, alpha)
}

/// Video-level recognition feature: segment, score, pool.
pub fn video_feature(video: &EncodedVideo, classifier: &LssvmModel, params: &PoolingParams) -> Result<PooledFeature> {
    pool_segments(&segment_video(video, classifier, params)?, params.alpha)
}

/// [`segment_video`] over many videos in parallel.
pub fn segment_videos(
    videos: &[EncodedVideo],
    classifier: &LssvmModel,
    params: &PoolingParams,
) -> Result<Vec<Vec<Segment>>> {
    videos.par_iter().map(|v| segment_video(v, classifier, params)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tiling_examples() {
        assert_eq!(make_segments(50, 25, 25).unwrap(), vec![(1, 25), (26, 50)]);
        assert_eq!(make_segments(60, 25, 25).unwrap(), vec![(1, 25), (26, 60)]);
        assert_eq!(make_segments(25, 25, 25).unwrap(), vec![(1, 25)]);
        assert_eq!(make_segments(63, 25, 25).unwrap(), vec![(1, 25), (26, 50), (51, 63)]);
        assert_eq!(make_segments(62, 25, 25).unwrap(), vec![(1, 25), (26, 62)]);
        assert_eq!(
            make_segments(60, 25, 10).unwrap(),
            vec![(1, 25), (11, 35), (21, 45), (31, 55), (41, 60)]
        );
        assert!(make_segments(0, 25, 25).is_err());
        assert!(make_segments(10, 0, 1).is_err());
        assert!(make_segments(10, 5, 6).is_err());
    }

    #[test]
    fn weight_examples() {
        let w = softmax_weights(&[0.0, 3f64.ln()], 1.0).unwrap();
        assert!((w[0] - 0.75).abs() < 1e-15 && (w[1] - 0.25).abs() < 1e-15);
        assert_eq!(softmax_weights(&[1.0, 5.0, -2.0], 0.0).unwrap(), vec![1.0 / 3.0; 3]);
        assert_eq!(softmax_weights(&[2.0, 1.0, 1.0], f64::INFINITY).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(softmax_weights(&[0.0], -1.0).is_err());
        assert!(softmax_weights(&[f64::NAN], 1.0).is_err());
        assert!(softmax_weights(&[], 1.0).is_err());
    }

    #[test]
    fn large_alpha_approaches_min() {
        let w = softmax_weights(&[0.3, 0.1, 0.2], 1e6).unwrap();
        assert!(w[1] > 1.0 - 1e-6);
    }

    #[test]
    fn identical_segments_are_a_fixed_point() {
        let f = vec![vec![0.5, -1.0, 2.0]; 4];
        for alpha in [0.0, 1.0, 100.0, f64::INFINITY] {
            let p = weighted_pool(&f, &[3.0, -1.0, 0.5, 2.0], alpha).unwrap();
            for (a, b) in p.values.iter().zip(&f[0]) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    proptest! {
        #[test]
        fn segments_cover_video(n in 1u32..400, window in 1u32..40, stride_frac in 0.05f64..=1.0) {
            let stride = ((window as f64 * stride_frac).ceil() as u32).clamp(1, window);
            let segs = make_segments(n, window, stride).unwrap();
            prop_assert_eq!(segs[0].0, 1);
            prop_assert_eq!(segs.last().unwrap().1, n);
            for pair in segs.windows(2) {
                prop_assert!(pair[1].0 <= pair[0].1 + 1);
                prop_assert!(pair[1].0 > pair[0].0);
            }
            for s in &segs[..segs.len() - 1] {
                prop_assert!(s.1 - s.0 + 1 >= window);
            }
        }

        #[test]
        fn weights_are_a_shift_invariant_distribution(
            scores in prop::collection::vec(-50.0f64..50.0, 1..20),
            alpha in 0.0f64..20.0,
            shift in -100.0f64..100.0,
        ) {
            let w = softmax_weights(&scores, alpha).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let w2 = softmax_weights(&shifted, alpha).unwrap();
            for (a, b) in w.iter().zip(&w2) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            if alpha > 0.0 {
                for i in 0..scores.len() {
                    for j in 0..scores.len() {
                        if scores[i] < scores[j] && w[j] > 0.0 {
                            prop_assert!(w[i] >= w[j]);
                        }
                    }
                }
            }
        }

        #[test]
        fn pooled_feature_stays_in_hull(
            rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..8),
            alpha in 0.0f64..10.0,
            seed in 0u64..1000,
        ) {
            let scores: Vec<f64> = (0..rows.len()).map(|i| ((i as u64 * 7919 + seed) % 13) as f64 / 3.0).collect();
            let p = weighted_pool(&rows, &scores, alpha).unwrap();
            for j in 0..3 {
                let lo = rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
                let hi = rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(p.values[j] >= lo - 1e-12 && p.values[j] <= hi + 1e-12);
            }
        }
    }
}
