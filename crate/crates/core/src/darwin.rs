//! Rank-pooling video encodings: regress cumulative (optionally weighted) sums
//! of per-frame features onto cumulative weight, and keep the regressor.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::encoding::{l2_normalize, normalize, EncodedVideo};
use crate::error::{Error, Result};
use crate::models::{train_svr, LssvmModel, SvrModel};
use crate::pooling::{make_segments, segment_video, unnormalized_weights, PoolingParams};

pub const DEFAULT_LAMBDA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DarwinVariant {
    Plain,
    Weighted,
}

impl std::str::FromStr for DarwinVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(DarwinVariant::Plain),
            "weighted" => Ok(DarwinVariant::Weighted),
            _ => Err(Error::invalid(format!("variant must be plain or weighted, got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DarwinFeature {
    pub u: Vec<f64>,
    pub variant: DarwinVariant,
}

impl DarwinFeature {
    /// `u` scaled to unit length, the form given to the action classifiers.
    pub fn normalized(&self) -> Vec<f64> {
        let mut u = self.u.clone();
        l2_normalize(&mut u);
        u
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarwinParams {
    pub variant: DarwinVariant,
    pub lambda: f64,
    pub pooling: PoolingParams,
    /// Use one pooled feature per window instead of one per frame.
    pub per_second: bool,
}

impl Default for DarwinParams {
    fn default() -> Self {
        DarwinParams {
            variant: DarwinVariant::Plain,
            lambda: DEFAULT_LAMBDA,
            pooling: PoolingParams::default(),
            per_second: false,
        }
    }
}

/// Regression pairs `(sum_{i<=k} w_i phi_i, sum_{i<=k} w_i)` for `k = 1..N`.
pub fn cumulative_pairs(features: &[Vec<f64>], weights: Option<&[f64]>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = features.len();
    if n == 0 {
        return Err(Error::invalid("rank pooling needs at least one frame"));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: w.len() });
        }
        if let Some(bad) = w.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::invalid(format!("frame weights must be positive, got {bad}")));
        }
    }
    let dim = features[0].len();
    let mut x = DMatrix::zeros(n, dim);
    let mut t = Vec::with_capacity(n);
    let mut acc = vec![0.0; dim];
    let mut total = 0.0;
    for (k, phi) in features.iter().enumerate() {
        if phi.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: phi.len() });
        }
        let w = weights.map_or(1.0, |w| w[k]);
        for (a, p) in acc.iter_mut().zip(phi) {
            *a += w * p;
        }
        total += w;
        for (j, a) in acc.iter().enumerate() {
            x[(k, j)] = *a;
        }
        t.push(total);
    }
    Ok((x, t))
}

/// Fits the regressor on [`cumulative_pairs`]; without weights every frame counts 1.
pub fn darwin_encode(features: &[Vec<f64>], weights: Option<&[f64]>, lambda: f64) -> Result<DarwinFeature> {
    let (x, t) = cumulative_pairs(features, weights)?;
    let SvrModel { weights: u, .. } = train_svr(&x, &t, lambda)?;
    Ok(DarwinFeature {
        u,
        variant: if weights.is_some() {
            DarwinVariant::Weighted
        } else {
            DarwinVariant::Plain
        },
    })
}

/// Per-frame weights from window scores: each frame takes the mean softmax
/// numerator of the windows covering it, rescaled to average 1.
pub fn frame_weights(n_frames: u32, segments: &[(u32, u32)], scores: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if segments.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: segments.len(),
            got: scores.len(),
        });
    }
    let seg_w = unnormalized_weights(scores, alpha)?;
    let mut sum = vec![0.0; n_frames as usize];
    let mut count = vec![0u32; n_frames as usize];
    for (&(start, end), &w) in segments.iter().zip(&seg_w) {
        for f in start..=end {
            sum[(f - 1) as usize] += w;
            count[(f - 1) as usize] += 1;
        }
    }
    let mut out: Vec<f64> = sum
        .iter()
        .zip(&count)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    rescale_to_unit_mean(&mut out)?;
    Ok(out)
}

fn rescale_to_unit_mean(w: &mut [f64]) -> Result<()> {
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    if mean == 1.0 {
        return Ok(());
    }
    // Floor keeps weights positive when alpha is infinite.
    let floor = f64::MIN_POSITIVE.sqrt();
    w.iter_mut().for_each(|x| *x = (*x / mean).max(floor));
    Ok(())
}

/// Frame-level features: power and L2 normalized per-frame Fisher Vectors of
/// every local channel, zero for frames without descriptors.
pub fn frame_features(video: &EncodedVideo) -> Vec<Vec<f64>> {
    (1..=video.n_frames)
        .map(|f| {
            let mut out = Vec::with_capacity(video.fv_dim());
            for ch in &video.fv {
                out.extend(normalize(&ch.frame(f)).values);
            }
            out
        })
        .collect()
}

/// Rank-pooled representation of one video.
///
/// The weighted variant derives frame or window weights from the non-action
/// scores of the sliding windows; the plain variant ignores `classifier`.
pub fn darwin_video_feature(
    video: &EncodedVideo,
    classifier: Option<&LssvmModel>,
    params: &DarwinParams,
) -> Result<DarwinFeature> {
    if params.pooling.fuse_dense {
        return Err(Error::invalid("rank pooling uses local-channel features only"));
    }
    let weighted = params.variant == DarwinVariant::Weighted;
    let classifier = match (weighted, classifier) {
        (true, None) => return Err(Error::invalid("weighted rank pooling needs a non-action classifier")),
        (true, Some(c)) => Some(c),
        (false, _) => None,
    };
    let p = &params.pooling;
    if params.per_second {
        let ranges = make_segments(video.n_frames, p.window, p.stride)?;
        let segments = match classifier {
            Some(c) => segment_video(video, c, p)?,
            None => ranges
                .iter()
                .map(|&(start, end)| crate::pooling::Segment {
                    start_frame: start,
                    end_frame: end,
                    features: video.set_feature(&crate::dataset::FrameSet::range(start, end), false),
                    score: 0.0,
                })
                .collect(),
        };
        let features: Vec<Vec<f64>> = segments.iter().map(|s| s.features.clone()).collect();
        if !weighted {
            return darwin_encode(&features, None, params.lambda);
        }
        let scores: Vec<f64> = segments.iter().map(|s| s.score).collect();
        let mut w = unnormalized_weights(&scores, p.alpha)?;
        rescale_to_unit_mean(&mut w)?;
        return darwin_encode(&features, Some(&w), params.lambda);
    }
    let features = frame_features(video);
    match classifier {
        None => darwin_encode(&features, None, params.lambda),
        Some(c) => {
            let segments = segment_video(video, c, p)?;
            let ranges: Vec<(u32, u32)> = segments.iter().map(|s| (s.start_frame, s.end_frame)).collect();
            let scores: Vec<f64> = segments.iter().map(|s| s.score).collect();
            let w = frame_weights(video.n_frames, &ranges, &scores, p.alpha)?;
            darwin_encode(&features, Some(&w), params.lambda)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn normal_equation_oracle(features: &[Vec<f64>], w: &[f64], lambda: f64) -> Vec<f64> {
        // Independent path: build X^T X and X^T t by explicit sums and solve by Gauss-Jordan.
        let d = features[0].len();
        let mut rows = Vec::new();
        let mut acc = vec![0.0; d];
        let mut tot = 0.0;
        for (phi, &wi) in features.iter().zip(w) {
            for j in 0..d {
                acc[j] += wi * phi[j];
            }
            tot += wi;
            rows.push((acc.clone(), tot));
        }
        let mut a = vec![vec![0.0; d + 1]; d];
        for (x, t) in &rows {
            for i in 0..d {
                for j in 0..d {
                    a[i][j] += x[i] * x[j];
                }
                a[i][d] += x[i] * t;
            }
        }
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += lambda;
        }
        for c in 0..d {
            let p = (c..d).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            let piv = a[c][c];
            for v in a[c].iter_mut() {
                *v /= piv;
            }
            for r in 0..d {
                if r != c {
                    let f = a[r][c];
                    let pivot_row = a[c].clone();
                    for (v, pv) in a[r].iter_mut().zip(pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
        a.iter().map(|row| row[d]).collect()
    }

    #[test]
    fn constant_sequence_recovers_inverse() {
        let c = 4.0;
        let f = vec![vec![c]; 30];
        let u = darwin_encode(&f, None, 1e-10).unwrap().u;
        assert!((u[0] - 1.0 / c).abs() < 1e-9);
    }

    #[test]
    fn single_frame_pair() {
        let f = vec![vec![3.0, 4.0]];
        let (x, t) = cumulative_pairs(&f, Some(&[2.0])).unwrap();
        assert_eq!(x.row(0).iter().copied().collect::<Vec<_>>(), vec![6.0, 8.0]);
        assert_eq!(t, vec![2.0]);
        let u = darwin_encode(&f, Some(&[2.0]), 0.5).unwrap().u;
        // u = x t / (|x|^2 + lambda)
        assert!((u[0] - 12.0 / 100.5).abs() < 1e-14 && (u[1] - 16.0 / 100.5).abs() < 1e-14);
    }

    #[test]
    fn order_matters() {
        let f: Vec<Vec<f64>> = (1..=10).map(|i| vec![i as f64, 0.0]).collect();
        let mut r = f.clone();
        r.reverse();
        let a = darwin_encode(&f, None, 1e-3).unwrap().u;
        let b = darwin_encode(&r, None, 1e-3).unwrap().u;
        assert!((a[0] - b[0]).abs() > 1e-3);
    }

    #[test]
    fn unit_weights_equal_plain() {
        let f: Vec<Vec<f64>> = (0..12).map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos(), 0.1]).collect();
        let plain = darwin_encode(&f, None, 0.7).unwrap().u;
        let unit = darwin_encode(&f, Some(&[1.0; 12]), 0.7).unwrap().u;
        assert_eq!(plain, unit);
    }

    #[test]
    fn uniform_scaling_with_scaled_lambda() {
        // Weights c turn (X, t) into (cX, ct); scaling lambda by c^2 leaves u unchanged.
        let f: Vec<Vec<f64>> = (0..9).map(|i| vec![(i as f64 * 0.7).sin(), 1.0 + i as f64 * 0.1]).collect();
        let n = f.len() as f64;
        let plain = darwin_encode(&f, None, 0.3).unwrap().u;
        let scaled = darwin_encode(&f, Some(&vec![1.0 / n; f.len()]), 0.3 / (n * n)).unwrap().u;
        for (a, b) in plain.iter().zip(&scaled) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn frame_weight_broadcast() {
        let w = frame_weights(6, &[(1, 3), (4, 6)], &[0.0, 2f64.ln()], 1.0).unwrap();
        // numerators 1 and 0.5, mean 0.75
        for (a, b) in w.iter().zip([4.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(frame_weights(6, &[(1, 3), (4, 6)], &[5.0, -1.0], 0.0).unwrap(), vec![1.0; 6]);
        let inf = frame_weights(4, &[(1, 2), (3, 4)], &[1.0, 0.0], f64::INFINITY).unwrap();
        assert!(inf.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn rejects_bad_weights() {
        let f = vec![vec![1.0]; 3];
        assert!(darwin_encode(&f, Some(&[1.0, 0.0, 1.0]), 1.0).is_err());
        assert!(darwin_encode(&f, Some(&[1.0]), 1.0).is_err());
        assert!(darwin_encode(&[], None, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn matches_normal_equations_and_is_stationary(
            rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..15),
            wseed in prop::collection::vec(0.1f64..3.0, 15),
            lambda in 0.01f64..10.0,
        ) {
            let w = &wseed[..rows.len()];
            let u = darwin_encode(&rows, Some(w), lambda).unwrap().u;
            let oracle = normal_equation_oracle(&rows, w, lambda);
            for (a, b) in u.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()));
            }
            let (x, t) = cumulative_pairs(&rows, Some(w)).unwrap();
            let g = SvrModel { weights: u, lambda }.gradient(&x, &t);
            prop_assert!(g.iter().all(|v| v.abs() < 1e-8));
            for k in 1..rows.len() {
                for j in 0..3 {
                    prop_assert_eq!(x[(k, j)], x[(k - 1, j)] + w[k] * rows[k][j]);
                }
            }
        }
    }
}
