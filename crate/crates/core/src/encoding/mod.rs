//! PCA, diagonal GMM, frame-wise Fisher Vectors and dense-channel pooling.

mod dense;
mod fisher;
mod gmm;
mod pca;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{ChannelKind, DatasetManifest, FrameFeatureStream, FrameSet, Split};
use crate::error::{Error, Result};

pub use dense::mean_pool;
pub use fisher::{aggregate, encode_frame, fv_dim, normalize, NormalizedFv, UnnormalizedFv};
pub use gmm::{fit_gmm, fit_gmm_with, GmmFit, GmmModel, GmmOptions, RELATIVE_VARIANCE_FLOOR, WEIGHT_FLOOR};
pub use pca::{default_pca_dim, fit_pca, PcaModel};

pub(crate) use fisher::l2_normalize;

/// Descriptors per channel used to fit the codebook by default.
pub const DEFAULT_SAMPLE: usize = 1_000_000;
pub const DEFAULT_K: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct EncodingParams {
    pub k: usize,
    /// Post-PCA dimension; `None` halves the input dimension.
    pub pca_dim: Option<usize>,
    pub sample: usize,
    pub seed: u64,
    pub whiten: bool,
}

impl Default for EncodingParams {
    fn default() -> Self {
        EncodingParams {
            k: DEFAULT_K,
            pca_dim: None,
            sample: DEFAULT_SAMPLE,
            seed: 0,
            whiten: false,
        }
    }
}

/// PCA + GMM pair for one local-descriptor channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelCodebook {
    pub channel: String,
    pub pca: PcaModel,
    pub gmm: GmmModel,
}

impl ChannelCodebook {
    pub fn fv_dim(&self) -> usize {
        fv_dim(self.gmm.dim(), self.gmm.k())
    }

    /// Encodes every frame that carries at least one descriptor.
    pub fn encode_stream(&self, stream: &FrameFeatureStream) -> Result<FrameFvs> {
        if stream.dim != self.pca.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.pca.input_dim(),
                got: stream.dim,
            });
        }
        if self.pca.output_dim() != self.gmm.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.gmm.dim(),
                got: self.pca.output_dim(),
            });
        }
        let mut by_frame: BTreeMap<u32, Vec<Vec<f64>>> = BTreeMap::new();
        for (frame, row) in stream.rows() {
            by_frame.entry(frame).or_default().push(self.pca.project_f32(row)?);
        }
        let mut out = FrameFvs::new(self.fv_dim());
        for (frame, descriptors) in by_frame {
            let fv = encode_frame(&descriptors, &self.gmm)?;
            out.push(frame, fv);
        }
        Ok(out)
    }
}

/// Sparse sequence of per-frame unnormalized Fisher Vectors, sorted by frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameFvs {
    pub dim: usize,
    pub frames: Vec<u32>,
    pub values: Vec<f64>,
    pub counts: Vec<usize>,
}

impl FrameFvs {
    pub fn new(dim: usize) -> Self {
        FrameFvs {
            dim,
            frames: Vec::new(),
            values: Vec::new(),
            counts: Vec::new(),
        }
    }

    /// Appends the vector of `frame`, which must come after every stored frame.
    pub fn push(&mut self, frame: u32, fv: UnnormalizedFv) {
        assert_eq!(fv.dim(), self.dim);
        assert!(self.frames.last().is_none_or(|&f| f < frame), "frames must be increasing");
        self.frames.push(frame);
        self.values.extend_from_slice(&fv.values);
        self.counts.push(fv.support_count);
    }

    pub fn frame_values(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Vector of a single frame (zero when the frame has no descriptors).
    pub fn frame(&self, frame: u32) -> UnnormalizedFv {
        match self.frames.binary_search(&frame) {
            Ok(i) => UnnormalizedFv {
                values: self.frame_values(i).to_vec(),
                support_count: self.counts[i],
            },
            Err(_) => UnnormalizedFv::zeros(self.dim),
        }
    }

    /// Sum over the frames of `set`, accumulated in frame order.
    pub fn aggregate(&self, set: &FrameSet) -> UnnormalizedFv {
        let mut out = UnnormalizedFv::zeros(self.dim);
        for &(s, e) in set.ranges() {
            let lo = self.frames.partition_point(|&f| f < s);
            let hi = self.frames.partition_point(|&f| f <= e);
            for i in lo..hi {
                out.add_slice(self.frame_values(i), self.counts[i]).expect("same dim");
            }
        }
        out
    }
}

/// All channels of one video, ready for feature computation.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedVideo {
    pub n_frames: u32,
    /// One entry per local channel, in codebook order.
    pub fv: Vec<FrameFvs>,
    /// Dense channels in name order.
    pub dense: Vec<FrameFeatureStream>,
}

impl EncodedVideo {
    pub fn fv_dim(&self) -> usize {
        self.fv.iter().map(|f| f.dim).sum()
    }

    pub fn dense_dim(&self) -> usize {
        self.dense.iter().map(|d| d.dim).sum()
    }

    pub fn feature_dim(&self, include_dense: bool) -> usize {
        self.fv_dim() + if include_dense { self.dense_dim() } else { 0 }
    }

    /// Unnormalized vectors of every local channel over `frames`.
    pub fn aggregate(&self, frames: &FrameSet) -> Vec<UnnormalizedFv> {
        self.fv.iter().map(|f| f.aggregate(frames)).collect()
    }

    /// Concatenated power+L2 normalized Fisher Vectors over `frames`, followed by
    /// the L2-normalized dense means when `include_dense` is set.
    pub fn set_feature(&self, frames: &FrameSet, include_dense: bool) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.feature_dim(include_dense));
        for fv in self.aggregate(frames) {
            out.extend(normalize(&fv).values);
        }
        if include_dense {
            for stream in &self.dense {
                out.extend(mean_pool(stream, frames));
            }
        }
        out
    }
}

/// Stacks up to `sample` randomly chosen training-split descriptors of `channel`.
pub fn sample_descriptors(
    manifest: &DatasetManifest,
    streams: &[BTreeMap<String, FrameFeatureStream>],
    channel: &str,
    sample: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let mut rows: Vec<&[f32]> = Vec::new();
    let mut dim = None;
    for (video, s) in manifest.videos.iter().zip(streams) {
        if video.split != Split::Train {
            continue;
        }
        if let Some(stream) = s.get(channel) {
            if *dim.get_or_insert(stream.dim) != stream.dim {
                return Err(Error::DimensionMismatch {
                    expected: dim.unwrap(),
                    got: stream.dim,
                });
            }
            rows.extend((0..stream.n_rows()).map(|i| stream.row(i)));
        }
    }
    let dim = dim.ok_or_else(|| Error::invalid(format!("no training descriptors for channel {channel}")))?;
    let chosen: Vec<usize> = if rows.len() > sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, rows.len(), sample).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..rows.len()).collect()
    };
    Ok(DMatrix::from_fn(chosen.len(), dim, |i, j| rows[chosen[i]][j] as f64))
}

/// Fits PCA then a GMM on the projected samples.
pub fn fit_codebook(channel: &str, samples: &DMatrix<f64>, params: &EncodingParams) -> Result<ChannelCodebook> {
    let d = params.pca_dim.unwrap_or_else(|| default_pca_dim(samples.ncols()));
    let pca = fit_pca(samples, d, params.whiten)?;
    let projected = project_rows(&pca, samples);
    let gmm = fit_gmm(&projected, params.k, params.seed)?;
    Ok(ChannelCodebook {
        channel: channel.to_string(),
        pca,
        gmm,
    })
}

pub fn project_rows(pca: &PcaModel, samples: &DMatrix<f64>) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..samples.nrows())
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = samples.row(i).iter().copied().collect();
            pca.project(&row).expect("dimension checked by fit")
        })
        .collect();
    DMatrix::from_fn(rows.len(), pca.output_dim(), |i, j| rows[i][j])
}

/// Encodes one video's streams with the given codebooks.
pub fn encode_video(
    n_frames: u32,
    streams: &BTreeMap<String, FrameFeatureStream>,
    codebooks: &[ChannelCodebook],
) -> Result<EncodedVideo> {
    let fv = codebooks
        .iter()
        .map(|cb| {
            let stream = streams
                .get(&cb.channel)
                .ok_or_else(|| Error::invalid(format!("missing channel {}", cb.channel)))?;
            cb.encode_stream(stream)
        })
        .collect::<Result<Vec<_>>>()?;
    let dense = streams
        .values()
        .filter(|s| s.kind == ChannelKind::Dense)
        .cloned()
        .collect();
    Ok(EncodedVideo { n_frames, fv, dense })
}

/// Fits one codebook per local channel on training videos, then encodes every video.
pub fn encode_dataset(
    manifest: &DatasetManifest,
    streams: &[BTreeMap<String, FrameFeatureStream>],
    params: &EncodingParams,
) -> Result<(Vec<ChannelCodebook>, Vec<EncodedVideo>)> {
    let codebooks = manifest
        .local_channels()
        .iter()
        .map(|ch| {
            let samples = sample_descriptors(manifest, streams, ch, params.sample, params.seed)?;
            fit_codebook(ch, &samples, params)
        })
        .collect::<Result<Vec<_>>>()?;
    let videos = manifest
        .videos
        .par_iter()
        .zip(streams)
        .map(|(v, s)| encode_video(v.n_frames, s, &codebooks))
        .collect::<Result<Vec<_>>>()?;
    Ok((codebooks, videos))
}
