//! Synthetic datasets with planted action structure.
//!
//! Every channel has a shared "actionness" prototype, one prototype per class
//! and isotropic Gaussian noise. Action frames of class `c` sit at
//! `signal * (actionness * a + class[c])`, where `a` is the shared prototype
//! and `actionness` its relative strength; non-action shots borrow a random class
//! prototype at `signal * confusion * class[c']`, so they look like some other
//! action without the actionness offset. At `signal = 0` both distributions
//! collapse to the same zero-mean noise.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ChannelKind, DatasetManifest, FrameFeatureStream, ShotRecord, Split, VideoRecord};
use crate::error::{Error, Result};

/// Inclusive integer range sampled uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: u32,
    pub max: u32,
}

impl Range {
    pub const fn new(min: u32, max: u32) -> Self {
        Range { min, max }
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        rng.random_range(self.min..=self.max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub n_videos: usize,
    pub shots_per_video: Range,
    pub frames_per_shot: Range,
    /// Dimension of the local (trajectory-style) descriptor channel.
    pub descriptor_dim: usize,
    pub descriptors_per_frame: Range,
    /// Number of dense channels; zero disables them.
    pub dense_channels: usize,
    pub dense_dim: usize,
    pub dense_stride: u32,
    pub signal: f64,
    /// Strength of the cue shared by all action shots, relative to the class cue.
    pub actionness: f64,
    pub noise: f64,
    /// How strongly non-action shots resemble a random action class, relative to `signal`.
    pub confusion: f64,
    pub non_action_ratio: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_classes: 6,
            n_videos: 120,
            shots_per_video: Range::new(3, 8),
            frames_per_shot: Range::new(20, 60),
            descriptor_dim: 16,
            descriptors_per_frame: Range::new(1, 3),
            dense_channels: 2,
            dense_dim: 16,
            dense_stride: 5,
            signal: 0.1,
            actionness: 3.0,
            noise: 1.0,
            confusion: 1.0,
            non_action_ratio: 0.6,
            seed: 0,
        }
    }
}

const DENSE_NAMES: [&str; 2] = ["spatial", "temporal"];
pub const LOCAL_CHANNEL: &str = "dtd";

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("synthetic spec: {m}")));
        if self.n_classes == 0 || self.n_videos == 0 {
            return bad("n_classes and n_videos must be positive");
        }
        for (name, r) in [
            ("shots_per_video", self.shots_per_video),
            ("frames_per_shot", self.frames_per_shot),
            ("descriptors_per_frame", self.descriptors_per_frame),
        ] {
            if r.min == 0 || r.min > r.max {
                return bad(&format!("{name} must satisfy 1 <= min <= max"));
            }
        }
        if self.descriptor_dim == 0 || (self.dense_channels > 0 && self.dense_dim == 0) {
            return bad("dimensions must be positive");
        }
        if self.dense_channels > DENSE_NAMES.len() {
            return bad("at most two dense channels are supported");
        }
        if self.dense_stride == 0 {
            return bad("dense_stride must be at least 1");
        }
        if !(0.0..1.0).contains(&self.non_action_ratio) {
            return bad("non_action_ratio must lie in [0, 1)");
        }
        if !(self.signal >= 0.0 && self.actionness >= 0.0 && self.noise >= 0.0 && self.confusion >= 0.0) {
            return bad("signal, actionness, noise and confusion must be non-negative");
        }
        Ok(())
    }

    fn channel_names(&self) -> Vec<(String, ChannelKind, usize)> {
        let mut v = vec![(LOCAL_CHANNEL.to_string(), ChannelKind::Local, self.descriptor_dim)];
        for name in DENSE_NAMES.iter().take(self.dense_channels) {
            v.push((name.to_string(), ChannelKind::Dense, self.dense_dim));
        }
        v
    }
}

/// A generated manifest plus the in-memory descriptor streams of every video,
/// index-aligned with `manifest.videos`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub manifest: DatasetManifest,
    pub streams: Vec<BTreeMap<String, FrameFeatureStream>>,
}

struct Prototypes {
    actionness: Vec<f64>,
    classes: Vec<Vec<f64>>,
}

impl Prototypes {
    fn sample(rng: &mut ChaCha8Rng, dim: usize, n_classes: usize) -> Self {
        let mut vec = || (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>();
        let actionness = vec();
        let classes = (0..n_classes).map(|_| vec()).collect();
        Prototypes { actionness, classes }
    }

    /// Mean of a frame's distribution for a shot labelled with `content`.
    fn center(&self, spec: &SyntheticSpec, content: ShotContent) -> Vec<f64> {
        match content {
            ShotContent::Action(c) => self
                .actionness
                .iter()
                .zip(&self.classes[c])
                .map(|(a, m)| spec.signal * (spec.actionness * a + m))
                .collect(),
            ShotContent::Background(c) => self.classes[c].iter().map(|m| spec.signal * spec.confusion * m).collect(),
        }
    }
}

#[derive(Clone, Copy)]
enum ShotContent {
    Action(usize),
    Background(usize),
}

fn draw(rng: &mut ChaCha8Rng, center: &[f64], noise: f64) -> Vec<f32> {
    center
        .iter()
        .map(|&m| (m + noise * rng.sample::<f64, _>(StandardNormal)) as f32)
        .collect()
}

/// Generates a dataset that is a pure function of `spec` (including its seed).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let channels = spec.channel_names();
    let mut proto_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    proto_rng.set_stream(u64::MAX);
    let prototypes: Vec<Prototypes> = channels
        .iter()
        .map(|(_, _, dim)| Prototypes::sample(&mut proto_rng, *dim, spec.n_classes))
        .collect();

    let classes: Vec<String> = (0..spec.n_classes).map(|c| format!("class{c:02}")).collect();
    let generated: Vec<(VideoRecord, BTreeMap<String, FrameFeatureStream>)> = (0..spec.n_videos)
        .into_par_iter()
        .map(|i| generate_video(spec, i, &channels, &prototypes))
        .collect();

    let (videos, streams) = generated.into_iter().unzip();
    let channel_kinds = channels
        .iter()
        .filter(|(_, k, _)| *k == ChannelKind::Dense)
        .map(|(n, k, _)| (n.clone(), *k))
        .collect();
    Ok(SyntheticDataset {
        manifest: DatasetManifest {
            classes,
            channel_kinds,
            videos,
            base_dir: None,
            rejected: Vec::new(),
        },
        streams,
    })
}

fn generate_video(
    spec: &SyntheticSpec,
    index: usize,
    channels: &[(String, ChannelKind, usize)],
    prototypes: &[Prototypes],
) -> (VideoRecord, BTreeMap<String, FrameFeatureStream>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let class = index % spec.n_classes;
    // Alternate splits within each class so both halves stay balanced.
    let split = if (index / spec.n_classes) % 2 == 0 { Split::Train } else { Split::Test };

    let n_shots = spec.shots_per_video.sample(&mut rng) as usize;
    let labels = loop {
        let labels: Vec<bool> = (0..n_shots).map(|_| rng.random_bool(spec.non_action_ratio)).collect();
        if labels.iter().any(|non_action| !non_action) {
            break labels;
        }
    };

    let mut shots = Vec::with_capacity(n_shots);
    let mut contents = Vec::with_capacity(n_shots);
    let mut start = 1u32;
    for &non_action in &labels {
        let len = spec.frames_per_shot.sample(&mut rng);
        let truth = u8::from(non_action);
        // Roughly one shot in seven gets a dissenting annotator.
        let mut votes = vec![truth; 3];
        if rng.random_bool(0.137) {
            let who = rng.random_range(0..3);
            votes[who] = 1 - truth;
        }
        shots.push(ShotRecord::new(start, start + len - 1, votes, None));
        contents.push(if non_action {
            ShotContent::Background(rng.random_range(0..spec.n_classes))
        } else {
            ShotContent::Action(class)
        });
        start += len;
    }
    let n_frames = start - 1;
    let video_id = format!("vid{index:05}");

    let mut streams = BTreeMap::new();
    let mut refs = BTreeMap::new();
    for ((name, kind, dim), proto) in channels.iter().zip(prototypes) {
        let mut stream = FrameFeatureStream::new(*kind, *dim);
        for (shot, &content) in shots.iter().zip(&contents) {
            let center = proto.center(spec, content);
            for frame in shot.start_frame..=shot.end_frame {
                match kind {
                    ChannelKind::Local => {
                        for _ in 0..spec.descriptors_per_frame.sample(&mut rng) {
                            stream.push(frame, &draw(&mut rng, &center, spec.noise));
                        }
                    }
                    ChannelKind::Dense => {
                        if (frame - 1) % spec.dense_stride == 0 {
                            stream.push(frame, &draw(&mut rng, &center, spec.noise));
                        }
                    }
                }
            }
        }
        refs.insert(name.clone(), PathBuf::from(format!("descriptors/{video_id}.{name}.spfd")));
        streams.insert(name.clone(), stream);
    }

    let video = VideoRecord {
        video_id,
        action_label: class,
        n_frames,
        shots,
        channels: refs,
        split,
    };
    (video, streams)
}

/// Writes `manifest.json` and one descriptor file per (video, channel) under `out_dir`.
pub fn write_synthetic(dataset: &SyntheticDataset, out_dir: impl AsRef<Path>) -> Result<PathBuf> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir.join("descriptors")).map_err(|e| Error::io(out_dir, e))?;
    for (video, streams) in dataset.manifest.videos.iter().zip(&dataset.streams) {
        for (name, stream) in streams {
            super::write_descriptor_file(out_dir.join(&video.channels[name]), stream)?;
        }
    }
    let path = out_dir.join("manifest.json");
    fs::write(&path, dataset.manifest.to_json()?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
