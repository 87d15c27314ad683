//! Video and shot records, manifest loading, multi-annotator label resolution,
//! descriptor files and synthetic dataset generation.
//!
//! Frame indices are 1-based and inclusive throughout: a video with `n` frames
//! covers `[1, n]`, and its shots partition that range.

mod descriptor;
mod frames;
mod synth;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use descriptor::{read_descriptor_file, write_descriptor_file, ChannelKind, FrameFeatureStream};
pub use frames::FrameSet;
pub use synth::{generate_synthetic, write_synthetic, Range, SyntheticDataset, SyntheticSpec};

/// Resolved annotation of a shot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShotLabel {
    Action,
    NonAction,
    Unresolved,
}

/// Resolves binary annotator votes (`1` = non-action, `0` = action) by strict majority.
///
/// Ties and empty vote lists stay [`ShotLabel::Unresolved`]; those shots need a
/// manifest `override` before they can be used for training.
pub fn resolve_labels(votes: &[u8]) -> ShotLabel {
    let non_action = votes.iter().filter(|&&v| v != 0).count();
    let action = votes.len() - non_action;
    match non_action.cmp(&action) {
        std::cmp::Ordering::Greater => ShotLabel::NonAction,
        std::cmp::Ordering::Less => ShotLabel::Action,
        std::cmp::Ordering::Equal => ShotLabel::Unresolved,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShotRecord {
    pub start_frame: u32,
    pub end_frame: u32,
    pub annotations: Vec<u8>,
    pub override_label: Option<ShotLabel>,
    pub resolved_label: ShotLabel,
}

impl ShotRecord {
    pub fn new(start_frame: u32, end_frame: u32, annotations: Vec<u8>, override_label: Option<ShotLabel>) -> Self {
        let resolved_label = match override_label {
            Some(l) if l != ShotLabel::Unresolved => l,
            _ => resolve_labels(&annotations),
        };
        ShotRecord {
            start_frame,
            end_frame,
            annotations,
            override_label,
            resolved_label,
        }
    }

    pub fn frames(&self) -> FrameSet {
        FrameSet::range(self.start_frame, self.end_frame)
    }

    pub fn len(&self) -> u32 {
        self.end_frame - self.start_frame + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_non_action(&self) -> bool {
        self.resolved_label == ShotLabel::NonAction
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoRecord {
    pub video_id: String,
    /// Index into [`DatasetManifest::classes`].
    pub action_label: usize,
    pub n_frames: u32,
    pub shots: Vec<ShotRecord>,
    pub channels: BTreeMap<String, PathBuf>,
    pub split: Split,
}

impl VideoRecord {
    /// Checks that shots are ordered, contiguous and exactly cover `[1, n_frames]`.
    pub fn validate_shots(&self) -> Result<()> {
        let err = |message: String| Error::ShotCoverage {
            video_id: self.video_id.clone(),
            message,
        };
        if self.n_frames == 0 {
            return Err(err("n_frames must be at least 1".into()));
        }
        if self.shots.is_empty() {
            return Err(err("video has no shots".into()));
        }
        let mut expected = 1u32;
        for (i, shot) in self.shots.iter().enumerate() {
            if shot.start_frame > shot.end_frame {
                return Err(err(format!(
                    "shot {i} has start {} after end {}",
                    shot.start_frame, shot.end_frame
                )));
            }
            if shot.start_frame > expected {
                return Err(err(format!("gap at frame {expected}")));
            }
            if shot.start_frame < expected {
                return Err(err(format!("overlap at frame {}", shot.start_frame)));
            }
            expected = shot.end_frame + 1;
        }
        let last = expected - 1;
        if last < self.n_frames {
            return Err(err(format!("gap at frame {expected}")));
        }
        if last > self.n_frames {
            return Err(err(format!("shot ends at frame {last} beyond n_frames {}", self.n_frames)));
        }
        Ok(())
    }

    pub fn has_action_shot(&self) -> bool {
        self.shots.iter().any(|s| s.resolved_label != ShotLabel::NonAction)
    }
}

/// A validated collection of videos.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub classes: Vec<String>,
    pub channel_kinds: BTreeMap<String, ChannelKind>,
    pub videos: Vec<VideoRecord>,
    /// Directory relative channel paths resolve against.
    pub base_dir: Option<PathBuf>,
    /// Ids of videos dropped at load time because no shot contains an action.
    pub rejected: Vec<String>,
}

impl DatasetManifest {
    pub fn class_index(&self, name: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    pub fn n_shots(&self) -> usize {
        self.videos.iter().map(|v| v.shots.len()).sum()
    }

    pub fn n_non_action_shots(&self) -> usize {
        self.videos
            .iter()
            .flat_map(|v| &v.shots)
            .filter(|s| s.is_non_action())
            .count()
    }

    pub fn channel_path(&self, video: &VideoRecord, channel: &str) -> Option<PathBuf> {
        let rel = video.channels.get(channel)?;
        Some(match &self.base_dir {
            Some(base) if rel.is_relative() => base.join(rel),
            _ => rel.clone(),
        })
    }

    pub fn local_channels(&self) -> Vec<String> {
        self.channels_of_kind(ChannelKind::Local)
    }

    pub fn dense_channels(&self) -> Vec<String> {
        self.channels_of_kind(ChannelKind::Dense)
    }

    fn channels_of_kind(&self, kind: ChannelKind) -> Vec<String> {
        let mut names: Vec<String> = self
            .videos
            .iter()
            .flat_map(|v| v.channels.keys())
            .filter(|name| self.channel_kind(name) == kind)
            .cloned()
            .collect();
        names.sort();
        names.dedup();
        names
    }

    /// Channels default to local descriptor sets unless declared dense.
    pub fn channel_kind(&self, name: &str) -> ChannelKind {
        self.channel_kinds.get(name).copied().unwrap_or(ChannelKind::Local)
    }

    /// Parses and validates manifest JSON. Channel files are not checked.
    pub fn from_json(text: &str, base_dir: Option<PathBuf>) -> Result<Self> {
        let raw: ManifestFile = serde_json::from_str(text)?;
        raw.into_manifest(base_dir)
    }

    pub fn to_json(&self) -> Result<String> {
        let raw = ManifestFile::from_manifest(self);
        Ok(serde_json::to_string_pretty(&raw)?)
    }

    /// Loads all descriptor streams declared by one video.
    pub fn load_streams(&self, video: &VideoRecord) -> Result<BTreeMap<String, FrameFeatureStream>> {
        let mut out = BTreeMap::new();
        for name in video.channels.keys() {
            let path = self.channel_path(video, name).expect("channel exists");
            let stream = read_descriptor_file(&path, self.channel_kind(name))?;
            stream.check_frames(video.n_frames).map_err(|message| Error::DescriptorFormat {
                path: path.clone(),
                message: format!("video {}: {message}", video.video_id),
            })?;
            out.insert(name.clone(), stream);
        }
        Ok(out)
    }
}

/// Reads, validates and returns the manifest at `path`.
///
/// Fails on parse errors, shot partitions with gaps or overlaps, and channel
/// references to files that do not exist. Videos without any action shot are
/// dropped with a warning and listed in [`DatasetManifest::rejected`].
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = DatasetManifest::from_json(&text, Some(base))?;
    for video in &manifest.videos {
        for name in video.channels.keys() {
            let resolved = manifest.channel_path(video, name).expect("channel exists");
            if !resolved.is_file() {
                return Err(Error::DanglingReference {
                    video_id: video.video_id.clone(),
                    channel: name.clone(),
                    path: resolved,
                });
            }
        }
    }
    Ok(manifest)
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    channel_kinds: BTreeMap<String, ChannelKind>,
    videos: Vec<VideoEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct VideoEntry {
    id: String,
    label: String,
    n_frames: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
    shots: Vec<ShotEntry>,
    #[serde(default)]
    channels: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ShotEntry {
    start: u32,
    end: u32,
    #[serde(default)]
    votes: Vec<u8>,
    #[serde(default, rename = "override", skip_serializing_if = "Option::is_none")]
    override_label: Option<ShotLabel>,
}

impl ManifestFile {
    fn into_manifest(self, base_dir: Option<PathBuf>) -> Result<DatasetManifest> {
        let classes = match self.classes {
            Some(c) => c,
            None => {
                let mut c: Vec<String> = self.videos.iter().map(|v| v.label.clone()).collect();
                c.sort();
                c.dedup();
                c
            }
        };
        let mut videos = Vec::with_capacity(self.videos.len());
        let mut rejected = Vec::new();
        for (i, entry) in self.videos.into_iter().enumerate() {
            for (j, vote) in entry.shots.iter().enumerate() {
                if vote.votes.len() > 3 || vote.votes.iter().any(|&v| v > 1) {
                    return Err(Error::ShotCoverage {
                        video_id: entry.id.clone(),
                        message: format!("shot {j} must carry 0-3 binary votes"),
                    });
                }
            }
            let action_label = classes
                .iter()
                .position(|c| *c == entry.label)
                .ok_or_else(|| Error::UnknownClass(entry.label.clone()))?;
            let video = VideoRecord {
                action_label,
                n_frames: entry.n_frames,
                shots: entry
                    .shots
                    .into_iter()
                    .map(|s| ShotRecord::new(s.start, s.end, s.votes, s.override_label))
                    .collect(),
                channels: entry.channels,
                split: entry
                    .split
                    .unwrap_or(if i % 2 == 0 { Split::Train } else { Split::Test }),
                video_id: entry.id,
            };
            video.validate_shots()?;
            if !video.has_action_shot() {
                log::warn!("video {} has no action shot; rejected", video.video_id);
                rejected.push(video.video_id);
                continue;
            }
            videos.push(video);
        }
        Ok(DatasetManifest {
            classes,
            channel_kinds: self.channel_kinds,
            videos,
            base_dir,
            rejected,
        })
    }

    fn from_manifest(m: &DatasetManifest) -> Self {
        ManifestFile {
            classes: Some(m.classes.clone()),
            channel_kinds: m.channel_kinds.clone(),
            videos: m
                .videos
                .iter()
                .map(|v| VideoEntry {
                    id: v.video_id.clone(),
                    label: m.classes[v.action_label].clone(),
                    n_frames: v.n_frames,
                    split: Some(v.split),
                    shots: v
                        .shots
                        .iter()
                        .map(|s| ShotEntry {
                            start: s.start_frame,
                            end: s.end_frame,
                            votes: s.annotations.clone(),
                            override_label: s.override_label,
                        })
                        .collect(),
                    channels: v.channels.clone(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest_json(shots: &str) -> String {
        format!(
            r#"{{"videos": [{{"id": "v1", "label": "Hug", "n_frames": 25, "shots": {shots}, "channels": {{}}}}]}}"#
        )
    }

    #[test]
    fn minimal_manifest() {
        let m = DatasetManifest::from_json(
            &manifest_json(r#"[{"start":1,"end":10,"votes":[1,1,1]},{"start":11,"end":25,"votes":[0,0,1]}]"#),
            None,
        )
        .unwrap();
        assert_eq!(m.videos.len(), 1);
        assert_eq!(m.videos[0].n_frames, 25);
        assert_eq!(m.videos[0].shots.len(), 2);
        assert_eq!(m.videos[0].shots[1].resolved_label, ShotLabel::Action);
        assert_eq!(m.classes, vec!["Hug".to_string()]);
    }

    #[test]
    fn gap_is_reported() {
        let err = DatasetManifest::from_json(
            &manifest_json(r#"[{"start":1,"end":10,"votes":[0]},{"start":12,"end":25,"votes":[0]}]"#),
            None,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("gap at frame 11"), "{msg}");
        assert!(msg.contains("v1"), "{msg}");
    }

    #[test]
    fn overlap_and_overrun_are_reported() {
        let err = DatasetManifest::from_json(
            &manifest_json(r#"[{"start":1,"end":10,"votes":[0]},{"start":10,"end":25,"votes":[0]}]"#),
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("overlap at frame 10"));
        let err = DatasetManifest::from_json(&manifest_json(r#"[{"start":1,"end":30,"votes":[0]}]"#), None).unwrap_err();
        assert!(err.to_string().contains("beyond n_frames"));
        let err = DatasetManifest::from_json(&manifest_json(r#"[{"start":1,"end":20,"votes":[0]}]"#), None).unwrap_err();
        assert!(err.to_string().contains("gap at frame 21"));
    }

    #[test]
    fn video_without_action_is_rejected() {
        let m = DatasetManifest::from_json(&manifest_json(r#"[{"start":1,"end":25,"votes":[1,1,0]}]"#), None).unwrap();
        assert!(m.videos.is_empty());
        assert_eq!(m.rejected, vec!["v1".to_string()]);
    }

    #[test]
    fn override_wins_over_votes() {
        let m = DatasetManifest::from_json(
            &manifest_json(r#"[{"start":1,"end":10,"votes":[1,0],"override":"non-action"},{"start":11,"end":25,"votes":[1,0]}]"#),
            None,
        )
        .unwrap();
        assert_eq!(m.videos[0].shots[0].resolved_label, ShotLabel::NonAction);
        assert_eq!(m.videos[0].shots[1].resolved_label, ShotLabel::Unresolved);
    }

    #[test]
    fn vote_resolution() {
        assert_eq!(resolve_labels(&[1, 1, 1]), ShotLabel::NonAction);
        assert_eq!(resolve_labels(&[1, 1, 0]), ShotLabel::NonAction);
        assert_eq!(resolve_labels(&[0, 1, 0]), ShotLabel::Action);
        assert_eq!(resolve_labels(&[1, 0]), ShotLabel::Unresolved);
        assert_eq!(resolve_labels(&[]), ShotLabel::Unresolved);
        assert_eq!(resolve_labels(&[0]), ShotLabel::Action);
    }

    #[test]
    fn dangling_reference() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(
            &path,
            r#"{"videos": [{"id": "v9", "label": "Run", "n_frames": 5, "shots": [{"start":1,"end":5,"votes":[0,0,0]}], "channels": {"dtd": "missing.spfd"}}]}"#,
        )
        .unwrap();
        match load_manifest(&path) {
            Err(Error::DanglingReference { video_id, channel, .. }) => {
                assert_eq!(video_id, "v9");
                assert_eq!(channel, "dtd");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest::proptest! {
        #[test]
        fn resolution_is_order_symmetric(votes in proptest::collection::vec(0u8..2, 0..=3)) {
            let mut rev = votes.clone();
            rev.reverse();
            proptest::prop_assert_eq!(resolve_labels(&votes), resolve_labels(&rev));
            let mut sorted = votes.clone();
            sorted.sort();
            proptest::prop_assert_eq!(resolve_labels(&votes), resolve_labels(&sorted));
        }
    }
}
