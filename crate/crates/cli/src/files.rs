//! On-disk layout of the models and output directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use segment_purify::container::ModelFile;
use segment_purify::dataset::{read_descriptor_file, ChannelKind, DatasetManifest, FrameFeatureStream, VideoRecord};
use segment_purify::encoding::{EncodedVideo, FrameFvs};
use segment_purify::nonaction::TrainingModeSpec;
use serde::Serialize;

use crate::error::CliError;

pub fn pca_path(models: &Path, channel: &str) -> PathBuf {
    models.join(format!("pca.{channel}.spmd"))
}

pub fn gmm_path(models: &Path, channel: &str) -> PathBuf {
    models.join(format!("gmm.{channel}.spmd"))
}

pub fn encoded_path(models: &Path, video_id: &str) -> PathBuf {
    models.join("encoded").join(format!("{video_id}.spmd"))
}

pub fn nonaction_path(models: &Path, mode: &TrainingModeSpec) -> PathBuf {
    let tag = match mode {
        TrainingModeSpec::Generic => "generic".to_string(),
        TrainingModeSpec::Specific(c) => format!("specific-{c}"),
        TrainingModeSpec::LeaveOneOut(c) => format!("loo-{c}"),
    };
    models.join(format!("nonaction-{tag}.spmd"))
}

pub fn action_path(models: &Path) -> PathBuf {
    models.join("action.spmd")
}

pub fn feature_path(dir: &Path, video_id: &str) -> PathBuf {
    dir.join("features").join(format!("{video_id}.spmd"))
}

/// Video ids become file names, so they must not escape their directory.
pub fn check_video_ids(manifest: &DatasetManifest) -> Result<(), CliError> {
    for v in &manifest.videos {
        let id = &v.video_id;
        if id.is_empty() || id.starts_with('.') || id.contains(['/', '\\']) {
            return Err(CliError::Validation(format!("video id {id:?} cannot be used as a file name")));
        }
    }
    Ok(())
}

pub fn load_model<T: ModelFile>(path: &Path, hint: &str) -> Result<T, CliError> {
    if !path.is_file() {
        return Err(CliError::missing_model(path, hint));
    }
    Ok(T::load(path)?)
}

pub fn create_parent(path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn save_model<T: ModelFile>(model: &T, path: &Path) -> Result<(), CliError> {
    create_parent(path)?;
    Ok(model.save(path)?)
}

/// Streams of one channel for every video; other channels are left out.
pub fn load_channel(
    manifest: &DatasetManifest,
    channel: &str,
) -> Result<Vec<BTreeMap<String, FrameFeatureStream>>, CliError> {
    let kind = manifest.channel_kind(channel);
    manifest
        .videos
        .par_iter()
        .map(|v| {
            let mut map = BTreeMap::new();
            if let Some(path) = manifest.channel_path(v, channel) {
                map.insert(channel.to_string(), read_stream(&path, kind, v)?);
            }
            Ok(map)
        })
        .collect()
}

fn read_stream(path: &Path, kind: ChannelKind, video: &VideoRecord) -> Result<FrameFeatureStream, CliError> {
    let stream = read_descriptor_file(path, kind)?;
    stream
        .check_frames(video.n_frames)
        .map_err(|m| CliError::Runtime(format!("{}: video {}: {m}", path.display(), video.video_id)))?;
    Ok(stream)
}

/// Encoded videos written by `encode`, with their dense channels read from the dataset.
pub fn load_encoded(manifest: &DatasetManifest, models: &Path) -> Result<Vec<EncodedVideo>, CliError> {
    let dense = manifest.dense_channels();
    manifest
        .videos
        .par_iter()
        .map(|v| {
            let path = encoded_path(models, &v.video_id);
            let (n_frames, fv) = load_model::<(u32, Vec<FrameFvs>)>(&path, "run encode first")?;
            if n_frames != v.n_frames {
                return Err(CliError::Validation(format!(
                    "{} holds {n_frames} frames, manifest says {}; re-run encode",
                    path.display(),
                    v.n_frames
                )));
            }
            let dense = dense
                .iter()
                .filter_map(|ch| manifest.channel_path(v, ch))
                .map(|p| read_stream(&p, ChannelKind::Dense, v))
                .collect::<Result<_, _>>()?;
            Ok(EncodedVideo { n_frames, fv, dense })
        })
        .collect()
}

pub fn save_feature(dir: &Path, video_id: &str, values: &[f64]) -> Result<(), CliError> {
    save_model(&DMatrix::from_row_slice(1, values.len(), values), &feature_path(dir, video_id))
}

/// Per-video features written by `pool` or `darwin`, in manifest order.
pub fn load_features(manifest: &DatasetManifest, dir: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let rows: Vec<Vec<f64>> = manifest
        .videos
        .par_iter()
        .map(|v| {
            let m: DMatrix<f64> = load_model(&feature_path(dir, &v.video_id), "run pool or darwin first")?;
            Ok(m.iter().copied().collect())
        })
        .collect::<Result<_, CliError>>()?;
    if let Some(first) = rows.first() {
        if let Some(bad) = rows.iter().find(|r| r.len() != first.len()) {
            return Err(CliError::Validation(format!(
                "features in {} differ in length ({} and {})",
                dir.display(),
                first.len(),
                bad.len()
            )));
        }
    }
    Ok(rows)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    create_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<(), CliError> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
