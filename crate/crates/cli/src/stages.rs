use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use rayon::prelude::*;
use segment_purify::darwin::{darwin_video_feature, DarwinParams, DarwinVariant, DEFAULT_LAMBDA};
use segment_purify::dataset::{
    generate_synthetic, load_manifest, write_synthetic, DatasetManifest, ShotLabel, Split, SyntheticSpec,
};
use segment_purify::encoding::{
    default_pca_dim, fit_gmm, fit_pca, project_rows, sample_descriptors, ChannelCodebook, GmmModel, PcaModel,
    DEFAULT_K, DEFAULT_SAMPLE,
};
use segment_purify::eval::{
    classifier_ap, leave_one_out_study, mean_average_precision, nonaction_eval, pr_curve_svg, pruning_sweep,
    run_experiment, select_alpha, select_gamma, sweep_svg, ExperimentConfig, PrCurve, PruningOptions,
};
use segment_purify::models::{gamma_grid, train_one_vs_rest, LssvmModel};
use segment_purify::nonaction::{score_shots, train_nonaction, TrainingModeSpec};
use segment_purify::pooling::{pool_segments, segment_videos, PoolingParams, DEFAULT_WINDOW};
use serde::Serialize;

use crate::args::*;
use crate::cache::{self, Stamp};
use crate::config::{check_alpha, check_positive, PipelineConfig};
use crate::error::CliError;
use crate::files::*;

pub fn dispatch(command: Command, cfg: &PipelineConfig) -> Result<(), CliError> {
    match command {
        Command::Synth(a) => synth(a, cfg),
        Command::FitPca(a) => fit_pca_stage(a, cfg),
        Command::FitGmm(a) => fit_gmm_stage(a, cfg),
        Command::Encode(a) => encode(a, cfg),
        Command::TrainNonaction(a) => train_nonaction_stage(a, cfg),
        Command::ScoreShots(a) => score_shots_stage(a, cfg),
        Command::Pool(a) => pool(a, cfg),
        Command::TrainAction(a) => train_action(a, cfg),
        Command::Darwin(a) => darwin(a, cfg),
        Command::Evaluate(a) => evaluate(a, cfg),
        Command::SimulatePruning(a) => simulate_pruning(a, cfg),
    }
}

/// Paths and seed shared by every stage after flag and config merging.
struct Setup {
    manifest_path: PathBuf,
    manifest: DatasetManifest,
    models: PathBuf,
    output: PathBuf,
    out: Option<PathBuf>,
    seed: u64,
}

impl Setup {
    fn new(common: Common, cfg: &PipelineConfig) -> Result<Self, CliError> {
        let manifest_path = common
            .manifest
            .or_else(|| cfg.paths.manifest.clone())
            .ok_or_else(|| CliError::Validation("no manifest given; pass --manifest or set paths.manifest".into()))?;
        if !manifest_path.is_file() {
            return Err(CliError::Validation(format!("manifest {} does not exist", manifest_path.display())));
        }
        let manifest = load_manifest(&manifest_path)?;
        check_video_ids(&manifest)?;
        Ok(Setup {
            manifest_path,
            manifest,
            models: common.models.or_else(|| cfg.paths.models.clone()).unwrap_or_else(|| "models".into()),
            output: cfg.paths.output.clone().unwrap_or_else(|| "out".into()),
            out: common.out,
            seed: common.seed.or(cfg.seed).unwrap_or(0),
        })
    }

    /// `--out` when given, else `name` inside the configured output directory.
    fn out_or(&self, name: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| self.output.join(name))
    }

    fn local_channels(&self, requested: &[String]) -> Result<Vec<String>, CliError> {
        let local = self.manifest.local_channels();
        if local.is_empty() {
            return Err(CliError::Validation("manifest declares no local descriptor channel".into()));
        }
        if requested.is_empty() {
            return Ok(local);
        }
        for ch in requested {
            if !local.contains(ch) {
                return Err(CliError::Validation(format!("{ch} is not a local channel of the manifest")));
            }
        }
        Ok(requested.to_vec())
    }

    /// Manifest plus the descriptor files of `channel`, for stage stamps.
    fn stamp_channel(&self, stamp: &mut Stamp, channel: &str) -> Result<(), CliError> {
        stamp.file(&self.manifest_path)?;
        for v in &self.manifest.videos {
            if let Some(p) = self.manifest.channel_path(v, channel) {
                stamp.file(&p)?;
            }
        }
        Ok(())
    }

    fn labels(&self) -> Vec<usize> {
        self.manifest.videos.iter().map(|v| v.action_label).collect()
    }

    fn split(&self, split: Split) -> Vec<usize> {
        (0..self.manifest.videos.len()).filter(|&i| self.manifest.videos[i].split == split).collect()
    }
}

fn synth(a: SynthArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut spec: SyntheticSpec = match &a.spec {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("cannot read spec {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("spec {}: {e}", path.display())))?
        }
        None => SyntheticSpec::default(),
    };
    if let Some(seed) = a.seed.or(cfg.seed) {
        spec.seed = seed;
    }
    let dataset = generate_synthetic(&spec)?;
    let path = write_synthetic(&dataset, &a.out)?;
    info!("wrote {} videos to {}", dataset.manifest.videos.len(), path.display());
    Ok(())
}

fn fit_pca_stage(a: FitPcaArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let s = Setup::new(a.common, cfg)?;
    let sample = a.sample.or(cfg.encoding.sample).unwrap_or(DEFAULT_SAMPLE);
    let dim = a.dim.or(cfg.encoding.dim);
    let whiten = a.whiten || cfg.encoding.whiten.unwrap_or(false);
    if sample == 0 || dim == Some(0) {
        return Err(CliError::Validation("--sample and --dim must be positive".into()));
    }
    for ch in s.local_channels(&a.channel)? {
        let out = pca_path(&s.models, &ch);
        let stage = format!("fit-pca.{ch}");
        let mut stamp = Stamp::new(&stage);
        stamp.text("sample", sample);
        stamp.text("dim", format!("{dim:?}"));
        stamp.text("whiten", whiten);
        stamp.text("seed", s.seed);
        s.stamp_channel(&mut stamp, &ch)?;
        let digest = stamp.finish();
        let stamp_file = cache::stamp_path(&s.models, &stage);
        if !a.force && cache::is_fresh(&stamp_file, &digest, std::slice::from_ref(&out)) {
            info!("{}: up to date", out.display());
            continue;
        }
        let streams = load_channel(&s.manifest, &ch)?;
        let samples = sample_descriptors(&s.manifest, &streams, &ch, sample, s.seed)?;
        let d = dim.unwrap_or_else(|| default_pca_dim(samples.ncols()));
        let pca = fit_pca(&samples, d, whiten)?;
        save_model(&pca, &out)?;
        cache::record(&stamp_file, &digest)?;
        info!("{}: {} -> {} dims from {} descriptors", out.display(), pca.input_dim(), d, samples.nrows());
    }
    Ok(())
}

fn fit_gmm_stage(a: FitGmmArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let s = Setup::new(a.common, cfg)?;
    let sample = a.sample.or(cfg.encoding.sample).unwrap_or(DEFAULT_SAMPLE);
    let k = a.k.or(cfg.encoding.k).unwrap_or(DEFAULT_K);
    if sample == 0 || k == 0 {
        return Err(CliError::Validation("--sample and --k must be positive".into()));
    }
    for ch in s.local_channels(&a.channel)? {
        let pca_file = pca_path(&s.models, &ch);
        let pca: PcaModel = load_model(&pca_file, "run fit-pca first")?;
        let out = gmm_path(&s.models, &ch);
        let stage = format!("fit-gmm.{ch}");
        let mut stamp = Stamp::new(&stage);
        stamp.text("sample", sample);
        stamp.text("k", k);
        stamp.text("seed", s.seed);
        stamp.file(&pca_file)?;
        s.stamp_channel(&mut stamp, &ch)?;
        let digest = stamp.finish();
        let stamp_file = cache::stamp_path(&s.models, &stage);
        if !a.force && cache::is_fresh(&stamp_file, &digest, std::slice::from_ref(&out)) {
            info!("{}: up to date", out.display());
            continue;
        }
        let streams = load_channel(&s.manifest, &ch)?;
        let samples = sample_descriptors(&s.manifest, &streams, &ch, sample, s.seed)?;
        let gmm = fit_gmm(&project_rows(&pca, &samples), k, s.seed)?;
        save_model(&gmm, &out)?;
        cache::record(&stamp_file, &digest)?;
        info!("{}: k = {k}", out.display());
    }
    Ok(())
}

fn encode(a: EncodeArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let s = Setup::new(a.common, cfg)?;
    let channels = s.local_channels(&[])?;
    let mut stamp = Stamp::new("encode");
    let mut codebooks = Vec::new();
    for ch in &channels {
        let (pca_file, gmm_file) = (pca_path(&s.models, ch), gmm_path(&s.models, ch));
        let pca: PcaModel = load_model(&pca_file, "run fit-pca first")?;
        let gmm: GmmModel = load_model(&gmm_file, "run fit-gmm first")?;
        stamp.file(&pca_file)?;
        stamp.file(&gmm_file)?;
        s.stamp_channel(&mut stamp, ch)?;
        codebooks.push(ChannelCodebook { channel: ch.clone(), pca, gmm });
    }
    let digest = stamp.finish();
    let outputs: Vec<PathBuf> = s.manifest.videos.iter().map(|v| encoded_path(&s.models, &v.video_id)).collect();
    let stamp_file = cache::stamp_path(&s.models, "encode");
    if !a.force && cache::is_fresh(&stamp_file, &digest, &outputs) {
        info!("encoded videos are up to date");
        return Ok(());
    }
    s.manifest
        .videos
        .par_iter()
        .zip(&outputs)
        .try_for_each(|(v, out)| -> Result<(), CliError> {
            let fv = codebooks
                .iter()
                .map(|cb| {
                    let path = s.manifest.channel_path(v, &cb.channel).ok_or_else(|| {
                        CliError::Validation(format!("video {} lacks channel {}", v.video_id, cb.channel))
                    })?;
                    let stream = segment_purify::dataset::read_descriptor_file(&path, s.manifest.channel_kind(&cb.channel))?;
                    stream
                        .check_frames(v.n_frames)
                        .map_err(|m| CliError::Runtime(format!("{}: {m}", path.display())))?;
                    Ok(cb.encode_stream(&stream)?)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            save_model(&(v.n_frames, fv), out)
        })?;
    cache::record(&stamp_file, &digest)?;
    info!("encoded {} videos", outputs.len());
    Ok(())
}

fn nonaction_gamma(gamma: Option<f64>, tune: bool, cfg: &PipelineConfig) -> Result<Option<f64>, CliError> {
    if tune || cfg.training.tune.unwrap_or(false) {
        return Ok(None);
    }
    let g = gamma.or(cfg.training.gamma).unwrap_or(1.0);
    check_positive("gamma", g)?;
    Ok(Some(g))
}

fn train_nonaction_stage(a: TrainNonactionArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let s = Setup::new(a.common, cfg)?;
    let spec = TrainingModeSpec::from_str(a.mode.as_deref().or(cfg.mode.as_deref()).unwrap_or("generic"))?;
    let mode = spec.resolve(&s.manifest)?;
    let gamma = nonaction_gamma(a.gamma, a.tune, cfg)?;
    let encoded = load_encoded(&s.manifest, &s.models)?;
    let model = train_nonaction(&s.manifest, &encoded, mode, gamma, s.seed)?;
    let out = nonaction_path(&s.models, &spec);
    save_model(&model, &out)?;
    info!("{}: mode {spec}", out.display());
    Ok(())
}

fn load_classifier(s: &Setup, path: Option<PathBuf>) -> Result<LssvmModel, CliError> {
    let path = path.unwrap_or_else(|| nonaction_path(&s.models, &TrainingModeSpec::Generic));
    load_model(&path, "run train-nonaction first")
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    video_id: &'a str,
    shot_index: usize,
    score: f64,
    label: ShotLabel,
}

fn score_shots_stage(a: ScoreShotsArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let s = Setup::new(a.common, cfg)?;
    let classifier = load_classifier(&s, a.classifier)?;
    let encoded = load_encoded(&s.manifest, &s.models)?;
    let scores = score_shots(&classifier, &s.manifest, &encoded, |v| match a.split {
        SplitArg::All => true,
        SplitArg::Train => v.split == Split::Train,
        SplitArg::Test => v.split == Split::Test,
    })?;
    let out = s.out_or("scores.csv");
    write_csv(
        &out,
        scores.iter().map(|sc| {
            let video = &s.manifest.videos[sc.shot.video];
            ScoreRow {
                video_id: &video.video_id,
                shot_index: sc.shot.shot,
                score: sc.score,
                label: video.shots[sc.shot.shot].resolved_label,
            }
        }),
    )?;
    info!("{}: {} shots", out.display(), scores.len());
    Ok(())
}

fn pooling_params(w: &WindowArgs, fuse_dense: bool, cfg: &PipelineConfig) -> Result<PoolingParams, CliError> {
    let window = w.window.or(cfg.pooling.window).unwrap_or(DEFAULT_WINDOW);
    let stride = w.stride.or(cfg.pooling.stride).unwrap_or(window);
    let alpha = w.alpha.or(cfg.pooling.alpha).unwrap_or(1.0);
    check_alpha(alpha)?;
    Ok(PoolingParams { window, stride, alpha, fuse_dense })
}

#[derive(Serialize)]
struct WeightRow<'a> {
    video_id: &'a str,
    segment: usize,
    start_frame: u32,
    end_frame: u32,
    score: f64,
    weight: f64,
}

#[derive(Serialize)]
struct PoolSummary {
    alpha: f64,
    alpha_tuned: bool,
    window: u32,
    stride: u32,
    fuse_dense: bool,
    dim: usize,
}

fn pool(a: PoolArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let s = Setup::new(a.common, cfg)?;
    let params = pooling_params(&a.window, a.fuse_dense || cfg.pooling.fuse_dense.unwrap_or(false), cfg)?;
    let classifier = load_classifier(&s, a.window.classifier.clone())?;
    let encoded = load_encoded(&s.manifest, &s.models)?;
    let segments = segment_videos(&encoded, &classifier, &params)?;
    let tune = a.tune_alpha || cfg.training.tune_alpha.unwrap_or(false);
    let alpha = if tune {
        let gamma = a.gamma.or(cfg.training.gamma).unwrap_or(1.0);
        check_positive("gamma", gamma)?;
        select_alpha(&s.manifest, &segments, gamma, true, s.seed)?
    } else {
        params.alpha
    };
    let dir = s.out_or("pool");
    let pooled = segments
        .par_iter()
        .map(|seg| Ok(pool_segments(seg, alpha)?))
        .collect::<Result<Vec<_>, CliError>>()?;
    for (v, p) in s.manifest.videos.iter().zip(&pooled) {
        save_feature(&dir, &v.video_id, &p.values)?;
    }
    let rows = s.manifest.videos.iter().zip(&segments).zip(&pooled).flat_map(|((v, seg), p)| {
        seg.iter().zip(&p.weights).enumerate().map(move |(i, (g, &weight))| WeightRow {
            video_id: &v.video_id,
            segment: i,
            start_frame: g.start_frame,
            end_frame: g.end_frame,
            score: g.score,
            weight,
        })
    });
    write_csv(&dir.join("segments.csv"), rows)?;
    let summary = PoolSummary {
        alpha,
        alpha_tuned: tune,
        window: params.window,
        stride: params.stride,
        fuse_dense: params.fuse_dense,
        dim: pooled.first().map_or(0, |p| p.values.len()),
    };
    write_json(&dir.join("pool.json"), &summary)?;
    info!("{}: pooled {} videos with alpha = {alpha}", dir.display(), pooled.len());
    Ok(())
}

#[derive(Serialize)]
struct DarwinSummary {
    variant: DarwinVariant,
    lambda: f64,
    alpha: f64,
    window: u32,
    stride: u32,
    per_second: bool,
    dim: usize,
}

fn darwin(a: DarwinArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let s = Setup::new(a.common, cfg)?;
    let variant = match a.variant {
        VariantArg::Plain => DarwinVariant::Plain,
        VariantArg::Weighted => DarwinVariant::Weighted,
    };
    let lambda = a.lambda.or(cfg.training.lambda).unwrap_or(DEFAULT_LAMBDA);
    check_positive("lambda", lambda)?;
    let params = DarwinParams {
        variant,
        lambda,
        pooling: pooling_params(&a.window, false, cfg)?,
        per_second: a.per_second,
    };
    let classifier = match variant {
        DarwinVariant::Weighted => Some(load_classifier(&s, a.window.classifier.clone())?),
        DarwinVariant::Plain => None,
    };
    let encoded = load_encoded(&s.manifest, &s.models)?;
    let features = encoded
        .par_iter()
        .map(|v| Ok(darwin_video_feature(v, classifier.as_ref(), &params)?.normalized()))
        .collect::<Result<Vec<_>, CliError>>()?;
    let dir = s.out_or("darwin");
    for (v, f) in s.manifest.videos.iter().zip(&features) {
        save_feature(&dir, &v.video_id, f)?;
    }
    let summary = DarwinSummary {
        variant,
        lambda,
        alpha: params.pooling.alpha,
        window: params.pooling.window,
        stride: params.pooling.stride,
        per_second: params.per_second,
        dim: features.first().map_or(0, Vec::len),
    };
    write_json(&dir.join("darwin.json"), &summary)?;
    info!("{}: {} rank-pooled videos", dir.display(), features.len());
    Ok(())
}

fn train_action(a: TrainActionArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let s = Setup::new(a.common, cfg)?;
    let features = load_features(&s.manifest, &a.features)?;
    let gamma = if a.tune || cfg.training.tune.unwrap_or(false) {
        select_gamma(&s.manifest, &features, &gamma_grid(), true, s.seed)?
    } else {
        let g = a.gamma.or(cfg.training.gamma).unwrap_or(1.0);
        check_positive("gamma", g)?;
        g
    };
    let train = s.split(Split::Train);
    let labels = s.labels();
    let x = nalgebra::DMatrix::from_fn(train.len(), features.first().map_or(0, Vec::len), |r, c| {
        features[train[r]][c]
    });
    let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let models = train_one_vs_rest(&x, &y, s.manifest.classes.len(), gamma)?;
    let out = action_path(&s.models);
    save_model(&models, &out)?;
    info!("{}: {} classifiers, gamma = {gamma}", out.display(), models.len());
    Ok(())
}

#[derive(Serialize)]
struct RecognitionReport {
    features: PathBuf,
    softmax: bool,
    classes: Vec<String>,
    per_class_ap: Vec<f64>,
    map: f64,
    curves: Vec<PrCurve>,
}

#[derive(Serialize)]
struct ApRow<'a> {
    class: &'a str,
    ap: f64,
}

fn write_class_table(dir: &Path, classes: &[String], curves: &[PrCurve], plots: bool) -> Result<(), CliError> {
    write_csv(
        &dir.join("per_class_ap.csv"),
        classes.iter().zip(curves).map(|(class, c)| ApRow { class, ap: c.ap }),
    )?;
    if plots {
        let named: Vec<(String, PrCurve)> = classes.iter().cloned().zip(curves.iter().cloned()).collect();
        fs::write(dir.join("pr_curves.svg"), pr_curve_svg(&named))?;
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let s = Setup::new(a.common, cfg)?;
    let dir = s.out_or("evaluation");
    fs::create_dir_all(&dir)?;
    let softmax = !a.no_softmax;
    match a.task {
        Task::Recognition => {
            let features_dir = a
                .features
                .ok_or_else(|| CliError::Validation("--features is required for recognition".into()))?;
            let models: Vec<LssvmModel> =
                load_model(&a.action.unwrap_or_else(|| action_path(&s.models)), "run train-action first")?;
            if models.len() != s.manifest.classes.len() {
                return Err(CliError::Validation(format!(
                    "{} action classifiers for {} classes",
                    models.len(),
                    s.manifest.classes.len()
                )));
            }
            let features = load_features(&s.manifest, &features_dir)?;
            let curves = classifier_ap(&models, &features, &s.labels(), &s.split(Split::Test), softmax)?;
            let per_class_ap: Vec<f64> = curves.iter().map(|c| c.ap).collect();
            write_class_table(&dir, &s.manifest.classes, &curves, a.plots)?;
            let report = RecognitionReport {
                features: features_dir,
                softmax,
                classes: s.manifest.classes.clone(),
                map: mean_average_precision(&per_class_ap),
                per_class_ap,
                curves,
            };
            write_json(&dir.join("report.json"), &report)?;
            info!("mAP = {:.4}", report.map);
        }
        Task::Experiment => {
            let path = a
                .experiment
                .ok_or_else(|| CliError::Validation("--experiment is required for the experiment task".into()))?;
            let text = fs::read_to_string(&path)
                .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
            let mut config: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            config.seed = s.seed;
            if a.no_softmax {
                config.softmax = false;
            }
            let encoded = load_encoded(&s.manifest, &s.models)?;
            let report = run_experiment(&s.manifest, &encoded, &config)?;
            write_class_table(&dir, &report.classes, &report.curves, a.plots)?;
            write_json(&dir.join("report.json"), &report)?;
            info!("mAP = {:.4}", report.map);
        }
        Task::Nonaction => {
            let classifier = load_classifier(&s, a.classifier)?;
            let encoded = load_encoded(&s.manifest, &s.models)?;
            let mut ks: Vec<Option<usize>> = a.k.iter().map(|&k| Some(k)).collect();
            if ks.contains(&Some(0)) {
                return Err(CliError::Validation("--k values must be positive".into()));
            }
            ks.push(None);
            let report = nonaction_eval(&s.manifest, &encoded, &classifier, &ks)?;
            #[derive(Serialize)]
            struct Row {
                k: String,
                ap: f64,
            }
            write_csv(
                &dir.join("nonaction_ap.csv"),
                report.ap_at_k.iter().map(|&(k, ap)| Row {
                    k: k.map_or("all".into(), |k| k.to_string()),
                    ap,
                }),
            )?;
            if a.plots {
                fs::write(
                    dir.join("nonaction_pr.svg"),
                    pr_curve_svg(&[("non-action".to_string(), report.curve.clone())]),
                )?;
            }
            write_json(&dir.join("nonaction.json"), &report)?;
        }
        Task::LeaveOneOut => {
            let gamma = a.gamma.or(cfg.training.gamma).unwrap_or(1.0);
            check_positive("gamma", gamma)?;
            let encoded = load_encoded(&s.manifest, &s.models)?;
            let results = leave_one_out_study(&s.manifest, &encoded, gamma, s.seed)?;
            write_csv(&dir.join("leave_one_out.csv"), &results)?;
            write_json(&dir.join("leave_one_out.json"), &results)?;
        }
    }
    info!("reports written to {}", dir.display());
    Ok(())
}

/// `start:step:end` (inclusive) or a comma-separated list of probabilities.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Validation(format!("invalid --p-grid {text:?}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let grid: Vec<f64> = match text.split(':').collect::<Vec<_>>()[..] {
        [start, step, end] => {
            let (start, step, end) = (num(start)?, num(step)?, num(end)?);
            if !(step > 0.0) || end < start {
                return Err(bad());
            }
            let n = ((end - start) / step + 1e-9).floor() as usize;
            // Rounded to 12 decimals so 0.1 steps print as 0.3, not 0.30000000000000004.
            (0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
        }
        [_] => text.split(',').map(num).collect::<Result<_, _>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() || grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(CliError::Validation(format!("--p-grid values must lie in [0, 1], got {text:?}")));
    }
    Ok(grid)
}

#[derive(Serialize)]
struct SweepRow {
    p: f64,
    repeats: usize,
    map_mean: f64,
    map_std: f64,
}

fn simulate_pruning(a: PruningArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let s = Setup::new(a.common, cfg)?;
    let grid = parse_grid(&a.p_grid)?;
    let opts = PruningOptions {
        repeats: a.repeats.unwrap_or(20),
        seed: s.seed,
        gamma: a.gamma.or(cfg.training.gamma).unwrap_or(1.0),
        include_dense: a.fuse_dense || cfg.pooling.fuse_dense.unwrap_or(false),
        retrain: !a.no_retrain,
        softmax: true,
    };
    check_positive("gamma", opts.gamma)?;
    let encoded = load_encoded(&s.manifest, &s.models)?;
    let results = pruning_sweep(&s.manifest, &encoded, &grid, &opts)?;
    let dir = s.out_or("pruning");
    write_json(&dir.join("sweep.json"), &results)?;
    write_csv(
        &dir.join("sweep.csv"),
        results.iter().map(|r| SweepRow {
            p: r.p,
            repeats: r.repeats,
            map_mean: r.map_mean,
            map_std: r.map_std,
        }),
    )?;
    fs::write(dir.join("sweep.svg"), sweep_svg(&results))?;
    for r in &results {
        info!("p = {:.2}: mAP {:.4} +/- {:.4}", r.p, r.map_mean, r.map_std);
    }
    Ok(())
}
