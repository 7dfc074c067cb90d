//! Subcommand implementations. Each returns the JSON text printed on stdout.

use std::path::Path;

use radsynth_core::config::PipelineConfig;
use radsynth_core::formats::{
    read_boxes, read_jsonl, read_lpc, read_rdt, write_boxes, write_file, write_jsonl, write_lpc, write_manifest,
    write_rdt, ManifestEntry, Split,
};
use radsynth_core::gan::{model_gradcheck, Generator};
use radsynth_core::grid::{log_denormalize, percentile_sparsify, voxelize, PointCloud, ScaleDomain};
use radsynth_core::gtaug::{augment_frames, build_bank, write_bank};
use radsynth_core::metrics::{
    average_precision, center_shift_study, group_ground_truth, metric_bev, DetectionRecord, GroundTruthRecord,
};
use radsynth_core::nn::{op_gradcheck_suite, ParamStore};
use radsynth_core::obis::obis_augment;
use radsynth_core::pipeline::{held_out_report, image_scores, load_frames, synthesize_frame, train_on, PairedDataset};
use radsynth_core::toyworld::{generate_dataset, MANIFEST_FILE};
use serde_json::json;

use crate::render::render_ppm;
use crate::runlog::{hash_file, hash_named, RunLog};
use crate::{Cli, CliError, Command, Common, MetricsMode};

type CliResult<T> = Result<T, CliError>;

pub const RUN_LOG: &str = "run.json";
pub const EPOCH_LOG: &str = "epochs.jsonl";
pub const GENERATOR_CKPT: &str = "generator.ckp";
pub const DISCRIMINATOR_CKPT: &str = "discriminator.ckp";
/// Gradient checks pass below this relative error.
pub const GRADCHECK_TOL: f64 = 1e-4;

pub fn load_config(common: &Common) -> CliResult<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::from_json_str("{}")?,
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_path(common: &Common) -> CliResult<&Path> {
    common
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("this subcommand requires --out".into()))
}

/// Hashes `names` inside `dir` and writes the run log there as well.
fn finish_dir(dir: &Path, mut log: RunLog, names: &[String]) -> CliResult<String> {
    for n in names {
        log.outputs.push(hash_file(&dir.join(n), n.clone())?);
    }
    let text = log.to_json();
    write_file(&dir.join(RUN_LOG), text.as_bytes())?;
    Ok(text)
}

fn finish_file(out: &Path, mut log: RunLog) -> CliResult<String> {
    log.outputs.push(hash_named(out)?);
    Ok(log.to_json())
}

/// Writes the JSON report to `--out` when given and returns it for stdout.
fn emit_report(common: &Common, value: serde_json::Value) -> CliResult<String> {
    let text = serde_json::to_string_pretty(&value).unwrap_or_default() + "\n";
    if let Some(out) = &common.out {
        write_file(out, text.as_bytes())?;
    }
    Ok(text)
}

pub fn dispatch(cli: &Cli) -> CliResult<String> {
    let common = &cli.common;
    let cfg = load_config(common)?;
    match &cli.command {
        Command::GenScenes => gen_scenes(common, &cfg),
        Command::Voxelize { input } => voxelize_cmd(common, &cfg, input),
        Command::Obis { input, boxes } => obis_cmd(common, &cfg, input, boxes),
        Command::Gtaug { manifest } => gtaug_cmd(common, &cfg, manifest),
        Command::Train { manifest } => train_cmd(common, &cfg, manifest),
        Command::Synth {
            checkpoint,
            input,
            boxes,
        } => synth_cmd(common, &cfg, checkpoint, input, boxes.as_deref()),
        Command::Sparsify { input, k, v_ref } => sparsify_cmd(common, &cfg, input, *k, *v_ref),
        Command::Metrics { mode } => metrics_cmd(common, &cfg, mode),
        Command::Bev { input } => bev_cmd(common, &cfg, input),
        Command::CenterShift { n, resolutions } => center_shift_cmd(common, &cfg, *n, resolutions),
        Command::Gradcheck { seeds } => gradcheck_cmd(common, &cfg, *seeds),
    }
}

fn gen_scenes(common: &Common, cfg: &PipelineConfig) -> CliResult<String> {
    let dir = out_path(common)?;
    let entries = generate_dataset(dir, &cfg.toyworld, &cfg.roi, cfg.resolutions.r_out, cfg.seed)?;
    let mut names = Vec::new();
    for e in &entries {
        names.push(e.lidar.clone());
        names.extend(e.radar.clone());
        names.extend(e.boxes.clone());
    }
    names.push(MANIFEST_FILE.to_string());
    let mut log = RunLog::new("gen-scenes", cfg);
    log.summary = json!({ "scenes": entries.len() });
    finish_dir(dir, log, &names)
}

fn voxelize_cmd(common: &Common, cfg: &PipelineConfig, input: &Path) -> CliResult<String> {
    let out = out_path(common)?;
    let pc = read_lpc(input)?;
    let svg = voxelize(&pc, &cfg.roi, cfg.resolutions.r_in)?;
    // feature layout: occupancy, intensity, aux...
    let mut channels = vec![svg.channels()[0].clone()];
    channels.extend(svg.channels()[2..].iter().cloned());
    let mut cloud = PointCloud::with_capacity(channels, svg.len());
    for (i, c) in svg.coords().iter().enumerate() {
        let f = svg.feature(i);
        let mut aux = vec![f[0] as f64];
        aux.extend(f[2..].iter().map(|v| *v as f64));
        cloud.push(svg.voxel_center(*c), f[1] as f64, &aux)?;
    }
    write_lpc(out, &cloud)?;
    let mut log = RunLog::new("voxelize", cfg);
    log.inputs.push(hash_named(input)?);
    log.summary = json!({ "points": pc.len(), "voxels": svg.len(), "dims": svg.dims });
    finish_file(out, log)
}

fn obis_cmd(common: &Common, cfg: &PipelineConfig, input: &Path, boxes: &Path) -> CliResult<String> {
    let out = out_path(common)?;
    let pc = read_lpc(input)?;
    let b = read_boxes(boxes)?;
    let aug = obis_augment(&pc, &b, &cfg.obis)?;
    write_lpc(out, &aug)?;
    let mut log = RunLog::new("obis", cfg);
    log.inputs.push(hash_named(input)?);
    log.inputs.push(hash_named(boxes)?);
    log.summary = json!({ "input_points": pc.len(), "output_points": aug.len(), "boxes": b.len() });
    finish_file(out, log)
}

fn gtaug_cmd(common: &Common, cfg: &PipelineConfig, manifest: &Path) -> CliResult<String> {
    let dir = out_path(common)?;
    let frames: Vec<_> = load_frames(manifest)?
        .into_iter()
        .filter(|f| f.split == Split::Train)
        .collect();
    let bank_input: Vec<_> = frames
        .iter()
        .map(|f| (f.id.clone(), f.lidar.clone(), f.boxes.clone()))
        .collect();
    let bank = build_bank(&bank_input, cfg.gtaug.min_points);
    let bank_dir = dir.join("bank");
    std::fs::create_dir_all(&bank_dir).map_err(|source| radsynth_core::Error::Io {
        path: bank_dir.clone(),
        source,
    })?;
    write_bank(&bank_dir, &bank)?;
    let pairs: Vec<_> = frames.iter().map(|f| (f.lidar.clone(), f.boxes.clone())).collect();
    let augmented = augment_frames(&pairs, &bank, &cfg.roi, &cfg.gtaug, cfg.seed)?;
    let mut entries = Vec::new();
    let mut names = Vec::new();
    let mut inserted = 0;
    for (f, (pc, boxes, rep)) in frames.iter().zip(&augmented) {
        let e = ManifestEntry {
            lidar: format!("{}_aug.lpc", f.id),
            radar: None,
            boxes: Some(format!("{}_aug.boxes.jsonl", f.id)),
            split: Split::Train,
        };
        write_lpc(&dir.join(&e.lidar), pc)?;
        write_boxes(&dir.join(e.boxes.as_deref().unwrap_or_default()), boxes)?;
        names.push(e.lidar.clone());
        names.extend(e.boxes.clone());
        inserted += rep.inserted;
        entries.push(e);
    }
    write_manifest(&dir.join(MANIFEST_FILE), &entries)?;
    names.push(MANIFEST_FILE.to_string());
    names.push("bank/index.jsonl".to_string());
    let mut log = RunLog::new("gtaug", cfg);
    log.inputs.push(hash_named(manifest)?);
    log.summary = json!({
        "frames": frames.len(),
        "bank_entries": bank.len(),
        "requested": cfg.gtaug.n_insert * frames.len(),
        "inserted": inserted,
    });
    finish_dir(dir, log, &names)
}

fn train_cmd(common: &Common, cfg: &PipelineConfig, manifest: &Path) -> CliResult<String> {
    let dir = out_path(common)?;
    let data = PairedDataset::load(manifest, cfg)?;
    let mut lines = Vec::new();
    let (trainer, records) = train_on(cfg, &data, cfg.seed, |rec, _| {
        lines.push(rec.clone());
        Ok(())
    })?;
    write_jsonl(&dir.join(EPOCH_LOG), &lines)?;
    trainer.generator.store.save(&dir.join(GENERATOR_CKPT))?;
    let mut names = vec![EPOCH_LOG.to_string(), GENERATOR_CKPT.to_string()];
    if let Some(d) = &trainer.discriminator {
        d.store.save(&dir.join(DISCRIMINATOR_CKPT))?;
        names.push(DISCRIMINATOR_CKPT.to_string());
    }
    let held = if data.val.is_empty() && data.test.is_empty() {
        None
    } else {
        Some(held_out_report(&trainer, &data, cfg)?)
    };
    let mut log = RunLog::new("train", cfg);
    log.inputs.push(hash_named(manifest)?);
    log.summary = json!({
        "train_pairs": data.train.len(),
        "val_pairs": data.val.len(),
        "test_pairs": data.test.len(),
        "epochs": records.len(),
        "final": records.last(),
        "held_out": held,
    });
    finish_dir(dir, log, &names)
}

fn synth_cmd(
    common: &Common,
    cfg: &PipelineConfig,
    checkpoint: &Path,
    input: &Path,
    boxes: Option<&Path>,
) -> CliResult<String> {
    let out = out_path(common)?;
    let pc = read_lpc(input)?;
    let b = match boxes {
        Some(p) => read_boxes(p)?,
        None => Vec::new(),
    };
    let in_channels = radsynth_core::pipeline::model_input(&pc, &b, cfg)?.num_channels();
    let mut generator = Generator::<f32>::new(&cfg.generator, in_channels, cfg.seed)?;
    generator.store.load_from(&ParamStore::load(checkpoint)?)?;
    let grid = synthesize_frame(&generator, &pc, &b, cfg)?;
    write_rdt(out, &grid)?;
    let mut log = RunLog::new("synth", cfg);
    log.inputs.push(hash_named(checkpoint)?);
    log.inputs.push(hash_named(input)?);
    if let Some(p) = boxes {
        log.inputs.push(hash_named(p)?);
    }
    log.summary = json!({ "dims": grid.dims, "resolution": grid.resolution });
    finish_file(out, log)
}

fn sparsify_cmd(common: &Common, cfg: &PipelineConfig, input: &Path, k: Option<f64>, v_ref: f64) -> CliResult<String> {
    let out = out_path(common)?;
    let mut g = read_rdt(input)?;
    if g.scale_domain == ScaleDomain::LogNormalized {
        g = log_denormalize(&g, v_ref)?;
    }
    let k = k.unwrap_or(cfg.metrics.sparsify_percent);
    let pc = percentile_sparsify(&g, k)?;
    write_lpc(out, &pc)?;
    let mut log = RunLog::new("sparsify", cfg);
    log.inputs.push(hash_named(input)?);
    log.summary = json!({ "cells": g.len(), "k_percent": k, "points": pc.len() });
    finish_file(out, log)
}

fn metrics_cmd(common: &Common, cfg: &PipelineConfig, mode: &MetricsMode) -> CliResult<String> {
    match mode {
        MetricsMode::Image { pred, target } => {
            let (p, s) = image_scores(&read_rdt(pred)?, &read_rdt(target)?, &cfg.metrics)?;
            emit_report(
                common,
                json!({
                    "mode": "image",
                    "pred": hash_named(pred)?,
                    "target": hash_named(target)?,
                    "pool_order": cfg.metrics.pool_order,
                    "psnr": p,
                    "ssim": s,
                }),
            )
        }
        MetricsMode::Ap {
            detections,
            ground_truth,
            iou,
            iou_mode,
        } => {
            let dets: Vec<DetectionRecord> = read_jsonl(detections)?;
            let gts: Vec<GroundTruthRecord> = read_jsonl(ground_truth)?;
            let thresh = iou.unwrap_or(cfg.metrics.ap_iou);
            let report = average_precision(&dets, &group_ground_truth(&gts), thresh, (*iou_mode).into())?;
            emit_report(
                common,
                json!({
                    "mode": "ap",
                    "iou_threshold": thresh,
                    "ap": report.ap,
                    "num_gt": report.num_gt,
                    "num_det": report.num_det,
                    "true_positives": report.true_positives,
                    "false_positives": report.false_positives,
                    "curve": report.curve,
                }),
            )
        }
    }
}

fn bev_cmd(common: &Common, cfg: &PipelineConfig, input: &Path) -> CliResult<String> {
    let out = out_path(common)?;
    let map = metric_bev(&read_rdt(input)?, cfg.metrics.pool_order)?;
    write_file(out, &render_ppm(&map))?;
    let mut log = RunLog::new("bev", cfg);
    log.inputs.push(hash_named(input)?);
    log.summary = json!({ "width": map.cols, "height": map.rows });
    finish_file(out, log)
}

fn center_shift_cmd(common: &Common, cfg: &PipelineConfig, n: usize, resolutions: &[f64]) -> CliResult<String> {
    let rows = center_shift_study(n, resolutions, cfg.seed)?;
    let finest = rows.iter().min_by(|a, b| a.resolution.total_cmp(&b.resolution));
    let coarsest = rows.iter().max_by(|a, b| a.resolution.total_cmp(&b.resolution));
    let ratio = match (finest, coarsest) {
        (Some(f), Some(c)) if f.mean_shift > 0.0 => Some(c.mean_shift / f.mean_shift),
        _ => None,
    };
    emit_report(
        common,
        json!({ "objects": n, "seed": cfg.seed, "rows": rows, "coarsest_over_finest": ratio }),
    )
}

fn gradcheck_cmd(common: &Common, cfg: &PipelineConfig, seeds: u64) -> CliResult<String> {
    let mut per_op: Vec<(String, f64, usize, usize)> = Vec::new();
    let mut model = (0.0f64, 0usize, 0usize);
    for s in 0..seeds {
        let seed = cfg.seed.wrapping_add(s);
        for c in op_gradcheck_suite(seed)? {
            match per_op.iter_mut().find(|e| e.0 == c.op) {
                Some(e) => {
                    e.1 = e.1.max(c.report.max_rel_err);
                    e.2 += c.report.checked;
                    e.3 += c.report.skipped;
                }
                None => per_op.push((
                    c.op.to_string(),
                    c.report.max_rel_err,
                    c.report.checked,
                    c.report.skipped,
                )),
            }
        }
        let m = model_gradcheck(seed)?;
        model = (model.0.max(m.max_rel_err), model.1 + m.checked, model.2 + m.skipped);
    }
    let failed: Vec<&str> = per_op
        .iter()
        .filter(|e| !(e.1 < GRADCHECK_TOL) || e.2 == 0)
        .map(|e| e.0.as_str())
        .chain((!(model.0 < GRADCHECK_TOL) || model.1 == 0).then_some("model"))
        .collect();
    let ops: Vec<_> = per_op
        .iter()
        .map(|e| json!({ "op": e.0, "max_rel_err": e.1, "checked": e.2, "skipped": e.3 }))
        .collect();
    let text = emit_report(
        common,
        json!({
            "seeds": seeds,
            "tolerance": GRADCHECK_TOL,
            "ops": ops,
            "model": { "max_rel_err": model.0, "checked": model.1, "skipped": model.2 },
            "passed": failed.is_empty(),
        }),
    )?;
    if failed.is_empty() {
        Ok(text)
    } else {
        Err(CliError::CheckFailed(format!("gradient check failed for {failed:?}")))
    }
}
