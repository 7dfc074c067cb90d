//! Dataset loading and end-to-end training/evaluation driven by a [`PipelineConfig`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{MetricsConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::formats::{read_boxes, read_lpc, read_manifest, read_rdt, ManifestEntry, Split};
use crate::gan::{
    bev_scores, evaluate_generator, train, BlurBaseline, EpochRecord, Generator, GeneratorInput, Sample, Trainer,
};
use crate::grid::{
    bev_mean_pool, log_normalize_frame, voxelize, Box3D, DenseGrid3D, PointCloud, ScaleDomain, SparseVoxelGrid,
};
use crate::metrics::{metric_bev, psnr, ssim, PoolOrder};
use crate::obis::obis_augment;

/// One manifest row with its files loaded.
#[derive(Debug, Clone)]
pub struct Frame {
    pub id: String,
    pub split: Split,
    pub lidar: PointCloud,
    pub boxes: Vec<Box3D>,
    pub radar: Option<DenseGrid3D>,
}

/// Resolves a manifest-relative path.
pub fn manifest_path(manifest: &Path, rel: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join(rel)
}

/// Frame id: the LiDAR file stem.
pub fn frame_id(entry: &ManifestEntry) -> String {
    Path::new(&entry.lidar)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| entry.lidar.clone())
}

pub fn load_frame(manifest: &Path, entry: &ManifestEntry) -> Result<Frame> {
    Ok(Frame {
        id: frame_id(entry),
        split: entry.split,
        lidar: read_lpc(&manifest_path(manifest, &entry.lidar))?,
        boxes: match &entry.boxes {
            Some(b) => read_boxes(&manifest_path(manifest, b))?,
            None => Vec::new(),
        },
        radar: match &entry.radar {
            Some(r) => Some(read_rdt(&manifest_path(manifest, r))?),
            None => None,
        },
    })
}

pub fn load_frames(manifest: &Path) -> Result<Vec<Frame>> {
    read_manifest(manifest)?
        .iter()
        .map(|e| load_frame(manifest, e))
        .collect()
}

/// LiDAR (plus OBIS points when enabled) voxelized at `r_in` over the ROI.
pub fn model_input(pc: &PointCloud, boxes: &[Box3D], cfg: &PipelineConfig) -> Result<SparseVoxelGrid> {
    if cfg.obis.enabled {
        voxelize(&obis_augment(pc, boxes, &cfg.obis)?, &cfg.roi, cfg.resolutions.r_in)
    } else {
        voxelize(pc, &cfg.roi, cfg.resolutions.r_in)
    }
}

/// Brings a radar grid into the log-normalized training domain, rounded to the f32 precision
/// the networks see, so file-based evaluation matches in-training evaluation bit for bit.
pub fn normalized_radar(g: &DenseGrid3D) -> Result<DenseGrid3D> {
    let mut out = match g.scale_domain {
        ScaleDomain::RawPower => log_normalize_frame(g)?,
        ScaleDomain::LogNormalized => g.clone(),
    };
    out.values.iter_mut().for_each(|v| *v = *v as f32 as f64);
    Ok(out)
}

/// BEV PSNR and (when the map fits the window) SSIM between two radar grids of any domain.
pub fn image_scores(pred: &DenseGrid3D, target: &DenseGrid3D, m: &MetricsConfig) -> Result<(f64, Option<f64>)> {
    if pred.dims != target.dims {
        return Err(Error::Shape(format!(
            "prediction {:?} and target {:?} grids differ",
            pred.dims, target.dims
        )));
    }
    let (a, b) = match m.pool_order {
        PoolOrder::NormalizeThenPool => (
            bev_mean_pool(&normalized_radar(pred)?),
            bev_mean_pool(&normalized_radar(target)?),
        ),
        PoolOrder::PoolThenNormalize => (metric_bev(pred, m.pool_order)?, metric_bev(target, m.pool_order)?),
    };
    let p = psnr(&a, &b, 1.0)?;
    let w = m.ssim.window;
    let s = if a.rows >= w && a.cols >= w {
        Some(ssim(&a, &b, &m.ssim)?)
    } else {
        None
    };
    Ok((p, s))
}

/// Runs a generator on one LiDAR frame (plus boxes for OBIS) and returns its log-normalized
/// radar grid.
pub fn synthesize_frame(
    generator: &Generator<f32>,
    pc: &PointCloud,
    boxes: &[Box3D],
    cfg: &PipelineConfig,
) -> Result<DenseGrid3D> {
    let svg = model_input(pc, boxes, cfg)?;
    generator.synthesize(&GeneratorInput::from_grid(&svg)?)
}

pub fn frame_sample(frame: &Frame, cfg: &PipelineConfig) -> Result<Sample> {
    let radar = frame
        .radar
        .as_ref()
        .ok_or_else(|| Error::InvalidInput(format!("frame {} has no radar tensor", frame.id)))?;
    let svg = model_input(&frame.lidar, &frame.boxes, cfg)?;
    Sample::new(frame.id.clone(), &svg, &normalized_radar(radar)?)
}

/// Training pairs grouped by split.
#[derive(Debug, Clone, Default)]
pub struct PairedDataset {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl PairedDataset {
    pub fn load(manifest: &Path, cfg: &PipelineConfig) -> Result<Self> {
        let mut out = Self::default();
        for entry in read_manifest(manifest)? {
            let s = frame_sample(&load_frame(manifest, &entry)?, cfg)?;
            match entry.split {
                Split::Train => out.train.push(s),
                Split::Val => out.val.push(s),
                Split::Test => out.test.push(s),
            }
        }
        Ok(out)
    }

    /// Validation and test pairs together.
    pub fn held_out(&self) -> Vec<Sample> {
        self.val.iter().chain(&self.test).cloned().collect()
    }
}

/// Builds a trainer sized for `data` and runs `cfg.epochs` epochs.
pub fn train_on(
    cfg: &PipelineConfig,
    data: &PairedDataset,
    seed: u64,
    on_epoch: impl FnMut(&EpochRecord, &Trainer) -> Result<()>,
) -> Result<(Trainer, Vec<EpochRecord>)> {
    let first = data
        .train
        .first()
        .ok_or_else(|| Error::InvalidInput("dataset has no training pairs".into()))?;
    let mut trainer = Trainer::new(
        &cfg.generator,
        &cfg.discriminator,
        &cfg.loss_weights,
        &cfg.optimizer,
        first.input.channels,
        first.condition_channels,
        seed,
    )?;
    let records = train(&mut trainer, &data.train, &data.val, cfg.epochs, seed, on_epoch)?;
    Ok((trainer, records))
}

/// Held-out BEV scores of a trained generator next to the blur baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeldOutReport {
    pub count: usize,
    pub model_psnr: f64,
    pub model_ssim: Option<f64>,
    pub baseline_psnr: f64,
    pub baseline_ssim: Option<f64>,
    pub baseline_amplitude: f64,
}

pub fn held_out_report(trainer: &Trainer, data: &PairedDataset, cfg: &PipelineConfig) -> Result<HeldOutReport> {
    let held = data.held_out();
    let model = evaluate_generator(&trainer.generator, &held)?
        .ok_or_else(|| Error::InvalidInput("dataset has no held-out pairs".into()))?;
    let baseline = BlurBaseline::fit(&data.train, cfg.metrics.blur_sigma)?;
    let origin = cfg.roi.min();
    let (mut p, mut s, mut ns) = (0.0, 0.0, 0usize);
    for sample in &held {
        let pred = baseline.predict(sample, origin, cfg.resolutions.r_out);
        let (ps, ss) = bev_scores(&pred, &sample.target_grid(origin, cfg.resolutions.r_out))?;
        p += ps;
        if let Some(ss) = ss {
            s += ss;
            ns += 1;
        }
    }
    Ok(HeldOutReport {
        count: held.len(),
        model_psnr: model.psnr,
        model_ssim: model.ssim,
        baseline_psnr: p / held.len() as f64,
        baseline_ssim: (ns == held.len()).then(|| s / ns as f64),
        baseline_amplitude: baseline.amplitude,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toyworld::{generate_dataset, MANIFEST_FILE};

    fn tiny() -> PipelineConfig {
        PipelineConfig::from_json_str(r#"{"epochs": 1, "toyworld": {"num_scenes": 3, "n_train": 1, "n_val": 1}}"#)
            .unwrap()
    }

    #[test]
    fn dataset_loads_into_split_samples() {
        let cfg = tiny();
        let dir = tempfile::tempdir().unwrap();
        generate_dataset(dir.path(), &cfg.toyworld, &cfg.roi, cfg.resolutions.r_out, 3).unwrap();
        let data = PairedDataset::load(&dir.path().join(MANIFEST_FILE), &cfg).unwrap();
        assert_eq!((data.train.len(), data.val.len(), data.test.len()), (1, 1, 1));
        let s = &data.train[0];
        assert_eq!(s.target_dims, [24, 24, 8]);
        assert_eq!(s.input.channels, 2 + 1 + 4);
        assert!(s.target.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(s.target.iter().cloned().fold(0.0f32, f32::max), 1.0);

        let mut off = cfg.clone();
        off.obis.enabled = false;
        let plain = PairedDataset::load(&dir.path().join(MANIFEST_FILE), &off).unwrap();
        assert_eq!(plain.train[0].input.channels, 2);
    }

    #[test]
    fn one_epoch_runs_and_reports() {
        let cfg = tiny();
        let dir = tempfile::tempdir().unwrap();
        generate_dataset(dir.path(), &cfg.toyworld, &cfg.roi, cfg.resolutions.r_out, 4).unwrap();
        let data = PairedDataset::load(&dir.path().join(MANIFEST_FILE), &cfg).unwrap();
        let (trainer, recs) = train_on(&cfg, &data, 1, |_, _| Ok(())).unwrap();
        assert_eq!(recs.len(), 1);
        let rep = held_out_report(&trainer, &data, &cfg).unwrap();
        assert_eq!(rep.count, 2);
        assert!(rep.model_psnr.is_finite() && rep.baseline_psnr.is_finite());
    }
}
