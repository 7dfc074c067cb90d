//! Paired toy dataset generation: per scene an LPC1 cloud, an RDT1 radar tensor and a box file,
//! tied together by a JSON-lines manifest.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lidar::{lidar_sample, LidarConfig};
use super::radar::{radar_truth, RadarForwardConfig};
use super::scene::{generate_scene, Scene, SceneSpec};
use crate::error::{Error, Result};
use crate::formats::{write_boxes, write_lpc, write_manifest, write_rdt, ManifestEntry, Split};
use crate::grid::{DenseGrid3D, PointCloud, RoiBounds};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyWorldConfig {
    pub num_scenes: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub scene: SceneSpec,
    pub lidar: LidarConfig,
    pub radar: RadarForwardConfig,
}

impl Default for ToyWorldConfig {
    fn default() -> Self {
        Self {
            num_scenes: 64,
            n_train: 16,
            n_val: 8,
            scene: SceneSpec::default(),
            lidar: LidarConfig::default(),
            radar: RadarForwardConfig::default(),
        }
    }
}

impl ToyWorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_train + self.n_val > self.num_scenes {
            return Err(Error::Config(format!(
                "toyworld split {} train + {} val exceeds {} scenes",
                self.n_train, self.n_val, self.num_scenes
            )));
        }
        self.scene.validate()?;
        self.lidar.validate()?;
        self.radar.validate()
    }

    pub fn split_of(&self, index: usize) -> Split {
        if index < self.n_train {
            Split::Train
        } else if index < self.n_train + self.n_val {
            Split::Val
        } else {
            Split::Test
        }
    }
}

/// One simulated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyFrame {
    pub scene: Scene,
    pub lidar: PointCloud,
    pub radar: DenseGrid3D,
}

/// Simulates one frame; the three stages draw from independent streams derived from `seed`.
pub fn simulate_frame(cfg: &ToyWorldConfig, roi: &RoiBounds, r_out: f64, seed: u64) -> Result<ToyFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (s_scene, s_lidar, s_radar) = (rng.random(), rng.random(), rng.random());
    let scene = generate_scene(&cfg.scene, roi, s_scene)?;
    let lidar = lidar_sample(&scene, &cfg.lidar, s_lidar)?;
    let radar = radar_truth(&scene, &cfg.radar, roi, r_out, s_radar)?;
    Ok(ToyFrame { scene, lidar, radar })
}

/// Writes `num_scenes` frames plus the manifest into `dir`; returns the manifest rows.
pub fn generate_dataset(
    dir: &Path,
    cfg: &ToyWorldConfig,
    roi: &RoiBounds,
    r_out: f64,
    seed: u64,
) -> Result<Vec<ManifestEntry>> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(cfg.num_scenes);
    for i in 0..cfg.num_scenes {
        let frame = simulate_frame(cfg, roi, r_out, rng.random())?;
        let stem = format!("scene_{i:04}");
        let entry = ManifestEntry {
            lidar: format!("{stem}.lpc"),
            radar: Some(format!("{stem}.rdt")),
            boxes: Some(format!("{stem}.boxes.jsonl")),
            split: cfg.split_of(i),
        };
        write_lpc(&dir.join(&entry.lidar), &frame.lidar)?;
        write_rdt(&dir.join(entry.radar.as_deref().unwrap_or_default()), &frame.radar)?;
        write_boxes(
            &dir.join(entry.boxes.as_deref().unwrap_or_default()),
            &frame.scene.boxes,
        )?;
        entries.push(entry);
    }
    write_manifest(&dir.join(MANIFEST_FILE), &entries)?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{read_boxes, read_lpc, read_manifest, read_rdt};

    #[test]
    fn dataset_round_trips_and_is_seeded() {
        let roi = RoiBounds::new([0.0, 9.6], [-4.8, 4.8], [-2.0, 1.2]).unwrap();
        let cfg = ToyWorldConfig {
            num_scenes: 3,
            n_train: 1,
            n_val: 1,
            ..Default::default()
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let rows = generate_dataset(a.path(), &cfg, &roi, 0.4, 11).unwrap();
        generate_dataset(b.path(), &cfg, &roi, 0.4, 11).unwrap();
        assert_eq!(read_manifest(&a.path().join(MANIFEST_FILE)).unwrap(), rows);
        assert_eq!(
            rows.iter().map(|r| r.split).collect::<Vec<_>>(),
            vec![Split::Train, Split::Val, Split::Test]
        );
        for r in &rows {
            for name in [&r.lidar, r.radar.as_ref().unwrap(), r.boxes.as_ref().unwrap()] {
                let x = std::fs::read(a.path().join(name)).unwrap();
                assert_eq!(x, std::fs::read(b.path().join(name)).unwrap());
            }
            let radar = read_rdt(&a.path().join(r.radar.as_ref().unwrap())).unwrap();
            assert_eq!(radar.dims, [24, 24, 8]);
            assert!(!read_lpc(&a.path().join(&r.lidar)).unwrap().is_empty());
            read_boxes(&a.path().join(r.boxes.as_ref().unwrap())).unwrap();
        }
    }
}
