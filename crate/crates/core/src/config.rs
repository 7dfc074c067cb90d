//! Pipeline-wide JSON configuration: named presets plus a partial JSON overlay.
//!
//! A config file is a JSON object whose optional `"preset"` key (`"desk"` or `"full"`, default
//! `"desk"`) selects the base; every other key is merged recursively over that base. Unknown keys
//! are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::gan::{DiscriminatorConfig, GeneratorConfig, LossWeights};
use crate::grid::{ObjectClass, RoiBounds};
use crate::gtaug::GtAugConfig;
use crate::metrics::{PoolOrder, SsimParams};
use crate::nn::AdamConfig;
use crate::obis::ObisConfig;
use crate::toyworld::ToyWorldConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Small ROI and narrow networks; trains in minutes on one core.
    Desk,
    /// Full sensor ROI and wider networks.
    Full,
}

/// LiDAR (`r_in`) and radar (`r_out`) voxel sizes in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolutions {
    pub r_in: f64,
    pub r_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub pool_order: PoolOrder,
    pub ssim: SsimParams,
    /// Gaussian sigma (radar voxels) of the blur baseline.
    pub blur_sigma: f64,
    /// Percentage of voxels kept by `sparsify`.
    pub sparsify_percent: f64,
    /// BEV IoU threshold for average precision.
    pub ap_iou: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            pool_order: PoolOrder::default(),
            ssim: SsimParams::default(),
            blur_sigma: 1.0,
            sparsify_percent: 7.0,
            ap_iou: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub roi: RoiBounds,
    pub resolutions: Resolutions,
    pub obis: ObisConfig,
    pub gtaug: GtAugConfig,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub loss_weights: LossWeights,
    pub optimizer: AdamConfig,
    pub epochs: usize,
    pub toyworld: ToyWorldConfig,
    pub metrics: MetricsConfig,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => {
                let roi = RoiBounds {
                    x_min: 0.0,
                    x_max: 9.6,
                    y_min: -4.8,
                    y_max: 4.8,
                    z_min: -2.0,
                    z_max: 1.2,
                };
                Self {
                    roi,
                    resolutions: Resolutions { r_in: 0.05, r_out: 0.4 },
                    obis: ObisConfig {
                        class_channels: ObjectClass::ALL.to_vec(),
                        ..Default::default()
                    },
                    gtaug: GtAugConfig::default(),
                    generator: GeneratorConfig {
                        base_channels: 4,
                        ..Default::default()
                    },
                    discriminator: DiscriminatorConfig {
                        base_channels: 8,
                        ..Default::default()
                    },
                    loss_weights: LossWeights::default(),
                    optimizer: AdamConfig::default(),
                    epochs: 40,
                    toyworld: ToyWorldConfig::default(),
                    metrics: MetricsConfig::default(),
                    seed: 0,
                }
            }
            Preset::Full => Self {
                roi: RoiBounds::kradar(),
                resolutions: Resolutions { r_in: 0.05, r_out: 0.4 },
                obis: ObisConfig {
                    class_channels: ObjectClass::ALL.to_vec(),
                    ..Default::default()
                },
                gtaug: GtAugConfig::default(),
                generator: GeneratorConfig::default(),
                discriminator: DiscriminatorConfig::default(),
                loss_weights: LossWeights::default(),
                optimizer: AdamConfig::default(),
                epochs: 40,
                toyworld: ToyWorldConfig {
                    scene: crate::toyworld::SceneSpec {
                        object_count: [4, 16],
                        classes: ObjectClass::ALL.to_vec(),
                        ..Default::default()
                    },
                    ..Default::default()
                },
                metrics: MetricsConfig::default(),
                seed: 0,
            },
        }
    }

    /// Parses a config document: preset selection, recursive merge, strict decoding, validation.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let overlay: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        let Value::Object(mut overlay) = overlay else {
            return Err(Error::Config("config must be a JSON object".into()));
        };
        let preset = match overlay.remove("preset") {
            None => Preset::Desk,
            Some(v) => serde_json::from_value(v).map_err(|e| Error::Config(format!("preset: {e}")))?,
        };
        propagate_resolutions(&mut overlay);
        let mut base = serde_json::to_value(Self::preset(preset))
            .map_err(|e| Error::Config(format!("cannot encode preset: {e}")))?;
        merge(&mut base, Value::Object(overlay));
        let cfg: Self = serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        self.roi.validate()?;
        let r = self.resolutions;
        if (self.generator.r_in - r.r_in).abs() > 1e-12 || (self.generator.r_out - r.r_out).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "generator resolutions ({}, {}) disagree with resolutions ({}, {})",
                self.generator.r_in, self.generator.r_out, r.r_in, r.r_out
            )));
        }
        self.roi.dims(r.r_in)?;
        self.roi.dims(r.r_out)?;
        self.obis.validate()?;
        self.gtaug.validate()?;
        self.generator.validate()?;
        self.loss_weights.validate()?;
        self.optimizer.validate()?;
        self.toyworld.validate()?;
        let m = &self.metrics;
        if !(m.blur_sigma > 0.0) || !(m.sparsify_percent > 0.0 && m.sparsify_percent <= 100.0) {
            return Err(Error::Config(
                "metrics.blur_sigma must be positive and metrics.sparsify_percent in (0, 100]".into(),
            ));
        }
        if !(m.ap_iou > 0.0 && m.ap_iou <= 1.0) {
            return Err(Error::Config(format!(
                "metrics.ap_iou must be in (0, 1], got {}",
                m.ap_iou
            )));
        }
        Ok(())
    }
}

/// Copies `resolutions` into the generator section unless the overlay sets those keys itself.
fn propagate_resolutions(overlay: &mut Map<String, Value>) {
    let Some(Value::Object(res)) = overlay.get("resolutions").cloned() else {
        return;
    };
    let generator = overlay.entry("generator").or_insert_with(|| Value::Object(Map::new()));
    if let Value::Object(g) = generator {
        for key in ["r_in", "r_out"] {
            if let Some(v) = res.get(key) {
                g.entry(key).or_insert_with(|| v.clone());
            }
        }
    }
}

/// Recursive object merge; non-object overlay values replace the base value.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
