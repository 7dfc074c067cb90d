//! Object information supplement.
//!
//! Enriches a LiDAR frame with points derived from box annotations:
//!
//! - *boundary points* sampled along the 12 edges of every box, flagged in an `edge` channel;
//! - *Gaussian points*: the box center plus Fibonacci-sphere shells scaled to the box
//!   half-extents, each carrying `exp(-0.5 * sum((d_i / sigma_i)^2))` (with `sigma_i = dim_i / 2`)
//!   in the channel of its object's class.
//!
//! All added points take the mean intensity of the original frame. Output order is fixed:
//! original points, then edge points for each box in input order, then Gaussian points for each
//! box in input order.

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Box3D, ObjectClass, PointCloud, BOX_EDGES};

pub const EDGE_CHANNEL: &str = "edge";

pub fn class_channel_name(class: ObjectClass) -> String {
    format!("class_{}", class.name())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObisConfig {
    /// Whether pipelines apply the supplement at all.
    pub enabled: bool,
    /// Spacing of boundary samples along each box edge, meters.
    pub edge_interval: f64,
    pub shells: usize,
    pub points_per_shell: usize,
    /// Shell radii as fractions of the per-axis half extents.
    pub shell_radii_fraction: Vec<f64>,
    pub class_channels: Vec<ObjectClass>,
}

impl Default for ObisConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            edge_interval: 0.1,
            shells: 4,
            points_per_shell: 64,
            shell_radii_fraction: vec![0.25, 0.5, 0.75, 1.0],
            class_channels: vec![ObjectClass::Sedan, ObjectClass::BusTruck],
        }
    }
}

impl ObisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.edge_interval > 0.0 && self.edge_interval.is_finite()) {
            return Err(Error::Config(format!(
                "obis.edge_interval must be positive, got {}",
                self.edge_interval
            )));
        }
        if self.shell_radii_fraction.len() != self.shells {
            return Err(Error::Config(format!(
                "obis.shells = {} but {} radii given",
                self.shells,
                self.shell_radii_fraction.len()
            )));
        }
        let radii = &self.shell_radii_fraction;
        if radii.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) || radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "obis.shell_radii_fraction must be strictly increasing within (0, 1]".into(),
            ));
        }
        if self.class_channels.is_empty() {
            return Err(Error::Config("obis.class_channels must not be empty".into()));
        }
        let unique: FxHashSet<_> = self.class_channels.iter().collect();
        if unique.len() != self.class_channels.len() {
            return Err(Error::Config("obis.class_channels has duplicates".into()));
        }
        Ok(())
    }

    fn class_slot(&self, class: ObjectClass) -> Result<usize> {
        self.class_channels.iter().position(|c| *c == class).ok_or_else(|| {
            Error::Config(format!(
                "class {} has no OBIS channel (configured: {:?})",
                class.name(),
                self.class_channels
            ))
        })
    }

    /// Channel names appended by [`obis_augment`], in order.
    pub fn added_channels(&self) -> Vec<String> {
        let mut names = vec![EDGE_CHANNEL.to_string()];
        names.extend(self.class_channels.iter().map(|c| class_channel_name(*c)));
        names
    }
}

/// Number of samples on an edge of `len` meters, both endpoints included.
fn edge_samples(len: f64, interval: f64) -> usize {
    let x = len / interval;
    let r = x.round();
    let steps = if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r
    } else {
        x.ceil()
    };
    steps.max(1.0) as usize + 1
}

/// Edge sample positions for one box in world coordinates, deduplicated on exact coincidence.
pub fn boundary_points(b: &Box3D, interval: f64) -> Vec<[f64; 3]> {
    let corners = b.local_corners();
    let mut seen: FxHashSet<[u64; 3]> = FxHashSet::default();
    let mut out = Vec::new();
    for (a, c) in BOX_EDGES {
        let (pa, pb) = (corners[a], corners[c]);
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2) + (pb[2] - pa[2]).powi(2)).sqrt();
        let n = edge_samples(len, interval);
        for i in 0..n {
            // endpoints are taken verbatim so shared corners coincide exactly
            let local = if i == 0 {
                pa
            } else if i == n - 1 {
                pb
            } else {
                let t = i as f64 / (n - 1) as f64;
                [
                    pa[0] + t * (pb[0] - pa[0]),
                    pa[1] + t * (pb[1] - pa[1]),
                    pa[2] + t * (pb[2] - pa[2]),
                ]
            };
            let w = b.to_world(local);
            if seen.insert(w.map(f64::to_bits)) {
                out.push(w);
            }
        }
    }
    out
}

/// Unit-sphere directions of a Fibonacci lattice with `n` points.
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Gaussian-shell points of one box as `(world position, channel value)`, center first.
pub fn gaussian_points(b: &Box3D, cfg: &ObisConfig) -> Vec<([f64; 3], f64)> {
    let h = b.half_extents();
    let dirs = fibonacci_sphere(cfg.points_per_shell);
    let mut out = Vec::with_capacity(1 + cfg.shells * cfg.points_per_shell);
    out.push((b.center, 1.0));
    for &f in &cfg.shell_radii_fraction {
        for d in &dirs {
            let local = [f * h[0] * d[0], f * h[1] * d[1], f * h[2] * d[2]];
            let q: f64 = (0..3).map(|a| (local[a] / h[a]).powi(2)).sum();
            out.push((b.to_world(local), (-0.5 * q).exp()));
        }
    }
    out
}

/// Appends box-edge points (edge channel 1, frame-mean intensity).
pub fn add_boundary_points(pc: &PointCloud, boxes: &[Box3D], cfg: &ObisConfig) -> Result<PointCloud> {
    cfg.validate()?;
    let mean = pc.mean_intensity();
    let mut out = pc.clone();
    append_boundary(&mut out, boxes, cfg, mean)?;
    Ok(out)
}

/// Appends Gaussian-shell points carrying per-class channel values.
pub fn add_gaussian_points(pc: &PointCloud, boxes: &[Box3D], cfg: &ObisConfig) -> Result<PointCloud> {
    cfg.validate()?;
    let mean = pc.mean_intensity();
    let mut out = pc.clone();
    append_gaussian(&mut out, boxes, cfg, mean)?;
    Ok(out)
}

/// Both supplements; output schema = original channels + `edge` + one channel per class.
pub fn obis_augment(pc: &PointCloud, boxes: &[Box3D], cfg: &ObisConfig) -> Result<PointCloud> {
    cfg.validate()?;
    for b in boxes {
        cfg.class_slot(b.class)?;
    }
    let mean = pc.mean_intensity();
    let mut out = pc.clone();
    for name in cfg.added_channels() {
        out.ensure_channel(&name);
    }
    append_boundary(&mut out, boxes, cfg, mean)?;
    append_gaussian(&mut out, boxes, cfg, mean)?;
    Ok(out)
}

fn append_boundary(out: &mut PointCloud, boxes: &[Box3D], cfg: &ObisConfig, mean: f64) -> Result<()> {
    let edge = out.ensure_channel(EDGE_CHANNEL);
    let mut row = vec![0.0; out.channels().len()];
    row[edge] = 1.0;
    for b in boxes {
        b.validate()?;
        for p in boundary_points(b, cfg.edge_interval) {
            out.push(p, mean, &row)?;
        }
    }
    Ok(())
}

fn append_gaussian(out: &mut PointCloud, boxes: &[Box3D], cfg: &ObisConfig, mean: f64) -> Result<()> {
    let slots: Vec<usize> = cfg
        .class_channels
        .iter()
        .map(|c| out.ensure_channel(&class_channel_name(*c)))
        .collect();
    let mut row = vec![0.0; out.channels().len()];
    for b in boxes {
        b.validate()?;
        let ch = slots[cfg.class_slot(b.class)?];
        for (p, v) in gaussian_points(b, cfg) {
            row[ch] = v;
            out.push(p, mean, &row)?;
        }
        row[ch] = 0.0;
    }
    Ok(())
}
