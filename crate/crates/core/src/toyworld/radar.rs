//! Physics-flavoured radar forward model: surface samples deposit `rcs * dA / r^alpha` into a
//! polar grid, a separable PSF blurs it in (range, azimuth, elevation), and the result is
//! resampled onto Cartesian voxels with a clutter floor and optional speckle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::scene::Scene;
use crate::error::{Error, Result};
use crate::grid::{
    fov_mask, gaussian_blur_separable, polar_to_cartesian, to_polar, AxisBins, DenseGrid3D, ObjectClass, PolarGrid3D,
    RoiBounds,
};

/// Radar cross-section per unit surface area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RcsTable {
    pub sedan: f64,
    pub bus_truck: f64,
    pub pedestrian: f64,
    pub cyclist: f64,
    pub ground: f64,
    pub wall: f64,
}

impl Default for RcsTable {
    fn default() -> Self {
        Self {
            sedan: 10.0,
            bus_truck: 20.0,
            pedestrian: 1.0,
            cyclist: 2.0,
            ground: 0.01,
            wall: 1.0,
        }
    }
}

impl RcsTable {
    pub fn class(&self, class: ObjectClass) -> f64 {
        match class {
            ObjectClass::Sedan => self.sedan,
            ObjectClass::BusTruck => self.bus_truck,
            ObjectClass::Pedestrian => self.pedestrian,
            ObjectClass::Cyclist => self.cyclist,
        }
    }

    fn all(&self) -> [f64; 6] {
        [
            self.sedan,
            self.bus_truck,
            self.pedestrian,
            self.cyclist,
            self.ground,
            self.wall,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarForwardConfig {
    pub position: [f64; 3],
    /// Range exponent of the `1 / r^alpha` falloff.
    pub alpha: f64,
    pub sigma_range: f64,
    pub sigma_azimuth_deg: f64,
    pub sigma_elevation_deg: f64,
    /// Power added to every voxel inside the field of view.
    pub clutter_floor: f64,
    /// Multiplies every voxel by an independent Exp(1) draw.
    pub speckle: bool,
    pub rcs: RcsTable,
    pub power_scale: f64,
    /// Surface sampling pitch (m).
    pub sample_spacing: f64,
    /// Ranges below this are clamped to avoid the `r -> 0` singularity.
    pub min_range: f64,
    pub range_step: f64,
    pub azimuth_step_deg: f64,
    pub elevation_step_deg: f64,
    /// Half-width of the azimuth field of view.
    pub azimuth_half_fov_deg: f64,
}

impl Default for RadarForwardConfig {
    fn default() -> Self {
        Self {
            position: [0.0; 3],
            alpha: 2.0,
            sigma_range: 0.3,
            sigma_azimuth_deg: 1.2,
            sigma_elevation_deg: 2.0,
            clutter_floor: 1e3,
            speckle: false,
            rcs: RcsTable::default(),
            power_scale: 4e15,
            sample_spacing: 0.1,
            min_range: 0.5,
            range_step: 0.1,
            azimuth_step_deg: 1.0,
            elevation_step_deg: 2.0,
            azimuth_half_fov_deg: 92.0,
        }
    }
}

impl RadarForwardConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.sigma_range,
            self.sigma_azimuth_deg,
            self.sigma_elevation_deg,
            self.power_scale,
            self.sample_spacing,
            self.min_range,
            self.range_step,
            self.azimuth_step_deg,
            self.elevation_step_deg,
            self.azimuth_half_fov_deg,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(
                "toyworld.radar sigmas, steps and scales must be positive".into(),
            ));
        }
        if !(self.alpha >= 0.0) || !(self.clutter_floor >= 0.0) {
            return Err(Error::Config(
                "toyworld.radar alpha and clutter_floor must be >= 0".into(),
            ));
        }
        if self.rcs.all().iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("toyworld.radar rcs values must be >= 0".into()));
        }
        Ok(())
    }

    /// Polar bins covering the ROI (as seen from the sensor) plus a 3σ range margin.
    pub fn polar_bins(&self, roi: &RoiBounds) -> Result<[AxisBins; 3]> {
        let mut max_r: f64 = 0.0;
        for x in [roi.x_min, roi.x_max] {
            for y in [roi.y_min, roi.y_max] {
                for z in [roi.z_min, roi.z_max] {
                    let d = [x - self.position[0], y - self.position[1], z - self.position[2]];
                    max_r = max_r.max((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
                }
            }
        }
        let max_r = max_r + 3.0 * self.sigma_range;
        let n_r = (max_r / self.range_step).ceil() as usize + 1;
        let half_az = self.azimuth_half_fov_deg;
        let n_az = (2.0 * half_az / self.azimuth_step_deg).round() as usize + 1;
        let n_el = (180.0 / self.elevation_step_deg).round() as usize + 1;
        Ok([
            AxisBins::new(0.0, self.range_step, n_r)?,
            AxisBins::new(-half_az.to_radians(), self.azimuth_step_deg.to_radians(), n_az)?,
            AxisBins::new(-90f64.to_radians(), self.elevation_step_deg.to_radians(), n_el)?,
        ])
    }
}

/// Point reflector at `position` with weight `rcs * area` (area 1 for point targets).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub position: [f64; 3],
    pub weight: f64,
}

fn sample_rect(corner: [f64; 3], u: [f64; 3], v: [f64; 3], rcs: f64, spacing: f64, out: &mut Vec<SurfaceSample>) {
    let len = |a: [f64; 3]| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let (lu, lv) = (len(u), len(v));
    if lu == 0.0 || lv == 0.0 || rcs == 0.0 {
        return;
    }
    let (nu, nv) = (
        (lu / spacing).ceil().max(1.0) as usize,
        (lv / spacing).ceil().max(1.0) as usize,
    );
    let weight = rcs * lu * lv / (nu * nv) as f64;
    for i in 0..nu {
        let a = (i as f64 + 0.5) / nu as f64;
        for j in 0..nv {
            let b = (j as f64 + 0.5) / nv as f64;
            out.push(SurfaceSample {
                position: [
                    corner[0] + a * u[0] + b * v[0],
                    corner[1] + a * u[1] + b * v[1],
                    corner[2] + a * u[2] + b * v[2],
                ],
                weight,
            });
        }
    }
}

/// Midpoint samples of every reflecting surface: ground over the ROI footprint, walls, the five
/// visible faces of each box (not the bottom) and the point targets. No occlusion is modelled.
pub fn surface_samples(scene: &Scene, cfg: &RadarForwardConfig, roi: &RoiBounds) -> Vec<SurfaceSample> {
    let mut out = Vec::new();
    let h = cfg.sample_spacing;
    if let Some(gz) = scene.ground_z {
        sample_rect(
            [roi.x_min, roi.y_min, gz],
            [roi.x_max - roi.x_min, 0.0, 0.0],
            [0.0, roi.y_max - roi.y_min, 0.0],
            cfg.rcs.ground,
            h,
            &mut out,
        );
        for w in &scene.walls {
            sample_rect(
                [w.start[0], w.start[1], gz],
                [w.end[0] - w.start[0], w.end[1] - w.start[1], 0.0],
                [0.0, 0.0, w.height],
                cfg.rcs.wall,
                h,
                &mut out,
            );
        }
    }
    for b in &scene.boxes {
        let rcs = cfg.rcs.class(b.class);
        let e = b.half_extents();
        let w = |l: [f64; 3]| b.to_world(l);
        let sub = |a: [f64; 3], c: [f64; 3]| [a[0] - c[0], a[1] - c[1], a[2] - c[2]];
        // (corner, edge-u end, edge-v end) in the box frame
        let faces = [
            ([e[0], -e[1], -e[2]], [e[0], e[1], -e[2]], [e[0], -e[1], e[2]]),
            ([-e[0], -e[1], -e[2]], [-e[0], e[1], -e[2]], [-e[0], -e[1], e[2]]),
            ([-e[0], e[1], -e[2]], [e[0], e[1], -e[2]], [-e[0], e[1], e[2]]),
            ([-e[0], -e[1], -e[2]], [e[0], -e[1], -e[2]], [-e[0], -e[1], e[2]]),
            ([-e[0], -e[1], e[2]], [e[0], -e[1], e[2]], [-e[0], e[1], e[2]]),
        ];
        for (c, u, v) in faces {
            let c = w(c);
            sample_rect(c, sub(w(u), c), sub(w(v), c), rcs, h, &mut out);
        }
    }
    for t in &scene.targets {
        out.push(SurfaceSample {
            position: t.position,
            weight: t.rcs,
        });
    }
    out
}

/// Received power of one sample before any blur.
pub fn sample_power(s: &SurfaceSample, cfg: &RadarForwardConfig) -> f64 {
    let d = [
        s.position[0] - cfg.position[0],
        s.position[1] - cfg.position[1],
        s.position[2] - cfg.position[2],
    ];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(cfg.min_range);
    cfg.power_scale * s.weight / r.powf(cfg.alpha)
}

/// Polar power field before the PSF: every sample splatted trilinearly at its polar position.
pub fn deposit(scene: &Scene, cfg: &RadarForwardConfig, roi: &RoiBounds) -> Result<PolarGrid3D> {
    cfg.validate()?;
    let [r, a, e] = cfg.polar_bins(roi)?;
    let mut pg = PolarGrid3D::zeros(r, a, e);
    for s in surface_samples(scene, cfg, roi) {
        let rel = [
            s.position[0] - cfg.position[0],
            s.position[1] - cfg.position[1],
            s.position[2] - cfg.position[2],
        ];
        pg.splat(to_polar(rel), sample_power(&s, cfg));
    }
    Ok(pg)
}

/// Applies the separable Gaussian PSF in polar index space.
pub fn apply_psf(pg: &PolarGrid3D, cfg: &RadarForwardConfig) -> PolarGrid3D {
    let sig = [
        cfg.sigma_range / pg.range.step,
        cfg.sigma_azimuth_deg.to_radians() / pg.azimuth.step,
        cfg.sigma_elevation_deg.to_radians() / pg.elevation.step,
    ];
    PolarGrid3D {
        values: gaussian_blur_separable(&pg.values, pg.dims(), sig),
        ..pg.clone()
    }
}

/// Ground-truth raw-power radar tensor on the `resolution` grid over `roi`. The seed only drives
/// speckle.
pub fn radar_truth(
    scene: &Scene,
    cfg: &RadarForwardConfig,
    roi: &RoiBounds,
    resolution: f64,
    seed: u64,
) -> Result<DenseGrid3D> {
    let pg = apply_psf(&deposit(scene, cfg, roi)?, cfg);
    let shifted = shifted_roi(roi, cfg.position)?;
    let mut g = polar_to_cartesian(&pg, &shifted, resolution)?;
    g.origin = [roi.x_min, roi.y_min, roi.z_min];
    let mask = fov_mask(&pg, &shifted, resolution)?;
    for (v, m) in g.values.iter_mut().zip(&mask) {
        if *m {
            *v += cfg.clutter_floor;
        }
    }
    if cfg.speckle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in g.values.iter_mut() {
            let s: f64 = Exp1.sample(&mut rng);
            *v *= s;
        }
    }
    Ok(g)
}

/// The ROI expressed in sensor-centred coordinates.
fn shifted_roi(roi: &RoiBounds, p: [f64; 3]) -> Result<RoiBounds> {
    RoiBounds::new(
        [roi.x_min - p[0], roi.x_max - p[0]],
        [roi.y_min - p[1], roi.y_max - p[1]],
        [roi.z_min - p[2], roi.z_max - p[2]],
    )
}
