//! First-hit LiDAR ray casting against the ground plane, walls and oriented boxes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scene::{Scene, WallSegment};
use crate::error::{Error, Result};
use crate::grid::{Box3D, ObjectClass, PointCloud};

pub const GROUND_REFLECTIVITY: f64 = 0.3;
pub const WALL_REFLECTIVITY: f64 = 0.5;

/// Base LiDAR reflectivity per object class.
pub fn class_reflectivity(class: ObjectClass) -> f64 {
    match class {
        ObjectClass::Sedan => 0.9,
        ObjectClass::BusTruck => 0.8,
        ObjectClass::Pedestrian => 0.4,
        ObjectClass::Cyclist => 0.6,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LidarConfig {
    pub position: [f64; 3],
    /// Azimuth span and step in degrees.
    pub azimuth_deg: [f64; 2],
    pub azimuth_step_deg: f64,
    /// Elevation span and step in degrees.
    pub elevation_deg: [f64; 2],
    pub elevation_step_deg: f64,
    /// Standard deviation of the additive Gaussian range noise (m).
    pub range_noise: f64,
    pub max_range: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            position: [0.0; 3],
            azimuth_deg: [-90.0, 90.0],
            azimuth_step_deg: 0.5,
            elevation_deg: [-30.0, 10.0],
            elevation_step_deg: 1.25,
            range_noise: 0.02,
            max_range: 120.0,
        }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.azimuth_step_deg > 0.0
            && self.elevation_step_deg > 0.0
            && self.azimuth_deg[0] <= self.azimuth_deg[1]
            && self.elevation_deg[0] <= self.elevation_deg[1]
            && self.range_noise >= 0.0
            && self.max_range > 0.0
            && self.position.iter().all(|v| v.is_finite());
        if !ok {
            return Err(Error::Config(format!("invalid toyworld.lidar settings: {self:?}")));
        }
        Ok(())
    }

    fn angles(span: [f64; 2], step: f64) -> Vec<f64> {
        let n = ((span[1] - span[0]) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| (span[0] + i as f64 * step).to_radians()).collect()
    }

    /// Unit ray directions, azimuth-major.
    pub fn directions(&self) -> Vec<[f64; 3]> {
        let els = Self::angles(self.elevation_deg, self.elevation_step_deg);
        let mut out = Vec::new();
        for az in Self::angles(self.azimuth_deg, self.azimuth_step_deg) {
            for el in &els {
                out.push([el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]);
            }
        }
        out
    }
}

/// Closest intersection along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    /// Unit surface normal (either orientation).
    pub normal: [f64; 3],
    pub reflectivity: f64,
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Slab-method entry distance of a ray into a box, with the normal of the entered face.
/// Rays starting inside the box return `None`.
pub fn ray_box(origin: [f64; 3], dir: [f64; 3], b: &Box3D) -> Option<(f64, [f64; 3])> {
    let o = b.to_local(origin);
    let tip = b.to_local([origin[0] + dir[0], origin[1] + dir[1], origin[2] + dir[2]]);
    let d = [tip[0] - o[0], tip[1] - o[1], tip[2] - o[2]];
    let h = b.half_extents();
    let (mut t_enter, mut t_exit, mut axis) = (f64::NEG_INFINITY, f64::INFINITY, 0);
    for k in 0..3 {
        if d[k].abs() < 1e-15 {
            if o[k].abs() > h[k] {
                return None;
            }
            continue;
        }
        let (a, c) = ((-h[k] - o[k]) / d[k], (h[k] - o[k]) / d[k]);
        let (lo, hi) = if a < c { (a, c) } else { (c, a) };
        if lo > t_enter {
            t_enter = lo;
            axis = k;
        }
        t_exit = t_exit.min(hi);
    }
    if t_enter > t_exit || t_enter <= 0.0 {
        return None;
    }
    let mut local_n = [0.0; 3];
    local_n[axis] = 1.0;
    let (s, c) = b.yaw.sin_cos();
    let normal = [
        c * local_n[0] - s * local_n[1],
        s * local_n[0] + c * local_n[1],
        local_n[2],
    ];
    Some((t_enter, normal))
}

fn ray_wall(origin: [f64; 3], dir: [f64; 3], w: &WallSegment, ground_z: f64) -> Option<(f64, [f64; 3])> {
    let e = [w.end[0] - w.start[0], w.end[1] - w.start[1]];
    let len = e[0].hypot(e[1]);
    if len == 0.0 {
        return None;
    }
    let n = [-e[1] / len, e[0] / len, 0.0];
    let denom = n[0] * dir[0] + n[1] * dir[1];
    if denom.abs() < 1e-15 {
        return None;
    }
    let t = (n[0] * (w.start[0] - origin[0]) + n[1] * (w.start[1] - origin[1])) / denom;
    if t <= 0.0 {
        return None;
    }
    let p = [origin[0] + t * dir[0], origin[1] + t * dir[1], origin[2] + t * dir[2]];
    let u = ((p[0] - w.start[0]) * e[0] + (p[1] - w.start[1]) * e[1]) / (len * len);
    if !(0.0..=1.0).contains(&u) || p[2] < ground_z || p[2] > ground_z + w.height {
        return None;
    }
    Some((t, n))
}

/// First hit of the ray `origin + t * dir` (`dir` unit) against the scene.
pub fn cast_ray(scene: &Scene, origin: [f64; 3], dir: [f64; 3]) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    let mut offer = |t: f64, normal: [f64; 3], reflectivity: f64| {
        if best.is_none_or(|b| t < b.t) {
            best = Some(Hit {
                t,
                normal,
                reflectivity,
            });
        }
    };
    let ground = scene.ground_z.unwrap_or(f64::NEG_INFINITY);
    if let Some(gz) = scene.ground_z {
        if dir[2] < 0.0 && origin[2] > gz {
            offer((gz - origin[2]) / dir[2], [0.0, 0.0, 1.0], GROUND_REFLECTIVITY);
        }
    }
    for w in &scene.walls {
        if let Some((t, n)) = ray_wall(origin, dir, w, ground) {
            offer(t, n, WALL_REFLECTIVITY);
        }
    }
    for b in &scene.boxes {
        if let Some((t, n)) = ray_box(origin, dir, b) {
            offer(t, n, class_reflectivity(b.class));
        }
    }
    best
}

/// Casts the configured ray grid; intensity is the surface reflectivity times |cos(incidence)|.
pub fn lidar_sample(scene: &Scene, cfg: &LidarConfig, seed: u64) -> Result<PointCloud> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, cfg.range_noise).map_err(|e| Error::Config(e.to_string()))?;
    let dirs = cfg.directions();
    let mut pc = PointCloud::with_capacity(Vec::new(), dirs.len());
    for d in dirs {
        let Some(hit) = cast_ray(scene, cfg.position, d) else {
            continue;
        };
        if hit.t > cfg.max_range {
            continue;
        }
        let r = (hit.t + noise.sample(&mut rng)).max(0.0);
        let p = [
            cfg.position[0] + r * d[0],
            cfg.position[1] + r * d[1],
            cfg.position[2] + r * d[2],
        ];
        pc.push(p, hit.reflectivity * dot(hit.normal, d).abs(), &[])?;
    }
    Ok(pc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn scene_with(boxes: Vec<Box3D>) -> Scene {
        Scene {
            boxes,
            walls: Vec::new(),
            targets: Vec::new(),
            ground_z: Some(-1.7),
        }
    }

    /// Independent oracle: march until inside, then bisect on `contains`.
    fn march_oracle(o: [f64; 3], d: [f64; 3], b: &Box3D) -> Option<f64> {
        let at = |t: f64| [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]];
        let step = 1e-3;
        let mut t = 0.0;
        while t < 60.0 {
            if b.contains(at(t + step), 0.0) {
                let (mut lo, mut hi) = (t, t + step);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if b.contains(at(mid), 0.0) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(hi);
            }
            t += step;
        }
        None
    }

    #[test]
    fn slab_matches_marching_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut hits = 0;
        for _ in 0..60 {
            let b = Box3D::new(
                [
                    rng.random_range(4.0..12.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-1.0..1.0),
                ],
                [
                    rng.random_range(0.5..4.0),
                    rng.random_range(0.5..2.0),
                    rng.random_range(0.5..2.0),
                ],
                rng.random_range(-3.0..3.0),
                ObjectClass::Sedan,
            )
            .unwrap();
            let target = [
                b.center[0] + rng.random_range(-1.0..1.0),
                b.center[1] + rng.random_range(-1.0..1.0),
                b.center[2] + rng.random_range(-0.5..0.5),
            ];
            let n = dot(target, target).sqrt();
            let d = [target[0] / n, target[1] / n, target[2] / n];
            let got = ray_box([0.0; 3], d, &b).map(|h| h.0);
            let want = march_oracle([0.0; 3], d, &b);
            match (got, want) {
                (Some(a), Some(w)) => {
                    assert!((a - w).abs() < 1e-6, "{a} vs {w}");
                    hits += 1;
                }
                (None, None) => {}
                other => panic!("disagreement {other:?}"),
            }
        }
        assert!(hits > 30);
    }

    #[test]
    fn box_hits_lie_within_dilated_box() {
        let b = Box3D::new([6.0, 0.5, -0.9], [4.5, 1.8, 1.6], 0.4, ObjectClass::Sedan).unwrap();
        let cfg = LidarConfig::default();
        let pc = lidar_sample(&scene_with(vec![b]), &cfg, 1).unwrap();
        let dilated = Box3D {
            dims: [
                b.dims[0] + 6.0 * cfg.range_noise,
                b.dims[1] + 6.0 * cfg.range_noise,
                b.dims[2] + 6.0 * cfg.range_noise,
            ],
            ..b
        };
        let mut on_box = 0;
        for i in 0..pc.len() {
            let p = pc.position(i);
            if p[2] > -1.7 + 3.0 * cfg.range_noise + 1e-9 {
                assert!(dilated.contains(p, 1e-9), "stray point {p:?}");
                on_box += 1;
            }
        }
        assert!(on_box > 50);
    }

    #[test]
    fn empty_scene_returns_only_ground_below_sensor() {
        let cfg = LidarConfig::default();
        let pc = lidar_sample(&scene_with(Vec::new()), &cfg, 2).unwrap();
        assert!(!pc.is_empty());
        for i in 0..pc.len() {
            let p = pc.position(i);
            assert!(p[2] < cfg.position[2]);
            assert!((p[2] + 1.7).abs() < 5.0 * cfg.range_noise);
            assert!(
                (pc.intensity(i) - GROUND_REFLECTIVITY * (p[2] - cfg.position[2]).abs() / dot(p, p).sqrt()).abs()
                    < 0.05
            );
        }
    }

    #[test]
    fn noise_free_ranges_are_exact_and_seeded() {
        let b = Box3D::new([8.0, 0.0, -0.85], [2.0, 2.0, 1.7], 0.0, ObjectClass::Pedestrian).unwrap();
        let s = scene_with(vec![b]);
        let cfg = LidarConfig {
            range_noise: 0.0,
            ..Default::default()
        };
        let pc = lidar_sample(&s, &cfg, 0).unwrap();
        for i in 0..pc.len() {
            let p = pc.position(i);
            if p[2] > -1.6 {
                assert!((p[0] - 7.0).abs() < 1e-9 || (p[1].abs() - 1.0).abs() < 1e-9);
            }
        }
        let noisy = LidarConfig::default();
        assert_eq!(
            lidar_sample(&s, &noisy, 9).unwrap(),
            lidar_sample(&s, &noisy, 9).unwrap()
        );
        assert_ne!(
            lidar_sample(&s, &noisy, 9).unwrap(),
            lidar_sample(&s, &noisy, 10).unwrap()
        );
    }

    #[test]
    fn walls_block_the_ground_behind_them() {
        let s = Scene {
            walls: vec![WallSegment {
                start: [5.0, -200.0],
                end: [5.0, 200.0],
                height: 4.0,
            }],
            ..scene_with(Vec::new())
        };
        let cfg = LidarConfig {
            range_noise: 0.0,
            ..Default::default()
        };
        let pc = lidar_sample(&s, &cfg, 0).unwrap();
        assert!(pc.positions().iter().all(|p| p[0] <= 5.0 + 1e-9));
    }
}
