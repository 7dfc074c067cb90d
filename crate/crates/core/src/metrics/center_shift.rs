//! Voxel-quantization center-shift study.
//!
//! Sampling distribution (fixed, seeded):
//! - class uniform over [`ObjectClass::ALL`], dims = class-typical dims x U(0.9, 1.1) per axis;
//! - center x ~ U(5, 70) m, y ~ U(-30, 30) m, box bottom on z = -1.7 m; yaw ~ U(-pi, pi);
//! - `SURFACE_SAMPLES` points uniform over the box surface (faces chosen by area).
//!
//! For each resolution the points are quantized on the global lattice `floor(p / res)`; the shift
//! is the distance between the centroid of the distinct occupied voxel centers and the centroid of
//! the points themselves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Box3D, ObjectClass};

pub const SURFACE_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenterShiftRow {
    pub resolution: f64,
    pub mean_shift: f64,
}

/// Uniform samples on the surface of `b`.
pub fn sample_box_surface(b: &Box3D, n: usize, rng: &mut impl Rng) -> Vec<[f64; 3]> {
    let [l, w, h] = b.dims;
    let areas = [w * h, w * h, l * h, l * h, l * w, l * w];
    let total: f64 = areas.iter().sum();
    let hx = b.half_extents();
    (0..n)
        .map(|_| {
            let mut pick = rng.random::<f64>() * total;
            let mut face = 5;
            for (i, a) in areas.iter().enumerate() {
                if pick < *a {
                    face = i;
                    break;
                }
                pick -= a;
            }
            let u: f64 = rng.random_range(-1.0..1.0);
            let v: f64 = rng.random_range(-1.0..1.0);
            let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
            let local = match face / 2 {
                0 => [sign * hx[0], u * hx[1], v * hx[2]],
                1 => [u * hx[0], sign * hx[1], v * hx[2]],
                _ => [u * hx[0], v * hx[1], sign * hx[2]],
            };
            b.to_world(local)
        })
        .collect()
}

fn centroid(points: impl Iterator<Item = [f64; 3]>) -> [f64; 3] {
    let mut s = [0.0; 3];
    let mut n = 0.0;
    for p in points {
        for a in 0..3 {
            s[a] += p[a];
        }
        n += 1.0;
    }
    s.map(|v| v / n)
}

/// Distance between the point centroid and the centroid of occupied voxel centers.
pub fn quantization_shift(points: &[[f64; 3]], resolution: f64) -> f64 {
    let mut cells: Vec<[i64; 3]> = Vec::new();
    let mut seen = FxHashSet::default();
    for p in points {
        let c = p.map(|v| (v / resolution).floor() as i64);
        if seen.insert(c) {
            cells.push(c);
        }
    }
    cells.sort_unstable();
    let vc = centroid(cells.iter().map(|c| c.map(|i| (i as f64 + 0.5) * resolution)));
    let pc = centroid(points.iter().copied());
    ((vc[0] - pc[0]).powi(2) + (vc[1] - pc[1]).powi(2) + (vc[2] - pc[2]).powi(2)).sqrt()
}

pub fn random_object(rng: &mut impl Rng) -> Box3D {
    let class = ObjectClass::ALL[rng.random_range(0..ObjectClass::ALL.len())];
    let dims = class.typical_dims().map(|d| d * rng.random_range(0.9..1.1));
    let center = [
        rng.random_range(5.0..70.0),
        rng.random_range(-30.0..30.0),
        -1.7 + dims[2] / 2.0,
    ];
    let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    Box3D::new(center, dims, yaw, class).expect("sampled box is valid")
}

/// Mean center shift per resolution over `n` random objects.
pub fn center_shift_study(n: usize, resolutions: &[f64], seed: u64) -> Result<Vec<CenterShiftRow>> {
    if n == 0 {
        return Err(Error::Parameter("center-shift study needs n > 0".into()));
    }
    if let Some(r) = resolutions.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::Parameter(format!("resolution {r} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sums = vec![0.0; resolutions.len()];
    for _ in 0..n {
        let b = random_object(&mut rng);
        let pts = sample_box_surface(&b, SURFACE_SAMPLES, &mut rng);
        for (s, r) in sums.iter_mut().zip(resolutions) {
            *s += quantization_shift(&pts, *r);
        }
    }
    Ok(resolutions
        .iter()
        .zip(sums)
        .map(|(r, s)| CenterShiftRow {
            resolution: *r,
            mean_shift: s / n as f64,
        })
        .collect())
}
