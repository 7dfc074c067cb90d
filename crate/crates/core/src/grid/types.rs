//! Geometric primitives shared across the pipeline.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking that an extent is an integer multiple of a resolution.
const DIVISIBILITY_TOL: f64 = 1e-9;

/// Axis-aligned region of interest in meters (sensor frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl RoiBounds {
    pub fn new(x: [f64; 2], y: [f64; 2], z: [f64; 2]) -> Result<Self> {
        let roi = Self {
            x_min: x[0],
            x_max: x[1],
            y_min: y[0],
            y_max: y[1],
            z_min: z[0],
            z_max: z[1],
        };
        roi.validate()?;
        Ok(roi)
    }

    /// The K-Radar measurement volume: [0,76.8] x [-38.4,38.4] x [-2,10.8] m.
    pub fn kradar() -> Self {
        Self {
            x_min: 0.0,
            x_max: 76.8,
            y_min: -38.4,
            y_max: 38.4,
            z_min: -2.0,
            z_max: 10.8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.x_min, self.x_max, self.y_min, self.y_max, self.z_min, self.z_max];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("ROI bounds must be finite".into()));
        }
        if !(self.x_min < self.x_max && self.y_min < self.y_max && self.z_min < self.z_max) {
            return Err(Error::Parameter(format!(
                "ROI requires min < max on every axis, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn min(&self) -> [f64; 3] {
        [self.x_min, self.y_min, self.z_min]
    }

    pub fn max(&self) -> [f64; 3] {
        [self.x_max, self.y_max, self.z_max]
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.x_max - self.x_min,
            self.y_max - self.y_min,
            self.z_max - self.z_min,
        ]
    }

    /// Voxel counts per axis at `resolution`; fails unless every extent is an integer multiple.
    pub fn dims(&self, resolution: f64) -> Result<[usize; 3]> {
        self.validate()?;
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::Parameter(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        let mut dims = [0usize; 3];
        for (axis, extent) in self.extent().into_iter().enumerate() {
            let cells = extent / resolution;
            let rounded = cells.round();
            if rounded < 1.0 || (cells - rounded).abs() > DIVISIBILITY_TOL * cells.max(1.0) {
                return Err(Error::Parameter(format!(
                    "ROI extent {extent} m on axis {axis} is not a multiple of resolution {resolution} m"
                )));
            }
            dims[axis] = rounded as usize;
        }
        Ok(dims)
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        p[0] >= self.x_min
            && p[0] < self.x_max
            && p[1] >= self.y_min
            && p[1] < self.y_max
            && p[2] >= self.z_min
            && p[2] < self.z_max
    }
}

/// LiDAR-side point cloud: positions, intensities and a fixed set of named auxiliary channels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    channels: Vec<String>,
    positions: Vec<[f64; 3]>,
    intensity: Vec<f64>,
    aux: Vec<f64>,
}

impl PointCloud {
    pub fn new(channels: Vec<String>) -> Self {
        Self {
            channels,
            ..Default::default()
        }
    }

    pub fn with_capacity(channels: Vec<String>, n: usize) -> Self {
        let c = channels.len();
        Self {
            channels,
            positions: Vec::with_capacity(n),
            intensity: Vec::with_capacity(n),
            aux: Vec::with_capacity(n * c),
        }
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    /// Appends a zero-filled channel unless one with this name exists; returns its index.
    pub fn ensure_channel(&mut self, name: &str) -> usize {
        if let Some(idx) = self.channel_index(name) {
            return idx;
        }
        let old = self.channels.len();
        let n = self.len();
        let mut aux = Vec::with_capacity(n * (old + 1));
        for i in 0..n {
            aux.extend_from_slice(&self.aux[i * old..(i + 1) * old]);
            aux.push(0.0);
        }
        self.aux = aux;
        self.channels.push(name.to_string());
        old
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn push(&mut self, position: [f64; 3], intensity: f64, aux: &[f64]) -> Result<()> {
        if aux.len() != self.channels.len() {
            return Err(Error::Shape(format!(
                "point has {} aux values, schema has {} channels",
                aux.len(),
                self.channels.len()
            )));
        }
        self.positions.push(position);
        self.intensity.push(intensity);
        self.aux.extend_from_slice(aux);
        Ok(())
    }

    pub fn position(&self, i: usize) -> [f64; 3] {
        self.positions[i]
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn intensity(&self, i: usize) -> f64 {
        self.intensity[i]
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensity
    }

    pub fn aux(&self, i: usize) -> &[f64] {
        let c = self.channels.len();
        &self.aux[i * c..(i + 1) * c]
    }

    pub fn aux_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.channels.len();
        &mut self.aux[i * c..(i + 1) * c]
    }

    /// Arithmetic mean intensity, 0 for an empty cloud.
    pub fn mean_intensity(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.intensity.iter().sum::<f64>() / self.len() as f64
        }
    }

    /// Rejects clouds containing non-finite values.
    pub fn validate(&self) -> Result<()> {
        if self.aux.len() != self.len() * self.channels.len() {
            return Err(Error::Shape("aux storage does not match schema".into()));
        }
        for i in 0..self.len() {
            let p = self.positions[i];
            if p.iter().any(|v| !v.is_finite())
                || !self.intensity[i].is_finite()
                || self.aux(i).iter().any(|v| !v.is_finite())
            {
                return Err(Error::InvalidInput(format!("point {i} is not finite")));
            }
        }
        Ok(())
    }

    /// Appends every point of `other`, mapping channels by name (missing channels read as 0).
    pub fn extend_from(&mut self, other: &PointCloud) {
        let map: Vec<Option<usize>> = self.channels.iter().map(|c| other.channel_index(c)).collect();
        let mut row = vec![0.0; self.channels.len()];
        for i in 0..other.len() {
            let src = other.aux(i);
            for (dst, m) in row.iter_mut().zip(&map) {
                *dst = m.map_or(0.0, |j| src[j]);
            }
            self.positions.push(other.positions[i]);
            self.intensity.push(other.intensity[i]);
            self.aux.extend_from_slice(&row);
        }
    }
}

/// Object category carried by box annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectClass {
    Sedan,
    BusTruck,
    Pedestrian,
    Cyclist,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 4] = [
        ObjectClass::Sedan,
        ObjectClass::BusTruck,
        ObjectClass::Pedestrian,
        ObjectClass::Cyclist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::Sedan => "Sedan",
            ObjectClass::BusTruck => "BusTruck",
            ObjectClass::Pedestrian => "Pedestrian",
            ObjectClass::Cyclist => "Cyclist",
        }
    }

    /// Typical (length, width, height) in meters.
    pub fn typical_dims(self) -> [f64; 3] {
        match self {
            ObjectClass::Sedan => [4.5, 1.8, 1.6],
            ObjectClass::BusTruck => [7.0, 2.5, 2.8],
            ObjectClass::Pedestrian => [0.6, 0.6, 1.7],
            ObjectClass::Cyclist => [1.8, 0.6, 1.7],
        }
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Oriented 3D bounding box; `dims` is (length, width, height) along the box frame axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Box3D {
    pub center: [f64; 3],
    pub dims: [f64; 3],
    pub yaw: f64,
    pub class: ObjectClass,
}

impl Box3D {
    pub fn new(center: [f64; 3], dims: [f64; 3], yaw: f64, class: ObjectClass) -> Result<Self> {
        let b = Self {
            center,
            dims,
            yaw: wrap_angle(yaw),
            class,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "box dims must be positive, got {:?}",
                self.dims
            )));
        }
        if self.center.iter().any(|c| !c.is_finite()) || !self.yaw.is_finite() {
            return Err(Error::InvalidInput("box pose must be finite".into()));
        }
        if !(self.yaw > -PI && self.yaw <= PI) {
            return Err(Error::InvalidInput(format!("box yaw {} outside (-pi, pi]", self.yaw)));
        }
        Ok(())
    }

    pub fn half_extents(&self) -> [f64; 3] {
        [self.dims[0] / 2.0, self.dims[1] / 2.0, self.dims[2] / 2.0]
    }

    pub fn volume(&self) -> f64 {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Maps a box-frame offset to world coordinates.
    pub fn to_world(&self, local: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.yaw.sin_cos();
        [
            self.center[0] + c * local[0] - s * local[1],
            self.center[1] + s * local[0] + c * local[1],
            self.center[2] + local[2],
        ]
    }

    /// Maps a world point into the box frame (center at origin, yaw 0).
    pub fn to_local(&self, world: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.yaw.sin_cos();
        let dx = world[0] - self.center[0];
        let dy = world[1] - self.center[1];
        [c * dx + s * dy, -s * dx + c * dy, world[2] - self.center[2]]
    }

    pub fn contains(&self, world: [f64; 3], tol: f64) -> bool {
        let l = self.to_local(world);
        let h = self.half_extents();
        (0..3).all(|a| l[a].abs() <= h[a] + tol)
    }

    /// The 8 corners as box-frame offsets, ordered as in [`CORNER_SIGNS`].
    pub fn local_corners(&self) -> [[f64; 3]; 8] {
        let h = self.half_extents();
        CORNER_SIGNS.map(|s| [s[0] * h[0], s[1] * h[1], s[2] * h[2]])
    }

    /// Footprint rectangle corners in counter-clockwise order.
    pub fn bev_corners(&self) -> [[f64; 2]; 4] {
        let h = self.half_extents();
        [[h[0], h[1]], [-h[0], h[1]], [-h[0], -h[1]], [h[0], -h[1]]].map(|[lx, ly]| {
            let w = self.to_world([lx, ly, 0.0]);
            [w[0], w[1]]
        })
    }

    pub fn z_range(&self) -> [f64; 2] {
        [self.center[2] - self.dims[2] / 2.0, self.center[2] + self.dims[2] / 2.0]
    }
}

/// Sign pattern of the 8 box corners.
pub const CORNER_SIGNS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Corner index pairs for the 12 box edges.
pub const BOX_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 0),
    (4, 5),
    (5, 6),
    (6, 7),
    (7, 4),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roi_dims_require_divisibility() {
        let roi = RoiBounds::kradar();
        assert_eq!(roi.dims(0.4).unwrap(), [192, 192, 32]);
        assert_eq!(roi.dims(0.05).unwrap(), [1536, 1536, 256]);
        assert!(roi.dims(0.7).is_err());
        assert!(RoiBounds::new([1.0, 0.0], [0.0, 1.0], [0.0, 1.0]).is_err());
    }

    #[test]
    fn ensure_channel_zero_fills() {
        let mut pc = PointCloud::new(vec!["a".into()]);
        pc.push([0.0; 3], 1.0, &[5.0]).unwrap();
        pc.push([1.0; 3], 2.0, &[6.0]).unwrap();
        assert_eq!(pc.ensure_channel("b"), 1);
        assert_eq!(pc.aux(0), &[5.0, 0.0]);
        assert_eq!(pc.aux(1), &[6.0, 0.0]);
        assert_eq!(pc.ensure_channel("a"), 0);

        let mut empty_schema = PointCloud::new(vec![]);
        empty_schema.push([0.0; 3], 1.0, &[]).unwrap();
        empty_schema.ensure_channel("edge");
        assert_eq!(empty_schema.aux(0), &[0.0]);
    }

    #[test]
    fn box_frame_round_trip() {
        let b = Box3D::new([3.0, -1.0, 0.5], [4.0, 2.0, 1.5], 0.7, ObjectClass::Sedan).unwrap();
        let p = [4.2, 0.3, 1.1];
        let back = b.to_world(b.to_local(p));
        for a in 0..3 {
            assert!((back[a] - p[a]).abs() < 1e-12);
        }
        assert!(b.contains(b.center, 0.0));
        assert!(!b.contains([10.0, 10.0, 0.0], 0.0));
    }

    #[test]
    fn yaw_is_wrapped_and_validated() {
        let b = Box3D::new([0.0; 3], [1.0; 3], 3.0 * PI, ObjectClass::Sedan).unwrap();
        assert!((b.yaw - PI).abs() < 1e-12);
        assert!(Box3D::new([0.0; 3], [1.0, 0.0, 1.0], 0.0, ObjectClass::Sedan).is_err());
    }
}
