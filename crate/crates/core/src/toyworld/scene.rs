//! Procedural scenes: oriented boxes resting on a flat ground plane, optional vertical walls and
//! point reflectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Box3D, ObjectClass, RoiBounds};
use crate::metrics::bev_intersection_area;

/// Vertical rectangle from `ground_z` up to `ground_z + height` along the segment `start -> end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallSegment {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub height: f64,
}

/// Isolated point reflector used by radar tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointTarget {
    pub position: [f64; 3],
    pub rcs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    pub object_count: [usize; 2],
    pub classes: Vec<ObjectClass>,
    pub ground_z: f64,
    /// Objects keep at least this distance (m) between their center and the sensor.
    pub min_range: f64,
    pub walls: Vec<WallSegment>,
    /// Placement attempts per object before giving up on it.
    pub max_attempts: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            object_count: [1, 4],
            classes: vec![ObjectClass::Sedan, ObjectClass::Pedestrian, ObjectClass::Cyclist],
            ground_z: -1.7,
            min_range: 2.0,
            walls: Vec::new(),
            max_attempts: 50,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.object_count[0] > self.object_count[1] {
            return Err(Error::Config(format!(
                "toyworld.scene.object_count range {:?} is inverted",
                self.object_count
            )));
        }
        if self.classes.is_empty() && self.object_count[1] > 0 {
            return Err(Error::Config("toyworld.scene.classes is empty".into()));
        }
        if self.walls.iter().any(|w| !(w.height > 0.0)) {
            return Err(Error::Config("wall heights must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub boxes: Vec<Box3D>,
    pub walls: Vec<WallSegment>,
    pub targets: Vec<PointTarget>,
    /// Ground plane height; `None` for scenes without ground.
    pub ground_z: Option<f64>,
}

impl Scene {
    pub fn empty() -> Self {
        Self {
            boxes: Vec::new(),
            walls: Vec::new(),
            targets: Vec::new(),
            ground_z: None,
        }
    }
}

/// Samples a scene: object count uniform in the configured range, class uniform over the mix, dims the
/// class-typical ones scaled by U(0.9, 1.1), footprint fully inside the ROI, no BEV overlap.
pub fn generate_scene(spec: &SceneSpec, roi: &RoiBounds, seed: u64) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(spec.object_count[0]..=spec.object_count[1]);
    let mut boxes: Vec<Box3D> = Vec::with_capacity(n);
    for _ in 0..n {
        let class = spec.classes[rng.random_range(0..spec.classes.len())];
        let dims = class.typical_dims().map(|d| d * rng.random_range(0.9..1.1));
        for _ in 0..spec.max_attempts {
            let x = rng.random_range(roi.x_min..roi.x_max);
            let y = rng.random_range(roi.y_min..roi.y_max);
            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            if x.hypot(y) < spec.min_range {
                continue;
            }
            let b = Box3D::new([x, y, spec.ground_z + dims[2] / 2.0], dims, yaw, class)?;
            let inside = b
                .bev_corners()
                .iter()
                .all(|c| c[0] >= roi.x_min && c[0] <= roi.x_max && c[1] >= roi.y_min && c[1] <= roi.y_max);
            // keep a sliver of clearance so boxes never share a face
            if inside
                && boxes
                    .iter()
                    .all(|o| bev_intersection_area(o, &b) == 0.0 && !touching(o, &b))
            {
                boxes.push(b);
                break;
            }
        }
    }
    Ok(Scene {
        boxes,
        walls: spec.walls.clone(),
        targets: Vec::new(),
        ground_z: Some(spec.ground_z),
    })
}

fn touching(a: &Box3D, b: &Box3D) -> bool {
    let grown = Box3D {
        dims: [a.dims[0] + 0.2, a.dims[1] + 0.2, a.dims[2]],
        ..*a
    };
    bev_intersection_area(&grown, b) > 0.0
}
