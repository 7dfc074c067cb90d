//! Ground-truth augmentation: an object bank of annotated point clusters and collision-free
//! insertion of bank objects into LiDAR frames.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{read_jsonl, read_lpc, write_jsonl, write_lpc};
use crate::grid::{Box3D, PointCloud, RoiBounds};
use crate::metrics::bev_intersection_area;

const BANK_INDEX: &str = "index.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GtAugConfig {
    pub n_insert: usize,
    pub min_points: usize,
    pub max_attempts: usize,
    /// Ground height in the sensor frame; inserted boxes rest on it.
    pub ground_z: f64,
}

impl Default for GtAugConfig {
    fn default() -> Self {
        Self {
            n_insert: 2,
            min_points: 5,
            max_attempts: 20,
            ground_z: -1.7,
        }
    }
}

impl GtAugConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_attempts == 0 {
            return Err(Error::Config("gtaug.max_attempts must be positive".into()));
        }
        if !self.ground_z.is_finite() {
            return Err(Error::Config("gtaug.ground_z must be finite".into()));
        }
        Ok(())
    }
}

/// An annotated object cut out of a frame. `bbox` has its center at the origin and yaw 0;
/// `points` are expressed in that box frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectBankEntry {
    pub bbox: Box3D,
    pub points: PointCloud,
    pub source_frame_id: String,
}

/// Cuts every annotated object with at least `min_points` points out of `frames`.
pub fn build_bank(frames: &[(String, PointCloud, Vec<Box3D>)], min_points: usize) -> Vec<ObjectBankEntry> {
    let mut bank = Vec::new();
    for (frame_id, pc, boxes) in frames {
        for b in boxes {
            let mut points = PointCloud::new(pc.channels().to_vec());
            for i in 0..pc.len() {
                let p = pc.position(i);
                if b.contains(p, 0.0) {
                    points
                        .push(b.to_local(p), pc.intensity(i), pc.aux(i))
                        .expect("schema matches source cloud");
                }
            }
            if points.len() < min_points {
                continue;
            }
            bank.push(ObjectBankEntry {
                bbox: Box3D {
                    center: [0.0; 3],
                    yaw: 0.0,
                    ..*b
                },
                points,
                source_frame_id: frame_id.clone(),
            });
        }
    }
    bank
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertReport {
    pub requested: usize,
    pub inserted: usize,
}

fn footprint_inside(b: &Box3D, roi: &RoiBounds) -> bool {
    b.bev_corners()
        .iter()
        .all(|c| c[0] >= roi.x_min && c[0] <= roi.x_max && c[1] >= roi.y_min && c[1] <= roi.y_max)
}

/// Inserts up to `cfg.n_insert` bank objects at random ground poses inside `roi`, rejecting any pose
/// whose footprint overlaps an existing or already inserted box. Inserted points are appended after
/// the original points, channels mapped by name.
pub fn insert_objects(
    pc: &PointCloud,
    boxes: &[Box3D],
    bank: &[ObjectBankEntry],
    roi: &RoiBounds,
    cfg: &GtAugConfig,
    seed: u64,
) -> Result<(PointCloud, Vec<Box3D>, InsertReport)> {
    cfg.validate()?;
    let mut out_pc = pc.clone();
    let mut out_boxes = boxes.to_vec();
    let mut report = InsertReport {
        requested: cfg.n_insert,
        inserted: 0,
    };
    if bank.is_empty() || cfg.n_insert == 0 {
        return Ok((out_pc, out_boxes, report));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cfg.n_insert {
        let entry = &bank[rng.random_range(0..bank.len())];
        for _ in 0..cfg.max_attempts {
            let x = rng.random_range(roi.x_min..roi.x_max);
            let y = rng.random_range(roi.y_min..roi.y_max);
            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let placed = Box3D::new(
                [x, y, cfg.ground_z + entry.bbox.dims[2] / 2.0],
                entry.bbox.dims,
                yaw,
                entry.bbox.class,
            )?;
            if !footprint_inside(&placed, roi) {
                continue;
            }
            if out_boxes.iter().any(|b| bev_intersection_area(b, &placed) > 0.0) {
                continue;
            }
            let mut moved = PointCloud::with_capacity(entry.points.channels().to_vec(), entry.points.len());
            for i in 0..entry.points.len() {
                moved.push(
                    placed.to_world(entry.points.position(i)),
                    entry.points.intensity(i),
                    entry.points.aux(i),
                )?;
            }
            out_pc.extend_from(&moved);
            out_boxes.push(placed);
            report.inserted += 1;
            break;
        }
    }
    Ok((out_pc, out_boxes, report))
}

/// Applies [`insert_objects`] to every frame, frame `i` drawing from the `i`-th seed of a stream
/// seeded with `seed`.
pub fn augment_frames(
    frames: &[(PointCloud, Vec<Box3D>)],
    bank: &[ObjectBankEntry],
    roi: &RoiBounds,
    cfg: &GtAugConfig,
    seed: u64,
) -> Result<Vec<(PointCloud, Vec<Box3D>, InsertReport)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    frames
        .iter()
        .map(|(pc, boxes)| insert_objects(pc, boxes, bank, roi, cfg, rng.random()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BankIndexEntry {
    file: String,
    #[serde(rename = "box")]
    bbox: Box3D,
    source_frame_id: String,
}

/// Writes the bank as `entry_NNNNN.lpc` files plus an `index.jsonl` listing them.
pub fn write_bank(dir: &Path, bank: &[ObjectBankEntry]) -> Result<()> {
    let mut index = Vec::with_capacity(bank.len());
    for (i, e) in bank.iter().enumerate() {
        let file = format!("entry_{i:05}.lpc");
        write_lpc(&dir.join(&file), &e.points)?;
        index.push(BankIndexEntry {
            file,
            bbox: e.bbox,
            source_frame_id: e.source_frame_id.clone(),
        });
    }
    write_jsonl(&dir.join(BANK_INDEX), &index)
}

pub fn read_bank(dir: &Path) -> Result<Vec<ObjectBankEntry>> {
    let index: Vec<BankIndexEntry> = read_jsonl(&dir.join(BANK_INDEX))?;
    index
        .into_iter()
        .map(|e| {
            e.bbox.validate()?;
            Ok(ObjectBankEntry {
                points: read_lpc(&dir.join(&e.file))?,
                bbox: e.bbox,
                source_frame_id: e.source_frame_id,
            })
        })
        .collect()
}
