//! Sparse voxelization of point clouds and coarse densification of sparse grids.

use rustc_hash::FxHashMap;

use super::types::{PointCloud, RoiBounds};
use crate::error::{Error, Result};

pub const OCCUPANCY_CHANNEL: &str = "occupancy";
pub const INTENSITY_CHANNEL: &str = "intensity";

/// Occupied voxels of a regular grid with one feature vector per voxel.
///
/// Voxels are stored sorted by `(ix, iy, iz)`; every reduction walks them in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVoxelGrid {
    pub origin: [f64; 3],
    pub resolution: f64,
    pub dims: [usize; 3],
    channels: Vec<String>,
    coords: Vec<[u32; 3]>,
    features: Vec<f32>,
}

impl SparseVoxelGrid {
    /// Builds a grid from unsorted `(coord, features)` cells; duplicate keys are rejected.
    pub fn from_cells(
        origin: [f64; 3],
        resolution: f64,
        dims: [usize; 3],
        channels: Vec<String>,
        mut cells: Vec<([u32; 3], Vec<f32>)>,
    ) -> Result<Self> {
        let c = channels.len();
        cells.sort_by_key(|a| a.0);
        let mut coords = Vec::with_capacity(cells.len());
        let mut features = Vec::with_capacity(cells.len() * c);
        for (coord, feat) in cells {
            if (0..3).any(|a| coord[a] as usize >= dims[a]) {
                return Err(Error::InvalidInput(format!("voxel {coord:?} outside grid {dims:?}")));
            }
            if feat.len() != c {
                return Err(Error::Shape(format!(
                    "voxel feature length {} != schema length {c}",
                    feat.len()
                )));
            }
            if coords.last() == Some(&coord) {
                return Err(Error::InvalidInput(format!("duplicate voxel {coord:?}")));
            }
            coords.push(coord);
            features.extend_from_slice(&feat);
        }
        Ok(Self {
            origin,
            resolution,
            dims,
            channels,
            coords,
            features,
        })
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[[u32; 3]] {
        &self.coords
    }

    /// Flat `len() x num_channels()` feature matrix in coordinate order.
    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &[f32] {
        let c = self.channels.len();
        &self.features[i * c..(i + 1) * c]
    }

    pub fn get(&self, coord: [u32; 3]) -> Option<&[f32]> {
        self.coords.binary_search(&coord).ok().map(|i| self.feature(i))
    }

    pub fn voxel_center(&self, coord: [u32; 3]) -> [f64; 3] {
        voxel_center(self.origin, self.resolution, coord)
    }
}

pub fn voxel_center(origin: [f64; 3], resolution: f64, coord: [u32; 3]) -> [f64; 3] {
    [
        origin[0] + (coord[0] as f64 + 0.5) * resolution,
        origin[1] + (coord[1] as f64 + 0.5) * resolution,
        origin[2] + (coord[2] as f64 + 0.5) * resolution,
    ]
}

/// Index of the cell containing `p`, or `None` when `p` lies outside the ROI.
pub fn cell_of(roi: &RoiBounds, resolution: f64, dims: [usize; 3], p: [f64; 3]) -> Option<[u32; 3]> {
    if !roi.contains(p) {
        return None;
    }
    let min = roi.min();
    let mut cell = [0u32; 3];
    for a in 0..3 {
        let idx = ((p[a] - min[a]) / resolution).floor() as i64;
        // rounding can push points just below the upper bound onto `dims`
        cell[a] = idx.clamp(0, dims[a] as i64 - 1) as u32;
    }
    Some(cell)
}

/// Quantizes in-ROI points into a sparse grid with features `[occupancy, mean intensity, mean aux...]`.
pub fn voxelize(pc: &PointCloud, roi: &RoiBounds, resolution: f64) -> Result<SparseVoxelGrid> {
    let dims = roi.dims(resolution)?;
    pc.validate()?;
    let naux = pc.channels().len();
    let mut slots: FxHashMap<[u32; 3], usize> = FxHashMap::default();
    let mut keys: Vec<[u32; 3]> = Vec::new();
    // per slot: count, intensity sum, aux sums
    let mut acc: Vec<f64> = Vec::new();
    let stride = 2 + naux;
    for i in 0..pc.len() {
        let Some(cell) = cell_of(roi, resolution, dims, pc.position(i)) else {
            continue;
        };
        let slot = *slots.entry(cell).or_insert_with(|| {
            keys.push(cell);
            acc.extend(std::iter::repeat_n(0.0, stride));
            keys.len() - 1
        });
        let row = &mut acc[slot * stride..(slot + 1) * stride];
        row[0] += 1.0;
        row[1] += pc.intensity(i);
        for (dst, v) in row[2..].iter_mut().zip(pc.aux(i)) {
            *dst += v;
        }
    }
    let mut channels = vec![OCCUPANCY_CHANNEL.to_string(), INTENSITY_CHANNEL.to_string()];
    channels.extend(pc.channels().iter().cloned());
    let cells = keys
        .iter()
        .enumerate()
        .map(|(slot, &cell)| {
            let row = &acc[slot * stride..(slot + 1) * stride];
            let n = row[0];
            let mut feat = Vec::with_capacity(stride);
            feat.push(1.0f32);
            feat.extend(row[1..].iter().map(|s| (s / n) as f32));
            (cell, feat)
        })
        .collect();
    SparseVoxelGrid::from_cells(roi.min(), resolution, dims, channels, cells)
}

/// Dense multichannel grid, channels-last: `data[((ix*NY + iy)*NZ + iz)*C + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseFeatureGrid {
    pub origin: [f64; 3],
    pub resolution: f64,
    pub dims: [usize; 3],
    pub channels: usize,
    pub data: Vec<f32>,
}

impl DenseFeatureGrid {
    pub fn zeros(origin: [f64; 3], resolution: f64, dims: [usize; 3], channels: usize) -> Self {
        Self {
            origin,
            resolution,
            dims,
            channels,
            data: vec![0.0; dims[0] * dims[1] * dims[2] * channels],
        }
    }

    pub fn voxel_index(&self, coord: [usize; 3]) -> usize {
        (coord[0] * self.dims[1] + coord[1]) * self.dims[2] + coord[2]
    }

    pub fn at(&self, coord: [usize; 3]) -> &[f32] {
        let v = self.voxel_index(coord);
        &self.data[v * self.channels..(v + 1) * self.channels]
    }

    /// A single channel as a flat voxel array.
    pub fn channel(&self, c: usize) -> Vec<f32> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }
}

/// Pools a sparse grid onto a grid `factor` times coarser; each coarse cell holds the mean of its
/// occupied fine voxels (zeros where none are occupied).
pub fn densify(svg: &SparseVoxelGrid, factor: usize) -> Result<DenseFeatureGrid> {
    if factor == 0 || svg.dims.iter().any(|d| d % factor != 0) {
        return Err(Error::Parameter(format!(
            "densify factor {factor} does not divide grid dims {:?}",
            svg.dims
        )));
    }
    let dims = svg.dims.map(|d| d / factor);
    let c = svg.num_channels();
    let mut out = DenseFeatureGrid::zeros(svg.origin, svg.resolution * factor as f64, dims, c);
    let nvox = dims[0] * dims[1] * dims[2];
    let mut sums = vec![0.0f64; nvox * c];
    let mut counts = vec![0u32; nvox];
    for (i, coord) in svg.coords().iter().enumerate() {
        let cc = coord.map(|v| v as usize / factor);
        let v = out.voxel_index(cc);
        counts[v] += 1;
        for (s, f) in sums[v * c..(v + 1) * c].iter_mut().zip(svg.feature(i)) {
            *s += *f as f64;
        }
    }
    for v in 0..nvox {
        if counts[v] > 0 {
            let n = counts[v] as f64;
            for k in 0..c {
                out.data[v * c + k] = (sums[v * c + k] / n) as f32;
            }
        }
    }
    Ok(out)
}
