//! Conversion of voxel grids into the tensors the networks consume.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::grid::{densify, DenseGrid3D, ScaleDomain, SparseVoxelGrid};
use crate::nn::SparseLayout;

/// Sparse generator input: active LiDAR voxels and their feature rows.
#[derive(Debug, Clone)]
pub struct GeneratorInput {
    pub layout: Rc<SparseLayout>,
    pub features: Vec<f32>,
    pub channels: usize,
    pub origin: [f64; 3],
    pub resolution: f64,
}

impl GeneratorInput {
    pub fn from_grid(svg: &SparseVoxelGrid) -> Result<Self> {
        Ok(Self {
            layout: Rc::new(SparseLayout::new(svg.dims, svg.coords().to_vec())?),
            features: svg.features().to_vec(),
            channels: svg.num_channels(),
            origin: svg.origin,
            resolution: svg.resolution,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.layout.dims()
    }
}

/// One training or evaluation pair.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub input: GeneratorInput,
    /// LiDAR features pooled onto the radar grid, channels-last.
    pub condition: Vec<f32>,
    pub condition_channels: usize,
    /// Log-normalized radar power on the radar grid.
    pub target: Vec<f32>,
    pub target_dims: [usize; 3],
}

impl Sample {
    pub fn new(id: impl Into<String>, svg: &SparseVoxelGrid, target: &DenseGrid3D) -> Result<Self> {
        if target.scale_domain != ScaleDomain::LogNormalized {
            return Err(Error::InvalidInput("training targets must be log-normalized".into()));
        }
        let ratio = target.resolution / svg.resolution;
        let factor = ratio.round() as usize;
        if factor == 0 || (ratio - factor as f64).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "radar resolution {} is not an integer multiple of LiDAR resolution {}",
                target.resolution, svg.resolution
            )));
        }
        let cond = densify(svg, factor)?;
        if cond.dims != target.dims {
            return Err(Error::InvalidInput(format!(
                "LiDAR grid pools to {:?} but radar grid is {:?}",
                cond.dims, target.dims
            )));
        }
        Ok(Self {
            id: id.into(),
            input: GeneratorInput::from_grid(svg)?,
            condition: cond.data,
            condition_channels: cond.channels,
            target: target.values.iter().map(|v| *v as f32).collect(),
            target_dims: target.dims,
        })
    }

    pub fn target_grid(&self, origin: [f64; 3], resolution: f64) -> DenseGrid3D {
        let mut g = DenseGrid3D::zeros(origin, resolution, self.target_dims, ScaleDomain::LogNormalized);
        for (d, s) in g.values.iter_mut().zip(&self.target) {
            *d = *s as f64;
        }
        g
    }
}
