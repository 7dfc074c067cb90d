//! Non-learned reference: LiDAR occupancy pooled to the radar grid, Gaussian-blurred and scaled by
//! one least-squares amplitude.

use serde::{Deserialize, Serialize};

use super::data::Sample;
use crate::error::{Error, Result};
use crate::grid::{gaussian_blur3d, DenseGrid3D, ScaleDomain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlurBaseline {
    /// Gaussian sigma in radar voxels.
    pub sigma: f64,
    pub amplitude: f64,
}

fn occupancy_blur(sample: &Sample, sigma: f64) -> Vec<f64> {
    let c = sample.condition_channels;
    let occ: Vec<f64> = sample.condition.iter().step_by(c).map(|v| *v as f64).collect();
    gaussian_blur3d(&occ, sample.target_dims, sigma)
}

impl BlurBaseline {
    /// Fits the amplitude `a` minimizing `sum (a * blur - target)^2` over `samples`.
    pub fn fit(samples: &[Sample], sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Parameter(format!("blur sigma must be positive, got {sigma}")));
        }
        let (mut num, mut den) = (0.0, 0.0);
        for s in samples {
            for (b, t) in occupancy_blur(s, sigma).iter().zip(&s.target) {
                num += b * *t as f64;
                den += b * b;
            }
        }
        let amplitude = if den > 0.0 { num / den } else { 0.0 };
        Ok(Self { sigma, amplitude })
    }

    pub fn predict(&self, sample: &Sample, origin: [f64; 3], resolution: f64) -> DenseGrid3D {
        let mut g = DenseGrid3D::zeros(origin, resolution, sample.target_dims, ScaleDomain::LogNormalized);
        for (d, b) in g.values.iter_mut().zip(occupancy_blur(sample, self.sigma)) {
            *d = (self.amplitude * b).clamp(0.0, 1.0);
        }
        g
    }
}
