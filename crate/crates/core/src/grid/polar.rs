//! Polar (range, azimuth, elevation) grids and their resampling onto Cartesian voxels.

use serde::{Deserialize, Serialize};

use super::dense::{DenseGrid3D, ScaleDomain};
use super::types::RoiBounds;
use crate::error::{Error, Result};

/// Uniformly spaced sample positions `start + i * step`, `i in 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBins {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl AxisBins {
    pub fn new(start: f64, step: f64, count: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite() && start.is_finite()) || count == 0 {
            return Err(Error::Parameter(format!(
                "axis needs positive step and count, got start={start} step={step} count={count}"
            )));
        }
        Ok(Self { start, step, count })
    }

    pub fn position(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.position(self.count - 1)
    }

    /// Lower node index and weight of the upper node for linear interpolation at `x`,
    /// or `None` outside `[start, end]`.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let t = (x - self.start) / self.step;
        let last = (self.count - 1) as f64;
        if !(t >= 0.0 && t <= last) {
            return None;
        }
        if self.count == 1 {
            return Some((0, 0.0));
        }
        let i0 = (t.floor() as usize).min(self.count - 2);
        Some((i0, t - i0 as f64))
    }
}

/// Scalar field over (range, azimuth, elevation) nodes; index `((ir*NA) + ia)*NE + ie`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid3D {
    pub range: AxisBins,
    pub azimuth: AxisBins,
    pub elevation: AxisBins,
    pub values: Vec<f64>,
}

/// Cartesian point to (range, azimuth, elevation).
pub fn to_polar(p: [f64; 3]) -> [f64; 3] {
    let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
    [(rho * rho + p[2] * p[2]).sqrt(), p[1].atan2(p[0]), p[2].atan2(rho)]
}

impl PolarGrid3D {
    pub fn zeros(range: AxisBins, azimuth: AxisBins, elevation: AxisBins) -> Self {
        Self {
            range,
            azimuth,
            elevation,
            values: vec![0.0; range.count * azimuth.count * elevation.count],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.range.count, self.azimuth.count, self.elevation.count]
    }

    pub fn index(&self, ir: usize, ia: usize, ie: usize) -> usize {
        (ir * self.azimuth.count + ia) * self.elevation.count + ie
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.dims().iter().product::<usize>() {
            return Err(Error::Shape("polar value count does not match bins".into()));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("polar power must be finite and >= 0".into()));
        }
        Ok(())
    }

    fn corners(&self, polar: [f64; 3]) -> Option<[(usize, f64); 3]> {
        Some([
            self.range.locate(polar[0])?,
            self.azimuth.locate(polar[1])?,
            self.elevation.locate(polar[2])?,
        ])
    }

    /// Trilinear interpolation at `(r, az, el)`; `None` outside the field of view.
    pub fn sample(&self, polar: [f64; 3]) -> Option<f64> {
        let [(ir, wr), (ia, wa), (ie, we)] = self.corners(polar)?;
        let mut acc = 0.0;
        for (dr, fr) in [(0, 1.0 - wr), (1, wr)] {
            if fr == 0.0 {
                continue;
            }
            for (da, fa) in [(0, 1.0 - wa), (1, wa)] {
                if fa == 0.0 {
                    continue;
                }
                for (de, fe) in [(0, 1.0 - we), (1, we)] {
                    if fe == 0.0 {
                        continue;
                    }
                    acc += fr * fa * fe * self.values[self.index(ir + dr, ia + da, ie + de)];
                }
            }
        }
        Some(acc)
    }

    /// Adjoint of [`sample`](Self::sample): spreads `power` over the 8 surrounding nodes with
    /// trilinear weights. Returns false (and deposits nothing) outside the field of view.
    pub fn splat(&mut self, polar: [f64; 3], power: f64) -> bool {
        let Some([(ir, wr), (ia, wa), (ie, we)]) = self.corners(polar) else {
            return false;
        };
        for (dr, fr) in [(0, 1.0 - wr), (1, wr)] {
            if fr == 0.0 {
                continue;
            }
            for (da, fa) in [(0, 1.0 - wa), (1, wa)] {
                if fa == 0.0 {
                    continue;
                }
                for (de, fe) in [(0, 1.0 - we), (1, we)] {
                    if fe == 0.0 {
                        continue;
                    }
                    let idx = self.index(ir + dr, ia + da, ie + de);
                    self.values[idx] += fr * fa * fe * power;
                }
            }
        }
        true
    }
}

/// Resamples a polar field at every Cartesian voxel center; voxels outside the field of view get 0.
pub fn polar_to_cartesian(pg: &PolarGrid3D, roi: &RoiBounds, resolution: f64) -> Result<DenseGrid3D> {
    pg.validate()?;
    let mut out = DenseGrid3D::for_roi(roi, resolution, ScaleDomain::RawPower)?;
    for i in 0..out.len() {
        out.values[i] = pg.sample(to_polar(out.center(i))).unwrap_or(0.0);
    }
    Ok(out)
}

/// Field-of-view mask matching [`polar_to_cartesian`]'s sampling.
pub fn fov_mask(pg: &PolarGrid3D, roi: &RoiBounds, resolution: f64) -> Result<Vec<bool>> {
    let g = DenseGrid3D::for_roi(roi, resolution, ScaleDomain::RawPower)?;
    Ok((0..g.len())
        .map(|i| pg.corners(to_polar(g.center(i))).is_some())
        .collect())
}
