//! Dense radar grids, log-domain normalization, BEV pooling and percentile sparsification.

use serde::{Deserialize, Serialize};

use super::types::{PointCloud, RoiBounds};
use super::voxel::voxel_center;
use crate::error::{Error, Result};

/// Value domain of a [`DenseGrid3D`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleDomain {
    RawPower,
    LogNormalized,
}

impl ScaleDomain {
    pub fn code(self) -> u8 {
        match self {
            ScaleDomain::RawPower => 0,
            ScaleDomain::LogNormalized => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ScaleDomain::RawPower),
            1 => Some(ScaleDomain::LogNormalized),
            _ => None,
        }
    }
}

/// Dense scalar grid; linear index `((ix*NY) + iy)*NZ + iz`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrid3D {
    pub origin: [f64; 3],
    pub resolution: f64,
    pub dims: [usize; 3],
    pub values: Vec<f64>,
    pub scale_domain: ScaleDomain,
}

impl DenseGrid3D {
    pub fn zeros(origin: [f64; 3], resolution: f64, dims: [usize; 3], scale_domain: ScaleDomain) -> Self {
        Self {
            origin,
            resolution,
            dims,
            values: vec![0.0; dims[0] * dims[1] * dims[2]],
            scale_domain,
        }
    }

    pub fn for_roi(roi: &RoiBounds, resolution: f64, scale_domain: ScaleDomain) -> Result<Self> {
        let dims = roi.dims(resolution)?;
        Ok(Self::zeros(roi.min(), resolution, dims, scale_domain))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.dims[1] + iy) * self.dims[2] + iz
    }

    pub fn coord(&self, index: usize) -> [usize; 3] {
        let nz = self.dims[2];
        let ny = self.dims[1];
        [index / (ny * nz), (index / nz) % ny, index % nz]
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.values[self.index(ix, iy, iz)]
    }

    pub fn set(&mut self, ix: usize, iy: usize, iz: usize, v: f64) {
        let i = self.index(ix, iy, iz);
        self.values[i] = v;
    }

    pub fn center(&self, index: usize) -> [f64; 3] {
        let c = self.coord(index);
        voxel_center(self.origin, self.resolution, [c[0] as u32, c[1] as u32, c[2] as u32])
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn same_layout(&self, other: &DenseGrid3D) -> bool {
        self.dims == other.dims
    }

    /// Checks the domain invariants: finite values, non-negative raw power, [0,1] normalized.
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.dims.iter().product::<usize>() {
            return Err(Error::Shape("value count does not match dims".into()));
        }
        for (i, &v) in self.values.iter().enumerate() {
            let ok = match self.scale_domain {
                ScaleDomain::RawPower => v.is_finite() && v >= 0.0,
                ScaleDomain::LogNormalized => (0.0..=1.0).contains(&v),
            };
            if !ok {
                return Err(Error::InvalidInput(format!(
                    "voxel {i} value {v} invalid for {:?}",
                    self.scale_domain
                )));
            }
        }
        Ok(())
    }
}

fn require_domain(g: &DenseGrid3D, domain: ScaleDomain) -> Result<()> {
    if g.scale_domain != domain {
        return Err(Error::InvalidInput(format!(
            "expected {domain:?} grid, got {:?}",
            g.scale_domain
        )));
    }
    Ok(())
}

/// `log10(1 + v) / log10(1 + v_ref)`, clamped to [0, 1].
pub fn log_normalize(g: &DenseGrid3D, v_ref: f64) -> Result<DenseGrid3D> {
    require_domain(g, ScaleDomain::RawPower)?;
    if !(v_ref > 0.0 && v_ref.is_finite()) {
        return Err(Error::Parameter(format!("v_ref must be positive, got {v_ref}")));
    }
    let denom = v_ref.ln_1p();
    Ok(DenseGrid3D {
        values: g.values.iter().map(|v| (v.ln_1p() / denom).clamp(0.0, 1.0)).collect(),
        scale_domain: ScaleDomain::LogNormalized,
        ..g.clone()
    })
}

/// Per-frame reference power: the grid maximum, or 1 for an all-zero grid.
pub fn frame_reference(g: &DenseGrid3D) -> f64 {
    let m = g.max_value();
    if m > 0.0 && m.is_finite() {
        m
    } else {
        1.0
    }
}

/// [`log_normalize`] against the grid's own maximum.
pub fn log_normalize_frame(g: &DenseGrid3D) -> Result<DenseGrid3D> {
    log_normalize(g, frame_reference(g))
}

/// Inverse of [`log_normalize`] for the same `v_ref`.
pub fn log_denormalize(g: &DenseGrid3D, v_ref: f64) -> Result<DenseGrid3D> {
    require_domain(g, ScaleDomain::LogNormalized)?;
    if !(v_ref > 0.0 && v_ref.is_finite()) {
        return Err(Error::Parameter(format!("v_ref must be positive, got {v_ref}")));
    }
    let scale = v_ref.ln_1p();
    Ok(DenseGrid3D {
        values: g.values.iter().map(|u| (u * scale).exp_m1()).collect(),
        scale_domain: ScaleDomain::RawPower,
        ..g.clone()
    })
}

/// Row-major 2D map (`rows = NX`, `cols = NY`).
#[derive(Debug, Clone, PartialEq)]
pub struct BevMap {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl BevMap {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{} values for a {rows}x{cols} map", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// Mean over the height axis.
pub fn bev_mean_pool(g: &DenseGrid3D) -> BevMap {
    let [nx, ny, nz] = g.dims;
    let mut data = Vec::with_capacity(nx * ny);
    for col in g.values.chunks_exact(nz.max(1)).take(nx * ny) {
        data.push(col.iter().sum::<f64>() / nz as f64);
    }
    BevMap {
        rows: nx,
        cols: ny,
        data,
    }
}

/// Number of cells kept by [`percentile_sparsify`]: `ceil(k * n / 100)`, robust to
/// representation error when `k * n / 100` is integral.
pub fn sparsify_count(k_percent: f64, n: usize) -> usize {
    let x = k_percent * n as f64 / 100.0;
    let r = x.round();
    let m = if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    };
    (m as usize).min(n)
}

/// Keeps the top `k_percent` % of cells by power as points at voxel centers.
///
/// Ties are broken by ascending linear index, i.e. lexicographic `(ix, iy, iz)`. The output is
/// ordered by rank.
pub fn percentile_sparsify(g: &DenseGrid3D, k_percent: f64) -> Result<PointCloud> {
    require_domain(g, ScaleDomain::RawPower)?;
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return Err(Error::Parameter(format!("k must lie in (0, 100], got {k_percent}")));
    }
    let m = sparsify_count(k_percent, g.len());
    let mut order: Vec<usize> = (0..g.len()).collect();
    let cmp = |a: &usize, b: &usize| g.values[*b].total_cmp(&g.values[*a]).then_with(|| a.cmp(b));
    if m < order.len() && m > 0 {
        order.select_nth_unstable_by(m - 1, cmp);
    }
    order.truncate(m);
    order.sort_by(cmp);
    let mut pc = PointCloud::with_capacity(Vec::new(), m);
    for idx in order {
        pc.push(g.center(idx), g.values[idx], &[])?;
    }
    Ok(pc)
}
