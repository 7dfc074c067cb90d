//! Full-reference image metrics on BEV maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{bev_mean_pool, frame_reference, log_normalize_frame, BevMap, DenseGrid3D, ScaleDomain};

fn check_same(a: &BevMap, b: &BevMap) -> Result<()> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::Shape(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(())
}

/// Order of height pooling and log normalization when a raw-power grid is projected for metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolOrder {
    /// Log-normalize the 3D grid against its maximum, then mean-pool along height.
    #[default]
    NormalizeThenPool,
    /// Mean-pool raw power along height, then log-normalize the map against its own maximum.
    PoolThenNormalize,
}

/// BEV map in [0, 1] used by PSNR/SSIM. Grids already log-normalized are only pooled.
pub fn metric_bev(g: &DenseGrid3D, order: PoolOrder) -> Result<BevMap> {
    if g.scale_domain == ScaleDomain::LogNormalized {
        return Ok(bev_mean_pool(g));
    }
    match order {
        PoolOrder::NormalizeThenPool => Ok(bev_mean_pool(&log_normalize_frame(g)?)),
        PoolOrder::PoolThenNormalize => {
            let mut bev = bev_mean_pool(g);
            let flat = DenseGrid3D {
                values: bev.data.clone(),
                dims: [bev.rows, bev.cols, 1],
                ..g.clone()
            };
            let denom = frame_reference(&flat).ln_1p();
            for v in &mut bev.data {
                *v = (v.ln_1p() / denom).clamp(0.0, 1.0);
            }
            Ok(bev)
        }
    }
}

pub fn mse(a: &BevMap, b: &BevMap) -> Result<f64> {
    check_same(a, b)?;
    let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.data.len() as f64)
}

/// Peak signal-to-noise ratio in dB; identical inputs give `f64::INFINITY`.
pub fn psnr(a: &BevMap, b: &BevMap, max_val: f64) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_val * max_val / m).log10())
}

/// SSIM constants: Gaussian window side and sigma, stabilizers `K1`, `K2`, dynamic range `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub max_val: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            max_val: 1.0,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.max_val).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.max_val).powi(2)
    }

    /// Normalized 1D Gaussian taps; the 2D window is their outer product.
    pub fn taps(&self) -> Vec<f64> {
        let half = (self.window as f64 - 1.0) / 2.0;
        let raw: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - half;
                (-(d * d) / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }
}

/// Valid-mode separable filtering.
fn filter_valid(src: &[f64], rows: usize, cols: usize, taps: &[f64]) -> Vec<f64> {
    let w = taps.len();
    let oc = cols + 1 - w;
    let or = rows + 1 - w;
    let mut horiz = vec![0.0; rows * oc];
    for r in 0..rows {
        for c in 0..oc {
            let mut s = 0.0;
            for (k, t) in taps.iter().enumerate() {
                s += t * src[r * cols + c + k];
            }
            horiz[r * oc + c] = s;
        }
    }
    let mut out = vec![0.0; or * oc];
    for r in 0..or {
        for c in 0..oc {
            let mut s = 0.0;
            for (k, t) in taps.iter().enumerate() {
                s += t * horiz[(r + k) * oc + c];
            }
            out[r * oc + c] = s;
        }
    }
    out
}

/// Mean structural similarity over all fully-contained windows.
pub fn ssim(a: &BevMap, b: &BevMap, params: &SsimParams) -> Result<f64> {
    check_same(a, b)?;
    let w = params.window;
    if w == 0 || a.rows < w || a.cols < w {
        return Err(Error::Shape(format!(
            "SSIM window {w} larger than {}x{} image",
            a.rows, a.cols
        )));
    }
    let taps = params.taps();
    let (rows, cols) = (a.rows, a.cols);
    let prod =
        |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { a.data.iter().zip(&b.data).map(|(x, y)| f(*x, *y)).collect() };
    let mu_a = filter_valid(&a.data, rows, cols, &taps);
    let mu_b = filter_valid(&b.data, rows, cols, &taps);
    let e_aa = filter_valid(&prod(&|x, _| x * x), rows, cols, &taps);
    let e_bb = filter_valid(&prod(&|_, y| y * y), rows, cols, &taps);
    let e_ab = filter_valid(&prod(&|x, y| x * y), rows, cols, &taps);
    let (c1, c2) = (params.c1(), params.c2());
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / mu_a.len() as f64)
}
