use std::path::Path;

use super::{read_file, write_file, ByteReader};
use crate::error::Result;
use crate::grid::{DenseGrid3D, ScaleDomain};

pub const RDT_MAGIC: &[u8; 4] = b"RDT1";
pub const RDT_VERSION: u32 = 1;

/// Serializes a grid: magic, version, domain byte, dims, origin, resolution, f32 payload.
pub fn encode_rdt(g: &DenseGrid3D) -> Vec<u8> {
    let mut out = Vec::with_capacity(37 + 4 * g.values.len());
    out.extend_from_slice(RDT_MAGIC);
    out.extend_from_slice(&RDT_VERSION.to_le_bytes());
    out.push(g.scale_domain.code());
    for d in g.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for o in g.origin {
        out.extend_from_slice(&(o as f32).to_le_bytes());
    }
    out.extend_from_slice(&(g.resolution as f32).to_le_bytes());
    for v in &g.values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_rdt(bytes: &[u8], path: &Path) -> Result<DenseGrid3D> {
    let mut r = ByteReader::new(bytes, path);
    let magic = r.take(4, "magic")?;
    if magic != RDT_MAGIC {
        return Err(r.error(0, format!("bad magic {magic:?}, expected RDT1")));
    }
    let version_at = r.pos();
    let version = r.u32("version")?;
    if version != RDT_VERSION {
        return Err(r.error(version_at, format!("unsupported version {version}")));
    }
    let domain_at = r.pos();
    let code = r.u8("scale domain")?;
    let scale_domain =
        ScaleDomain::from_code(code).ok_or_else(|| r.error(domain_at, format!("unknown scale domain {code}")))?;
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = r.u32("dims")? as usize;
    }
    let mut origin = [0f64; 3];
    for o in &mut origin {
        *o = r.f32("origin")? as f64;
    }
    let res_at = r.pos();
    let resolution = r.f32("resolution")? as f64;
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(r.error(res_at, format!("resolution {resolution} must be positive")));
    }
    let n = dims
        .iter()
        .try_fold(1usize, |acc, d| acc.checked_mul(*d))
        .ok_or_else(|| r.error(res_at, "dims overflow"))?;
    let payload_at = r.pos();
    let payload = r.take(
        n.checked_mul(4).ok_or_else(|| r.error(payload_at, "dims overflow"))?,
        "payload",
    )?;
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(r.error(payload_at + 4 * bad, "non-finite voxel value"));
    }
    r.finish()?;
    Ok(DenseGrid3D {
        origin,
        resolution,
        dims,
        values,
        scale_domain,
    })
}

pub fn write_rdt(path: &Path, g: &DenseGrid3D) -> Result<()> {
    write_file(path, &encode_rdt(g))
}

pub fn read_rdt(path: &Path) -> Result<DenseGrid3D> {
    decode_rdt(&read_file(path)?, path)
}
